"""
Per-task prompt rendering into OpenAI-compatible chat requests
"""

import base64
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import structlog
from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateNotFound, UndefinedError
from pydantic import BaseModel, Field

from ..errors import PromptError
from ..models.perturbation import (
    MASK_PLACEHOLDER,
    MaskGroundTruth,
    OrderGroundTruth,
    PerturbationKind,
    PerturbedSample,
)
from ..models.responses import Task
from ..models.temporal import AnnotationRecord

logger = structlog.get_logger(__name__)

BUILTIN_PROMPTS_DIR = Path(__file__).resolve().parent.parent.parent / "prompts"
SYSTEM_TEMPLATE = "system.j2"


class ChatRequest(BaseModel):
    """A rendered request; request_id is stable across runs for resume"""

    request_id: str
    task: Task
    video_id: str
    sample_id: Optional[str] = None
    messages: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def item_id(self) -> str:
        return self.sample_id or self.video_id


@dataclass(frozen=True)
class PromptTemplate:
    task: Task
    system_name: str
    user_name: str
    # "storyboard" attaches the composite image when one is available
    attachment: str = "storyboard"


def request_id_for(task: Task, item_id: str) -> str:
    return f"{task.value}:{item_id}"


class PromptBuilder:
    """Loads templates from an override directory first, then the bundled ones"""

    def __init__(self, prompts_dir: Optional[Path] = None, fps: float = 1.0):
        search_path = [str(prompts_dir)] if prompts_dir else []
        search_path.append(str(BUILTIN_PROMPTS_DIR))
        self.fps = fps
        self.env = Environment(
            loader=FileSystemLoader(search_path),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=False,
            autoescape=False,
        )

    def template_for(self, task: Union[Task, str]) -> PromptTemplate:
        try:
            task = Task(task)
        except ValueError:
            raise PromptError(f"no prompt template for task {task!r}")
        return PromptTemplate(task=task, system_name=SYSTEM_TEMPLATE, user_name=f"{task.value}.j2")

    def _render(self, name: str, context: Dict[str, Any]) -> str:
        try:
            return self.env.get_template(name).render(**context).strip()
        except TemplateNotFound as e:
            raise PromptError(f"prompt template not found: {e.name}") from e
        except UndefinedError as e:
            raise PromptError(f"unfilled slot in {name}: {e.message}") from e

    @staticmethod
    def _context(task: Task, record: Optional[AnnotationRecord], sample: Optional[PerturbedSample]) -> Dict[str, Any]:
        if task.uses_samples:
            if sample is None:
                raise PromptError(f"task {task.value} needs a perturbed sample")
            truth = sample.ground_truth
            context: Dict[str, Any] = {"duration": len(sample.frame_plan) / sample.fps}
            if task is Task.MISSING_EVENT:
                if isinstance(truth, MaskGroundTruth):
                    context.update(captions=truth.visible_captions, placeholder=truth.placeholder)
                elif sample.kind is PerturbationKind.KEEP:
                    context.update(captions=truth.perturbed_captions, placeholder=MASK_PLACEHOLDER)
                else:
                    raise PromptError(f"sample {sample.sample_id} is neither masked nor kept")
            else:
                if not isinstance(truth, OrderGroundTruth):
                    raise PromptError(f"sample {sample.sample_id} carries no segment order")
                context.update(segments=truth.perturbed_segments, segment_count=len(truth.perturbed_segments))
            return context
        if record is None:
            raise PromptError(f"task {task.value} needs an annotation record")
        return {"duration": record.duration}

    def build_prompt(
        self,
        task: Union[Task, str],
        record: Optional[AnnotationRecord] = None,
        sample: Optional[PerturbedSample] = None,
        storyboard_png: Optional[bytes] = None,
    ) -> ChatRequest:
        """Render the system and user messages; attach the storyboard as a base64 data URL"""
        template = self.template_for(task)
        context = self._context(template.task, record, sample)
        context["fps"] = self.fps

        system = self._render(template.system_name, context)
        user = self._render(template.user_name, context)

        content: List[Dict[str, Any]] = [{"type": "text", "text": user}]
        if storyboard_png is not None and template.attachment == "storyboard":
            encoded = base64.b64encode(storyboard_png).decode("ascii")
            content.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{encoded}"}})

        item_video = sample.source_video_id if sample is not None else record.video_id
        item_id = sample.sample_id if sample is not None else record.video_id
        return ChatRequest(
            request_id=request_id_for(template.task, item_id),
            task=template.task,
            video_id=item_video,
            sample_id=sample.sample_id if sample is not None else None,
            messages=[
                {"role": "system", "content": system},
                {"role": "user", "content": content},
            ],
        )


def render_for_display(request: ChatRequest) -> str:
    """Human-readable request with image payloads elided"""
    lines = [f"### {request.request_id}"]
    for message in request.messages:
        lines.append(f"[{message['role']}]")
        content = message["content"]
        if isinstance(content, str):
            lines.append(content)
            continue
        for part in content:
            if part.get("type") == "text":
                lines.append(part["text"])
            elif part.get("type") == "image_url":
                url = part["image_url"]["url"]
                payload = url.split(",", 1)[1] if "," in url else url
                size = len(base64.b64decode(payload)) if payload else 0
                lines.append(f"<image/png attachment, {size} bytes>")
    return "\n".join(lines) + "\n"
