"""
Async client for an OpenAI-compatible chat-completions endpoint

At most max_parallel requests are in flight. Transient failures (HTTP 429, 5xx,
timeouts, connection errors) are retried with jittered exponential backoff;
anything else fails the request, never the batch. Every outcome is appended to
the prediction dump before it is returned.
"""

import asyncio
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set

import aiofiles
import httpx
import structlog
from pydantic import ValidationError
from tenacity import (
    AsyncRetrying,
    RetryError,
    retry_if_exception,
    stop_after_attempt,
    wait_random_exponential,
)

from ...config.settings import EndpointSettings
from ..errors import InputError, ParseFailure
from ..models.responses import RawModelResponse
from .prompts import ChatRequest, render_for_display

logger = structlog.get_logger(__name__)

RETRYABLE_STATUS = {408, 409, 429}


def is_transient(error: BaseException) -> bool:
    if isinstance(error, httpx.HTTPStatusError):
        status = error.response.status_code
        return status in RETRYABLE_STATUS or status >= 500
    return isinstance(error, (httpx.TimeoutException, httpx.TransportError))


def _response_text(payload: dict) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as e:
        raise ValueError(f"unexpected completion payload: {e}") from e
    if isinstance(content, list):
        content = "".join(
            part["text"] for part in content if isinstance(part, dict) and isinstance(part.get("text"), str)
        )
    if content is None:
        return ""
    if not isinstance(content, str):
        raise ValueError(f"completion content is {type(content).__name__}, expected text")
    return content


class DumpWriter:
    """Append-only JSON Lines dump; concurrent appends are serialized"""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = asyncio.Lock()

    async def append(self, response: RawModelResponse) -> None:
        line = response.model_dump_json() + "\n"
        async with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            async with aiofiles.open(self.path, "a", encoding="utf-8") as handle:
                await handle.write(line)
                await handle.flush()


def load_dump(path: Path) -> List[RawModelResponse]:
    """Read a dump; later lines for the same request id supersede earlier ones"""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"prediction dump not found: {path}")
    latest = {}
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                response = RawModelResponse.model_validate_json(line)
            except ValidationError as e:
                raise ParseFailure(f"{path}:{number}: undecodable dump entry: {e.errors()[0]['msg']}") from e
            latest[response.request_id] = response
    return list(latest.values())


def completed_request_ids(path: Path) -> Set[str]:
    path = Path(path)
    if not path.is_file():
        return set()
    return {r.request_id for r in load_dump(path) if r.ok}


class ChatClient:
    def __init__(self, config: EndpointSettings, transport: Optional[httpx.AsyncBaseTransport] = None):
        self.config = config
        headers = {"Content-Type": "application/json"}
        if config.api_key is not None:
            headers["Authorization"] = f"Bearer {config.api_key.get_secret_value()}"
        self._client = httpx.AsyncClient(
            base_url=config.base_url.rstrip("/") + "/",
            headers=headers,
            timeout=config.request_timeout,
            transport=transport,
        )

    async def __aenter__(self) -> "ChatClient":
        return self

    async def __aexit__(self, *exc) -> None:
        await self._client.aclose()

    def _payload(self, request: ChatRequest) -> dict:
        return {
            "model": self.config.model_name,
            "messages": request.messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }

    async def complete(self, request: ChatRequest) -> RawModelResponse:
        """One request with retries; failures are returned, not raised"""
        attempts = 0
        retrying = AsyncRetrying(
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_random_exponential(multiplier=self.config.backoff_base, max=self.config.backoff_max),
            retry=retry_if_exception(is_transient),
            reraise=True,
        )
        base = dict(
            request_id=request.request_id,
            task=request.task,
            video_id=request.video_id,
            sample_id=request.sample_id,
            model=self.config.model_name,
        )
        try:
            async for attempt in retrying:
                with attempt:
                    attempts = attempt.retry_state.attempt_number
                    if attempts > 1:
                        logger.info("request_retry", request_id=request.request_id, attempt=attempts)
                    response = await self._client.post("chat/completions", json=self._payload(request))
                    response.raise_for_status()
                    text = _response_text(response.json())
        except (httpx.HTTPError, ValueError, RetryError) as e:
            logger.warning("request_failed", request_id=request.request_id, attempts=attempts, error=str(e))
            return RawModelResponse(**base, status="failed", error=str(e), attempts=attempts)
        return RawModelResponse(**base, status="ok", text=text, attempts=attempts)


async def infer_batch(
    requests: Sequence[ChatRequest],
    config: EndpointSettings,
    dump_path: Path,
    transport: Optional[httpx.AsyncBaseTransport] = None,
) -> List[RawModelResponse]:
    """Run requests with bounded parallelism; results follow request order"""
    if not requests:
        raise ValueError("empty request batch")
    semaphore = asyncio.Semaphore(config.max_parallel)
    dump = DumpWriter(dump_path)

    async with ChatClient(config, transport) as client:

        async def _one(request: ChatRequest) -> RawModelResponse:
            async with semaphore:
                result = await client.complete(request)
            await dump.append(result)
            return result

        results = await asyncio.gather(*(_one(r) for r in requests))

    failed = sum(1 for r in results if not r.ok)
    logger.info("batch_done", requests=len(results), failed=failed, dump=str(dump_path))
    return list(results)


async def run_batch(
    requests: Sequence[ChatRequest],
    config: EndpointSettings,
    dump_path: Path,
    resume: bool = True,
    transport: Optional[httpx.AsyncBaseTransport] = None,
) -> List[RawModelResponse]:
    """infer_batch, skipping request ids the dump already holds a success for"""
    done = completed_request_ids(dump_path) if resume else set()
    pending = [r for r in requests if r.request_id not in done]
    if done:
        logger.info("resuming", completed=len(done), pending=len(pending))

    fresh = {r.request_id: r for r in await infer_batch(pending, config, dump_path, transport)} if pending else {}
    previous = {r.request_id: r for r in load_dump(dump_path)} if done else {}
    return [fresh[r.request_id] if r.request_id in fresh else previous[r.request_id] for r in requests]


def dry_run(requests: Iterable[ChatRequest]) -> str:
    return "\n".join(render_for_display(r) for r in requests)
