"""
Frame sampling, SS:MS timestamp overlay and temporal storyboard composition
"""

import io
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import structlog
from PIL import Image, UnidentifiedImageError

from ..errors import FrameDirectoryError, OverlayError
from . import bitmap_font

logger = structlog.get_logger(__name__)

FRAME_NAME = "frame_{:06d}.png"
FRAME_PATTERN = re.compile(r"^frame_(\d{6})\.png$")
DEFAULT_TIMESTAMP_FORMAT = "{seconds:02d}:{millis:03d}"
DEFAULT_MAX_WIDTH = 16384


@dataclass(frozen=True)
class Frame:
    """A sampled frame; timestamp is index / fps"""

    index: int
    timestamp: float
    pixels: Image.Image = field(compare=False, repr=False)

    @property
    def size(self) -> Tuple[int, int]:
        return self.pixels.size


@dataclass(frozen=True)
class OverlayStyle:
    offset: Tuple[int, int] = (4, 4)
    scale: int = 1
    padding: int = 1
    foreground: Tuple[int, int, int] = (255, 255, 255)
    background: Tuple[int, int, int] = (0, 0, 0)
    # box width limit as a share of frame width
    max_box_fraction: float = 0.25
    timestamp_format: str = DEFAULT_TIMESTAMP_FORMAT

    def box(self, label: str) -> Tuple[int, int, int, int]:
        """(left, top, right, bottom) of the background box, right/bottom exclusive"""
        width, height = bitmap_font.text_size(label, self.scale)
        left, top = self.offset
        return left, top, left + width + 2 * self.padding, top + height + 2 * self.padding


@dataclass(frozen=True)
class TileInfo:
    tile_index: int
    frame_index: int
    timestamp: float
    x_offset: int
    y_offset: int
    width: int
    height: int


@dataclass
class Storyboard:
    image: Image.Image
    tiles: List[TileInfo]

    def sidecar(self) -> dict:
        return {
            "width": self.image.width,
            "height": self.image.height,
            "tiles": [tile.__dict__ for tile in self.tiles],
        }


def frame_path(frames_dir: Path, index: int) -> Path:
    return Path(frames_dir) / FRAME_NAME.format(index)


def list_frame_files(frames_dir: Path) -> List[Path]:
    """Frame files of a directory in index order; indices must run 0..n-1"""
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise FrameDirectoryError(f"frame directory not found: {frames_dir}")

    indexed = []
    for path in frames_dir.iterdir():
        match = FRAME_PATTERN.match(path.name)
        if match:
            indexed.append((int(match.group(1)), path))
    if not indexed:
        raise FrameDirectoryError(f"no frame_%06d.png files in {frames_dir}")

    indexed.sort()
    for expected, (index, _) in enumerate(indexed):
        if index != expected:
            raise FrameDirectoryError(
                f"non-contiguous frame indices in {frames_dir}: expected {expected}, found {index}"
            )
    return [path for _, path in indexed]


def load_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as image:
            return image.convert("RGB")
    except (UnidentifiedImageError, OSError) as e:
        raise FrameDirectoryError(f"unreadable image {path}: {e}") from e


def sample_frames(frames_dir: Path, fps: float = 1.0) -> List[Frame]:
    """Load a frame directory, assigning timestamp = index / fps"""
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    paths = list_frame_files(frames_dir)
    frames = [Frame(index=i, timestamp=i / fps, pixels=load_image(p)) for i, p in enumerate(paths)]
    logger.debug("frames_sampled", frames_dir=str(frames_dir), count=len(frames), fps=fps)
    return frames


def format_timestamp(seconds: float, fmt: str = DEFAULT_TIMESTAMP_FORMAT) -> str:
    """Seconds to label text; the default renders 3.5 as 03:500"""
    if seconds < 0:
        raise ValueError(f"timestamp must be non-negative, got {seconds}")
    whole, millis = divmod(int(round(seconds * 1000)), 1000)
    return fmt.format(seconds=whole, millis=millis)


def render_timestamp(frame: Frame, style: Optional[OverlayStyle] = None) -> Frame:
    """Copy of the frame with its timestamp burned into the top-left box"""
    style = style or OverlayStyle()
    label = format_timestamp(frame.timestamp, style.timestamp_format)
    left, top, right, bottom = style.box(label)
    width, height = frame.size

    if right - left > style.max_box_fraction * width:
        raise OverlayError(
            f"overlay box of {right - left}px exceeds {style.max_box_fraction:.0%} "
            f"of frame width {width}px"
        )
    if right > width or bottom > height:
        raise OverlayError(f"overlay box ({right}x{bottom}) does not fit frame {width}x{height}")

    pixels = np.array(frame.pixels.convert("RGB"), dtype=np.uint8)
    pixels[top:bottom, left:right] = style.background
    mask = bitmap_font.render_mask(label, style.scale)
    glyph_top, glyph_left = top + style.padding, left + style.padding
    region = pixels[glyph_top:glyph_top + mask.shape[0], glyph_left:glyph_left + mask.shape[1]]
    region[mask] = style.foreground

    return replace(frame, pixels=Image.fromarray(pixels))


def _scale_to_height(image: Image.Image, height: int) -> Image.Image:
    if image.height == height:
        return image
    width = max(1, round(image.width * height / image.height))
    return image.resize((width, height), Image.Resampling.BILINEAR)


def compose_storyboard(
    frames: List[Frame],
    style: Optional[OverlayStyle] = None,
    max_width: int = DEFAULT_MAX_WIDTH,
) -> Storyboard:
    """Concatenate frames left to right in chronological order, each with its timestamp.

    Frames are scaled to the smallest frame height, aspect preserved. A row that
    would exceed max_width wraps to a new row below.
    """
    if not frames:
        raise FrameDirectoryError("cannot compose a storyboard from zero frames")
    style = style or OverlayStyle()

    ordered = sorted(frames, key=lambda f: f.index)
    height = min(f.pixels.height for f in ordered)

    tiles: List[TileInfo] = []
    images: List[Image.Image] = []
    x = y = row_width = 0
    for tile_index, frame in enumerate(ordered):
        scaled = replace(frame, pixels=_scale_to_height(frame.pixels, height))
        tile = render_timestamp(scaled, style).pixels
        if x > 0 and x + tile.width > max_width:
            x, y = 0, y + height
        tiles.append(
            TileInfo(
                tile_index=tile_index, frame_index=frame.index, timestamp=frame.timestamp,
                x_offset=x, y_offset=y, width=tile.width, height=height,
            )
        )
        images.append(tile)
        x += tile.width
        row_width = max(row_width, x)

    canvas = Image.new("RGB", (row_width, y + height))
    for tile, image in zip(tiles, images):
        canvas.paste(image, (tile.x_offset, tile.y_offset))

    logger.debug("storyboard_composed", tiles=len(tiles), width=canvas.width, height=canvas.height)
    return Storyboard(image=canvas, tiles=tiles)


def encode_png(image: Image.Image) -> bytes:
    """Deterministic PNG bytes (no metadata chunks)"""
    buffer = io.BytesIO()
    image.save(buffer, format="PNG", optimize=False)
    return buffer.getvalue()


def save_storyboard(storyboard: Storyboard, out_path: Path) -> Tuple[Path, Path]:
    """Write the composite PNG and a JSON sidecar next to it"""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(encode_png(storyboard.image))
    sidecar_path = out_path.with_suffix(".json")
    sidecar_path.write_text(json.dumps(storyboard.sidecar(), indent=2) + "\n", encoding="utf-8")
    logger.info("storyboard_written", path=str(out_path), tiles=len(storyboard.tiles))
    return out_path, sidecar_path


def storyboard_for_directory(
    frames_dir: Path,
    fps: float = 1.0,
    style: Optional[OverlayStyle] = None,
    max_width: int = DEFAULT_MAX_WIDTH,
) -> Storyboard:
    return compose_storyboard(sample_frames(frames_dir, fps), style, max_width)
