"""
Built-in 5x7 monospace bitmap font for timestamp overlays
"""

from typing import Dict

import numpy as np

GLYPH_WIDTH = 5
GLYPH_HEIGHT = 7

_ROWS: Dict[str, tuple] = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
    ":": ("00000", "01100", "01100", "00000", "01100", "01100", "00000"),
    ".": ("00000", "00000", "00000", "00000", "00000", "01100", "01100"),
    "-": ("00000", "00000", "00000", "11111", "00000", "00000", "00000"),
    " ": ("00000", "00000", "00000", "00000", "00000", "00000", "00000"),
}

GLYPHS: Dict[str, np.ndarray] = {
    char: np.array([[bit == "1" for bit in row] for row in rows], dtype=bool)
    for char, rows in _ROWS.items()
}


def text_size(text: str, scale: int = 1) -> tuple:
    """(width, height) in pixels of rendered text, one scaled column between glyphs"""
    if not text:
        return 0, 0
    width = len(text) * GLYPH_WIDTH * scale + (len(text) - 1) * scale
    return width, GLYPH_HEIGHT * scale


def render_mask(text: str, scale: int = 1) -> np.ndarray:
    """Boolean mask of lit pixels, shape (height, width)"""
    width, height = text_size(text, scale)
    mask = np.zeros((height, width), dtype=bool)
    for position, char in enumerate(text):
        glyph = GLYPHS.get(char)
        if glyph is None:
            raise ValueError(f"no glyph for character {char!r}")
        x = position * (GLYPH_WIDTH + 1) * scale
        mask[:, x:x + GLYPH_WIDTH * scale] = np.kron(glyph, np.ones((scale, scale), dtype=bool))
    return mask
