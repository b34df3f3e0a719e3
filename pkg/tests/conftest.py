"""
Shared fixtures: annotation records, synthetic frame directories, fixture paths
"""

from pathlib import Path
from typing import Callable, Tuple

import pytest

from src.config.logging_config import configure_logging
from src.config.settings import LoggingSettings, get_settings
from src.core.models.temporal import AnnotationRecord
from factories import make_record, write_frames

FIXTURES_DIR = Path(__file__).parent / "fixtures"
MINI_CORPUS = FIXTURES_DIR / "mini_corpus" / "annotations.json"
QUIET_LOGGING = LoggingSettings(level="WARNING", format="console")


@pytest.fixture(autouse=True)
def _quiet_logging():
    """Commands reconfigure logging against whatever stderr is current; rebind after each test"""
    configure_logging(QUIET_LOGGING)
    yield
    configure_logging(QUIET_LOGGING)


@pytest.fixture(autouse=True)
def _fresh_settings():
    """Settings are cached per process; tests that set env vars need a clean cache"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def record() -> AnnotationRecord:
    return make_record()


@pytest.fixture
def frames_factory(tmp_path) -> Callable[..., Path]:
    """Build frame_%06d.png directories under tmp_path"""

    def _make(name: str, count: int, size: Tuple[int, int] = (64, 64)) -> Path:
        return write_frames(tmp_path / name, count, size)

    return _make


@pytest.fixture
def mini_corpus_path() -> Path:
    return MINI_CORPUS
