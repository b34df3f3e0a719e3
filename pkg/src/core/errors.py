"""
Exception taxonomy and the CLI exit codes each failure maps to
"""

from typing import Optional


EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_PARSE_FAILURE = 4
EXIT_NETWORK = 5


class ProcBenchError(Exception):
    """Base error; exit_code is what the CLI returns when it escapes a subcommand"""

    exit_code = EXIT_INTERNAL


class UsageError(ProcBenchError):
    """Inconsistent command-line arguments"""

    exit_code = EXIT_USAGE


class InputError(ProcBenchError):
    """Missing or invalid input files"""

    exit_code = EXIT_INPUT


class AnnotationError(InputError):
    """Annotation record rejected; carries the record locus"""

    def __init__(self, message: str, video_id: Optional[str] = None, segment_index: Optional[int] = None):
        self.video_id = video_id
        self.segment_index = segment_index
        locus = []
        if video_id is not None:
            locus.append(f"video_id={video_id}")
        if segment_index is not None:
            locus.append(f"segment={segment_index}")
        prefix = f"[{', '.join(locus)}] " if locus else ""
        super().__init__(f"{prefix}{message}")


class ManifestError(InputError):
    """Dataset manifest unreadable or of an unknown schema"""


class FrameDirectoryError(InputError):
    """Frame directory missing, non-contiguous or unreadable"""


class PerturbationError(InputError):
    """A perturbation precondition does not hold for a record"""


class OverlayError(InputError):
    """Frame too small for the timestamp overlay box"""


class PromptError(InputError):
    """Prompt template missing or rendered with an unfilled slot"""


class ParseFailure(ProcBenchError):
    """Prediction dump undecodable, or unparseable responses under --strict"""

    exit_code = EXIT_PARSE_FAILURE


class NetworkFailure(ProcBenchError):
    """At least one inference request failed permanently"""

    exit_code = EXIT_NETWORK
