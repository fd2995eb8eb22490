"""Exception hierarchy shared by every pipeline stage."""


class PvpcError(Exception):
    """Base class; ``module`` names the stage that raised, for CLI messages."""

    module = "pvpc"

    def __str__(self) -> str:
        return f"{self.module}: {super().__str__()}"


class EmptyCloud(PvpcError):
    module = "plenoptic_model"


class InsufficientPoints(PvpcError):
    module = "plenoptic_model"


class InvalidCloud(PvpcError):
    module = "plenoptic_model"


class MalformedHeader(PvpcError):
    module = "ply_io"


class NonIntegerGeometry(PvpcError):
    module = "ply_io"


class PatchTooWide(PvpcError):
    module = "packer"


class QpOutOfRange(PvpcError):
    module = "mv_structure"


class SchedulingViolation(PvpcError):
    module = "video_codec"


class BitstreamError(PvpcError):
    module = "video_codec"

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class InconsistentAtlas(PvpcError):
    module = "reconstructor"


class BadView(PvpcError):
    module = "metrics"


class NormalsRequired(PvpcError):
    module = "metrics"


class NoOverlap(PvpcError):
    module = "metrics"
