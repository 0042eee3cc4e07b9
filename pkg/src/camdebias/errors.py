"""Exception hierarchy shared by all camdebias modules."""


class CamDebiasError(Exception):
    """Base class for all library errors."""


# --- file formats / ingestion ---

class BadMagic(CamDebiasError):
    pass


class UnsupportedVersion(CamDebiasError):
    pass


class TruncatedFile(CamDebiasError):
    pass


class NonFiniteFeature(CamDebiasError):
    def __init__(self, row, col):
        self.row = row
        self.col = col
        super().__init__(f"non-finite feature at row={row}, col={col}")


class LabelLengthMismatch(CamDebiasError):
    pass


class HeaderMismatch(CamDebiasError):
    pass


class ParseError(CamDebiasError):
    def __init__(self, line, message=""):
        self.line = line
        super().__init__(f"parse error at line {line}: {message}")


class IoError(CamDebiasError):
    pass


# --- embedding-set operations ---

class ZeroNormRow(CamDebiasError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"zero-norm row at index {row}")


class MaskLengthMismatch(CamDebiasError):
    pass


# --- normalization ---

class UnknownGroupName(CamDebiasError):
    pass


class MissingGroupStats(CamDebiasError):
    def __init__(self, group_id):
        self.group_id = group_id
        super().__init__(f"no statistics for group id {group_id}")


class GroupTooSmall(CamDebiasError):
    def __init__(self, group_id, message=""):
        self.group_id = group_id
        super().__init__(f"group {group_id} too small {message}".rstrip())


class SingleCamera(CamDebiasError):
    pass


class DimOutOfRange(CamDebiasError):
    pass


class DuplicateDim(CamDebiasError):
    pass


class TooFewSamples(CamDebiasError):
    pass


class LengthMismatch(CamDebiasError):
    pass


# --- clustering / params ---

class InvalidParams(CamDebiasError):
    pass


# --- metrics / retrieval ---

class MissingIdentityLabels(CamDebiasError):
    pass


class DimensionMismatch(CamDebiasError):
    pass


class EmptyGallery(CamDebiasError):
    pass


class GalleryTooSmall(CamDebiasError):
    pass


# --- analysis ---

class UnknownCamera(CamDebiasError):
    pass


class InsufficientOverlap(CamDebiasError):
    pass


class TooFewLevels(CamDebiasError):
    pass


# --- pipeline / synthetic ---

class TargetTooLarge(CamDebiasError):
    pass


class InvalidConfig(CamDebiasError):
    pass
