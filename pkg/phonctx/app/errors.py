"""Exception hierarchy shared by every phonctx module.

Each error carries a human-readable ``detail`` plus the structured fields
the CLI needs to report it (line numbers, offsets, pipeline stage).
"""
from typing import Any, Dict, Optional


class PhonctxError(Exception):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "detail": self.detail}


class ConfigError(PhonctxError):
    pass


class InvalidInputError(PhonctxError):
    pass


class LexiconParseError(PhonctxError):
    def __init__(self, detail: str, line_no: Optional[int] = None):
        super().__init__(detail if line_no is None else f"line {line_no}: {detail}")
        self.line_no = line_no

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "line": self.line_no}


class DatabaseError(PhonctxError):
    def __init__(self, detail: str, line_no: Optional[int] = None, entity: Optional[str] = None):
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + detail)
        self.line_no = line_no
        self.entity = entity

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "line": self.line_no, "entity": self.entity}


class TagParseError(PhonctxError):
    def __init__(self, detail: str, offset: int):
        super().__init__(f"offset {offset}: {detail}")
        self.offset = offset

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "offset": self.offset}


class PipelineError(PhonctxError):
    def __init__(self, detail: str, stage: str):
        super().__init__(f"{stage}: {detail}")
        self.stage = stage

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "stage": self.stage}


class TrainDataError(PhonctxError):
    def __init__(self, detail: str, written: int = 0):
        super().__init__(detail)
        self.written = written

    def to_dict(self) -> Dict[str, Any]:
        return {**super().to_dict(), "written": self.written}
