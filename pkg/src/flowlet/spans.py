"""Source positions shared by the parser, the checker and the interpreter."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Span:
    """A half-open byte range ``[start, end)`` plus the 1-based line/column of ``start``."""

    file: str
    start: int
    end: int
    line: int
    col: int

    def to_json(self) -> dict:
        return {"line": self.line, "col": self.col, "start": self.start, "end": self.end}

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


NO_SPAN = Span("<none>", 0, 0, 0, 0)
