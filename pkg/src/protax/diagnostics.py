from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class SourceSpan:
    file: str
    start: tuple[int, int]
    end: tuple[int, int]

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("span end precedes start")


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: SourceSpan | None = None
    severity: str = "error"

    def format(self, file: str | None = None) -> str:
        if self.span is None:
            return f"{file or '<input>'}:1:1: {self.severity}: {self.message}"
        line, col = self.span.start
        return f"{file or self.span.file}:{line}:{col}: {self.severity}: {self.message}"

    def __str__(self) -> str:
        return self.format()


@dataclass
class ValidationReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def add(self, message: str, span: SourceSpan | None = None, severity: str = "error") -> None:
        self.diagnostics.append(Diagnostic(message, span, severity))

    def extend(self, other: "ValidationReport") -> None:
        self.diagnostics.extend(other.diagnostics)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def warnings(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        # truthy when there is something to report
        return bool(self.diagnostics)

    def __iter__(self):
        return iter(self.diagnostics)

    def __len__(self) -> int:
        return len(self.diagnostics)
