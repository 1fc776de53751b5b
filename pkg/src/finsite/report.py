"""Structured verdicts shared by every checker in the engine."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a property check.

    verdict is "PASS" or "FAIL"; `depth` is set when the verdict is
    depth-qualified (rendered as PASS-AT-DEPTH(d)).  A FAIL always carries a
    concrete witness.  `classification` holds the domain verdict word
    (COSHEAF, SMOOTH, ...) when one applies.
    """

    verdict: str
    depth: int | None = None
    classification: str | None = None
    witnesses: tuple = ()
    trace: tuple[str, ...] = ()

    def __post_init__(self):
        if self.verdict not in ("PASS", "FAIL"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "FAIL" and not self.witnesses:
            raise ValueError("FAIL verdicts must carry a witness")

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def rendered_verdict(self) -> str:
        if self.verdict == "PASS" and self.depth is not None:
            return f"PASS-AT-DEPTH({self.depth})"
        return self.verdict

    def to_json(self) -> dict:
        out = {
            "kind": "report",
            "verdict": self.rendered_verdict(),
            "depth": self.depth,
            "witnesses": list(self.witnesses),
            "trace": list(self.trace),
        }
        if self.classification is not None:
            out["classification"] = self.classification
        return out
