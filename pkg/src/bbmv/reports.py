from __future__ import annotations

from dataclasses import dataclass, field

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a condition check or causal audit.

    Failures are data, not exceptions: ``messages`` names each offending
    coupling, path or event pair, and ``data`` carries any numeric detail.
    """

    name: str
    status: str
    messages: tuple = ()
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status,
                "messages": list(self.messages), "data": dict(self.data)}

    @classmethod
    def from_dict(cls, d: dict) -> CheckResult:
        return cls(d["name"], d["status"], tuple(d.get("messages", ())), dict(d.get("data", {})))
