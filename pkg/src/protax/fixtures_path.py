"""Location of the shipped protocol fixtures."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

NAMES = (
    "accountability", "aliveness", "anonymity", "forward_secrecy", "injective_agreement", "non_equivocation",
    "non_injective_agreement", "non_repudiation", "ns", "nsl", "post_compromise_security", "secrecy",
    "signcryption", "traceability", "unforgeability", "unlinkability", "weak_agreement",
)


def fixture(name: str) -> Path:
    return Path(str(resources.files("protax") / "fixtures" / f"{name}.dsl"))
