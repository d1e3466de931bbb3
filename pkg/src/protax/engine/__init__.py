"""Bounded Dolev-Yao engine: knowledge, exploration, evaluation and verdicts."""

from .check import HOLDS, UNSUPPORTED, VIOLATED, Verdict, check
from .equivalence import Distinguisher, check_unlinkability, static_equiv
from .evaluate import UnsupportedFormula, counterexample, eval_formula
from .explore import Bounds, BoundsExceeded, explore
from .knowledge import Knowledge, derivable, empty_knowledge, saturate
from .trace import EventRecord, Trace, make_trace

__all__ = [
    "Bounds", "BoundsExceeded", "Distinguisher", "EventRecord", "HOLDS", "Knowledge", "Trace",
    "UNSUPPORTED", "UnsupportedFormula", "VIOLATED", "Verdict", "check", "check_unlinkability",
    "counterexample", "derivable", "empty_knowledge", "eval_formula", "explore", "make_trace",
    "saturate", "static_equiv",
]
