"""Claim verdicts from bounded exploration."""

from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .. import taxonomy as tx
from ..instrument import InstrumentedSpec
from .equivalence import check_unlinkability
from .evaluate import eval_formula
from .explore import Bounds, BoundsExceeded, System, describe_path, formula_reads, replay, root_children, split, walk
from .trace import Trace

HOLDS = "holds_up_to_bounds"
VIOLATED = "violated"
UNSUPPORTED = "unsupported"


@dataclass
class Verdict:
    claim_index: int
    kind: tx.PropertyKind
    status: str
    witness: Trace | dict | None = None
    path: tuple = ()
    notes: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"kind": self.kind.keyword, "category": self.kind.category, "status": self.status}
        if self.witness is not None:
            if isinstance(self.witness, Trace):
                out["witness"] = {"events": self.witness.to_json(), "steps": list(self.steps)}
            else:
                out["witness"] = self.witness
        if self.notes:
            out["notes"] = list(self.notes)
        return out


class _Evaluator:
    """Claim evaluation memoized on the parts of the trace each formula reads."""

    def __init__(self, system: System, claims: list[int]):
        self.system = system
        self.claims = claims
        self.reads = {i: formula_reads(system.claims[i][1]) for i in claims}
        self.memo: dict = {}

    def violated(self, st, skip) -> list[int]:
        out = []
        tr = None
        for i in self.claims:
            if i in skip:
                continue
            timed, final = self.reads[i]
            key = (i, st.records, st.snaps if timed else None, st.know if (timed or final) else None)
            ok = self.memo.get(key)
            if ok is None:
                if tr is None:
                    tr = self.system.trace(st)
                ok = eval_formula(self.system.claims[i][1], tr)
                self.memo[key] = ok
            if not ok:
                out.append(i)
        return out


def _search(system: System, claims: list[int], start, prefix, skip=frozenset(), cut=None):
    """First violating path per claim in DFS preorder, plus the set of event labels seen.

    ``cut()`` returns claims that no longer need searching; it is polled between states.
    """
    ev = _Evaluator(system, claims)
    found: dict[int, tuple] = {}
    labels: set = set()
    done = set(skip)
    for n, (path, st, leaf) in enumerate(walk(system, start, prefix)):
        if cut is not None and n % 64 == 0:
            done |= cut()
        if leaf:
            labels.update(tx.base_label(label) for label, _ in st.records)
        for i in ev.violated(st, done):
            found[i] = path
            done.add(i)
            if cut is not None:
                _publish(i)
        if len(done) >= len(claims) and not _needs_labels(system, claims):
            break
    return found, labels


def _needs_labels(system: System, claims) -> bool:
    return any(system.claims[i][0].kind.leaf == "Accountability" for i in claims)


# per-claim index of the earliest work item known to violate it, shared with pool workers
_best = None
_item = -1


def _init(best):
    global _best
    _best = best


def _publish(claim: int) -> None:
    with _best.get_lock():
        if _item < _best[claim]:
            _best[claim] = _item


def _cut() -> set:
    return {c for c in range(len(_best)) if _best[c] < _item}


def _subtree(args):
    global _item
    ispec, bounds, claims, path, item = args
    _item = item
    system = System(ispec, bounds)
    try:
        return _search(system, claims, replay(system, path), path, frozenset(_cut()), cut=_cut)
    except BoundsExceeded as e:
        return e


def _parallel(system: System, ispec, bounds, claims, workers: int):
    """Search split subtrees in a process pool; the earliest item in preorder wins per claim.

    A worker stops looking for a claim once an earlier item has violated it, so the
    result matches the serial search.
    """
    items = split(system, 4 * workers)
    ev = _Evaluator(system, claims)
    found: dict[int, tuple] = {}
    labels: set = set()
    best = mp.Array("q", [len(items)] * (max(claims) + 1))
    for i, it in enumerate(items):
        if it[0] == "node":
            _, path, st, leaf = it
            if leaf:
                labels.update(tx.base_label(label) for label, _ in st.records)
            for c in ev.violated(st, set()):
                if i < best[c]:
                    best[c] = i
    results: dict[int, tuple] = {}
    trees = [i for i, it in enumerate(items) if it[0] == "tree"]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init, initargs=(best,)) as pool:
        parts = pool.map(_subtree, [(ispec, bounds, claims, items[i][1], i) for i in trees])
        for i, part in zip(trees, parts):
            if isinstance(part, BoundsExceeded):
                raise part
            results[i] = part
    for i, it in enumerate(items):
        if it[0] == "node":
            _, path, st, _ = it
            for c in ev.violated(st, set()):
                found.setdefault(c, path)
        else:
            sub, seen = results[i]
            labels |= seen
            for c, path in sub.items():
                found.setdefault(c, path)
    return found, labels


def check(ispec: InstrumentedSpec, bounds: Bounds, workers: int = 1) -> list[Verdict]:
    """One verdict per claim, in claim order; independent of ``workers``."""
    system = System(ispec, bounds)
    verdicts: dict[int, Verdict] = {}
    trace_claims = []
    for i, (claim, cf) in enumerate(system.claims):
        if cf.formula is None:
            verdicts[i] = _unlinkability(ispec, bounds, i, claim, cf)
        else:
            trace_claims.append(i)

    found: dict[int, tuple] = {}
    labels: set = set()
    vacuous = bounds.sessions_per_role == 0 or not system.instances
    if trace_claims:
        root = system.root()
        for i in _Evaluator(system, trace_claims).violated(root, set()):
            found[i] = ()
        if not vacuous:
            if workers > 1:
                found, labels = _parallel(system, ispec, bounds, trace_claims, workers)
            else:
                # claims already violated in an earlier subtree keep that witness
                for child, path in root_children(system):
                    if len(found) == len(trace_claims) and not _needs_labels(system, trace_claims):
                        break
                    sub, seen = _search(system, trace_claims, child, path, frozenset(found))
                    labels |= seen
                    for i, p in sub.items():
                        found.setdefault(i, p)

    for i in trace_claims:
        claim, cf = system.claims[i]
        if i in found:
            st = replay(system, found[i])
            tr = system.trace(st)
            if eval_formula(cf, tr):
                raise AssertionError(f"witness for claim {i} does not reproduce the violation")
            verdicts[i] = Verdict(i, claim.kind, VIOLATED, tr, found[i], steps=describe_path(system, found[i]))
        elif claim.kind.leaf == "Accountability" and not vacuous and "Judged" not in labels:
            verdicts[i] = Verdict(i, claim.kind, UNSUPPORTED, notes=["no judge activity in any explored trace"])
        else:
            verdicts[i] = Verdict(i, claim.kind, HOLDS)
    if vacuous:
        for v in verdicts.values():
            v.notes.append("vacuous: no sessions explored")
    return [verdicts[i] for i in sorted(verdicts)]


def _unlinkability(ispec, bounds, i, claim, cf) -> Verdict:
    res = check_unlinkability(ispec, bounds, cf.role, cf.subject)
    if res.equivalent:
        return Verdict(i, claim.kind, HOLDS)
    return Verdict(i, claim.kind, VIOLATED, res.witness_json(), res.path)
