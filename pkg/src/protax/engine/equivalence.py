"""Bounded static equivalence of frames and the paired unlinkability check."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from ..terms import DEFAULT_SIGNATURE, DEFAULT_THEORY, App, Name, Signature, Term, Theory, Var, contains_fn, render, substitute
from .explore import ATTACKER, Bounds, System, initial_terms, is_public


@dataclass(frozen=True)
class Distinguisher:
    """Recipes telling two frames apart.

    ``kind`` is "equality" when ``left`` and ``right`` agree in one frame only, or
    "reduction" when the destructor at the top of ``left`` succeeds in one frame only
    (``right`` is then None).
    """

    kind: str
    left: Term
    right: Term | None = None

    def to_json(self) -> dict:
        out = {"kind": self.kind, "recipes": [render(self.left)]}
        if self.right is not None:
            out["recipes"].append(render(self.right))
        return out


def handle(i: int) -> Var:
    return Var(f"w{i + 1}")


def _public_atoms(frames, sig: Signature, extra=()) -> list[Term]:
    seen = set()
    out = []

    def visit(t):
        if isinstance(t, Name) and not t.fresh and t not in seen:
            seen.add(t)
            out.append(t)
        elif isinstance(t, App):
            for a in t.args:
                visit(a)

    for fr in frames:
        for t in fr:
            visit(t)
    for c in sig.constants():
        if c not in seen:
            seen.add(c)
            out.append(c)
    for t in extra:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def static_equiv(frame1, frame2, depth: int, theory: Theory | None = None, sig: Signature | None = None,
                 public=()) -> bool | Distinguisher:
    """True when no recipe of size at most ``depth`` separates the frames, else a Distinguisher."""
    if len(frame1) != len(frame2):
        raise ValueError("frames must have equal length")
    theory = theory or Theory(DEFAULT_THEORY)
    sig = sig or Signature(DEFAULT_SIGNATURE)
    destructors = frozenset(theory.destructors)
    norm = theory.normalize
    fns = sorted((f for f in sig if f.arity > 0), key=lambda f: f.name)

    by_size: dict[int, list[tuple[Term, Term, Term]]] = {}
    seen_pairs: set = set()
    left_map: dict[Term, tuple[Term, Term]] = {}
    right_map: dict[Term, tuple[Term, Term]] = {}

    def admit(recipe, v1, v2, size):
        # returns a Distinguisher when the new value pair conflicts with an earlier one
        if (v1, v2) in seen_pairs:
            return None
        prev = left_map.get(v1)
        if prev is not None and prev[0] != v2:
            return Distinguisher("equality", prev[1], recipe)
        prev = right_map.get(v2)
        if prev is not None and prev[0] != v1:
            return Distinguisher("equality", prev[1], recipe)
        seen_pairs.add((v1, v2))
        left_map[v1] = (v2, recipe)
        right_map[v2] = (v1, recipe)
        by_size.setdefault(size, []).append((recipe, v1, v2))
        return None

    atoms = [(handle(i), norm(a), norm(b)) for i, (a, b) in enumerate(zip(frame1, frame2))]
    atoms += [(p, p, p) for p in _public_atoms([frame1, frame2], sig, public)]
    if depth < 1:
        return True
    for r, v1, v2 in atoms:
        w = admit(r, v1, v2, 1)
        if w is not None:
            return w
    for size in range(2, depth + 1):
        for f in fns:
            for split in _splits(size - 1, f.arity):
                pools = [by_size.get(s, []) for s in split]
                if any(not p for p in pools):
                    continue
                for combo in itertools.product(*pools):
                    recipe = App(f.name, tuple(c[0] for c in combo))
                    v1 = norm(App(f.name, tuple(c[1] for c in combo)))
                    v2 = norm(App(f.name, tuple(c[2] for c in combo)))
                    if f.name in destructors:
                        ok1 = not contains_fn(v1, destructors)
                        ok2 = not contains_fn(v2, destructors)
                        if ok1 != ok2:
                            return Distinguisher("reduction", recipe)
                        if not ok1:
                            continue
                    w = admit(recipe, v1, v2, size)
                    if w is not None:
                        return w
    return True


def _splits(total: int, parts: int):
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _splits(total - first, parts - 1):
            yield (first,) + rest


def eval_recipe(recipe: Term, frame, theory: Theory) -> Term:
    binding = {handle(i).id: t for i, t in enumerate(frame)}
    return theory.normalize(substitute(recipe, binding))


# -- unlinkability -----------------------------------------------------------------------


@dataclass
class UnlinkabilityResult:
    equivalent: bool
    distinguisher: Distinguisher | None = None
    path: tuple = ()
    frames: tuple = ((), ())

    def witness_json(self) -> dict | None:
        if self.equivalent:
            return None
        out = self.distinguisher.to_json()
        out["path"] = [list(map(str, k)) for k in self.path]
        out["frames"] = {"same": [render(t) for t in self.frames[0]], "different": [render(t) for t in self.frames[1]]}
        return out


def unlinkability_systems(ispec, bounds: Bounds, role: str, subject: str) -> tuple[System, System]:
    """P(s) | P(s) and P(s) | P(t): two instances of ``role`` run by the same honest agent."""
    s, t = Name(f"{subject}_s"), Name(f"{subject}_t")
    me = {(role, 0): "alice", (role, 1): "alice"}
    two = Bounds(2, bounds.attacker_recipe_depth, bounds.max_trace_length)
    same = System(ispec, two, roles=[role], values={(role, 0, subject): s, (role, 1, subject): s}, self_agents=me)
    diff = System(ispec, two, roles=[role], values={(role, 0, subject): s, (role, 1, subject): t}, self_agents=me)
    return same, diff


def check_unlinkability(ispec, bounds: Bounds, role: str, subject: str) -> UnlinkabilityResult:
    """Run both variants in lockstep; compare frames after every output and at the end.

    Inputs to receives are frame handles or public atoms, chosen identically in both
    variants.
    """
    if bounds.sessions_per_role == 0:
        return UnlinkabilityResult(True)
    left, right = unlinkability_systems(ispec, bounds, role, subject)
    theory, sig, depth = left.theory, left.sig, bounds.attacker_recipe_depth
    prefix = [theory.normalize(t) for t in initial_terms() if not is_public(t)]
    visited = set()

    def inputs(frame):
        return [handle(i) for i in range(len(frame))] + _public_atoms([frame], sig)

    def dfs(insts_l, insts_r, fl, fr, path):
        key = (insts_l, insts_r)
        if key in visited:
            return None
        visited.add(key)
        for inst_l, inst_r in zip(left.instances, right.instances):
            cur_l, cur_r = insts_l[inst_l.index], insts_r[inst_r.index]
            if cur_l is None:
                starts = [(0, e_l, e_r, ci) for ci, (e_l, e_r) in enumerate(zip(inst_l.assignments, inst_r.assignments))]
            elif cur_l[0] < len(inst_l.role.steps):
                starts = [(cur_l[0], dict(cur_l[1]), dict(cur_r[1]), 0)]
            else:
                continue
            for pc, env_l, env_r, ci in starts:
                needs_input = pc < len(inst_l.role.steps) and inst_l.role.recv_index and pc in inst_l.role.recv_index
                for recipe in (inputs(fl) if needs_input else [None]):
                    m_l = eval_recipe(recipe, fl, theory) if recipe is not None else None
                    m_r = eval_recipe(recipe, fr, theory) if recipe is not None else None
                    res_l = left.run_block(inst_l, pc, env_l, m_l)
                    res_r = right.run_block(inst_r, pc, env_r, m_r)
                    step = (inst_l.label, ci, render(recipe) if recipe is not None else "")
                    if res_l is None and res_r is None:
                        continue
                    if (res_l is None) != (res_r is None):
                        return UnlinkabilityResult(False, Distinguisher("reduction", recipe), path + (step,), (fl, fr))
                    outs_l = [a[1] for a in res_l[2] if a[0] == "send"]
                    outs_r = [a[1] for a in res_r[2] if a[0] == "send"]
                    nfl, nfr = fl + tuple(outs_l), fr + tuple(outs_r)
                    if len(nfl) != len(nfr):
                        return UnlinkabilityResult(False, Distinguisher("reduction", recipe), path + (step,), (nfl, nfr))
                    if outs_l:
                        w = static_equiv(nfl, nfr, depth, theory, sig)
                        if w is not True:
                            return UnlinkabilityResult(False, w, path + (step,), (nfl, nfr))
                    nl, nr = list(insts_l), list(insts_r)
                    nl[inst_l.index] = (res_l[0], tuple(sorted(res_l[1].items(), key=lambda kv: kv[0])))
                    nr[inst_r.index] = (res_r[0], tuple(sorted(res_r[1].items(), key=lambda kv: kv[0])))
                    hit = dfs(tuple(nl), tuple(nr), nfl, nfr, path + (step,))
                    if hit is not None:
                        return hit
        return None

    start = tuple(None for _ in left.instances)
    base = tuple(prefix)
    hit = dfs(start, start, base, base, ())
    return hit if hit is not None else UnlinkabilityResult(True)
