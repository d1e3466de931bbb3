"""Bounded interleaving of role instances against a network attacker.

A move runs one atomic block of a role instance: a receive (if any) followed by the
local steps up to the next receive.  Received messages are drawn from what the
attacker can derive.  Candidates are generated in three stages:

1. destructor steps of the block are narrowed into the receive pattern, so only
   messages on which the block can succeed are considered;
2. the remaining pattern variables are typed by unifying with the shapes of honest
   sends (a nonce slot takes known nonces, a key slot known keys, and so on);
3. the typed pattern is filled by replaying analyzed terms or by constructor
   synthesis within the recipe-depth bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

from .. import taxonomy as tx
from ..instrument import InstrumentedSpec
from ..ir import IDENTITY, LTK, PK, VALUE, Event, Fresh, Let, Recv, RoleScript, Send
from ..terms import App, Name, Term, Var, contains_fn, is_ground, match, render, substitute, term_key
from .knowledge import Knowledge, _derivable, is_public
from .trace import EventRecord, Trace
from .unify import compose, unify

HONEST = ("alice", "bob")
ATTACKER = "eve"
PRINCIPALS = HONEST + (ATTACKER,)


class BoundsExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Bounds:
    sessions_per_role: int = 2
    attacker_recipe_depth: int = 4
    max_trace_length: int = 24

    def __post_init__(self):
        for name in ("sessions_per_role", "attacker_recipe_depth", "max_trace_length"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_json(self) -> dict:
        return {
            "sessions": self.sessions_per_role,
            "depth": self.attacker_recipe_depth,
            "max_trace": self.max_trace_length,
        }


def agent(p: str) -> Name:
    return Name(p, fresh=False)


def ltk(p: str) -> Name:
    return Name(f"sk_{p}")


def pubkey(p: str) -> App:
    return App("pk", (ltk(p),))


ATTACKER_NONCE = Name(f"n_{ATTACKER}")
AGENTS = tuple(agent(p) for p in PRINCIPALS)
HONEST_AGENTS = frozenset(agent(p) for p in HONEST)
KEY_NAMES = frozenset(ltk(p) for p in PRINCIPALS)


def initial_terms() -> list[Term]:
    return list(AGENTS) + [pubkey(p) for p in PRINCIPALS] + [ltk(ATTACKER), ATTACKER_NONCE]


# -- static model ---------------------------------------------------------------------


def _sort_var(sort: str, n: int) -> Var:
    return Var(f"?{sort}:{n}")


def sort_of(var_id: str) -> str:
    if var_id.startswith("?"):
        return var_id[1:].split(":", 1)[0]
    return "msg"


def _is_sort_var(v: str) -> bool:
    return v.startswith("?")


@dataclass
class Instance:
    index: int
    role: "RoleModel"
    k: int
    label: str
    self_agent: str | None
    assignments: list  # initial bindings, one per choice of peers
    peers: list = field(default_factory=list)


class RoleModel:
    def __init__(self, role: RoleScript, steps: tuple, destructors):
        self.name = role.name
        self.role = role
        self.steps = steps
        self.identity = [p.name for p in role.params if p.kind == IDENTITY]
        self.recv_index = [i for i, s in enumerate(steps) if isinstance(s, Recv)]
        self.destructors = destructors
        self.silent = [self._silent(pc) for pc in range(len(steps) + 1)]

    def _silent(self, pc: int) -> bool:
        # output-only block without events: running it early changes no event order
        if pc >= len(self.steps) or isinstance(self.steps[pc], Recv):
            return False
        return not any(isinstance(s, Event) for s in self.steps[pc:self.block_end(pc)])

    def block_end(self, pc: int) -> int:
        """Index of the next receive after ``pc`` (or the end of the role)."""
        for i in self.recv_index:
            if i > pc:
                return i
        return len(self.steps)

    def initial_env(self, self_agent: str | None, peers: dict, values: dict) -> dict:
        env: dict[str, Term] = {}
        ids = {}
        for i, p in enumerate(self.identity):
            who = self_agent if i == 0 else peers[p]
            ids[p] = who
            env[p] = agent(who)
        for p in self.role.params:
            if p.kind == LTK:
                env[p.name] = ltk(ids[p.owner])
            elif p.kind == PK:
                env[p.name] = pubkey(ids[p.owner])
            elif p.kind == VALUE:
                env[p.name] = values[p.name]
        return env

    def _skeleton_walk(self, counter, recv_types: dict):
        """Yield ("send", shape) and ("recv", index, pattern) with atoms replaced by sorted variables."""
        env: dict[str, Term] = {}
        for p in self.role.params:
            if p.kind == IDENTITY:
                env[p.name] = Var("?agent")
            elif p.kind == LTK:
                env[p.name] = Var("?key")
            elif p.kind == PK:
                env[p.name] = App("pk", (Var("?key"),))
            else:
                env[p.name] = Var("?nonce")
        for i, s in enumerate(self.steps):
            if isinstance(s, Fresh):
                env[s.var] = Var("?nonce")
            elif isinstance(s, Recv):
                yield ("recv", i, _linearize(substitute(s.pattern, env), counter))
                for v in _vars_in(s.pattern):
                    env.setdefault(v, Var("?" + recv_types.get((i, v), "msg")))
            elif isinstance(s, Let):
                t = substitute(s.term, env)
                env[s.var] = Var("?msg") if contains_fn(t, self.destructors) else t
            elif isinstance(s, Send):
                yield ("send", _linearize(substitute(s.term, env), counter))

    def skeletons(self, counter, recv_types: dict) -> list[Term]:
        return [x[1] for x in self._skeleton_walk(counter, recv_types) if x[0] == "send"]

    def recv_shapes(self, counter, recv_types: dict) -> list[tuple[int, Term]]:
        return [(x[1], x[2]) for x in self._skeleton_walk(counter, recv_types) if x[0] == "recv"]


def _canonical(t: Term) -> Term:
    ren: dict[str, Term] = {}
    for v in _vars_in(t):
        if _is_sort_var(v) and v not in ren:
            ren[v] = _sort_var(sort_of(v), len(ren))
    return substitute(t, ren)


def untyped_count(t: Term) -> int:
    return sum(1 for v in set(_vars_in(t)) if sort_of(v) == "msg")


def best_typings(p: Term, skeletons) -> list[Term]:
    """Most specific typed instances of ``p`` obtained by unifying with honest send shapes."""
    found = []
    for sk in skeletons:
        th = unify(p, sk, prefer=_is_sort_var)
        if th is None:
            continue
        tp = _canonical(substitute(p, th))
        if tp not in found:
            found.append(tp)
    if not found:
        return [p]
    best = min(untyped_count(t) for t in found)
    return [t for t in found if untyped_count(t) == best]


def _vars_in(t: Term) -> list[str]:
    out = []
    if isinstance(t, Var):
        out.append(t.id)
    elif isinstance(t, App):
        for a in t.args:
            out.extend(_vars_in(a))
    return out


def _linearize(t: Term, counter) -> Term:
    if isinstance(t, Var) and _is_sort_var(t.id):
        return _sort_var(t.id[1:], next(counter))
    if isinstance(t, App) and t.args:
        return App(t.fn, tuple(_linearize(a, counter) for a in t.args))
    return t


def _replace(t: Term, old: Term, new: Term) -> Term:
    if t == old:
        return new
    if isinstance(t, App) and t.args:
        return App(t.fn, tuple(_replace(a, old, new) for a in t.args))
    return t


def _innermost_destructor(t: Term, destructors) -> App | None:
    if isinstance(t, App) and t.args:
        for a in t.args:
            hit = _innermost_destructor(a, destructors)
            if hit is not None:
                return hit
        if t.fn in destructors:
            return t
    return None


def narrow_block(theory, steps, pc: int, end: int, env: dict, fresh) -> list[tuple[Term, dict]]:
    """Refinements of the receive pattern at ``pc`` under which steps pc+1..end-1 succeed.

    Each result pairs the refined pattern with the environment after the block, where
    let-bound variables hold destructor-free terms over the pattern variables.
    """
    destructors = frozenset(theory.destructors)
    pat = substitute(steps[pc].pattern, env)
    e = dict(env)
    for v in _vars_in(pat):
        e.setdefault(v, Var(v))
    branches = [(pat, e)]
    counter = itertools.count()
    for s in steps[pc + 1:end]:
        new = []
        for pat, e in branches:
            if isinstance(s, Fresh):
                new.append((pat, {**e, s.var: fresh(s.var)}))
                continue
            if isinstance(s, (Let, Send)):
                t = substitute(s.term, e)
            elif isinstance(s, Event):
                t = App("~event", tuple(substitute(a, e) for a in s.args))
            else:
                continue
            for th, r in _narrow_term(theory, destructors, t, counter):
                e2 = {k: substitute(v, th) for k, v in e.items()}
                if isinstance(s, Let):
                    e2[s.var] = r
                new.append((substitute(pat, th), e2))
        branches = new
        if not branches:
            break
    return branches


def _narrow_term(theory, destructors, t: Term, counter) -> list:
    app = _innermost_destructor(t, destructors)
    if app is None:
        return [({}, t)]
    if is_ground(app):
        r = theory.normalize(app)
        if contains_fn(r, destructors):
            return []
        return _narrow_term(theory, destructors, _replace(t, app, r), counter)
    out = []
    for rule in theory.rules_for(app.fn):
        n = next(counter)
        ren = {v: Var(f"~{n}.{v}") for v in set(_vars_in(rule.lhs))}
        lhs, rhs = substitute(rule.lhs, ren), substitute(rule.rhs, ren)
        th = unify(app, lhs)
        if th is None:
            continue
        t2 = substitute(_replace(t, app, rhs), th)
        for th2, r in _narrow_term(theory, destructors, t2, counter):
            out.append((compose(th, th2), r))
    return out


# -- search state ------------------------------------------------------------------------


@dataclass(frozen=True)
class State:
    insts: tuple  # per instance: None (not started) or (pc, env items)
    know: Knowledge
    records: tuple = ()  # (label, args)
    snaps: tuple = ()  # knowledge when each event was recorded
    revealed: frozenset = frozenset()
    compromised: frozenset = frozenset()

    def key(self, with_snaps: bool = True):
        snaps = self.snaps if with_snaps else None
        return (self.insts, self.know, self.records, snaps, self.revealed, self.compromised)


@dataclass(frozen=True)
class Move:
    key: tuple
    kind: str  # step | compromise | reveal
    inst: int = -1
    choice: int = 0
    msg: Term | None = None
    claim: int = -1
    principal: str = ""


class System:
    """Everything static about one bounded exploration."""

    def __init__(self, ispec: InstrumentedSpec, bounds: Bounds, roles: list[str] | None = None,
                 values: dict | None = None, self_agents: dict | None = None):
        self.ispec = ispec
        self.bounds = bounds
        spec = ispec.base
        self.theory = spec.full_theory()
        self.sig = spec.full_signature()
        self.destructors = frozenset(self.theory.destructors)
        self.constants = tuple(self.sig.constants())
        self.models = {r.name: RoleModel(r, ispec.role_steps(r.name), self.destructors) for r in spec.roles}
        self.skeletons = self._infer_skeletons()
        self.claims = list(ispec.claim_formulas)
        leaves = {c.kind.leaf for c, _ in self.claims}
        self.reveal = bool(leaves & {"ForwardSecrecy", "PostCompromiseSecurity"})
        self.timed = any(formula_reads(cf)[0] for _, cf in self.claims)
        self.pcs = [(i, c) for i, (c, _) in enumerate(self.claims) if c.kind.leaf == "PostCompromiseSecurity"]
        self.instances: list[Instance] = []
        values = values or {}
        self_agents = self_agents or {}
        for r in spec.roles:
            if roles is not None and r.name not in roles:
                continue
            model = self.models[r.name]
            for k in range(bounds.sessions_per_role):
                idx = len(self.instances)
                label = f"{r.name}{k}"
                me = self_agents.get((r.name, k), HONEST[k % 2]) if model.identity else None
                others = model.identity[1:]
                choices = [dict(zip(others, combo))
                           for combo in itertools.product([p for p in PRINCIPALS if p != me], repeat=len(others))]
                vals = {p.name: values.get((r.name, k, p.name), Name(f"{p.name}_{me or k}"))
                        for p in r.params if p.kind == VALUE}
                envs = [model.initial_env(me, c, vals) for c in choices]
                self.instances.append(Instance(idx, model, k, label, me, envs, choices))
        self.initial = Knowledge(frozenset()).add(
            [self.theory.normalize(t) for t in initial_terms()], self.theory)
        self._cand_cache: dict = {}

    def _infer_skeletons(self, rounds: int = 3) -> list[Term]:
        # received variables take the sort they have in every most specific typing
        recv_types: dict = {}
        counter = itertools.count()
        skeletons: list[Term] = []
        for _ in range(rounds):
            skeletons = [sk for m in self.models.values() for sk in m.skeletons(counter, recv_types)]
            new_types: dict = {}
            for m in self.models.values():
                for idx, shape in m.recv_shapes(counter, recv_types):
                    pat = m.steps[idx].pattern
                    typings = best_typings(shape, skeletons)
                    for v in _vars_in(pat):
                        sorts = set()
                        for tp in typings:
                            t = (match(shape, tp) or {}).get(v, Var(v))
                            sorts.add(sort_of(t.id) if isinstance(t, Var) else "msg")
                        if len(sorts) == 1:
                            new_types[(idx, v)] = sorts.pop()
            if new_types == recv_types:
                break
            recv_types = new_types
        return skeletons

    # -- states ----------------------------------------------------------------------
    def root(self) -> State:
        return State(tuple(None for _ in self.instances), self.initial)

    def trace(self, st: State) -> Trace:
        recs = tuple(EventRecord(i + 1, l, a) for i, (l, a) in enumerate(st.records))
        return Trace(recs, st.snaps + (st.know,), self.theory, self.bounds.attacker_recipe_depth)

    # -- block execution ----------------------------------------------------------------
    def _honest(self, inst: Instance, env: dict) -> bool:
        return all(env[p] in HONEST_AGENTS for p in inst.role.identity)

    def _records(self, inst: Instance, env: dict, label: str, args: tuple) -> bool:
        pos = tx.PREMISE_IDENTITY_ARGS.get((tx.base_label(label), len(args)))
        if pos is None:
            return True
        if not self._honest(inst, env):
            return False
        return all(args[i] in HONEST_AGENTS for i in pos)

    def run_block(self, inst: Instance, pc: int, env: dict, msg: Term | None):
        """Execute one block; returns (new pc, env, actions) or None if the block fails."""
        steps = inst.role.steps
        env = dict(env)
        if pc < len(steps) and isinstance(steps[pc], Recv):
            if msg is None:
                return None
            b = match(substitute(steps[pc].pattern, env), msg)
            if b is None:
                return None
            env.update(b)
            pc += 1
        actions = []
        norm = self.theory.normalize
        while pc < len(steps):
            s = steps[pc]
            if isinstance(s, Recv):
                break
            if isinstance(s, Fresh):
                env[s.var] = Name(f"{s.var}.{inst.label}")
            elif isinstance(s, Let):
                v = norm(substitute(s.term, env))
                if contains_fn(v, self.destructors):
                    return None
                env[s.var] = v
            elif isinstance(s, Send):
                v = norm(substitute(s.term, env))
                if contains_fn(v, self.destructors):
                    return None
                actions.append(("send", v))
            elif isinstance(s, Event):
                args = tuple(norm(substitute(a, env)) for a in s.args)
                if any(contains_fn(a, self.destructors) for a in args):
                    return None
                if self._records(inst, env, s.label, args):
                    actions.append(("event", s.label, args))
            pc += 1
        return pc, env, actions

    def _emit(self, st: State, actions, insts=None, revealed=None, compromised=None) -> State:
        know, records, snaps = st.know, list(st.records), list(st.snaps)
        for a in actions:
            if a[0] == "send":
                know = know.add([a[1]], self.theory)
            else:
                snaps.append(know)
                records.append((a[1], a[2]))
        if len(records) > self.bounds.max_trace_length:
            raise BoundsExceeded(
                f"a trace reached {len(records)} events (max_trace_length={self.bounds.max_trace_length})")
        return State(
            insts if insts is not None else st.insts, know, tuple(records), tuple(snaps),
            revealed if revealed is not None else st.revealed,
            compromised if compromised is not None else st.compromised,
        )

    # -- moves ---------------------------------------------------------------------------
    def moves(self, st: State) -> list[Move]:
        for inst in self.instances:
            cur = st.insts[inst.index]
            if cur is None and inst.role.silent[0]:
                return [m for ci, env in enumerate(inst.assignments)
                        for m in self._step_moves(st, inst, 0, env, ci)]
            if cur is not None and inst.role.silent[cur[0]]:
                return self._step_moves(st, inst, cur[0], dict(cur[1]), 0)
        out: list[Move] = []
        for inst in self.instances:
            cur = st.insts[inst.index]
            if cur is None:
                for ci, env in enumerate(inst.assignments):
                    out.extend(self._step_moves(st, inst, 0, env, ci))
            else:
                pc, env_items = cur
                if pc < len(inst.role.steps):
                    out.extend(self._step_moves(st, inst, pc, dict(env_items), 0))
        for ci, claim in self.pcs:
            sender = claim.args["sender"].role
            for inst in self.instances:
                if inst.role.name != sender or (ci, inst.index) in st.compromised:
                    continue
                cur = st.insts[inst.index]
                if cur is None:
                    continue
                env = dict(cur[1])
                if self._compromise_event(claim, env) is not None:
                    out.append(Move((1, ci, inst.index), "compromise", inst=inst.index, claim=ci))
        if self.reveal:
            for i, p in enumerate(HONEST):
                if p not in st.revealed:
                    out.append(Move((2, i), "reveal", principal=p))
        return out

    def _step_moves(self, st: State, inst: Instance, pc: int, env: dict, choice: int) -> list[Move]:
        steps = inst.role.steps
        if pc < len(steps) and isinstance(steps[pc], Recv):
            return [Move((0, inst.index, choice, term_key(m)), "step", inst.index, choice, m)
                    for m in self.candidates(st.know, inst, pc, env)]
        return [Move((0, inst.index, choice, ()), "step", inst.index, choice, None)]

    def apply(self, st: State, mv: Move) -> State | None:
        if mv.kind == "step":
            inst = self.instances[mv.inst]
            cur = st.insts[mv.inst]
            if cur is None:
                pc, env = 0, inst.assignments[mv.choice]
            else:
                pc, env = cur[0], dict(cur[1])
            res = self.run_block(inst, pc, env, mv.msg)
            if res is None:
                return None
            npc, nenv, actions = res
            insts = list(st.insts)
            insts[mv.inst] = (npc, tuple(sorted(nenv.items(), key=lambda kv: kv[0])))
            return self._emit(st, actions, insts=tuple(insts))
        if mv.kind == "reveal":
            key = ltk(mv.principal)
            return self._emit(st, [("send", key), ("event", "Leaked", (key,))],
                              revealed=st.revealed | {mv.principal})
        if mv.kind == "compromise":
            claim = self.claims[mv.claim][0]
            env = dict(st.insts[mv.inst][1])
            ev = self._compromise_event(claim, env)
            leaked = [self.theory.normalize(substitute(t, env)) for t in claim.args["state"]
                      if all(v in env for v in _vars_in(t))]
            actions = [("send", t) for t in leaked] + [("event", "Compromise", ev)]
            return self._emit(st, actions, compromised=st.compromised | {(mv.claim, mv.inst)})
        raise ValueError(mv.kind)

    def _compromise_event(self, claim, env: dict):
        a, b = claim.args["sender"].vars
        sid = claim.args["sid"]
        if not all(v in env for v in _vars_in(sid)) or a not in env or b not in env:
            return None
        return (self.theory.normalize(substitute(sid, env)), env[a], env[b])

    # -- receive candidates -------------------------------------------------------------------
    def candidates(self, know: Knowledge, inst: Instance, pc: int, env: dict) -> list[Term]:
        depth = self.bounds.attacker_recipe_depth
        out = set()
        for tp in self._typed_patterns(inst, pc, tuple(sorted(env.items(), key=lambda kv: kv[0]))):
            for msg in self._fill(tp, know, depth):
                out.add(msg)
        ordered = sorted(out, key=term_key)
        ok = []
        for m in ordered:
            if self.run_block(inst, pc, env, m) is not None:
                ok.append(m)
        return ok

    def _typed_patterns(self, inst: Instance, pc: int, env_items: tuple) -> tuple:
        key = (inst.label, pc, env_items)
        hit = self._cand_cache.get(key)
        if hit is not None:
            return hit
        typed = []
        for p in self._narrow(inst, pc, dict(env_items)):
            for tp in best_typings(p, self.skeletons):
                if tp not in typed:
                    typed.append(tp)
        res = tuple(typed)
        self._cand_cache[key] = res
        return res

    def _narrow(self, inst: Instance, pc: int, env: dict) -> list[Term]:
        end = inst.role.block_end(pc)
        out = []
        for pat, _ in narrow_block(self.theory, inst.role.steps, pc, end, env,
                                   lambda v: Name(f"{v}.{inst.label}")):
            if pat not in out:
                out.append(pat)
        return out

    def _fill(self, tp: Term, know: Knowledge, depth: int) -> list[Term]:
        return _fill_cached(self, tp, know, depth)

    def atoms(self, sort: str, know: Knowledge) -> list[Term]:
        return _atoms_cached(self, sort, know)


@lru_cache(maxsize=100_000)
def _atoms_cached(system: System, sort: str, know: Knowledge) -> tuple:
    names = [t for t in know.analyzed if isinstance(t, Name)]
    if sort == "agent":
        out = list(AGENTS)
    elif sort == "key":
        out = [n for n in names if n in KEY_NAMES]
    elif sort == "nonce":
        out = [n for n in names if n.fresh and n not in KEY_NAMES]
    else:
        out = list(know.analyzed) + list(AGENTS) + list(system.constants)
    return tuple(sorted(set(out), key=term_key))


@lru_cache(maxsize=100_000)
def _by_head(know: Knowledge) -> dict:
    idx: dict[str, list] = {}
    for t in sorted(know.analyzed, key=term_key):
        if isinstance(t, App):
            idx.setdefault(t.fn, []).append(t)
    return idx


@lru_cache(maxsize=100_000)
def _fill_cached(system: System, tp: Term, know: Knowledge, depth: int) -> tuple:
    out = set()
    for sigma in _gen(system, tp, {}, depth, know):
        m = substitute(tp, sigma)
        if is_ground(m) and _derivable(know.analyzed, m, depth, system.destructors):
            out.add(m)
    return tuple(sorted(out, key=term_key))


def _gen(system: System, p: Term, sigma: dict, d: int, know: Knowledge):
    p2 = substitute(p, sigma)
    if is_ground(p2):
        if _derivable(know.analyzed, p2, d, system.destructors):
            yield sigma
        return
    if isinstance(p2, Var):
        for v in system.atoms(sort_of(p2.id), know):
            yield {**sigma, p2.id: v}
        return
    for u in _by_head(know).get(p2.fn, ()):
        b = match(p2, u)
        if b is not None:
            yield {**sigma, **b}
    if p2.fn not in system.destructors and d >= 1:
        yield from _gen_args(system, p2.args, 0, sigma, d - 1, know)


def _gen_args(system, args, i, sigma, d, know):
    if i == len(args):
        yield sigma
        return
    for s1 in _gen(system, args[i], sigma, d, know):
        yield from _gen_args(system, args, i + 1, s1, d, know)


def formula_reads(cf) -> tuple[bool, bool]:
    """(reads timed knowledge, reads final knowledge) for a checkable formula."""
    f = cf.formula if isinstance(cf, tx.CheckableFormula) else cf
    if f is None:
        return False, False
    atoms = list(f.premises) + list(f.conclusions) + list(f.guards) + list(f.constraints)
    if f.negated_uniqueness is not None:
        atoms += list(f.negated_uniqueness.atoms) + list(f.negated_uniqueness.constraints)
    timed = any(isinstance(a, tx.KnowledgeAtom) and a.time is not None for a in atoms)
    final = any(isinstance(a, (tx.KnowledgeAtom, tx.NotKnown)) for a in atoms)
    return timed, final


# -- traversal -------------------------------------------------------------------------------


def walk(system: System, start: State, prefix: tuple = ()):
    """Depth-first preorder over reachable states: yields (path, state, is_leaf)."""
    visited = set()
    stack = [(start, prefix)]
    while stack:
        st, path = stack.pop()
        k = st.key(system.timed)
        if k in visited:
            continue
        visited.add(k)
        children = []
        for mv in system.moves(st):
            ns = system.apply(st, mv)
            if ns is not None:
                children.append((ns, path + (mv.key,)))
        yield path, st, not children
        stack.extend(reversed(children))


def root_children(system: System):
    st = system.root()
    out = []
    for mv in system.moves(st):
        ns = system.apply(st, mv)
        if ns is not None:
            out.append((ns, (mv.key,)))
    return out


def split(system: System, target: int, max_depth: int = 6) -> list[tuple]:
    """Cut the move tree into preorder-ordered work items for parallel search.

    Items are ("node", path, state, is_leaf) for expanded states, checked on their own,
    and ("tree", path, state) for whole subtrees.  Expansion goes level by level until
    there are at least ``target`` subtrees.
    """
    items: list[tuple] = [("tree", (), system.root())]
    for _ in range(max_depth):
        if sum(1 for it in items if it[0] == "tree") >= target:
            break
        out = []
        grew = False
        for it in items:
            if it[0] != "tree":
                out.append(it)
                continue
            _, path, st = it
            children = []
            for mv in system.moves(st):
                ns = system.apply(st, mv)
                if ns is not None:
                    children.append(("tree", path + (mv.key,), ns))
            out.append(("node", path, st, not children))
            out.extend(children)
            grew = grew or bool(children)
        items = out
        if not grew:
            break
    return items


def replay(system: System, path: tuple) -> State:
    """Re-run a move path from the root; raises if the path is not executable."""
    st = system.root()
    for key in path:
        for mv in system.moves(st):
            if mv.key == key:
                ns = system.apply(st, mv)
                if ns is None:
                    break
                st = ns
                break
        else:
            raise ValueError(f"move {key} is not enabled")
    return st


def describe_path(system: System, path: tuple) -> list[dict]:
    """The moves of ``path`` in readable form, for replaying a witness by hand."""
    out = []
    st = system.root()
    for key in path:
        mv = next(m for m in system.moves(st) if m.key == key)
        if mv.kind == "reveal":
            out.append({"move": "reveal", "principal": mv.principal})
        else:
            inst = system.instances[mv.inst]
            row = {"move": mv.kind, "instance": inst.label}
            if mv.kind == "step" and st.insts[mv.inst] is None:
                if inst.self_agent:
                    row["self"] = inst.self_agent
                row.update({"peers": dict(inst.peers[mv.choice])} if inst.peers[mv.choice] else {})
            if mv.msg is not None:
                row["input"] = render(mv.msg)
            out.append(row)
        st = system.apply(st, mv)
    return out


def explore(ispec: InstrumentedSpec, bounds: Bounds):
    """Stream the maximal traces reachable within ``bounds`` in move order."""
    system = System(ispec, bounds)
    if bounds.sessions_per_role == 0 or not system.instances:
        yield system.trace(system.root())
        return
    seen_root = False
    for child, path in root_children(system):
        seen_root = True
        for _, st, leaf in walk(system, child, path):
            if leaf:
                yield system.trace(st)
    if not seen_root:
        yield system.trace(system.root())
