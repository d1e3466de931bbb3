from pathlib import Path

import pytest

from protax.dsl import parse_file
from protax.engine import HOLDS, UNSUPPORTED, VIOLATED, Bounds, BoundsExceeded, check, eval_formula, explore
from protax.engine.explore import System, replay
from protax.fixtures_path import NAMES, fixture
from protax.instrument import instrument

DATA = Path(__file__).parent / "data"
SLOW = {"ns", "nsl", "signcryption"}

# verdicts at sessions=2, depth=4, frozen after hand review of each witness
EXPECTED = {
    "accountability": [HOLDS],
    "aliveness": [HOLDS],
    "anonymity": [HOLDS],
    "forward_secrecy": [VIOLATED],
    "injective_agreement": [HOLDS],
    "non_equivocation": [HOLDS],
    "non_injective_agreement": [HOLDS],
    "non_repudiation": [HOLDS],
    "post_compromise_security": [VIOLATED],
    "secrecy": [HOLDS],
    "traceability": [HOLDS],
    "unforgeability": [HOLDS],
    "unlinkability": [HOLDS],
    "weak_agreement": [HOLDS],
}


def load(path):
    return instrument(parse_file(path))


def test_bounds_validation():
    with pytest.raises(ValueError):
        Bounds(-1, 4, 24)
    assert Bounds().to_json() == {"sessions": 2, "depth": 4, "max_trace": 24}


def test_zero_sessions_is_one_empty_trace():
    traces = list(explore(load(fixture("nsl")), Bounds(0, 4, 24)))
    assert len(traces) == 1 and len(traces[0]) == 0


def test_zero_sessions_verdicts_are_vacuous():
    for v in check(load(fixture("nsl")), Bounds(0, 4, 24)):
        assert v.status == HOLDS
        assert "vacuous: no sessions explored" in v.notes


def test_explore_is_deterministic():
    ispec = load(fixture("secrecy"))
    a = [t.to_json() for t in explore(ispec, Bounds(2, 2, 24))]
    b = [t.to_json() for t in explore(ispec, Bounds(2, 2, 24))]
    assert a == b and len(a) > 1


def test_bounds_exceeded():
    with pytest.raises(BoundsExceeded):
        check(load(fixture("nsl")), Bounds(2, 3, 1))


def test_clear_text_secret_is_violated():
    (v,) = check(load(DATA / "leak.dsl"), Bounds())
    assert v.status == VIOLATED
    assert len(v.witness) <= 2


def test_accountability_without_judging_is_unsupported():
    (v,) = check(load(DATA / "no_judge.dsl"), Bounds())
    assert v.status == UNSUPPORTED


def test_linkable_role():
    (v,) = check(load(DATA / "linkable.dsl"), Bounds())
    assert v.status == VIOLATED
    assert v.witness["kind"] == "equality"
    assert v.witness["frames"]["same"][-1] == v.witness["frames"]["same"][-2]


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_fixture_verdicts(name):
    ispec = load(fixture(name))
    verdicts = check(ispec, Bounds())
    assert [v.status for v in verdicts] == EXPECTED[name]
    system = System(ispec, Bounds())
    for v in verdicts:
        if v.status == VIOLATED and v.path and isinstance(v.witness, type(system.trace(system.root()))):
            trace = system.trace(replay(system, v.path))
            assert trace == v.witness
            assert not eval_formula(system.claims[v.claim_index][1], trace)


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_worker_counts_agree(name):
    ispec = load(fixture(name))
    base = [v.to_json() for v in check(ispec, Bounds(), workers=1)]
    for w in (2, 8):
        assert [v.to_json() for v in check(ispec, Bounds(), workers=w)] == base


def test_fixture_table_is_complete():
    assert set(EXPECTED) | SLOW == set(NAMES)
