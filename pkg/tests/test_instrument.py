import pytest

from protax.dsl import parse, parse_file
from protax.fixtures_path import NAMES, fixture
from protax.instrument import MissingHookEvent, UnplaceableEvent, check_instrumentation, instrument
from protax.ir import Event, Fresh, Let, Send


def _spec(name):
    return parse_file(fixture(name))


def test_signcryption_placement():
    ispec = instrument(_spec("signcryption"))
    steps = ispec.role_steps("S")
    i = next(i for i, s in enumerate(steps) if isinstance(s, Event) and s.label == "SignEvent")
    assert isinstance(steps[i - 1], Let) and steps[i - 1].term.fn == "sign"
    assert isinstance(steps[i + 1], Send)
    r = ispec.role_steps("R")
    assert isinstance(r[-1], Event) and r[-1].label == "ValidSig"
    assert isinstance(r[-2], Let) and r[-2].term.fn == "verify"


def test_secrecy_at_fresh():
    ispec = instrument(_spec("secrecy"))
    steps = ispec.role_steps("A")
    assert isinstance(steps[0], Fresh) and steps[0].var == "s"
    assert steps[1] == Event("SecretDecl", steps[1].args) and str(steps[1].args[0]) == "s"


def test_nsl_two_start_two_end():
    ispec = instrument(_spec("nsl"))
    assert not check_instrumentation(ispec)
    labels = sorted(ins.event.label.split("_")[0] for ins in ispec.inserted_events)
    assert labels == ["End", "End", "Start", "Start"]


def test_unforgeability_without_signing():
    src = '''protocol "P" { roles {
      S(a: identity) { fresh m; send m; }
      V(b: identity, a: identity) { recv x; }
    } claims { unforgeability(signer: S[a], verifier: V[a]); } }'''
    spec = parse(src)
    assert not isinstance(spec, list), spec
    with pytest.raises(UnplaceableEvent):
        instrument(spec)


def test_accountability_without_hooks():
    src = 'protocol "P" { roles { A() { fresh n; send n; } } claims { accountability(); } }'
    spec = parse(src)
    assert not isinstance(spec, list), spec
    with pytest.raises(MissingHookEvent):
        instrument(spec)


@pytest.mark.parametrize("name", NAMES)
def test_instrumentation_is_valid_and_idempotent(name):
    ispec = instrument(_spec(name))
    assert not check_instrumentation(ispec)
    again = instrument(ispec.materialize())
    assert not again.inserted_events
    assert again.materialize() == ispec.materialize()
    assert instrument(_spec(name)) == ispec
    # base steps keep their order
    for r in ispec.base.roles:
        assert [s for s in ispec.role_steps(r.name) if s in r.steps] == list(r.steps)
