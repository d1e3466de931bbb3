import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from protax.diagnostics import Diagnostic
from protax.dsl import parse, parse_file, pretty, tokenize
from protax.fixtures_path import NAMES, fixture
from protax.ir import Fresh, ProtocolSpec, Send, validate_spec

MINIMAL = 'protocol "P" { roles { A() { fresh n; send n; } } }'


def test_minimal_source():
    spec = parse(MINIMAL)
    assert isinstance(spec, ProtocolSpec)
    (role,) = spec.roles
    assert [type(s) for s in role.steps] == [Fresh, Send]


def test_nsl_fixture_roles_and_claims():
    spec = parse_file(fixture("nsl"))
    assert [r.name for r in spec.roles] == ["A", "B"]
    assert [c.kind.keyword for c in spec.claims] == [
        "aliveness", "weak_agreement", "non_injective_agreement", "injective_agreement"]


def test_unbalanced_brace_reports_at_end():
    src = 'protocol "P" { roles { A() { fresh n; send n; } }'
    out = parse(src)
    assert isinstance(out, list) and out
    assert out[0].span.start == (1, len(src) + 1)


def test_errors_collected_independently():
    src = 'protocol "P" { roles { A() { send x; } B() { send y; } } }'
    out = parse(src)
    assert isinstance(out, list)
    assert len(out) >= 2


def test_unknown_function():
    out = parse('protocol "P" { roles { A() { fresh n; send h2(n); } } }')
    assert any("unknown function" in d.message for d in out)


def test_category_claim_rejected():
    src = 'protocol "P" { roles { A() { fresh n; send n; } } claims { privacy(); } }'
    out = parse(src)
    assert any("category is not a checkable kind; choose anonymity or unlinkability" in d.message for d in out)


def test_keyword_role_name_rejected():
    assert isinstance(parse('protocol "P" { roles { fresh() { } } }'), list)


def test_comments_are_ignored():
    src = '// header\nprotocol "P" { // tail\n roles { A() { fresh n; send n; } } }'
    assert parse(src) == parse(MINIMAL)


def test_diagnostic_format():
    (d, *_) = parse('protocol "P" {', "x.dsl")
    assert d.format().startswith("x.dsl:1:")


@pytest.mark.parametrize("name", NAMES)
def test_fixture_round_trip(name):
    spec = parse_file(fixture(name))
    assert isinstance(spec, ProtocolSpec), spec
    assert not validate_spec(spec).errors
    text = pretty(spec)
    again = parse(text)
    assert again == spec
    assert pretty(again) == text


def test_fixture_count():
    assert len(NAMES) == 17


def test_pretty_is_deterministic():
    s1, s2 = parse(MINIMAL), parse(MINIMAL.replace(" ", "  "))
    assert s1 == s2
    assert pretty(s1) == pretty(s2)


def _spans_inside(diags, source):
    lines = source.split("\n")
    for d in diags:
        assert isinstance(d, Diagnostic)
        assert d.span is not None
        line, col = d.span.start
        assert 1 <= line <= len(lines)
        assert 1 <= col <= len(lines[line - 1]) + 1


@settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.binary(max_size=200))
def test_parse_total_on_bytes(data):
    out = parse(data)
    assert isinstance(out, (ProtocolSpec, list))


SOURCE = fixture("signcryption").read_text()


@settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, len(SOURCE)), st.integers(0, 40), st.text(max_size=8))
def test_parse_total_on_mutations(pos, cut, insert):
    src = SOURCE[:pos] + insert + SOURCE[pos + cut:]
    out = parse(src)
    if isinstance(out, list):
        assert out
        _spans_inside(out, src)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80))
def test_lexer_total(text):
    try:
        tokenize(text)
    except Exception as e:  # lexical errors must surface as diagnostics, not crashes
        pytest.fail(f"tokenize raised {e!r}")
