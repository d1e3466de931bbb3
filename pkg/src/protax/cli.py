"""Command-line entry point: check, compile, explore and report.

Exit codes:
  0  success (for explore: no claim violated)
  1  diagnostics, a violated claim, or a model that fails the dialect checker
  2  input or output failure
  3  an external prover disagrees with the engine's verdicts (--with-provers only)
  4  exploration exceeded the configured bounds
"""

from __future__ import annotations

import json
import os
import re
import shutil
import subprocess
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import click

from . import taxonomy as tx
from .codegen import PROVERIF, TAMARIN, EmittedModel, UnsupportedForDialect, emit_proverif, emit_tamarin, wellformed
from .diagnostics import Diagnostic
from .dsl import parse
from .engine import HOLDS, VIOLATED, Bounds, BoundsExceeded, check
from .instrument import InstrumentationError, InstrumentedSpec, check_instrumentation, instrument
from .ir import ProtocolSpec

EXIT_OK, EXIT_FAIL, EXIT_IO, EXIT_GATE, EXIT_BOUNDS = 0, 1, 2, 3, 4

# environment variables naming prover binaries for gate mode
PROVER_ENV = {PROVERIF: "PROTAX_PROVERIF", TAMARIN: "PROTAX_TAMARIN"}
PROVER_DEFAULT = {PROVERIF: "proverif", TAMARIN: "tamarin-prover"}
EMITTERS = {PROVERIF: emit_proverif, TAMARIN: emit_tamarin}


@dataclass(frozen=True)
class RunConfig:
    command: str
    path: Path
    out: Path | None = None
    target: str = "both"
    bounds: Bounds | None = None
    json: bool = False
    external_gate: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.command == "compile" and self.out is None:
            raise ValueError("compile requires an output directory")
        if self.command == "explore" and self.bounds is None:
            raise ValueError("explore requires bounds")

    @property
    def dialects(self) -> list[str]:
        return [PROVERIF, TAMARIN] if self.target == "both" else [self.target]


class Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _err(msg: str) -> None:
    click.echo(msg, err=True)


def load(path: Path) -> tuple[ProtocolSpec, InstrumentedSpec]:
    """Parse, validate and instrument; diagnostics go to stderr as ``file:line:col``."""
    try:
        source = path.read_bytes()
    except OSError as e:
        _err(f"{path}: cannot read: {e.strerror or e}")
        raise Exit(EXIT_IO)
    result = parse(source, str(path))
    if isinstance(result, list):
        _print_diags(result)
        raise Exit(EXIT_FAIL)
    try:
        ispec = instrument(result)
    except InstrumentationError as e:
        _err(f"{path}:1:1: error: {e}")
        raise Exit(EXIT_FAIL)
    report = check_instrumentation(ispec)
    _print_diags(list(ispec.warnings) + list(report.diagnostics))
    if not report.ok:
        raise Exit(EXIT_FAIL)
    return result, ispec


def _print_diags(diags: list[Diagnostic]) -> None:
    for d in diags:
        _err(d.format())


# -- commands -----------------------------------------------------------------------------------

def cmd_check(cfg: RunConfig) -> int:
    spec, ispec = load(cfg.path)
    if not cfg.json:
        click.echo(f"{cfg.path}: ok ({len(spec.roles)} roles, {len(spec.claims)} claims, "
                   f"{len(ispec.inserted_events)} inserted events)")
    else:
        click.echo(json.dumps({"ok": True, "roles": len(spec.roles), "claims": len(spec.claims),
                               "inserted_events": len(ispec.inserted_events)}, sort_keys=True))
    return EXIT_OK


def emit(ispec: InstrumentedSpec, dialects) -> list[EmittedModel]:
    out = []
    for d in dialects:
        try:
            model = EMITTERS[d](ispec)
        except UnsupportedForDialect as e:
            _err(f"{d}: {e}")
            raise Exit(EXIT_FAIL)
        report = wellformed(model)
        if report:
            for diag in report:
                _err(diag.format())
            raise Exit(EXIT_FAIL)
        out.append(model)
    return out


def cmd_compile(cfg: RunConfig) -> int:
    _, ispec = load(cfg.path)
    models = emit(ispec, cfg.dialects)
    code = EXIT_OK
    if cfg.external_gate:
        expected = {v.claim_index: v.status for v in check(ispec, cfg.bounds or Bounds(), cfg.workers)}
        gated = []
        for m in models:
            m, disagree = gate(m, expected, cfg.out)
            gated.append(m)
            if disagree:
                code = EXIT_GATE
        models = gated
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        for m in models:
            (cfg.out / m.filename).write_text(m.text, encoding="utf-8")
            (cfg.out / (m.filename + ".prov.json")).write_text(m.provenance_json(), encoding="utf-8")
            if not cfg.json:
                click.echo(f"wrote {cfg.out / m.filename}")
    except OSError as e:
        _err(f"{cfg.out}: cannot write: {e.strerror or e}")
        return EXIT_IO
    if cfg.json:
        click.echo(json.dumps({"written": [m.filename for m in models]}, sort_keys=True))
    return code


def cmd_explore(cfg: RunConfig) -> int:
    _, ispec = load(cfg.path)
    try:
        verdicts = check(ispec, cfg.bounds, cfg.workers)
    except BoundsExceeded as e:
        _err(f"bounds exceeded: {e}")
        return EXIT_BOUNDS
    warnings = []
    if cfg.bounds.sessions_per_role == 0:
        warnings.append("sessions=0: no sessions explored, every verdict is vacuous")
        _err("warning: " + warnings[0])
    if cfg.json:
        out = {"claims": [v.to_json() for v in verdicts], "bounds": cfg.bounds.to_json()}
        if warnings:
            out["warnings"] = warnings
        click.echo(json.dumps(out, indent=2, sort_keys=True))
    else:
        b = cfg.bounds
        click.echo(f"bounds: sessions={b.sessions_per_role} depth={b.attacker_recipe_depth} max-trace={b.max_trace_length}")
        for v in verdicts:
            click.echo(f"[{v.claim_index}] {v.kind.category}/{v.kind.keyword}: {v.status}")
            for n in v.notes:
                click.echo(f"    note: {n}")
            if v.status == VIOLATED:
                _print_witness(v.to_json()["witness"])
    return EXIT_FAIL if any(v.status == VIOLATED for v in verdicts) else EXIT_OK


def _print_witness(w: dict) -> None:
    if "events" in w:
        click.echo("    attack:")
        for s in w["steps"]:
            who = s.get("self", "")
            peers = ", ".join(f"{k}={v}" for k, v in sorted(s.get("peers", {}).items()))
            head = f"{s['move']} {s.get('instance', s.get('principal', ''))}"
            if who or peers:
                head += f" ({', '.join(x for x in (who and f'self={who}', peers) if x)})"
            if "input" in s:
                head += f" <- {s['input']}"
            click.echo(f"      {head}")
        click.echo("    events:")
        for e in w["events"]:
            click.echo(f"      {e['t']}: {e['event']}({', '.join(e['args'])})")
    else:
        click.echo("    distinguisher: " + json.dumps(w, sort_keys=True))


def classify(spec: ProtocolSpec) -> dict:
    cats: dict[str, list] = {c: [] for c in tx.CATEGORIES}
    for i, c in enumerate(spec.claims):
        cats[c.kind.category].append({"claim": i, "kind": c.kind.keyword, "leaf": str(c.kind)})
    return {"protocol": spec.name, "categories": {c: v for c, v in cats.items() if v},
            "uncovered": [c for c, v in cats.items() if not v]}


def cmd_report(cfg: RunConfig) -> int:
    spec, _ = load(cfg.path)
    rep = classify(spec)
    if cfg.json:
        click.echo(json.dumps(rep, indent=2, sort_keys=True))
        return EXIT_OK
    click.echo(f"protocol {rep['protocol']}")
    for cat in tx.CATEGORIES:
        rows = rep["categories"].get(cat)
        if rows:
            kinds = sorted({r["kind"] for r in rows})
            click.echo(f"{cat}: {len(kinds)} kind{'s' if len(kinds) != 1 else ''} claimed: {', '.join(kinds)}")
    for cat in rep["uncovered"]:
        click.echo(f"no {cat} claim")
    return EXIT_OK


# -- external prover gate ----------------------------------------------------------------------

def prover_binary(dialect: str) -> str | None:
    env = os.environ.get(PROVER_ENV[dialect])
    if env:
        return env if Path(env).exists() else shutil.which(env)
    return shutil.which(PROVER_DEFAULT[dialect])


def parse_prover_output(dialect: str, model: EmittedModel, output: str) -> dict[str, str]:
    """Per-query verdicts ``true``/``false``/``inconclusive`` keyed by provenance name."""
    verdicts: dict[str, str] = {}
    if dialect == PROVERIF:
        names = [p.name for p in model.provenance if p.name and p.kind != "unlinkability"]
        equiv = [f"unlinkability_{p.claim}" for p in model.provenance if p.kind == "unlinkability"]
        results = re.findall(r"^RESULT (.*?) (is true|is false|cannot be proved)", output, flags=re.M)
        trace_results = [r for r in results if "equivalence" not in r[0]]
        equiv_results = [r for r in results if "equivalence" in r[0]]
        for name, (_, res) in zip(names, trace_results):
            verdicts[name] = _verdict_word(res)
        for name, (_, res) in zip(equiv, equiv_results):
            verdicts[name] = _verdict_word(res)
    else:
        for name, res in re.findall(r"^\s*(\w+) \((?:all-traces|exists-trace)\): (verified|falsified|analysis incomplete)",
                                    output, flags=re.M):
            verdicts[name] = {"verified": "true", "falsified": "false"}.get(res, "inconclusive")
    return verdicts


def _verdict_word(res: str) -> str:
    return {"is true": "true", "is false": "false"}.get(res, "inconclusive")


def gate(model: EmittedModel, expected: dict[int, str], workdir: Path) -> tuple[EmittedModel, bool]:
    """Run an installed prover on ``model``; returns the model with verdicts and a disagreement flag."""
    binary = prover_binary(model.dialect)
    if binary is None:
        _err(f"{model.dialect}: prover not found, gate skipped")
        return model, False
    workdir.mkdir(parents=True, exist_ok=True)
    path = workdir / model.filename
    path.write_text(model.text, encoding="utf-8")
    cmd = [binary, str(path)] if model.dialect == PROVERIF else [binary, "--prove", str(path)]
    if model.dialect == TAMARIN and "diff(" in model.text:
        cmd.insert(1, "--diff")
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=3600)
    except (OSError, subprocess.TimeoutExpired) as e:
        _err(f"{model.dialect}: prover failed: {e}")
        return model, True
    if proc.returncode != 0:
        _err(f"{model.dialect}: prover rejected {path} (exit {proc.returncode})")
        return model, True
    verdicts = parse_prover_output(model.dialect, model, proc.stdout)
    disagree = False
    for p in model.provenance:
        name = p.name or f"unlinkability_{p.claim}"
        got = verdicts.get(name)
        want = {HOLDS: "true", VIOLATED: "false"}.get(expected.get(p.claim))
        if got in ("true", "false") and want is not None and got != want:
            _err(f"{model.dialect}: {name}: prover says {got}, engine says {expected[p.claim]}")
            disagree = True
    return replace(model, verdicts=verdicts), disagree


# -- click wiring ------------------------------------------------------------------------------

def _run(fn, cfg: RunConfig) -> None:
    try:
        code = fn(cfg)
    except Exit as e:
        code = e.code
    sys.exit(code)


_bounds_options = [
    click.option("--sessions", default=2, show_default=True, type=click.IntRange(min=0), help="Sessions per role."),
    click.option("--depth", default=4, show_default=True, type=click.IntRange(min=0), help="Attacker recipe depth."),
    click.option("--max-trace", default=24, show_default=True, type=click.IntRange(min=0), help="Maximum events per trace."),
    click.option("--workers", default=1, show_default=True, type=click.IntRange(min=1), help="Exploration processes."),
]


def bounds_options(f):
    for opt in reversed(_bounds_options):
        f = opt(f)
    return f


_path_arg = click.argument("path", type=click.Path(path_type=Path, dir_okay=False))
_json_opt = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Protocol property taxonomy toolkit."""


@main.command("check")
@_path_arg
@_json_opt
def check_cmd(path, as_json):
    """Parse, validate and instrument a protocol file."""
    _run(cmd_check, RunConfig("check", path, json=as_json))


@main.command("compile")
@_path_arg
@click.option("--target", type=click.Choice(["proverif", "tamarin", "both"]), default="both", show_default=True)
@click.option("--out", type=click.Path(path_type=Path, file_okay=False), required=True, help="Output directory.")
@click.option("--with-provers", is_flag=True, help="Run installed provers and compare verdicts.")
@bounds_options
@_json_opt
def compile_cmd(path, target, out, with_provers, sessions, depth, max_trace, workers, as_json):
    """Emit ProVerif and/or Tamarin models with provenance sidecars."""
    _run(cmd_compile, RunConfig("compile", path, out, target, Bounds(sessions, depth, max_trace), as_json,
                                with_provers, workers))


@main.command("explore")
@_path_arg
@bounds_options
@_json_opt
def explore_cmd(path, sessions, depth, max_trace, workers, as_json):
    """Check every claim by bounded Dolev-Yao exploration."""
    _run(cmd_explore, RunConfig("explore", path, bounds=Bounds(sessions, depth, max_trace), json=as_json,
                                workers=workers))


@main.command("report")
@_path_arg
@_json_opt
def report_cmd(path, as_json):
    """Classify the claims of a protocol by taxonomy category."""
    _run(cmd_report, RunConfig("report", path, json=as_json))


if __name__ == "__main__":
    main()
