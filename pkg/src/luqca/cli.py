"""Command-line front end.

Exit codes: 0 success, 1 semantic failure (a check or demo failed, a
definition is unusable, weight left the region), 2 parse error, 3 resource
error.  ``LUQCA_AMPLITUDE_CAP`` overrides the dense amplitude cap.
"""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import formats
from .core import (
    QUIESCENT,
    TORUS,
    DefinitionError,
    LuqcaError,
    ResourceError,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_RESOURCE = 0, 1, 2, 3


def _guard(func):
    """Map package errors to exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            code = func(*args, **kwargs)
        except formats.ModelFormatError as exc:
            click.echo(f"parse error: {exc}", err=True)
            ctx.exit(EXIT_PARSE)
        except (FileNotFoundError, IsADirectoryError) as exc:
            click.echo(f"parse error: {exc}", err=True)
            ctx.exit(EXIT_PARSE)
        except (ResourceError, MemoryError) as exc:
            click.echo(f"resource error: {exc}", err=True)
            ctx.exit(EXIT_RESOURCE)
        except (LuqcaError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_FAIL)
        ctx.exit(code or EXIT_OK)

    return wrapper


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise formats.ModelFormatError(f"expected comma-separated integers, got {text!r}") from exc


@click.group()
@click.version_option(package_name="artifact", prog_name="luqca")
def cli():
    """Simulate and check local unitary quantum cellular automata."""


# -- validate ---------------------------------------------------------------------------


@cli.command()
@click.argument("model", type=click.Path(dir_okay=False))
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for sampled classical configurations.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Also write the JSON report here.")
@_guard
def validate(model, tol, seed, fmt, out):
    """Unitarity, quiescence and translation commutation of a model file."""
    from .coloring import CqcaDefinition, validate_cqca
    from .validation import validate_definition

    m = formats.read_model(model)
    if isinstance(m.definition, CqcaDefinition):
        report = validate_cqca(m.definition, tol)
        passed = bool(report["passed"])
        data = {"model": m.kind, **report}
        text = [f"cqca {m.definition.name or ''}: {'PASS' if passed else 'FAIL'}",
                f"  coloring correct: {report['coloring']}"]
        for ph in report["phases"]:
            text.append("  phase {phase} colour {color}: ".format(**ph)
                        + ", ".join(f"{k}={v}" for k, v in ph.items()
                                    if k not in ("phase", "color")))
    else:
        rep = validate_definition(m.to_qca(), tol=tol, seed=seed)
        passed = rep.passed
        data = {"model": m.kind, **rep.as_dict()}
        text = [rep.summary()]
    if fmt == "json":
        click.echo(json.dumps(data, indent=1, default=str))
    else:
        click.echo("\n".join(text))
    if out:
        Path(out).write_text(json.dumps(data, indent=1, default=str) + "\n", encoding="utf-8")
    return EXIT_OK if passed else EXIT_FAIL


# -- run ---------------------------------------------------------------------------------


def _initial_state(init: str, region, qca, seed: int, cqca=None):
    from .state import SparseState, random_state

    layout = qca.layout if cqca is None else cqca.layout
    if init == "random":
        if layout.has_classical:
            raise DefinitionError("random initial states need a fully quantum layout")
        return random_state(region, layout, np.random.default_rng(seed))
    if init == "quiescent":
        q = qca.quiescent if cqca is None else None
        if q is None:
            raise DefinitionError("model has no quiescent state")
        return SparseState.basis(region, layout, [q] * region.n_cells)
    if init.startswith("basis:"):
        cells = _parse_ints(init[len("basis:"):])
        if len(cells) != region.n_cells:
            raise formats.ModelFormatError(
                f"basis initialiser lists {len(cells)} cells, region has {region.n_cells}")
        return SparseState.basis(region, layout, cells)
    if init.startswith("state:"):
        return formats.read_state(init[len("state:"):])
    raise formats.ModelFormatError(f"unknown initialiser {init!r}")


def _observable_columns(kind: str, layout):
    """Per-cell observable (a cell-basis matrix) for a named observable kind."""
    from .engine import population_observable, sz_observable

    names = [r.name for r in layout.registers]
    if kind == "auto":
        if "up" in names and "down" in names:
            kind = "walk"
        elif layout.registers[0].dim == 2 and not layout.registers[0].classical:
            kind = "sz"
        else:
            kind = "none"
    if kind == "none":
        return None, None
    if kind == "walk":
        return "walk-probability", (population_observable(layout, "up", 1)
                                    + population_observable(layout, "down", 1))
    if kind == "sz":
        return "sz", sz_observable(layout)
    raise formats.ModelFormatError(f"unknown observable {kind!r}")


@cli.command(name="run")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--region", "region_text", required=True,
              help="Cell count (8), box shape (4x4) or inclusive line range (-3:5).")
@click.option("--boundary", type=click.Choice([QUIESCENT, TORUS]), default=QUIESCENT,
              show_default=True)
@click.option("--steps", type=click.IntRange(min=0), default=1, show_default=True,
              help="Steps (periods for coloured models).")
@click.option("--init", default="random", show_default=True,
              help="random | quiescent | basis:i,j,... | state:FILE")
@click.option("--observable", default="auto", show_default=True,
              help="auto | sz | walk | none")
@click.option("--quiescent", type=int, default=None,
              help="Quiescent cell index for coloured models.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--tol", type=float, default=1e-9, show_default=True,
              help="Largest tolerated boundary leakage.")
@click.option("--seed", type=int, default=0, show_default=True)
@_guard
def run_cmd(model_path, region_text, boundary, steps, init, observable, quiescent, out, fmt,
            tol, seed):
    """Evolve an initial state and write a snapshot plus a per-step observable table."""
    from .coloring import CqcaDefinition, cqca_period
    from .engine import expectation, step

    m = formats.read_model(model_path)
    region = formats.parse_region(region_text, boundary)
    cqca = m.definition if isinstance(m.definition, CqcaDefinition) else None
    qca = None if cqca else m.to_qca()
    state = _initial_state(init, region, qca, seed, cqca)
    layout = state.layout
    kind, obs = _observable_columns(observable, layout)
    rows = []

    def record(s):
        if obs is not None:
            rows.append([s.t] + [expectation(s, c, obs) for c in region.cells])

    record(state)
    for _ in range(steps):
        if cqca is not None:
            state = cqca_period(state, cqca, 1, quiescent=quiescent, leak_tol=tol)
            state.t += 1
        else:
            state = step(state, qca, leak_tol=tol)
        record(state)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    snap = outdir / f"state.{fmt}"
    formats.write_state(snap, state, fmt)
    written = [snap]
    if obs is not None:
        table = outdir / "observables.csv"
        formats.write_table(table, kind, ["step"] + [formats.cell_label(c) for c in region.cells],
                            rows)
        written.append(table)
    click.echo(f"ran {steps} step(s) on {region.n_cells} cells; norm {state.norm:.15f}")
    for p in written:
        click.echo(f"wrote {p}")
    return EXIT_OK


# -- compile / encode ----------------------------------------------------------------------


@cli.command(name="compile")
@click.option("--model", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--region", "region_text", required=True)
@click.option("--boundary", type=click.Choice([QUIESCENT, TORUS]), default=QUIESCENT,
              show_default=True)
@click.option("--steps", type=click.IntRange(min=0), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_guard
def compile_cmd(model_path, region_text, boundary, steps, out):
    """Compile a region and time window into a layered circuit (JSON)."""
    from .compiler import compile_to_circuit, layers_per_step

    m = formats.read_model(model_path)
    region = formats.parse_region(region_text, boundary)
    circuit = compile_to_circuit(m.to_qca(), region, steps)
    formats.write_json(out, circuit.as_dict())
    click.echo(f"depth {circuit.depth} ({layers_per_step(circuit)} layers per step), "
               f"{circuit.n_wires} wires, {circuit.gate_count} gates")
    click.echo(f"wrote {out}")
    return EXIT_OK


@cli.command()
@click.argument("circuit_path", type=click.Path(dir_okay=False))
@click.option("--input", "input_bits", default=None,
              help="Computational basis input, e.g. 010 (default all zeros).")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_guard
def encode(circuit_path, input_bits, out):
    """Encode a nearest-neighbour qubit circuit into the universal 2D automaton."""
    from .compiler import Circuit, encode_circuit_as_qca

    try:
        circuit = Circuit.from_dict(formats.load_json(circuit_path))
    except (KeyError, TypeError) as exc:
        raise formats.ModelFormatError(f"invalid circuit document: {exc}") from exc
    circuit.check()
    vec = None
    if input_bits is not None:
        if len(input_bits) != circuit.n_wires or set(input_bits) - {"0", "1"}:
            raise formats.ModelFormatError("--input must be one bit per wire")
        vec = np.zeros(2**circuit.n_wires, dtype=np.complex128)
        vec[int(input_bits, 2) if input_bits else 0] = 1.0
    enc = encode_circuit_as_qca(circuit, input_state=vec)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    formats.write_json(outdir / "model.json", formats.universal_document())
    formats.write_state(outdir / "state.json", enc.initial, "json", threshold=0.0)
    formats.write_json(outdir / "encoding.json", {
        "steps": enc.steps, "wires": enc.wires, "columns": enc.columns,
        "region": formats.region_to_json(enc.initial.region),
        "output_cells": [list(c) for c in enc.output_cells]})
    click.echo(f"{enc.wires} wires, torus {enc.initial.region.shape}, run {enc.steps} steps; "
               f"output on cells {enc.output_cells}")
    click.echo(f"wrote {outdir}/model.json, state.json, encoding.json")
    return EXIT_OK


# -- demos --------------------------------------------------------------------------------


@cli.command()
@click.argument("name", type=click.Choice(["ising", "heisenberg", "walk", "amplify", "shift"]))
@click.option("--steps", type=click.IntRange(min=0), default=None,
              help="Steps for ising, walk and shift.")
@click.option("--s", "side", type=click.IntRange(min=2), default=3, show_default=True,
              help="Cube side for amplify.")
@click.option("--flip-set", default="-2,-1,0", show_default=True,
              help="Neighbour sums that flip a spin (amplify).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for the CSV time series.")
@_guard
def demo(name, steps, side, flip_set, seed, out):
    """Run a reference demonstration and report PASS or FAIL against its oracle."""
    from .demos import run_demo

    kwargs = {}
    if name in ("ising", "shift"):
        kwargs["seed"] = seed
    if name in ("ising", "walk", "shift") and steps is not None:
        kwargs["steps"] = steps
    if name == "amplify":
        kwargs.update(s=side, flip_set=tuple(_parse_ints(flip_set)))
    result = run_demo(name, **kwargs)
    click.echo("\n".join(result.lines()))
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / f"{name}.csv"
        formats.write_table(path, result.table_kind, result.columns, result.rows)
        click.echo(f"wrote {path}")
    return EXIT_OK if result.passed else EXIT_FAIL


def main(argv=None) -> int:
    """Console entry point."""
    try:
        cli.main(args=argv, prog_name="luqca", standalone_mode=True)
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
