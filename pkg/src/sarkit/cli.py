"""Command-line entry point: ``sarkit <stage> --scenario FILE [options]``."""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import fileio, pipeline
from .scenario import load_scenario

MODES = ("mono", "bistatic", "both")


def _fail(stage: str, exc: Exception):
    rec = {"error": type(exc).__name__, "message": str(exc), "stage": stage}
    click.echo(json.dumps(rec, sort_keys=True), err=True)
    sys.exit(1)


def _stage(fn):
    """Common options plus the machine-readable error record on failure."""
    @click.option("--scenario", "scenario_path", required=True, help="Scenario TOML file or shipped name.")
    @click.option("--seed", type=int, default=None, help="Override the scenario seed.")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                  help="Output directory (default: out/<scenario name>).")
    @click.option("--mode", type=click.Choice(MODES), default="both", show_default=True)
    @click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
    @functools.wraps(fn)
    def wrapper(scenario_path, seed, out_dir, mode, threads, **kw):
        stage = fn.__name__.rstrip("_")
        try:
            sc = load_scenario(scenario_path)
            if seed is not None:
                sc = sc.with_seed(seed)
            out = Path(out_dir) if out_dir else Path("out") / sc.name
            out.mkdir(parents=True, exist_ok=True)
            fn(sc=sc, out=out, mode=mode, threads=threads, **kw)
        except SystemExit:
            raise
        except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
            _fail(stage, exc)
    return wrapper


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Multistatic OFDM radar simulation and coherent SAR processing."""


@main.command()
@_stage
def simulate(sc, out, mode, threads):
    """Simulate all receivers and write their captures."""
    caps = pipeline.simulate(sc, threads=threads)
    for p in pipeline.write_captures(caps, out):
        click.echo(str(p))


@main.command()
@_stage
def trigger(sc, out, mode, threads):
    """Detect PN preambles in a stream built from the captures."""
    caps = pipeline.read_captures(out)
    records, windows = pipeline.run_trigger(sc, caps)
    for rid, (w_det, w_other) in windows.items():
        fs = caps[rid].fs
        fileio.write_array(out / f"trigger_{rid}_detect.bin", w_det, fs, 0.0, {"rx": rid})
        if w_other is not None:
            fileio.write_array(out / f"trigger_{rid}_radar.bin", w_other, fs, 0.0, {"rx": rid})
    click.echo(str(fileio.write_jsonl(out / "trigger_events.jsonl", records)))


@main.command()
@_stage
def process(sc, out, mode, threads):
    """Range-compress the captures (mono and/or sidelink-corrected bistatic)."""
    for rid, cap in pipeline.read_captures(out).items():
        m = pipeline.mode_for(cap, mode)
        if m is not None:
            click.echo(str(pipeline.write_profiles(pipeline.process(cap, sc, m), out)))


def _profile_sets(out: Path, mode: str) -> list:
    sets = [pipeline.read_profiles(p) for p in sorted(out.glob("profiles_*.bin"))]
    want = {"mono": ("mono",), "bistatic": ("bistatic",), "both": ("mono", "bistatic")}[mode]
    sets = [s for s in sets if s.mode in want]
    if not sets:
        raise FileNotFoundError(f"no {mode} range profiles in {out}; run 'process' first")
    return sets


@main.command()
@_stage
def image(sc, out, mode, threads):
    """Backproject every profile set; combine when both geometries are present."""
    images = []
    for ps in _profile_sets(out, mode):
        im = pipeline.form_image(ps, sc, threads=threads)
        images.append(im)
        for p in pipeline.write_image(im, out, f"image_{ps.rx_id}_{ps.mode}", sc):
            click.echo(str(p))
    if len(images) > 1:
        for name, fn in (("coherent", pipeline.combine_coherent), ("absolute", pipeline.combine_absolute)):
            for p in pipeline.write_image(pipeline._q(fn(images)), out, f"image_combined_{name}", sc):
                click.echo(str(p))


@main.command()
@_stage
def metrics(sc, out, mode, threads):
    """Coherence, peak-position and resolution report."""
    records = []
    for ps in _profile_sets(out, mode):
        rec = {"rx": ps.rx_id, "mode": ps.mode, **pipeline.coherence_record(ps, sc)}
        path = out / f"image_{ps.rx_id}_{ps.mode}.bin"
        if path.exists():
            im = pipeline.read_image(path)
            rec["targets"] = pipeline.target_metrics(im, sc)
            rec["pixel"] = max(im.grid.du, im.grid.dv)
            pt = pipeline.central_target(sc)
            if pt is not None and np.any(im.A):
                rec["resolution"] = pipeline.cut_record(im, pipeline.metrics.image_peak(im, pt, 0.5)[0])
        records.append(rec)
        click.echo(fileio.dumps(rec))
    fileio.write_jsonl(out / "metrics.jsonl", records)


@main.command()
@_stage
def budget(sc, out, mode, threads):
    """Duty cycle, data rate, clock-offset limits and timing budgets."""
    rep = pipeline.budget_report(sc)
    fileio.write_jsonl(out / "budget.jsonl", [rep])
    for k in sorted(rep):
        click.echo(f"{k} = {rep[k]:.6g}")


@main.command()
@click.argument("figure_id")
@click.option("--values", default=None, help="Comma-separated sweep values overriding the default.")
@_stage
def figure(sc, out, mode, threads, figure_id, values):
    """One-shot pipeline for a figure analogue (7/ideal, sfo, 8/cfo, 9/cpe, 10/to, 11/loc, coherence, combine)."""
    vals = None if values is None else [float(v) for v in values.split(",") if v.strip()]
    res = pipeline.run_figure(sc, figure_id, threads=threads, values=vals)
    for p in pipeline.write_figure(res, out / f"figure_{res.figure}", sc):
        click.echo(str(p))


if __name__ == "__main__":
    main()
