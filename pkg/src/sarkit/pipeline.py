"""Experiment stages shared by the CLI and the in-memory figure runners.

Every stage rounds its output to complex64 at the same point whether the
result is written to disk or handed on in memory, so a file-based run and a
figure run produce identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import fileio, metrics
from .channel import (ErrorConfig, Measurement, cfo_limit, iter_campaign, perturb_localization,
                      sfo_limit, spawn_rng)
from .imaging import (SarImage, aligned_samples, backproject, combine_absolute, combine_coherent,
                      image_cut)
from .rangeproc import RangeProfile, process_measurement
from .scene import Scene, Trajectory
from .scenario import Scenario
from .signal import C0, ComplexSignal
from .trigger import correlate_detect, extract_window, generate_pn
from .waveform import (duty_cycle, effective_bandwidth_chirp, generate_code, mean_data_rate,
                       timing_budget)

_KIND_TRIGGER = 5


# ---------------------------------------------------------------- simulate

@dataclass
class Capture:
    """All measurements of one receiver, rounded to complex64."""

    rx_id: str
    monostatic: bool
    radar: np.ndarray
    sidelink: Optional[np.ndarray]
    fs: float
    t0: float
    fc: float
    truth: list

    def measurement(self, m: int, f_prf: float) -> Measurement:
        def sig(a):
            return ComplexSignal(a[m].astype(np.complex128), self.fs, self.t0, self.fc)
        sl = None if self.sidelink is None else sig(self.sidelink)
        return Measurement(m, m / f_prf, self.rx_id, sig(self.radar), sl, self.truth[m])


def simulate(sc: Scenario, *, errors: Optional[ErrorConfig] = None, scene: Optional[Scene] = None,
             receivers: Optional[list] = None, threads: int = 1) -> dict:
    scene = scene or sc.scene
    errors = errors or sc.errors
    code = generate_code(sc.params, sc.seed)
    ids = receivers or [r.node_id for r in scene.rx]
    n = sc.params.n_symbol
    bufs = {}
    for rid in ids:
        mono = scene.is_monostatic(scene.receiver(rid))
        bufs[rid] = Capture(rid, mono, np.empty((sc.M, n), np.complex64),
                            None if mono else np.empty((sc.M, n), np.complex64), 0.0, 0.0, 0.0, [])
    for meas in iter_campaign(scene, sc.params, errors, sc.M, code=code, threads=threads, receivers=ids):
        cap = bufs[meas.rx_id]
        cap.radar[meas.m] = meas.rx_radar.samples
        if cap.sidelink is not None:
            cap.sidelink[meas.m] = meas.rx_sidelink.samples
        cap.fs, cap.t0, cap.fc = meas.rx_radar.fs, meas.rx_radar.t0, meas.rx_radar.fc
        cap.truth.append(_truth_record(meas))
    return bufs


def _truth_record(meas: Measurement) -> dict:
    t = meas.truth
    return {"m": meas.m, "rx": meas.rx_id, "target_tofs": np.asarray(t["target_tofs"]).tolist(),
            "sidelink_tof": t["sidelink_tof"], "cpe": float(t["cpe"]), "to": float(t["to"])}


def write_captures(caps: dict, out: Path) -> list:
    paths = []
    for rid, cap in caps.items():
        meta = {"rx": rid, "monostatic": cap.monostatic, "fc": cap.fc, "channel": "radar"}
        paths.append(fileio.write_array(out / f"capture_{rid}_radar.bin", cap.radar, cap.fs, cap.t0, meta))
        if cap.sidelink is not None:
            meta = dict(meta, channel="sidelink")
            paths.append(fileio.write_array(out / f"capture_{rid}_sidelink.bin", cap.sidelink, cap.fs, cap.t0, meta))
        paths.append(fileio.write_jsonl(out / f"truth_{rid}.jsonl", cap.truth))
    return paths


def read_captures(out: Path) -> dict:
    caps = {}
    for p in sorted(out.glob("capture_*_radar.bin")):
        radar, h = fileio.read_array(p)
        meta = h["meta"]
        rid = meta["rx"]
        sl_path = out / f"capture_{rid}_sidelink.bin"
        sidelink = fileio.read_array(sl_path)[0] if sl_path.exists() else None
        caps[rid] = Capture(rid, meta["monostatic"], radar, sidelink, h["axis_scale"], h["t0"], meta["fc"],
                            fileio.read_jsonl(out / f"truth_{rid}.jsonl"))
    if not caps:
        raise FileNotFoundError(f"no captures in {out}; run 'simulate' first")
    return caps


# ---------------------------------------------------------------- process

@dataclass
class ProfileSet:
    """Range profiles of one receiver in one processing mode, rounded to complex64."""

    rx_id: str
    mode: str
    R: np.ndarray
    m: np.ndarray
    cell_size: float
    domain: str
    oversample: int
    bandwidth: float
    gain: float

    def profiles(self, rows=None) -> list:
        rows = range(len(self.m)) if rows is None else rows
        return [RangeProfile(self.R[k].astype(np.complex128), self.cell_size, self.domain, int(self.m[k]),
                             self.oversample, self.bandwidth, self.gain) for k in rows]

    def meta(self) -> dict:
        return {"rx": self.rx_id, "mode": self.mode, "m": self.m, "cell_size": self.cell_size,
                "domain": self.domain, "oversample": self.oversample, "bandwidth": self.bandwidth,
                "gain": self.gain}


def mode_for(cap: Capture, flag: str) -> Optional[str]:
    """Processing mode of a receiver under the --mode flag (None = skip)."""
    if cap.monostatic:
        return "mono" if flag in ("mono", "both") else None
    return "bistatic" if flag in ("bistatic", "both") else None


def process(cap: Capture, sc: Scenario, mode: str) -> ProfileSet:
    code = generate_code(sc.params, sc.seed)
    R = np.empty((sc.M, sc.params.N * sc.oversample), np.complex64)
    prof = None
    for m in range(sc.M):
        prof = process_measurement(cap.measurement(m, sc.params.f_prf), sc.params, code, mode=mode,
                                   R_cal_hat=sc.R_cal_hat, window=sc.window, oversample=sc.oversample)
        R[m] = prof.r
    return ProfileSet(cap.rx_id, mode, R, np.arange(sc.M), prof.cell_size, prof.domain, prof.oversample,
                      prof.bandwidth, prof.gain)


def write_profiles(ps: ProfileSet, out: Path) -> Path:
    return fileio.write_array(out / f"profiles_{ps.rx_id}_{ps.mode}.bin", ps.R, ps.cell_size, 0.0, ps.meta())


def read_profiles(path) -> ProfileSet:
    R, h = fileio.read_array(path)
    md = h["meta"]
    return ProfileSet(md["rx"], md["mode"], R, np.asarray(md["m"], dtype=int), md["cell_size"], md["domain"],
                      md["oversample"], md["bandwidth"], md["gain"])


# ---------------------------------------------------------------- image

def reported_trajectories(sc: Scenario, rx_id: str, loc_sigma: Optional[float] = None,
                          seed: Optional[int] = None) -> tuple:
    """Transmitter and receiver paths as the processor sees them (with localization errors).

    A receiver flying exactly the transmitter's path is taken to share its
    navigation solution and therefore its position error.
    """
    scene = sc.scene
    sigma = sc.errors.loc_sigma if loc_sigma is None else loc_sigma
    seed = sc.seed if seed is None else seed
    win = sc.errors.loc_window
    tx = perturb_localization(scene.tx, sigma, win, seed, stream=0)
    rx_true = scene.receiver(rx_id)
    if scene.is_monostatic(rx_true):
        return tx, None
    if np.array_equal(rx_true.pos, scene.tx.pos) and np.array_equal(rx_true.t, scene.tx.t):
        return tx, Trajectory(tx.t, tx.pos, rx_id)
    idx = [r.node_id for r in scene.rx].index(rx_id)
    return tx, perturb_localization(rx_true, sigma, win, seed, stream=idx + 1)


def _bp_mode(ps: ProfileSet) -> str:
    return "bistatic" if ps.mode == "bistatic" else "mono"


def form_image(ps: ProfileSet, sc: Scenario, *, rows=None, threads: int = 1,
               loc_sigma: Optional[float] = None, seed: Optional[int] = None, grid=None) -> SarImage:
    tx, rx = reported_trajectories(sc, ps.rx_id, loc_sigma, seed)
    im = backproject(ps.profiles(rows), tx, rx, grid or sc.grid, sc.params, _bp_mode(ps), threads=threads)
    prov = "bistatic" if ps.mode == "bistatic" else "mono"
    return SarImage(im.A.astype(np.complex64), im.grid, prov, im.M_used, im.n_outside)


def _q(im: SarImage) -> SarImage:
    return SarImage(im.A.astype(np.complex64), im.grid, im.provenance, im.M_used, im.n_outside)


def write_image(im: SarImage, out: Path, stem: str, sc: Scenario) -> list:
    g = im.grid
    meta = {"provenance": im.provenance, "M_used": im.M_used, "n_outside": im.n_outside,
            "origin": g.origin, "u_axis": g.u_axis, "v_axis": g.v_axis, "du": g.du, "dv": g.dv}
    paths = [fileio.write_array(out / f"{stem}.bin", im.A, g.du, 0.0, meta)]
    if not np.any(im.A):
        return paths
    if sc.csv:
        paths.append(fileio.write_csv(out / f"{stem}.csv", im))
    if sc.pgm:
        paths.append(fileio.write_pgm(out / f"{stem}.pgm", im))
    return paths


def read_image(path) -> SarImage:
    from .imaging import PixelGrid
    A, h = fileio.read_array(path)
    md = h["meta"]
    g = PixelGrid(md["origin"], md["u_axis"], md["v_axis"], md["du"], md["dv"], A.shape[0], A.shape[1])
    return SarImage(A, g, md["provenance"], md["M_used"], md["n_outside"])


# ---------------------------------------------------------------- metrics

def central_target(sc: Scenario):
    """Target closest to the grid centre (the reference for coherence and cuts)."""
    if not sc.scene.targets:
        return None
    g = sc.grid
    c = g.point((g.Nu - 1) / 2, (g.Nv - 1) / 2)
    return min(sc.scene.targets, key=lambda t: np.linalg.norm(t.pos - c)).pos


def target_metrics(im: SarImage, sc: Scenario, radius: float = 0.5, reference: Optional[SarImage] = None) -> list:
    out = []
    for t in sc.scene.targets:
        if not im.grid.contains(t.pos):
            continue
        point, mag = metrics.image_peak(im, t.pos, radius)
        rec = {"truth": t.pos, "peak": mag, "pos_err": float(np.hypot(*(point - t.pos)[:2]))}
        if reference is not None:
            _, ref = metrics.image_peak(reference, t.pos, radius)
            rec["peak_db"] = float(20 * np.log10(mag / ref)) if mag > 0 and ref > 0 else None
        out.append(rec)
    return out


def coherence_record(ps: ProfileSet, sc: Scenario, rows=None, loc_sigma=None, seed=None) -> dict:
    pt = central_target(sc)
    if pt is None:
        return {}
    tx, rx = reported_trajectories(sc, ps.rx_id, loc_sigma, seed)
    s = aligned_samples(ps.profiles(rows), tx, rx, pt, sc.params, _bp_mode(ps))
    if not np.any(s):
        return {"gamma_cf": None, "M": int(s.size)}
    return {"gamma_cf": metrics.coherence_factor(s), "M": int(s.size), "target": pt}


def cut_record(im: SarImage, point) -> dict:
    rec = {}
    for axis in ("cross-range", "ground-range"):
        try:
            rec[axis] = metrics.resolution_3db(image_cut(im, axis, point))
        except ValueError:
            rec[axis] = None
    return rec


# ---------------------------------------------------------------- budget

def budget_report(sc: Scenario) -> dict:
    p, b = sc.params, sc.budget
    gamma = duty_cycle(p.T + p.T_cp, p.T_pri)
    tb = timing_budget(b.dR_max, p.T_pri, b.v_max)
    return {
        "B": p.B, "fs": p.fs, "T_pri": p.T_pri,
        "duty_cycle": gamma, "duty_cycle_percent": 100 * gamma,
        "data_rate_bps": mean_data_rate(p.fs, p.nu, gamma, b.streams), "streams": b.streams,
        "f_sfo_max": sfo_limit(p), "f_cfo_max": cfo_limit(p),
        "dR_max": b.dR_max, "lambda_over_10": p.wavelength / 10, "v_max": b.v_max,
        "dt_sync": tb.dt_sync, "dt_pri": tb.dt_pri, "dt_loc": tb.dt_loc,
        "B_eff_chirp_at_T_cp": effective_bandwidth_chirp(p.T, p.T_cp, p.B),
        "range_cell_mono": C0 / (2 * p.B), "wavelength": p.wavelength,
    }


# ---------------------------------------------------------------- trigger

def run_trigger(sc: Scenario, caps: dict) -> tuple:
    """Embed captured segments behind a PN preamble, detect, and cut them out again.

    The stream uses a compressed PRI of ``trigger.pri_samples``; detection runs
    on the sidelink channel when there is one and the window is applied to
    both channels.
    """
    tc = sc.trigger
    pn = generate_pn(tc.order, sc.seed)
    L, n = len(pn), sc.params.n_symbol
    frames = min(tc.frames, sc.M)
    records, windows = [], {}
    for i, (rid, cap) in enumerate(sorted(caps.items())):
        ref = cap.sidelink if cap.sidelink is not None else cap.radar
        rng = spawn_rng(sc.seed, i, 0, _KIND_TRIGGER)
        starts = rng.integers(0, tc.pri_samples - L - n + 1, size=frames)
        total = frames * tc.pri_samples
        det = np.zeros(total, np.complex128)
        other = np.zeros(total, np.complex128) if cap.sidelink is not None else None
        amp = float(np.sqrt(np.mean(np.abs(ref[:frames].astype(np.complex128)) ** 2)))
        expected = []
        for f in range(frames):
            k = f * tc.pri_samples + int(starts[f])
            expected.append(k)
            det[k : k + L] = amp * pn.chips
            det[k + L : k + L + n] = ref[f]
            if other is not None:
                other[k + L : k + L + n] = cap.radar[f]
        if tc.snr_db is not None:
            std = amp * 10 ** (-tc.snr_db / 20)
            for buf in (det, other):
                if buf is not None:
                    buf += std * (rng.standard_normal(total) + 1j * rng.standard_normal(total)) / math.sqrt(2)
        stream = ComplexSignal(det, cap.fs)
        events = correlate_detect(stream, pn, tc.threshold)
        win_det, win_other = [], []
        for ev in events:
            try:
                win_det.append(extract_window(stream, ev, L, n).samples)
                if other is not None:
                    win_other.append(extract_window(ComplexSignal(other, cap.fs), ev, L, n).samples)
            except IndexError:
                continue
        for ev in events:
            near = min(expected, key=lambda k: abs(k - ev.index))
            records.append({"rx": rid, "index": ev.index, "score": ev.score, "expected": near,
                            "offset": ev.index - near})
        windows[rid] = (np.array(win_det, np.complex64).reshape(-1, n),
                        None if other is None else np.array(win_other, np.complex64).reshape(-1, n))
        records.append({"rx": rid, "summary": True, "frames": frames, "detected": len(events),
                        "exact": int(sum(any(ev.index == k for ev in events) for k in expected))})
    return records, windows


# ---------------------------------------------------------------- figures

FIGURES = {
    "ideal": ("none", [0.0]),
    "sfo": ("sfo_hz", [0.0, 1e5, 2e5, 2e6]),
    "cfo": ("cfo_hz", [0.0, 1e4, 1e5]),
    "cpe": ("cpe_max", [0.0, math.pi / 4, math.pi / 2, math.pi]),
    "to": ("to_max", [0.0, 0.5e-9, 2e-9, 10e-9]),
    "loc": ("loc_sigma", None),  # multiples of the wavelength, filled in per scenario
    "coherence": ("none", [0.0]),
    "combine": ("none", [0.0]),
}
ALIASES = {"7": "ideal", "8": "cfo", "9": "cpe", "10": "to", "11": "loc"}


def figure_id(name: str) -> str:
    key = ALIASES.get(str(name), str(name))
    if key not in FIGURES:
        raise ValueError(f"unknown figure {name!r}; choose from {sorted(set(FIGURES) | set(ALIASES))}")
    return key


def error_receiver(sc: Scenario) -> tuple:
    """A receiver with its own clock: the first bistatic one, else a co-located node."""
    for r in sc.scene.rx:
        if not sc.scene.is_monostatic(r):
            return sc, r.node_id
    rx = Trajectory(sc.scene.tx.t, sc.scene.tx.pos, "rx")
    scene = Scene(sc.scene.tx, list(sc.scene.rx) + [rx], sc.scene.targets, sc.scene.R_cal)
    return replace(sc, scene=scene), "rx"


def _errors_with(sc: Scenario, key: str, value: float) -> ErrorConfig:
    e = replace(sc.errors, delta_s=1.0, delta_c=1.0, cpe_max=0.0, to_max=0.0, loc_sigma=0.0)
    if key == "sfo_hz":
        return replace(e, delta_s=1.0 - value / sc.params.fs)
    if key == "cfo_hz":
        return replace(e, delta_c=1.0 - value / sc.params.fc)
    if key in ("cpe_max", "to_max"):
        return replace(e, **{key: value})
    return e


def _case_name(key: str, value: float) -> str:
    return "ideal" if key == "none" else f"{key}={value:.6g}"


@dataclass
class FigureResult:
    figure: str
    records: list
    images: dict


def run_figure(sc: Scenario, name: str, *, threads: int = 1, values=None) -> FigureResult:
    fig = figure_id(name)
    if fig == "combine":
        return _figure_combine(sc, threads)
    if fig == "coherence":
        return _figure_coherence(sc, threads)
    key, sweep = FIGURES[fig]
    if values is not None:
        sweep = list(values)
    elif fig == "loc":
        sweep = [0.0, sc.params.wavelength / 16, sc.params.wavelength / 8, sc.params.wavelength / 4]

    if fig == "ideal":
        caps = simulate(sc, errors=_errors_with(sc, "none", 0.0), threads=threads)
        records, images = [], {}
        for rid, cap in caps.items():
            ps = process(cap, sc, "mono" if cap.monostatic else "bistatic")
            im = form_image(ps, sc, threads=threads, loc_sigma=0.0)
            stem = f"{rid}_{ps.mode}"
            images[stem] = im
            records.append({"figure": fig, "case": "ideal", "image": stem, "mode": ps.mode,
                            "pixel": max(sc.grid.du, sc.grid.dv), "n_outside": im.n_outside,
                            "targets": target_metrics(im, sc), **coherence_record(ps, sc, loc_sigma=0.0)})
        return FigureResult(fig, records, images)

    esc, rid = error_receiver(sc)
    records, images = [], {}
    ref = ref_corr = None
    if fig == "loc":
        cap = simulate(esc, errors=_errors_with(esc, "none", 0.0), receivers=[rid], threads=threads)[rid]
        ps = process(cap, esc, "raw")
    for v in sweep:
        case = _case_name(key, v)
        if fig == "loc":
            variants = [("raw", ps, v)]
        else:
            cap = simulate(esc, errors=_errors_with(esc, key, v), receivers=[rid], threads=threads)[rid]
            variants = [("raw", process(cap, esc, "raw"), 0.0)]
            if fig in ("cpe", "to"):
                variants.append(("corrected", process(cap, esc, "bistatic"), 0.0))
        for label, pset, sigma in variants:
            im = form_image(pset, esc, threads=threads, loc_sigma=sigma)
            if label == "raw" and ref is None:
                ref = im
            if label == "corrected" and ref_corr is None:
                ref_corr = im
            stem = f"{case}_{label}"
            images[stem] = im
            records.append({"figure": fig, "case": case, "value": v, "variant": label, "image": stem,
                            "pixel": max(sc.grid.du, sc.grid.dv), "n_outside": im.n_outside,
                            "targets": target_metrics(im, esc, reference=ref if label == "raw" else ref_corr),
                            **coherence_record(pset, esc, loc_sigma=sigma)})
    return FigureResult(fig, records, images)


def _figure_coherence(sc: Scenario, threads: int) -> FigureResult:
    esc, rid = error_receiver(sc)
    e = esc.errors
    errs = replace(_errors_with(esc, "none", 0.0),
                   cpe_max=e.cpe_max or math.pi, to_max=e.to_max or 10e-9)
    cap = simulate(esc, errors=errs, receivers=[rid], threads=threads)[rid]
    records, images = [], {}
    for label, mode in (("uncorrected", "raw"), ("corrected", "bistatic")):
        ps = process(cap, esc, mode)
        im = form_image(ps, esc, threads=threads, loc_sigma=0.0)
        images[label] = im
        records.append({"figure": "coherence", "case": label, "cpe_max": errs.cpe_max, "to_max": errs.to_max,
                        "image": label, "targets": target_metrics(im, esc),
                        **coherence_record(ps, esc, loc_sigma=0.0)})
    return FigureResult("coherence", records, images)


def tandem_scenario(sc: Scenario, offset=(0.0, -1.0, 0.0)) -> Scenario:
    """Ensure a monostatic channel plus one separate receiver node."""
    rx = list(sc.scene.rx)
    if not any(sc.scene.is_monostatic(r) for r in rx):
        rx.insert(0, sc.scene.tx)
    if not any(not sc.scene.is_monostatic(r) and not np.array_equal(r.pos, sc.scene.tx.pos) for r in rx):
        rx = [r for r in rx if sc.scene.is_monostatic(r)]
        rx.append(Trajectory(sc.scene.tx.t, sc.scene.tx.pos + np.asarray(offset, dtype=float), "rx"))
    return replace(sc, scene=Scene(sc.scene.tx, rx, sc.scene.targets, sc.scene.R_cal))


def _figure_combine(sc: Scenario, threads: int) -> FigureResult:
    """Monostatic first half plus bistatic second half of one pass, combined."""
    tsc = tandem_scenario(sc)
    caps = simulate(tsc, errors=_errors_with(tsc, "none", 0.0), threads=threads)
    mono_id = next(r for r, c in caps.items() if c.monostatic)
    bi_id = next(r for r, c in caps.items() if not c.monostatic)
    half = tsc.M // 2
    ps_m = process(caps[mono_id], tsc, "mono")
    ps_b = process(caps[bi_id], tsc, "bistatic")
    im_m = form_image(ps_m, tsc, rows=range(0, half), threads=threads, loc_sigma=0.0)
    im_b = form_image(ps_b, tsc, rows=range(half, tsc.M), threads=threads, loc_sigma=0.0)
    images = {"mono_first_half": im_m, "bistatic_second_half": im_b,
              "combined_coherent": _q(combine_coherent([im_m, im_b])),
              "combined_absolute": _q(combine_absolute([im_m, im_b]))}
    pt = central_target(tsc)
    records = []
    for stem, im in images.items():
        point = metrics.image_peak(im, pt, 0.5)[0] if pt is not None else None
        rec = {"figure": "combine", "case": stem, "image": stem, "provenance": im.provenance}
        if point is not None:
            rec.update(cut_record(im, point))
        records.append(rec)
    return FigureResult("combine", records, images)


def write_figure(res: FigureResult, out: Path, sc: Scenario) -> list:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, im in res.images.items():
        paths += write_image(im, out, f"image_{stem}", sc)
    paths.append(fileio.write_jsonl(out / "metrics.jsonl", res.records))
    return paths
