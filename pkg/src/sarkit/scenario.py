"""Scenario files: TOML sections describing one experiment.

Every key is optional; omitted keys take the defaults below, which reproduce
the five-target simulation at 1.2 GHz / 409.6 MHz. Unknown keys are errors.

::

    name = "table1_sim"
    seed = 0
    M = 3001                      # measurements

    [waveform]                    # fc, N, delta_f, T, T_cp, fs, nu, f_prf
    [scene]
    preset = "table1"             # or "custom"
    speed = 1.0                   # m/s along +x
    altitude = 10.0
    R_cal = 0.0                   # internal monostatic delay line [m]
    colocated_rx = false          # separate clock on the transmitter's path
    mono = true                   # keep the transmitter's own receive channel
    tx = { start = [..], velocity = [..] }          # custom only
    targets = [ { pos = [x, y, z], reflectivity = 1.0, phase = 0.0 } ]
    rx = [ { id = "rx1", offset = [dx, dy, dz] } ]  # or start/velocity

    [errors]     sfo_hz, cfo_hz, cpe_max, to_max, loc_sigma, loc_window, noise_std
    [processing] window, oversample, R_cal_hat
    [grid]       u = [min, max], v = [min, max], du, dv, z
    [trigger]    order, threshold, pri_samples, frames, snr_db
    [budget]     dR_max, v_max, streams
    [outputs]    csv, pgm
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import ErrorConfig
from .imaging import PixelGrid, ground_grid
from .scene import PointTarget, Scene, Trajectory, linear_trajectory, table1_scene
from .waveform import OfdmParams

SCENARIO_DIR = Path(__file__).with_name("scenarios")


class ScenarioError(ValueError):
    pass


_TOP = {"name", "seed", "M", "waveform", "scene", "errors", "processing", "grid",
        "trigger", "budget", "outputs"}
_SECTIONS = {
    "waveform": {"fc", "N", "delta_f", "T", "T_cp", "fs", "nu", "f_prf"},
    "scene": {"preset", "speed", "altitude", "R_cal", "colocated_rx", "mono", "tx", "targets", "rx"},
    "errors": {"sfo_hz", "cfo_hz", "cpe_max", "to_max", "loc_sigma", "loc_window", "noise_std"},
    "processing": {"window", "oversample", "R_cal_hat"},
    "grid": {"u", "v", "du", "dv", "z"},
    "trigger": {"order", "threshold", "pri_samples", "frames", "snr_db"},
    "budget": {"dR_max", "v_max", "streams"},
    "outputs": {"csv", "pgm"},
}
_TARGET_KEYS = {"pos", "reflectivity", "phase"}
_RX_KEYS = {"id", "offset", "start", "velocity"}
_TX_KEYS = {"start", "velocity"}


@dataclass(frozen=True)
class TriggerConfig:
    order: int = 10
    threshold: float = 0.6
    pri_samples: int = 40000
    frames: int = 4
    snr_db: Optional[float] = 0.0


@dataclass(frozen=True)
class BudgetConfig:
    dR_max: float = 0.02
    v_max: float = 10.0
    streams: int = 2


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    M: int
    params: OfdmParams
    scene: Scene
    errors: ErrorConfig
    window: str = "none"
    oversample: int = 8
    R_cal_hat: float = 0.0
    grid: Optional[PixelGrid] = None
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    csv: bool = True
    pgm: bool = True
    raw: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "Scenario":
        from dataclasses import replace
        return replace(self, seed=int(seed), errors=replace(self.errors, seed=int(seed)))


def _check_keys(table: dict, allowed: set, where: str):
    extra = sorted(set(table) - allowed)
    if extra:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _num(value, where: str, *, integer: bool = False, positive: bool = False, nonneg: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ScenarioError(f"{where} must be an integer, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(f"{where} must be finite")
    if positive and not value > 0:
        raise ScenarioError(f"{where} must be > 0, got {value!r}")
    if nonneg and value < 0:
        raise ScenarioError(f"{where} must be >= 0, got {value!r}")
    return int(value) if integer else float(value)


def _vec(value, where: str, n: int = 3):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ScenarioError(f"{where} must be a list of {n} numbers")
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ScenarioError(f"[{name}] must be a table")
    _check_keys(sec, _SECTIONS[name], f"[{name}]")
    return sec


def _build_params(sec: dict) -> OfdmParams:
    kw = {}
    for k in ("fc", "delta_f", "T", "T_cp", "fs", "f_prf"):
        if k in sec:
            kw[k] = _num(sec[k], f"waveform.{k}")
    for k in ("N", "nu"):
        if k in sec:
            kw[k] = _num(sec[k], f"waveform.{k}", integer=True)
    try:
        return OfdmParams(**kw)
    except ValueError as e:
        raise ScenarioError(f"[waveform] {e}") from None


def _build_scene(sec: dict, params: OfdmParams, M: int) -> Scene:
    preset = sec.get("preset", "table1")
    if preset not in ("table1", "custom"):
        raise ScenarioError(f"scene.preset must be 'table1' or 'custom', got {preset!r}")
    speed = _num(sec.get("speed", 1.0), "scene.speed", positive=True)
    h = _num(sec.get("altitude", 10.0), "scene.altitude")
    R_cal = _num(sec.get("R_cal", 0.0), "scene.R_cal", nonneg=True)
    colocated = bool(sec.get("colocated_rx", False))
    L = (M - 1) * speed / params.f_prf

    if preset == "table1":
        if "tx" in sec or "targets" in sec:
            raise ScenarioError("scene.tx and scene.targets are only allowed with preset = 'custom'")
        base = table1_scene(M=M, f_prf=params.f_prf, speed=speed)
        tx = linear_trajectory([-L / 2, 0.0, h], [speed, 0, 0], params.f_prf, M, "tx")
        targets = base.targets
    else:
        t = sec.get("tx")
        if not isinstance(t, dict):
            raise ScenarioError("custom scenes need a scene.tx table with start and velocity")
        _check_keys(t, _TX_KEYS, "scene.tx")
        tx = linear_trajectory(_vec(t.get("start"), "scene.tx.start"),
                               _vec(t.get("velocity"), "scene.tx.velocity"), params.f_prf, M, "tx")
        targets = []
        for i, tg in enumerate(sec.get("targets", [])):
            _check_keys(tg, _TARGET_KEYS, f"scene.targets[{i}]")
            amp = _num(tg.get("reflectivity", 1.0), f"scene.targets[{i}].reflectivity")
            ph = _num(tg.get("phase", 0.0), f"scene.targets[{i}].phase")
            targets.append(PointTarget(_vec(tg.get("pos"), f"scene.targets[{i}].pos"), amp * np.exp(1j * ph)))

    rxs = []
    if bool(sec.get("mono", not colocated)):
        rxs.append(tx)
    if colocated:
        rxs.append(Trajectory(tx.t, tx.pos, "rx"))
    for i, r in enumerate(sec.get("rx", [])):
        where = f"scene.rx[{i}]"
        _check_keys(r, _RX_KEYS, where)
        rid = r.get("id", f"rx{i + 1}")
        if "offset" in r:
            if "start" in r or "velocity" in r:
                raise ScenarioError(f"{where}: give either offset or start/velocity")
            traj = Trajectory(tx.t, tx.pos + np.asarray(_vec(r["offset"], f"{where}.offset")), rid)
        else:
            traj = linear_trajectory(_vec(r.get("start"), f"{where}.start"),
                                     _vec(r.get("velocity"), f"{where}.velocity"), params.f_prf, M, rid)
        rxs.append(traj)
    if not rxs:
        raise ScenarioError("scene has no receivers (mono = false and no rx entries)")
    try:
        return Scene(tx=tx, rx=rxs, targets=targets, R_cal=R_cal)
    except ValueError as e:
        raise ScenarioError(f"[scene] {e}") from None


def _default_grid(scene: Scene) -> PixelGrid:
    if scene.targets:
        pts = np.array([t.pos for t in scene.targets])
    else:
        pts = np.array([[0.0, 10.0, 0.0]])
    lo, hi = pts.min(axis=0) - 1.0, pts.max(axis=0) + 1.0
    return ground_grid([lo[0], hi[0]], [lo[1], hi[1]], 0.05)


def _build_grid(sec: dict, scene: Scene) -> PixelGrid:
    if not sec:
        return _default_grid(scene)
    base = _default_grid(scene)
    u = _vec(sec["u"], "grid.u", 2) if "u" in sec else [base.origin[0], base.origin[0] + base.u[-1]]
    v = _vec(sec["v"], "grid.v", 2) if "v" in sec else [base.origin[1], base.origin[1] + base.v[-1]]
    if not (u[1] >= u[0] and v[1] >= v[0]):
        raise ScenarioError("grid.u and grid.v must be [min, max] with max >= min")
    du = _num(sec.get("du", 0.05), "grid.du", positive=True)
    dv = _num(sec.get("dv", du), "grid.dv", positive=True)
    z = _num(sec.get("z", 0.0), "grid.z")
    return ground_grid(u, v, du, dv, z)


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    _check_keys(doc, _TOP, "top level")
    seed = _num(doc.get("seed", 0), "seed", integer=True, nonneg=True)
    M = _num(doc.get("M", 3001), "M", integer=True, positive=True)
    params = _build_params(_section(doc, "waveform"))
    scene = _build_scene(_section(doc, "scene"), params, M)

    e = _section(doc, "errors")
    sfo = _num(e.get("sfo_hz", 0.0), "errors.sfo_hz")
    cfo = _num(e.get("cfo_hz", 0.0), "errors.cfo_hz")
    try:
        errors = ErrorConfig(
            delta_s=1.0 - sfo / params.fs,
            delta_c=1.0 - cfo / params.fc,
            cpe_max=_num(e.get("cpe_max", 0.0), "errors.cpe_max", nonneg=True),
            to_max=_num(e.get("to_max", 0.0), "errors.to_max", nonneg=True),
            loc_sigma=_num(e.get("loc_sigma", 0.0), "errors.loc_sigma", nonneg=True),
            loc_window=_num(e.get("loc_window", 1), "errors.loc_window", integer=True, positive=True),
            seed=seed,
            noise_std=_num(e.get("noise_std", 0.0), "errors.noise_std", nonneg=True),
        )
    except ValueError as err:
        raise ScenarioError(f"[errors] {err}") from None

    p = _section(doc, "processing")
    window = p.get("window", "none")
    if window not in ("none", "hann"):
        raise ScenarioError(f"processing.window must be 'none' or 'hann', got {window!r}")
    oversample = _num(p.get("oversample", 8), "processing.oversample", integer=True, positive=True)
    R_cal_hat = _num(p.get("R_cal_hat", scene.R_cal), "processing.R_cal_hat", nonneg=True)

    grid = _build_grid(_section(doc, "grid"), scene)

    t = _section(doc, "trigger")
    snr = t.get("snr_db", 0.0)
    trig = TriggerConfig(
        order=_num(t.get("order", 10), "trigger.order", integer=True),
        threshold=_num(t.get("threshold", 0.6), "trigger.threshold", positive=True),
        pri_samples=_num(t.get("pri_samples", 40000), "trigger.pri_samples", integer=True, positive=True),
        frames=_num(t.get("frames", 4), "trigger.frames", integer=True, positive=True),
        snr_db=None if snr in (None, "none") else _num(snr, "trigger.snr_db"),
    )
    if not 3 <= trig.order <= 20:
        raise ScenarioError("trigger.order must lie in 3..20")
    if trig.threshold > 1:
        raise ScenarioError("trigger.threshold must lie in (0, 1]")
    if trig.pri_samples < (1 << trig.order) - 1 + params.n_symbol:
        raise ScenarioError("trigger.pri_samples cannot hold the PN preamble and the radar symbol")

    b = _section(doc, "budget")
    budget = BudgetConfig(
        dR_max=_num(b.get("dR_max", 0.02), "budget.dR_max", positive=True),
        v_max=_num(b.get("v_max", 10.0), "budget.v_max", positive=True),
        streams=_num(b.get("streams", 2), "budget.streams", integer=True, positive=True),
    )
    o = _section(doc, "outputs")
    return Scenario(
        name=str(doc.get("name", name)), seed=seed, M=M, params=params, scene=scene, errors=errors,
        window=window, oversample=oversample, R_cal_hat=R_cal_hat, grid=grid, trigger=trig,
        budget=budget, csv=bool(o.get("csv", True)), pgm=bool(o.get("pgm", True)), raw=doc,
    )


def resolve_path(path) -> Path:
    """A file path, or the name of a shipped scenario."""
    p = Path(path)
    if p.is_file():
        return p
    shipped = SCENARIO_DIR / (p.name if p.suffix == ".toml" else p.name + ".toml")
    if shipped.is_file():
        return shipped
    raise ScenarioError(f"scenario {str(path)!r} not found")


def load_scenario(path) -> Scenario:
    p = resolve_path(path)
    try:
        doc = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"{p}: {e}") from None
    return scenario_from_dict(doc, name=p.stem)


def shipped_scenarios() -> list:
    return sorted(q.stem for q in SCENARIO_DIR.glob("*.toml"))
