"""Acquisition geometry: trajectories, point targets and times of flight."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal import C0


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped positions of one node (ENU, metres)."""

    t: np.ndarray
    pos: np.ndarray
    node_id: str = "tx"

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        pos = np.atleast_2d(np.asarray(self.pos, dtype=float))
        if pos.shape != (t.size, 3):
            raise ValueError(f"positions must have shape ({t.size}, 3), got {pos.shape}")
        if t.size < 1:
            raise ValueError("trajectory needs at least one sample")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(pos))):
            raise ValueError("trajectory contains non-finite values")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "pos", pos)

    def __len__(self):
        return self.t.size

    @property
    def span(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])


@dataclass(frozen=True)
class PointTarget:
    pos: np.ndarray
    reflectivity: complex = 1.0

    def __post_init__(self):
        pos = np.asarray(self.pos, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ValueError("target position must be a finite 3-vector")
        refl = complex(self.reflectivity)
        if not np.isfinite(refl):
            raise ValueError("target reflectivity must be finite")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "reflectivity", refl)


@dataclass(frozen=True)
class Scene:
    """Transmitter, receivers and targets.

    A receiver whose ``node_id`` equals the transmitter's is the monostatic
    channel of the primary node; any other receiver is an independent node.
    """

    tx: Trajectory
    rx: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    R_cal: float = 0.0

    def __post_init__(self):
        rx = list(self.rx) or [self.tx]
        ids = [r.node_id for r in rx]
        if len(set(ids)) != len(ids):
            raise ValueError("receiver node ids must be unique")
        object.__setattr__(self, "rx", rx)
        object.__setattr__(self, "targets", list(self.targets))
        if self.R_cal < 0:
            raise ValueError("R_cal must be non-negative")

    def is_monostatic(self, rx: Trajectory) -> bool:
        return rx.node_id == self.tx.node_id

    def receiver(self, node_id: str) -> Trajectory:
        for r in self.rx:
            if r.node_id == node_id:
                return r
        raise KeyError(node_id)

    def common_span(self) -> tuple[float, float]:
        spans = [self.tx.span] + [r.span for r in self.rx]
        return max(s[0] for s in spans), min(s[1] for s in spans)


def position_at(traj: Trajectory, t) -> np.ndarray:
    """Linearly interpolated position(s); exact at the sample instants."""
    t = np.asarray(t, dtype=float)
    lo, hi = traj.span
    tol = 1e-9 * max(1.0, abs(hi))
    if np.any(t < lo - tol) or np.any(t > hi + tol):
        raise ValueError(f"time outside trajectory span [{lo}, {hi}]")
    if len(traj) == 1:
        return np.broadcast_to(traj.pos[0], t.shape + (3,)).copy()
    out = np.stack([np.interp(t, traj.t, traj.pos[:, i]) for i in range(3)], axis=-1)
    return out


def tof_bistatic(tx_pos, rx_pos, target_pos) -> np.ndarray:
    tx_pos, rx_pos, target_pos = (np.asarray(v, dtype=float) for v in (tx_pos, rx_pos, target_pos))
    path = np.linalg.norm(tx_pos - target_pos, axis=-1) + np.linalg.norm(target_pos - rx_pos, axis=-1)
    return path / C0


def tof_sidelink(tx_pos, rx_pos) -> np.ndarray:
    tx_pos, rx_pos = np.asarray(tx_pos, dtype=float), np.asarray(rx_pos, dtype=float)
    return np.linalg.norm(tx_pos - rx_pos, axis=-1) / C0


def linear_trajectory(start, velocity, f_prf: float, M: int, node_id: str = "tx") -> Trajectory:
    if M < 1 or not f_prf > 0:
        raise ValueError("need M >= 1 and f_prf > 0")
    t = np.arange(M) / f_prf
    pos = np.asarray(start, dtype=float)[None, :] + t[:, None] * np.asarray(velocity, dtype=float)[None, :]
    return Trajectory(t, pos, node_id)


def table1_scene(M: int = 3001, f_prf: float = 100.0, speed: float = 1.0,
                 colocated_rx: bool = False) -> Scene:
    """Five-scatterer scene at 10 m altitude, aperture centred on x = 0.

    With ``colocated_rx`` the receiver is a separate node ("rx") flying the
    transmitter's path, so clock errors apply while the geometry stays
    monostatic.
    """
    L = (M - 1) * speed / f_prf
    tx = linear_trajectory([-L / 2, 0.0, 10.0], [speed, 0.0, 0.0], f_prf, M, "tx")
    xs = np.array([-0.4, -0.2, 0.0, 0.2, 0.4]) * min(L, 20.0)
    targets = [PointTarget([x, y, 0.0], 1.0) for x, y in zip(xs, [5.0, 10.0, 15.0, 20.0, 25.0])]
    rx = Trajectory(tx.t, tx.pos, "rx") if colocated_rx else tx
    return Scene(tx=tx, rx=[rx], targets=targets)
