"""Simulation of the time-varying oscillator network and phase-difference utilities.

The model is theta_i' = omega_i(t) + sum_j a_ij(t) sin(theta_j - theta_i) with
phases unwrapped on the real line (the analysis lives in phase differences
confined to |theta_ij| <= r < pi/2, so no modular wrapping is wanted).
Integration is classical 4th-order fixed step with the grid aligned to every
signal breakpoint, which makes runs bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from tvkuramoto.signals import TimeSignal, check_alignment


@lru_cache(maxsize=None)
def pd_pairs(m: int) -> tuple:
    """Ordered index pairs (i, j), i > j, lexicographic; 0-based."""
    return tuple((i, j) for i in range(1, m) for j in range(i))


def phase_differences(theta: np.ndarray) -> np.ndarray:
    """The m(m-1)/2 independent differences theta_i - theta_j, i > j."""
    theta = np.asarray(theta, dtype=float)
    pairs = pd_pairs(theta.shape[-1])
    ii = np.array([p[0] for p in pairs], dtype=int)
    jj = np.array([p[1] for p in pairs], dtype=int)
    return theta[..., ii] - theta[..., jj]


def phases_from_pd(pd: np.ndarray, m: int) -> np.ndarray:
    """Lift a PD vector to phases with theta_1 = 0 (representative choice).

    Any other lift differs by a global shift, which the dynamics quotient out.
    Rejects internally inconsistent PD vectors.
    """
    pd = np.asarray(pd, dtype=float)
    if pd.size != m * (m - 1) // 2:
        raise ValueError(f"PD vector has {pd.size} entries, expected {m * (m - 1) // 2}")
    theta = np.zeros(m)
    for i in range(1, m):
        theta[i] = pd[i * (i - 1) // 2]  # entry (i, 0)
    if np.max(np.abs(phase_differences(theta) - pd)) > 1e-9:
        raise ValueError("PD vector is not consistent with any phase vector")
    return theta


def region_membership(pd: np.ndarray, r: float) -> bool:
    """True iff every |theta_ij| <= r (the PD hypercube of half-width r)."""
    if not 0.0 <= r < math.pi / 2:
        raise ValueError(f"r must lie in [0, pi/2), got {r}")
    pd = np.asarray(pd, dtype=float)
    return bool(pd.size == 0 or np.max(np.abs(pd)) <= r)


def hajnal_diameter(delta) -> float:
    """max_i delta_i - min_j delta_j, the contraction functional of the delta-system."""
    values = delta.delta if isinstance(delta, DeltaState) else np.asarray(delta, dtype=float)
    return float(values.max() - values.min())


@dataclass(frozen=True)
class DeltaState:
    """Difference between two phase solutions at one instant."""

    delta: np.ndarray


@dataclass(frozen=True)
class PhaseTrajectory:
    """Phases on a uniform time grid; row k is theta(times[k]), unwrapped."""

    times: np.ndarray   # shape (N+1,)
    phases: np.ndarray  # shape (N+1, m)

    @property
    def m(self) -> int:
        return self.phases.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def phase_differences(self) -> np.ndarray:
        """(N+1, m(m-1)/2) array of PD vectors along the run."""
        return phase_differences(self.phases)

    def final(self) -> np.ndarray:
        return self.phases[-1].copy()


def kuramoto_rhs(theta: np.ndarray, t: float, omega: TimeSignal,
                 coupling: TimeSignal) -> np.ndarray:
    """Right-hand side omega_i(t) + sum_j a_ij(t) sin(theta_j - theta_i)."""
    theta = np.asarray(theta, dtype=float)
    w = omega.evaluate(t)
    a = np.asarray(coupling.evaluate(t), dtype=float)
    return _rhs(theta, w, a)


def _rhs(theta, w, a):
    m = theta.shape[0]
    if a.shape != (m, m):
        raise ValueError(f"coupling matrix shape {a.shape} does not match m={m}")
    if not isinstance(w, float):
        w = np.asarray(w, dtype=float)
        if w.shape != (m,):
            raise ValueError(f"frequency vector shape {w.shape} does not match m={m}")
    diff = theta[None, :] - theta[:, None]  # diff[i, j] = theta_j - theta_i
    return w + (a * np.sin(diff)).sum(axis=1)


def simulate(theta0: np.ndarray, omega: TimeSignal, coupling: TimeSignal,
             t_end: float, dt: float) -> PhaseTrajectory:
    """Integrate the network from theta0 over [0, t_end], sampling every step.

    dt must tile [0, t_end] and hit every breakpoint of both signals.
    Piecewise-constant signals are evaluated once per step (their stage values
    coincide); smooth signals are evaluated at each stage. Raises on
    non-finite state, reporting the blow-up time.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    nsteps = check_alignment([omega, coupling], 0.0, t_end, dt)
    m = theta0.shape[0]
    out = np.empty((nsteps + 1, m))
    out[0] = theta0
    th = theta0.copy()
    w_pc = omega.is_piecewise_constant
    a_pc = coupling.is_piecewise_constant
    for k in range(nsteps):
        t = k * dt
        th = _rk4_step(th, t, dt, omega, coupling, w_pc, a_pc)
        if not np.all(np.isfinite(th)):
            raise RuntimeError(f"state blew up at t = {t + dt:.6f} s")
        out[k + 1] = th
    times = np.arange(nsteps + 1) * dt
    return PhaseTrajectory(times, out)


def _rk4_step(th, t, dt, omega, coupling, w_pc, a_pc):
    wa = omega.evaluate(t)
    aa = np.asarray(coupling.evaluate(t), dtype=float)
    wb = wa if w_pc else omega.evaluate(t + 0.5 * dt)
    ab = aa if a_pc else np.asarray(coupling.evaluate(t + 0.5 * dt), dtype=float)
    wc = wa if w_pc else omega.evaluate(t + dt)
    ac = aa if a_pc else np.asarray(coupling.evaluate(t + dt), dtype=float)
    k1 = _rhs(th, wa, aa)
    k2 = _rhs(th + 0.5 * dt * k1, wb, ab)
    k3 = _rhs(th + 0.5 * dt * k2, wb, ab)
    k4 = _rhs(th + dt * k3, wc, ac)
    return th + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def invariance_monitor(traj: PhaseTrajectory, r: float):
    """Earliest grid time at which the PDs leave the half-width-r hypercube.

    Returns None when the sampled trajectory never leaves (invariant on the
    grid); exit times are resolved to the sampling step only.
    """
    if not 0.0 <= r < math.pi / 2:
        raise ValueError(f"r must lie in [0, pi/2), got {r}")
    spread_hi = traj.phases.max(axis=1) - traj.phases.min(axis=1)
    # max_{i>j} |theta_ij| equals the phase spread max theta - min theta
    bad = np.nonzero(spread_hi > r)[0]
    if bad.size == 0:
        return None
    return float(traj.times[bad[0]])


@dataclass(frozen=True)
class DivergenceSeries:
    """Pointwise maximum PD discrepancy between two runs, with tail statistics."""

    times: np.ndarray
    values: np.ndarray

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def last_time_above(self, threshold: float):
        """Latest grid time with discrepancy above the threshold (None if never)."""
        idx = np.nonzero(self.values > threshold)[0]
        return float(self.times[idx[-1]]) if idx.size else None

    def tail_stats(self) -> dict:
        return {
            "final": self.final,
            "last_above_1e-2": self.last_time_above(1e-2),
            "last_above_1e-3": self.last_time_above(1e-3),
        }


def pd_divergence(traj_a: PhaseTrajectory, traj_b: PhaseTrajectory) -> DivergenceSeries:
    """max_{i>j} |pd_a_ij(t) - pd_b_ij(t)| along two runs on the same grid.

    Computed as the Hajnal diameter of delta(t) = theta_a(t) - theta_b(t),
    which equals the maximum pairwise PD discrepancy and is invariant to
    global phase shifts of either run.
    """
    if traj_a.times.shape != traj_b.times.shape or not np.allclose(
        traj_a.times, traj_b.times, rtol=0.0, atol=1e-12
    ):
        raise ValueError("trajectories are sampled on different grids")
    delta = traj_a.phases - traj_b.phases
    values = delta.max(axis=1) - delta.min(axis=1)
    return DivergenceSeries(traj_a.times.copy(), values)
