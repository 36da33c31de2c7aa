"""Invariance and stability criteria for PD trajectories, as pure checks.

Every check returns a CertificateReport: a verdict (pass / fail / inconclusive)
plus the witnesses that certify it -- threshold margins, window averages,
eigenvalue series, or the earliest violating pair/window/time. Quantifiers over
all t >= 0 are evaluated on one period for periodic signals (sufficient by
periodicity) and on the supplied horizon otherwise; window integrals of the
coupling are exact for piecewise-constant signals and midpoint quadrature
aligned to breakpoints otherwise.

Sign convention for matrices quoted from the literature on switched oscillator
networks: a printed matrix with negative diagonal and zero row sums is
coupling-side, i.e. its off-diagonal entries are the couplings a_ij and the
Laplacian is its negation. This package always takes couplings as input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tvkuramoto import graph
from tvkuramoto.linalg import lambda2, restricted_spectrum
from tvkuramoto.signals import ConstantSignal, TimeSignal, sample_grid

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(frozen=True)
class CertificateReport:
    """Verdict plus certifying witnesses for one stability criterion."""

    criterion: str
    verdict: str
    witnesses: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_json(self) -> dict:
        return {
            "criterion": self.criterion,
            "verdict": self.verdict,
            "witnesses": _jsonable(self.witnesses),
            "parameters": _jsonable(self.parameters),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _frequencies_at(omega: TimeSignal, t: float, m: int) -> np.ndarray:
    w = omega.evaluate(t)
    if isinstance(w, float):
        return np.full(m, w)
    w = np.asarray(w, dtype=float)
    if w.shape != (m,):
        raise ValueError(f"frequency signal shape {w.shape} does not match m={m}")
    return w


def _coupling_at(coupling: TimeSignal, t: float) -> np.ndarray:
    a = np.asarray(coupling.evaluate(t), dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"coupling signal must be matrix-valued, got shape {a.shape}")
    return a


def _pair_tensors(a: np.ndarray):
    """Per-pair quantities shared by the pointwise condition and the xi index."""
    m = a.shape[0]
    ai = a[:, None, :]  # ai[i, j, k] = a_ik
    aj = a[None, :, :]  # aj[i, j, k] = a_jk
    idx = np.arange(m)
    k_is_pair = (idx[None, None, :] == idx[:, None, None]) | (
        idx[None, None, :] == idx[None, :, None]
    )
    return ai, aj, k_is_pair


def invariance_pointwise(omega: TimeSignal, coupling: TimeSignal, r: float,
                         grid=None) -> CertificateReport:
    """Pointwise sufficient condition for the PD hypercube to be invariant.

    For every ordered pair i != j and every grid time, the drift margin

        w_i - w_j - [(a_ij + a_ji) + sum_neg + sum_common_min] * sin(r)

    must be strictly negative, where sum_neg collects the negative parts
    [a_ik]^- + [a_jk]^- outside the common positive neighborhood and
    sum_common_min the pairwise minima inside it.
    """
    if not 0.0 <= r < math.pi / 2:
        raise ValueError(f"r must lie in [0, pi/2), got {r}")
    if grid is None:
        grid = sample_grid([omega, coupling])
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty evaluation grid")
    sin_r = math.sin(r)
    worst = -math.inf
    worst_loc = None
    for t in grid:
        a = _coupling_at(coupling, float(t))
        m = a.shape[0]
        w = _frequencies_at(omega, float(t), m)
        ai, aj, k_is_pair = _pair_tensors(a)
        pos = (ai > 0) & (aj > 0)
        common_min = np.where(pos, np.minimum(ai, aj), 0.0).sum(axis=2)
        neg_parts = np.minimum(ai, 0.0) + np.minimum(aj, 0.0)
        neg_sum = np.where(~pos & ~k_is_pair, neg_parts, 0.0).sum(axis=2)
        lhs = (w[:, None] - w[None, :]) - ((a + a.T) + neg_sum + common_min) * sin_r
        np.fill_diagonal(lhs, -math.inf)
        k = int(np.argmax(lhs))
        i, j = divmod(k, m)
        if lhs[i, j] > worst:
            worst = float(lhs[i, j])
            worst_loc = (float(t), i + 1, j + 1)
    verdict = PASS if worst < 0.0 else FAIL
    return CertificateReport(
        "invariance-pointwise", verdict,
        witnesses={
            "max_lhs": worst,
            "margin": -worst,
            "worst_time": worst_loc[0],
            "worst_pair": [worst_loc[1], worst_loc[2]],
            "grid_size": int(grid.size),
        },
        parameters={"r": r},
    )


def invariance_robust(omega: TimeSignal, coupling: TimeSignal, r: float,
                      grid=None) -> CertificateReport:
    """Robust invariance test: frequency spread vs. mixing quantities.

    Passes iff delta_omega / sin(r) <= mu0 + mu2 - mu1, with the mixing
    quantities from graph.ergodic_quantities. At r = 0 the condition is read
    as requiring a zero frequency spread.
    """
    if not 0.0 <= r < math.pi / 2:
        raise ValueError(f"r must lie in [0, pi/2), got {r}")
    if grid is None:
        grid = sample_grid([omega, coupling])
    grid = np.asarray(grid, dtype=float)
    m = _coupling_at(coupling, float(grid[0])).shape[0]
    delta_omega = 0.0
    for t in grid:
        w = _frequencies_at(omega, float(t), m)
        delta_omega = max(delta_omega, float(w.max() - w.min()))
    mu0, mu1, mu2 = graph.ergodic_quantities(coupling, grid)
    rhs = mu0 + mu2 - mu1
    if math.sin(r) == 0.0:
        ok = delta_omega == 0.0 and rhs >= 0.0
        lhs = math.inf if delta_omega > 0 else 0.0
    else:
        lhs = delta_omega / math.sin(r)
        ok = lhs <= rhs
    return CertificateReport(
        "invariance-robust", PASS if ok else FAIL,
        witnesses={"delta_omega": delta_omega, "mu0": mu0, "mu1": mu1, "mu2": mu2,
                   "lhs": lhs, "rhs": rhs},
        parameters={"r": r},
    )


def _validate_nonnegative(coupling: TimeSignal, grid) -> "tuple | None":
    """Location (t, i, j) of the most negative coupling entry, if any."""
    worst = None
    for t in np.asarray(grid, dtype=float):
        a = _coupling_at(coupling, float(t))
        if a.min() < -1e-12:
            i, j = divmod(int(np.argmin(a)), a.shape[0])
            if worst is None or a[i, j] < worst[3]:
                worst = (float(t), i + 1, j + 1, float(a[i, j]))
    return worst


def thm1_spanning_tree_check(coupling: TimeSignal, partition, eta,
                             bins: "int | None" = None) -> CertificateReport:
    """Aggregated-connectivity test for nonnegative couplings.

    Each partition interval is split into equal bins; the integrated coupling
    over every bin, thresholded at that interval's eta, must contain a
    spanning tree. The divergence of sum(eta_n) over an infinite horizon is
    the caller's asymptotic claim; the report echoes the finite sum.
    """
    partition = np.asarray(partition, dtype=float)
    if partition.size < 2 or np.any(np.diff(partition) <= 0):
        raise ValueError("partition must be strictly increasing with at least two times")
    n_intervals = partition.size - 1
    etas = np.asarray(eta, dtype=float)
    if etas.ndim == 0:
        etas = np.full(n_intervals, float(etas))
    if etas.size != n_intervals or np.any(etas <= 0):
        raise ValueError("need one positive eta per partition interval")
    m = _coupling_at(coupling, 0.0).shape[0]
    nbins = int(bins) if bins is not None else max(m - 1, 1)

    probe = np.unique(np.concatenate([
        partition, coupling.breakpoints_in(partition[0], partition[-1]),
        np.linspace(partition[0], partition[-1], 101),
    ]))
    bad = _validate_nonnegative(coupling, probe)
    params = {"partition": partition.tolist(), "eta": etas.tolist(), "bins": nbins}
    if bad is not None:
        return CertificateReport(
            "thm1-spanning-tree", INCONCLUSIVE,
            witnesses={"negative_coupling_at": {"t": bad[0], "pair": [bad[1], bad[2]],
                                                "value": bad[3]}},
            parameters=params,
        )

    windows = []
    first_fail = None
    for n in range(n_intervals):
        edges = np.linspace(partition[n], partition[n + 1], nbins + 1)
        for k in range(nbins):
            integ = coupling.integrate_window(float(edges[k]), float(edges[k + 1]))
            z = -np.asarray(integ, dtype=float)
            np.fill_diagonal(z, 0.0)
            np.fill_diagonal(z, -z.sum(axis=1))
            ok = graph.has_spanning_tree(graph.threshold_graph(z, float(etas[n])))
            windows.append({"interval": n + 1, "bin": k + 1, "spanning_tree": ok})
            if not ok and first_fail is None:
                first_fail = {"interval": n + 1, "bin": k + 1,
                              "window": [float(edges[k]), float(edges[k + 1])]}
    verdict = PASS if first_fail is None else FAIL
    wit = {"eta_sum": float(etas.sum()), "windows_checked": len(windows),
           "eta_sum_divergence": "asserted by caller for periodic setups"}
    if first_fail is not None:
        wit["first_failing_window"] = first_fail
    return CertificateReport("thm1-spanning-tree", verdict, witnesses=wit, parameters=params)


def cor1_sliding_window_check(coupling: TimeSignal, window: float, eta: float,
                              starts=None) -> CertificateReport:
    """Sliding-window spanning-tree test for nonnegative couplings.

    The length-T aggregated coupling starting at every sampled t, thresholded
    at eta, must contain a spanning tree. For periodic couplings one period of
    window starts suffices and is the default.
    """
    if window <= 0 or eta <= 0:
        raise ValueError("window length and eta must be positive")
    if starts is None:
        starts = sample_grid(coupling, num=128)
    starts = np.asarray(starts, dtype=float)
    horizon = float(starts.max() + window)
    probe = np.unique(np.concatenate([
        starts, coupling.breakpoints_in(0.0, horizon), np.linspace(0.0, horizon, 101),
    ]))
    params = {"window": window, "eta": eta, "num_starts": int(starts.size)}
    bad = _validate_nonnegative(coupling, probe)
    if bad is not None:
        return CertificateReport(
            "cor1-sliding-window", INCONCLUSIVE,
            witnesses={"negative_coupling_at": {"t": bad[0], "pair": [bad[1], bad[2]],
                                                "value": bad[3]}},
            parameters=params,
        )
    for t in starts:
        integ = coupling.integrate_window(float(t), float(t) + window)
        z = -np.asarray(integ, dtype=float)
        np.fill_diagonal(z, 0.0)
        np.fill_diagonal(z, -z.sum(axis=1))
        if not graph.has_spanning_tree(graph.threshold_graph(z, eta)):
            return CertificateReport(
                "cor1-sliding-window", FAIL,
                witnesses={"first_failing_start": float(t)},
                parameters=params,
            )
    return CertificateReport("cor1-sliding-window", PASS,
                             witnesses={"all_starts_pass": True}, parameters=params)


def xi_index(net, r: float) -> float:
    """Matrix-measure-type index of a signed coupling matrix at PD half-width r.

    xi = -min over pairs i != j of { c_ij + sum_{k != i,j} min(a~_ik, a~_jk) }
    where the symmetrized direct coupling c_ij = (a_ij + a_ji) cos(r) when the
    sum is positive (else untouched) and a~_ik = a_ik cos(r) when positive
    (else untouched). Negative window averages of xi certify exponential PD
    stability for signed couplings.
    """
    if isinstance(net, graph.SignedNetwork):
        a = net.adjacency
    else:
        a = np.asarray(net, dtype=float).copy()
        np.fill_diagonal(a, 0.0)
    cos_r = math.cos(r)
    s = a + a.T
    c = np.where(s > 0, s * cos_r, s)
    at = np.where(a > 0, a * cos_r, a)
    ai, aj, k_is_pair = _pair_tensors(at)
    ksum = np.where(~k_is_pair, np.minimum(ai, aj), 0.0).sum(axis=2)
    vals = c + ksum
    np.fill_diagonal(vals, math.inf)
    return float(-vals.min())


def _xi_window_integral(coupling: TimeSignal, r: float, a: float, b: float,
                        quad_points: int) -> float:
    """Integral of xi(L(t), r) over [a, b]; exact for piecewise-constant coupling."""
    inner = coupling.breakpoints_in(a, b)
    edges = np.unique(np.concatenate([[a], inner[(inner > a) & (inner < b)], [b]]))
    total = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        if coupling.is_piecewise_constant:
            total += xi_index(_coupling_at(coupling, float(x0)), r) * (x1 - x0)
        else:
            n = max(8, int(math.ceil(quad_points * (x1 - x0) / (b - a))))
            mids = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
            vals = [xi_index(_coupling_at(coupling, float(t)), r) for t in mids]
            total += float(np.mean(vals)) * (x1 - x0)
    return total


def thm2_window_check(coupling: TimeSignal, r: float, window: float, eta: float,
                      starts=None, quad_points: int = 256) -> CertificateReport:
    """Window-averaged xi test for signed couplings.

    Passes iff the average of xi(L(s), r) over [t, t+T] is <= -eta at every
    sampled window start t.
    """
    if not 0.0 <= r < math.pi / 2:
        raise ValueError(f"r must lie in [0, pi/2), got {r}")
    if window <= 0:
        raise ValueError("window length must be positive")
    if starts is None:
        starts = sample_grid(coupling, num=128)
    starts = np.asarray(starts, dtype=float)
    averages = np.array([
        _xi_window_integral(coupling, r, float(t), float(t) + window, quad_points) / window
        for t in starts
    ])
    worst_idx = int(np.argmax(averages))
    ok = bool(averages[worst_idx] <= -eta)
    return CertificateReport(
        "thm2-xi-window", PASS if ok else FAIL,
        witnesses={
            "worst_window_average": float(averages[worst_idx]),
            "worst_start": float(starts[worst_idx]),
            "window_averages": averages.tolist(),
            "threshold": -eta,
        },
        parameters={"r": r, "window": window, "eta": eta, "num_starts": int(starts.size)},
    )


def tilde_laplacian(lap: np.ndarray, r: float) -> np.ndarray:
    """Scale nonpositive off-diagonal entries by cos(r), refit the diagonal.

    Keeps zero row sums exactly and preserves symmetry; the second-smallest
    eigenvalue of the result is the conservative rate used by the
    symmetric-PSD criteria.
    """
    lap = np.asarray(lap, dtype=float)
    scale = max(1.0, float(np.abs(lap).max()))
    rowsum = np.abs(lap.sum(axis=1)).max()
    if rowsum > 1e-9 * scale:
        raise ValueError(f"Laplacian row sums are not zero (max |row sum| = {rowsum:.3g})")
    out = np.where(lap <= 0, lap * math.cos(r), lap)
    np.fill_diagonal(out, 0.0)
    np.fill_diagonal(out, -out.sum(axis=1))
    return out


def _lambda2_series(coupling: TimeSignal, r: float, h: float, num_windows: int):
    """alpha_k = lambda2 of the tilde of the window-averaged Laplacian, k < num_windows."""
    alphas = []
    for k in range(num_windows):
        avg = coupling.window_average(k * h, (k + 1) * h).value
        lap = graph.laplacian_from_adjacency(np.asarray(avg, dtype=float))
        alphas.append(lambda2(tilde_laplacian(lap, r)))
    return np.array(alphas)


def thm3_series_check(coupling: TimeSignal, r: float, h: float, num_windows: int,
                      alpha_hat: float = 1e-6) -> CertificateReport:
    """Symmetric-PSD criterion: window-averaged tilde-Laplacian connectivity.

    Validates that every sampled Laplacian is symmetric and positive
    semidefinite, then computes the alpha series. The main verdict is the
    series-divergence test, reduced for periodic couplings to a positive
    per-period sum; the uniform-lower-bound verdict (min alpha > alpha_hat) is
    reported alongside for the exponential-rate corollary.
    """
    if not 0.0 <= r < math.pi / 2:
        raise ValueError(f"r must lie in [0, pi/2), got {r}")
    if h <= 0 or num_windows < 1:
        raise ValueError("need h > 0 and at least one window")
    horizon = h * num_windows
    probe = np.unique(np.concatenate([
        coupling.breakpoints_in(0.0, horizon), np.linspace(0.0, horizon, 51),
    ]))
    params = {"r": r, "h": h, "num_windows": num_windows, "alpha_hat": alpha_hat}
    for t in probe:
        a = _coupling_at(coupling, float(t))
        lap = graph.laplacian_from_adjacency(a)
        scale = max(1.0, float(np.abs(lap).max()))
        if np.abs(lap - lap.T).max() > 1e-10 * scale:
            return CertificateReport(
                "thm3-lambda2-series", INCONCLUSIVE,
                witnesses={"asymmetric_at": float(t)}, parameters=params)
        if restricted_spectrum(lap)[0] < -1e-9:
            return CertificateReport(
                "thm3-lambda2-series", INCONCLUSIVE,
                witnesses={"not_psd_at": float(t),
                           "min_eigenvalue": float(restricted_spectrum(lap)[0])},
                parameters=params)

    alphas = _lambda2_series(coupling, r, h, num_windows)
    min_alpha = float(alphas.min())
    partial_sum = float(alphas.sum())
    cor2_pass = min_alpha > alpha_hat

    if coupling.kind == "constant":
        scope, period_sum = "constant", float(alphas[0])
    elif coupling.period is not None and abs(coupling.period / h - round(coupling.period / h)) < 1e-9 \
            and round(coupling.period / h) <= num_windows:
        n = int(round(coupling.period / h))
        scope, period_sum = "one-period", float(alphas[:n].sum())
    else:
        scope, period_sum = "horizon", partial_sum
    thm3_pass = period_sum > 0.0

    return CertificateReport(
        "thm3-lambda2-series", PASS if thm3_pass else FAIL,
        witnesses={
            "alpha_series": alphas.tolist(),
            "min_alpha": min_alpha,
            "partial_sum": partial_sum,
            "per_period_sum": period_sum,
            "divergence_scope": scope,
            "cor2_uniform_pass": bool(cor2_pass),
        },
        parameters=params,
    )


def cor2_uniform_check(coupling: TimeSignal, r: float, h: float, num_windows: int,
                       alpha_hat: float = 1e-6) -> CertificateReport:
    """Exponential-rate variant: every alpha_k must exceed alpha_hat."""
    base = thm3_series_check(coupling, r, h, num_windows, alpha_hat)
    if base.verdict == INCONCLUSIVE:
        return CertificateReport("cor2-lambda2-uniform", INCONCLUSIVE,
                                 witnesses=base.witnesses, parameters=base.parameters)
    verdict = PASS if base.witnesses["cor2_uniform_pass"] else FAIL
    return CertificateReport("cor2-lambda2-uniform", verdict,
                             witnesses=base.witnesses, parameters=base.parameters)


_CHECKS = {
    "invariance-pointwise": lambda om, co, p: invariance_pointwise(om, co, p["r"]),
    "invariance-robust": lambda om, co, p: invariance_robust(om, co, p["r"]),
    "thm1-spanning-tree": lambda om, co, p: thm1_spanning_tree_check(
        co, p["partition"], p["eta"], p.get("bins")),
    "cor1-sliding-window": lambda om, co, p: cor1_sliding_window_check(
        co, p["T"], p["eta"], p.get("starts")),
    "thm2-xi-window": lambda om, co, p: thm2_window_check(
        co, p["r"], p["T"], p["eta"], p.get("starts")),
    "thm3-lambda2-series": lambda om, co, p: thm3_series_check(
        co, p["r"], p["h"], p.get("num_windows", 1), p.get("alpha_hat", 1e-6)),
    "cor2-lambda2-uniform": lambda om, co, p: cor2_uniform_check(
        co, p["r"], p["h"], p.get("num_windows", 1), p.get("alpha_hat", 1e-6)),
}

CRITERIA = tuple(_CHECKS)


def run_check(criterion: str, omega: "TimeSignal | None", coupling: TimeSignal,
              params: dict) -> CertificateReport:
    """Dispatch a criterion by name (CLI entry point)."""
    if criterion not in _CHECKS:
        raise ValueError(f"unknown criterion {criterion!r}; known: {', '.join(CRITERIA)}")
    if omega is None:
        omega = ConstantSignal(0.0)
    try:
        return _CHECKS[criterion](omega, coupling, params)
    except KeyError as exc:
        raise ValueError(f"criterion {criterion!r} is missing parameter {exc}") from exc
