"""Dense symmetric eigensolver, restricted spectra, and state-transition matrices.

The eigensolver is a self-contained cyclic Jacobi iteration, adequate for the
m <= 50 networks this package targets. Quantities "over the eigenspace
orthogonal to 1" are computed by restricting to an explicit orthonormal basis
of that subspace rather than eigensolving a projected matrix, which stays
correct when the input is indefinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tvkuramoto.signals import TimeSignal, check_alignment


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Eigenvalues in ascending order with matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column k pairs with eigenvalues[k]


@dataclass(frozen=True)
class TransitionMatrix:
    """Linear map sending a solution at time s to its value at time t."""

    s: float
    t: float
    matrix: np.ndarray


def _check_symmetric(mat: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"need a square matrix, got shape {mat.shape}")
    norm = np.linalg.norm(mat)
    if norm > 0 and np.linalg.norm(mat - mat.T) >= rtol * norm:
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (mat + mat.T)


def _jacobi_rotate(a: np.ndarray, vecs: np.ndarray, p: int, q: int) -> None:
    """Annihilate a[p, q] with a two-sided Givens rotation, accumulating vectors."""
    apq = a[p, q]
    if apq == 0.0:
        return
    tau = (a[q, q] - a[p, p]) / (2.0 * apq)
    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.hypot(1.0, tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    s = t * c
    for m_ in (a, a.T):  # columns then rows; a stays symmetric
        col_p = m_[:, p].copy()
        col_q = m_[:, q].copy()
        m_[:, p] = c * col_p - s * col_q
        m_[:, q] = s * col_p + c * col_q
    col_p = vecs[:, p].copy()
    col_q = vecs[:, q].copy()
    vecs[:, p] = c * col_p - s * col_q
    vecs[:, q] = s * col_p + c * col_q
    a[p, q] = a[q, p] = 0.0


def symmetric_eigen(mat: np.ndarray, max_sweeps: int = 100) -> SymmetricSpectrum:
    """Full spectrum of a symmetric matrix by cyclic Jacobi sweeps.

    Sweeps run until every off-diagonal magnitude drops below 1e-12 times the
    Frobenius norm of the input. Rejects matrices that are not symmetric to
    1e-10 relative tolerance.
    """
    a = _check_symmetric(mat).copy()
    m = a.shape[0]
    vecs = np.eye(m)
    norm = np.linalg.norm(a)
    if norm > 0.0:
        thresh = 1e-12 * norm
        for _ in range(max_sweeps):
            off = a - np.diag(np.diag(a))
            if np.max(np.abs(off)) < thresh:
                break
            for p in range(m - 1):
                for q in range(p + 1, m):
                    if abs(a[p, q]) >= thresh * 1e-2:
                        _jacobi_rotate(a, vecs, p, q)
        else:
            raise RuntimeError("Jacobi iteration did not converge")
    order = np.argsort(np.diag(a), kind="stable")
    return SymmetricSpectrum(np.diag(a)[order].copy(), vecs[:, order].copy())


def _ones_complement_basis(m: int) -> np.ndarray:
    """Orthonormal m x (m-1) basis of the subspace orthogonal to the ones vector."""
    u = np.full(m, 1.0 / math.sqrt(m))
    v = -u
    v[0] += 1.0  # v = e1 - u, reflector H maps e1 to u
    h = np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)
    return h[:, 1:]


def restricted_spectrum(mat: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix restricted to the 1-orthogonal subspace."""
    sym = _check_symmetric(mat)
    m = sym.shape[0]
    if m == 1:
        return np.array([])
    basis = _ones_complement_basis(m)
    return symmetric_eigen(basis.T @ sym @ basis).eigenvalues


def lambda2(mat: np.ndarray) -> float:
    """Smallest eigenvalue over the subspace orthogonal to 1.

    For a positive-semidefinite zero-row-sum matrix with a simple zero
    eigenvalue this is the second-smallest eigenvalue of the full spectrum
    (algebraic connectivity); for indefinite inputs the restriction keeps the
    value meaningful.
    """
    mat = np.asarray(mat, dtype=float)
    rowsum = np.max(np.abs(mat.sum(axis=1)))
    if rowsum > 1e-8 * max(1.0, np.linalg.norm(mat)):
        raise ValueError(f"matrix row sums are not zero (max |row sum| = {rowsum:.3g})")
    return float(restricted_spectrum(mat)[0])


def state_transition(gen: TimeSignal, s: float, t: float, dt: float) -> TransitionMatrix:
    """Integrate U' = -G(tau) U, U(s) = I with the classical 4th-order one-step method.

    dt must divide the span and hit every breakpoint of the generator signal,
    so a discontinuity never falls inside a step. For piecewise-constant
    generators the stage values within one step coincide and G is evaluated
    once per step.
    """
    if t < s:
        raise ValueError(f"need t >= s, got s={s}, t={t}")
    nsteps = check_alignment(gen, s, t, dt)
    g0 = np.asarray(gen.evaluate(s), dtype=float)
    m = g0.shape[0]
    u = np.eye(m)
    pc = gen.is_piecewise_constant
    for k in range(nsteps):
        tau = s + k * dt
        ga = np.asarray(gen.evaluate(tau), dtype=float)
        gb = ga if pc else np.asarray(gen.evaluate(tau + 0.5 * dt), dtype=float)
        gc = ga if pc else np.asarray(gen.evaluate(min(tau + dt, t)), dtype=float)
        k1 = -ga @ u
        k2 = -gb @ (u + 0.5 * dt * k1)
        k3 = -gb @ (u + 0.5 * dt * k2)
        k4 = -gc @ (u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return TransitionMatrix(s, t, u)


def contraction_factor(trans) -> float:
    """Largest eigenvalue of U^T U restricted to the subspace orthogonal to 1.

    Equals the squared worst-case gain of the transition over disagreement
    vectors; 1 for the identity, below 1 once the generator mixes.
    """
    u = trans.matrix if isinstance(trans, TransitionMatrix) else np.asarray(trans, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"need a square matrix, got shape {u.shape}")
    return float(restricted_spectrum(u.T @ u)[-1])
