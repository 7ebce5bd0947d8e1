"""Weighted Laplacian of the volume form on invariant functions of P¹.

The quadratic form ``2 pi int (u'^2 / w) q dt`` against the measure
``2 pi q dt`` defines ``Delta_Omega``; the operator of interest is
``P = Delta_Omega - 1``.  Functions of ``t`` are discretised with linear
elements on the profile grid, which makes ``K 1 = 0`` hold exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .fano_p1 import TWO_PI, densities


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SturmLiouvilleSystem:
    """Tridiagonal stiffness ``K`` (``diag``, ``off``) and diagonal mass ``M``."""

    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    t: np.ndarray
    coeff: np.ndarray  # q / w at the midpoints
    fp: np.ndarray
    q: np.ndarray
    q_tails: tuple

    @property
    def size(self):
        return len(self.diag)

    def apply_K(self, u):
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def apply_M(self, u):
        return self.mass * u

    def dense_K(self):
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def _banded(self, shift):
        ab = np.zeros((3, self.size))
        ab[0, 1:] = self.off
        ab[1] = self.diag - shift * self.mass
        ab[2, :-1] = self.off
        return ab


def assemble(profile):
    d = densities(profile)
    h = profile.h
    p = d.q / d.w
    mid = 0.5 * (p[:-1] + p[1:])
    flux = TWO_PI * mid / h
    diag = np.zeros(len(p))
    diag[:-1] += flux
    diag[1:] += flux
    # the exterior of the grid is lumped into the end nodes of the mass matrix
    mass = TWO_PI * d.q * d.quad
    mass[0] += TWO_PI * d.q_tails[0]
    mass[-1] += TWO_PI * d.q_tails[1]
    return SturmLiouvilleSystem(
        diag=diag, off=-flux, mass=mass, t=d.t, coeff=mid, fp=d.tau, q=d.q, q_tails=d.q_tails
    )


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, M-orthonormal
    residuals: np.ndarray

    @property
    def P_eigenvalues(self):
        return self.eigenvalues - 1.0


def _residual(system, lam, v):
    return float(np.linalg.norm(system.apply_K(v) - lam * system.apply_M(v)) / np.linalg.norm(system.apply_M(v)))


def eigensolve(system, k, refine=3, tol=1e-8):
    """Lowest ``k`` generalized eigenpairs of ``K v = lambda M v``.

    A symmetric tridiagonal reduction gives starting pairs; the strong grading of
    ``M`` toward the grid ends limits their accuracy, so each pair is polished by
    shifted inverse iteration with Rayleigh-quotient updates.
    """
    n = system.size
    if not 1 <= k <= (n - 1) // 4:
        raise ValueError(f"k must lie in [1, N/4], got {k}")
    s = 1.0 / np.sqrt(system.mass)
    lam, V = eigh_tridiagonal(
        system.diag * s * s, system.off * s[:-1] * s[1:], select="i", select_range=(0, k - 1)
    )
    V = V * s[:, None]
    vals = np.empty(k)
    vecs = np.empty((n, k))
    res = np.empty(k)
    for j in range(k):
        v = V[:, j]
        mu = lam[j]
        for _ in range(refine):
            v = v / np.sqrt(v @ system.apply_M(v))
            mu = float(v @ system.apply_K(v))
            if _residual(system, mu, v) <= 1e-3 * tol:
                break
            try:
                x = solve_banded((1, 1), system._banded(mu), system.apply_M(v))
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(x)):
                break
            v = x
        v = v / np.sqrt(v @ system.apply_M(v))
        mu = float(v @ system.apply_K(v))
        # fix the sign by the largest entry for reproducible output
        v = v * np.sign(v[np.argmax(np.abs(v))])
        vals[j], vecs[:, j], res[j] = mu, v, _residual(system, mu, v)
        if res[j] > tol:
            raise SpectralError(f"eigenpair {j} did not converge: residual {res[j]:.2e}")
    order = np.argsort(vals)
    return SpectrumResult(vals[order], vecs[:, order], res[order])


def quadratic_form_P(system, u):
    """``<Pu, u>`` for ``u`` projected M-orthogonally off the constants."""
    u = np.asarray(u, dtype=float)
    u = u - (system.mass @ u) / system.mass.sum()
    return float(u @ system.apply_K(u) - u @ system.apply_M(u))


def sup_normalized_error(v, g):
    """Sup distance between ``v`` and ``g`` after both are scaled to sup-norm one (best sign)."""
    a = v / np.max(np.abs(v))
    b = g / np.max(np.abs(g))
    return float(min(np.max(np.abs(a - b)), np.max(np.abs(a + b))))


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    P_eigenvalues: np.ndarray
    residuals: np.ndarray
    epsilon: float  # P on constants
    constant_error: float
    holomorphy_index: int
    holomorphy_eigenvalue: float
    holomorphy_vector_error: float
    holomorphy_const_orthogonality: float
    gap_violations: tuple
    m_orthogonality: float
    gap_tol: float = 1e-3

    @property
    def dichotomy_holds(self):
        rest = np.delete(self.P_eigenvalues, [0, self.holomorphy_index])
        return bool(np.all(rest * self.epsilon <= 0.0))

    @property
    def passed(self):
        return (
            abs(self.holomorphy_eigenvalue - 1.0) <= self.gap_tol
            and self.holomorphy_vector_error <= 1e-3
            and not self.gap_violations
            and self.dichotomy_holds
            and abs(self.eigenvalues[0]) <= 1e-9
        )

    COLUMNS = ("index", "lambda_weighted_laplacian", "lambda_P", "residual")

    def rows(self):
        return [(i, lam, lam - 1.0, r) for i, (lam, r) in enumerate(zip(self.eigenvalues, self.residuals))]


def spectral_report(profile, k=4, system=None, gap_tol=1e-3):
    system = assemble(profile) if system is None else system
    spec = eigensolve(system, k)
    lam = spec.eigenvalues
    v0 = spec.eigenvectors[:, 0]
    const_err = float(np.max(np.abs(v0 / v0.mean() - 1.0)))
    j = int(np.argmin(np.abs(lam - 1.0)))
    g = system.fp - 1.0
    vec_err = sup_normalized_error(spec.eigenvectors[:, j], g)
    # int (f' - 1) q dt; the mass matrix already carries the tails
    orth = float(np.dot(system.mass, g) / TWO_PI)
    gaps = tuple(float(x) for x in lam if 1e-6 < x < 1.0 - gap_tol)
    gram = spec.eigenvectors.T @ (system.mass[:, None] * spec.eigenvectors)
    return SpectralReport(
        eigenvalues=lam,
        P_eigenvalues=lam - 1.0,
        residuals=spec.residuals,
        epsilon=float(lam[0] - 1.0),
        constant_error=const_err,
        holomorphy_index=j,
        holomorphy_eigenvalue=float(lam[j]),
        holomorphy_vector_error=vec_err,
        holomorphy_const_orthogonality=orth,
        gap_violations=gaps,
        m_orthogonality=float(np.max(np.abs(gram - np.eye(len(lam))))),
        gap_tol=gap_tol,
    )
