"""Ding, Monge–Ampère and He functionals on circle-invariant metrics of P¹."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fano_p1 import (
    C_NORM,
    TWO_PI,
    SymplecticPotential,
    densities,
    f0_d1,
    f0_d2,
    legendre,
    legendre_inverse,
)
from .parallel import ordered_map


@dataclass(frozen=True)
class FunctionalReport:
    I: float
    F_ding: float
    H_entropy: float
    H_log: float
    B_mu: float
    dF_prediction: float
    mass_omega: float
    ke_residual: float

    @property
    def H_he(self):
        return self.H_entropy


def energy_I(profile, dens=None):
    """Monge–Ampère energy ``I = (C / 2) 2 pi int phi (w0 + w) dt``, zero at Fubini–Study.

    Its variation is ``delta I = C int (delta phi) omega``.
    """
    d = densities(profile) if dens is None else dens
    phi = profile.phi
    T = profile.T
    w0 = f0_d2(d.t)
    w0_part = TWO_PI * (
        float(np.dot(d.quad, phi * w0)) + phi[0] * f0_d1(-T) + phi[-1] * (2.0 - f0_d1(T))
    )
    return 0.5 * C_NORM * (w0_part + d.integrate(phi, "w"))


def ding_F(profile, dens=None):
    """Ding functional ``F = -I - log Mass_Omega``; ``F(FS) = -log(pi)``."""
    d = densities(profile) if dens is None else dens
    return -energy_I(profile, d) - np.log(d.mass_omega)


def _log_ratio(d):
    return np.log(d.theta / d.C)


def he_H(profile, form="entropy", dens=None):
    """He functional.

    ``form="entropy"``: ``2 pi int theta log(theta / C) w dt``.
    ``form="log"``: ``C int log(Omega / omega) Omega`` with ``Omega`` rescaled to mass ``4 pi``.
    """
    d = densities(profile) if dens is None else dens
    lr = _log_ratio(d)
    if form == "entropy":
        return d.integrate(d.theta * lr, "w")
    if form == "log":
        scale = 4.0 * np.pi / d.mass_omega
        # rescaled Omega over omega is theta / C pointwise
        return d.C * scale * d.integrate(np.log(scale * d.q / d.w), "q")
    raise ValueError(f"unknown form {form!r}")


def B_mu(profile, dens=None):
    """``B(mu) = int [(mu + C) log(mu / C + 1) - mu] omega``."""
    d = densities(profile) if dens is None else dens
    return d.integrate(d.theta * _log_ratio(d) - d.mu, "w")


def dF_prediction(profile, dens=None):
    """Rate of change of ``F`` along Kähler–Ricci flow: ``-2 pi int log(theta/C) (theta - C) w dt``."""
    d = densities(profile) if dens is None else dens
    return -d.integrate(_log_ratio(d) * d.mu, "w")


def report(profile):
    d = densities(profile)
    return FunctionalReport(
        I=energy_I(profile, d),
        F_ding=ding_F(profile, d),
        H_entropy=he_H(profile, "entropy", d),
        H_log=he_H(profile, "log", d),
        B_mu=B_mu(profile, d),
        dF_prediction=dF_prediction(profile, d),
        mass_omega=d.mass_omega,
        ke_residual=float(np.max(np.abs(d.theta - d.C)) / d.C),
    )


@dataclass
class ConvexityScan:
    s: np.ndarray
    F: np.ndarray
    I: np.ndarray
    mass_omega: np.ndarray
    tolerance: float
    second_diff: np.ndarray = field(init=False)

    def __post_init__(self):
        self.second_diff = self.F[2:] - 2.0 * self.F[1:-1] + self.F[:-2]

    @property
    def min_second_diff(self):
        return float(self.second_diff.min()) if self.second_diff.size else 0.0

    @property
    def max_abs_second_diff(self):
        return float(np.abs(self.second_diff).max()) if self.second_diff.size else 0.0

    @property
    def passed(self):
        return self.min_second_diff >= -self.tolerance

    COLUMNS = ("s", "F", "I", "MassOmega", "second_diff")

    def rows(self):
        # second difference is attached to the interior sample it is centred on
        sd = np.full(len(self.s), np.nan)
        sd[1:-1] = self.second_diff
        return [tuple(r) for r in zip(self.s, self.F, self.I, self.mass_omega, sd)]


def ding_convexity_scan(p0, p1, samples=21, tol=1e-6, max_workers=None):
    """Evaluate ``F`` at ``samples`` equally spaced points of the geodesic from ``p0`` to ``p1``.

    Convexity holds when every discrete second difference is ``>= -tol * (1 + |F| scale)``.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    if not p0.same_grid(p1):
        raise ValueError("profiles must share a grid")
    u_a, u_b = legendre(p0), legendre(p1)
    s = np.linspace(0.0, 1.0, samples)

    def at(si):
        if si == 0.0:
            prof = p0
        elif si == 1.0:
            prof = p1
        else:
            u_s = SymplecticPotential(u_a.tau, (1.0 - si) * u_a.v + si * u_b.v)
            prof = legendre_inverse(u_s, p0.T, p0.N).validate()
        d = densities(prof)
        i_val = energy_I(prof, d)
        return -i_val - np.log(d.mass_omega), i_val, d.mass_omega

    vals = np.array(ordered_map(at, s, max_workers))
    F = vals[:, 0]
    scale = float(np.max(np.abs(F))) if F.size else 0.0
    return ConvexityScan(s=s, F=F, I=vals[:, 1], mass_omega=vals[:, 2], tolerance=tol * (1.0 + scale))
