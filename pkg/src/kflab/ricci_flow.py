"""Normalised Kähler–Ricci flow on circle-invariant metrics of P¹.

On potentials the flow is ``phi_dot = -log(theta / C)``.  It is integrated in
symplectic coordinates: with ``u = u0 + v`` the Legendre dual of ``f``, the flow
becomes ``v_dot = L(v)`` where

    L = log(1 + v'' tau (2 - tau) / 2) + (1 - tau) v' + v + log(pi / Mass)

is exactly ``log(theta / C)`` at the point with moment coordinate ``tau``.
On the uniform ``tau`` grid of ``[0, 2]`` the metric measure is ``2 pi dtau``
and the diffusion coefficient is ``f''``, which is bounded, so an explicit
step needs ``dt ~ dtau^2`` rather than the ``dt ~ dt_grid^2 min f''`` that
the log-radial grid would impose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fano_p1 import (
    C_NORM,
    MetricProfile,
    ProfileError,
    SymplecticPotential,
    legendre,
    legendre_inverse,
    make_profile,
    tau_grid,
    trapezoid_weights,
)
from .kempf_ness import finite_difference

# stability interval of classical RK4 on the negative real axis, divided by
# the spectral radius factor 4 of the three-point Laplacian
_RK4_DIFFUSION = 2.785 / 4.0


class StepRejected(ProfileError):
    """A stage left the space of Kähler metrics; retry with a smaller step."""


@dataclass(frozen=True)
class FlowConfig:
    initial: object = field(default_factory=lambda: {"kind": "sech2", "a": 0.5})
    T: float = 15.0
    N: int = 1500
    n_tau: int = 201
    dt_init: float = 1e-3
    t_max: float = 20.0
    safety: float = 0.9
    monitor_every: float = 0.01
    symmetrize: bool = True

    def __post_init__(self):
        if not self.dt_init > 0:
            raise ValueError("dt_init must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.monitor_every > 0:
            raise ValueError("monitor_every must be positive")
        if self.n_tau < 11:
            raise ValueError("n_tau must be at least 11")

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown flow config field(s): {sorted(unknown)}")
        return cls(**data)

    def initial_profile(self):
        if isinstance(self.initial, MetricProfile):
            prof = self.initial
        else:
            prof = make_profile(self.T, self.N, self.initial)
        return prof.symmetrized().validate() if self.symmetrize else prof


class TauGrid:
    """Discrete operators on the uniform ``tau`` grid."""

    def __init__(self, n):
        self.tau = tau_grid(n)
        self.h = self.tau[1] - self.tau[0]
        self.a = 0.5 * self.tau * (2.0 - self.tau)
        self.quad = trapezoid_weights(n, self.h)
        self.drift = 1.0 - self.tau

    def integrate(self, g):
        return float(np.dot(self.quad, g))

    def d1(self, v):
        h = self.h
        out = np.empty_like(v)
        out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
        out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
        out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
        return out

    def d2(self, v):
        # the second derivative only enters multiplied by tau (2 - tau), which vanishes at the ends
        out = np.zeros_like(v)
        out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / self.h**2
        return out

    def state(self, v):
        """``(L, Mass, g)`` with ``g = 1 + a v''`` (``f''/f0''`` is ``1 / g``)."""
        g = 1.0 + self.a * self.d2(v)
        if np.any(g <= 0):
            i = int(np.flatnonzero(g <= 0)[0])
            raise StepRejected(f"Kähler positivity lost at tau node {i}")
        core = self.drift * self.d1(v) + v
        mass = 2.0 * np.pi * self.integrate(0.25 * np.exp(core) * g)
        L = np.log(g) + core + math.log(math.pi / mass)
        return L, mass, g

    def rhs(self, v):
        return self.state(v)[0]

    def rk4(self, v, dt):
        k1 = self.rhs(v)
        k2 = self.rhs(v + 0.5 * dt * k1)
        k3 = self.rhs(v + 0.5 * dt * k2)
        k4 = self.rhs(v + dt * k3)
        out = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        self.state(out)
        return out

    def stable_dt(self, v, safety=0.9):
        _, _, g = self.state(v)
        fpp = self.a / g
        return safety * _RK4_DIFFUSION * self.h**2 / max(float(fpp.max()), 1e-12)

    def monitors(self, v):
        L, mass, g = self.state(v)
        eL = np.exp(L)
        return {
            "F": 0.5 * self.integrate(v) - math.log(mass),
            "H": 0.5 * self.integrate(eL * L),
            "dF_dt_pred": -0.5 * self.integrate(L * (eL - 1.0)),
            "sup_mu_over_C": float(np.max(np.abs(eL - 1.0))),
            "mass_omega_cap": mass,
            "min_fpp": float(np.min(1.0 / g)),
            "E_surrogate": math.pi * C_NORM**2 * self.integrate((eL - 1.0) ** 2),
        }


def step(profile, dt, n_tau=None):
    """One RK4 step of the flow for a profile on the log-radial grid.

    Raises :class:`StepRejected` when a stage loses positivity; halve ``dt`` and retry.
    """
    n_tau = 201 if n_tau is None else n_tau
    grid = TauGrid(n_tau)
    sp = legendre(profile, n_tau)
    v = grid.rk4(sp.v, dt)
    return legendre_inverse(SymplecticPotential(grid.tau, v), profile.T, profile.N)


@dataclass
class FlowTrace:
    s: np.ndarray
    F: np.ndarray
    H: np.ndarray
    dF_dt_pred: np.ndarray
    sup_mu_over_C: np.ndarray
    mass_omega_cap: np.ndarray
    min_fpp: np.ndarray
    dt: np.ndarray
    E_surrogate: np.ndarray
    final: SymplecticPotential | None = None
    converged: bool = True
    message: str = ""

    COLUMNS = ("s", "F", "H", "dF_dt_pred", "dF_dt_fd", "sup_mu_over_C", "mass_omega_cap", "min_fpp", "dt")

    @property
    def dF_dt_fd(self):
        return finite_difference(self.F, self.s)

    def rows(self):
        fd = self.dF_dt_fd
        return [
            (self.s[i], self.F[i], self.H[i], self.dF_dt_pred[i], fd[i], self.sup_mu_over_C[i],
             self.mass_omega_cap[i], self.min_fpp[i], self.dt[i])
            for i in range(len(self.s))
        ]

    def final_profile(self, T=15.0, N=1500):
        return legendre_inverse(self.final, T, N)

    def reversed(self):
        """Time-reversed copy (a negative control for the monotonicity checks)."""
        rev = {k: getattr(self, k)[::-1].copy() for k in
               ("F", "H", "dF_dt_pred", "sup_mu_over_C", "mass_omega_cap", "min_fpp", "dt", "E_surrogate")}
        return FlowTrace(s=self.s.copy(), final=self.final, **rev)


def run(config):
    """Integrate the flow and record monitors every ``config.monitor_every`` units of time."""
    profile = config.initial_profile()
    grid = TauGrid(config.n_tau)
    v = legendre(profile, config.n_tau).v
    n_samples = int(round(config.t_max / config.monitor_every))
    interval = config.t_max / n_samples
    rec = {k: [] for k in ("F", "H", "dF_dt_pred", "sup_mu_over_C", "mass_omega_cap", "min_fpp", "E_surrogate")}
    times, dts = [], []

    def record(s, dt):
        for k, val in grid.monitors(v).items():
            rec[k].append(val)
        times.append(s)
        dts.append(dt)

    dt = min(config.dt_init, grid.stable_dt(v, config.safety))
    record(0.0, dt)
    converged, message = True, ""
    for k in range(n_samples):
        dt = min(config.dt_init, grid.stable_dt(v, config.safety))
        n_sub = max(1, math.ceil(interval / dt - 1e-9))
        start = v
        while True:
            try:
                v = start
                for _ in range(n_sub):
                    v = grid.rk4(v, interval / n_sub)
                break
            except StepRejected:
                # rejected stage: restart the interval with half the step
                n_sub *= 2
                if interval / n_sub < 1e-14:
                    converged, message = False, "step size underflow"
                    v = start
                    break
        if not converged:
            break
        if not np.all(np.isfinite(v)):
            converged, message = False, "non-finite state"
            break
        record((k + 1) * interval, interval / n_sub)
    if converged and rec["sup_mu_over_C"][-1] >= 1e-4:
        converged, message = False, f"sup|mu|/C = {rec['sup_mu_over_C'][-1]:.2e} at t_max"
    return FlowTrace(
        s=np.array(times), dt=np.array(dts), final=SymplecticPotential(grid.tau, v),
        converged=converged, message=message, **{k: np.array(val) for k, val in rec.items()}
    )


@dataclass(frozen=True)
class MonotonicityVerdict:
    H_non_increasing: bool
    dF_le_minus_H: bool
    fd_matches_pred: bool
    discrete_dF_bound: bool
    max_H_increase: float
    max_fd_error: float
    max_pred_excess: float

    @property
    def passed(self):
        return self.H_non_increasing and self.dF_le_minus_H and self.fd_matches_pred and self.discrete_dF_bound

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"passed": self.passed}


def monotonicity_report(trace, h_slack=1e-10, fd_rel=1e-4, slack=1e-8, bound_factor=1e-2):
    if len(trace.s) < 3:
        raise ValueError("trace needs at least three samples")
    dH = np.diff(trace.H)
    fd = trace.dF_dt_fd
    inner = slice(2, -2) if len(trace.s) > 6 else slice(1, -1)
    err = np.abs(fd[inner] - trace.dF_dt_pred[inner]) / (1.0 + np.abs(trace.dF_dt_pred[inner]))
    excess = trace.dF_dt_pred + trace.H
    forward = np.diff(trace.F) / np.diff(trace.s)
    bound = forward <= -trace.H[:-1] * (1.0 - bound_factor) + slack
    return MonotonicityVerdict(
        H_non_increasing=bool(np.all(dH <= h_slack)),
        dF_le_minus_H=bool(np.all(excess <= slack)),
        fd_matches_pred=bool(np.all(err <= fd_rel)),
        discrete_dF_bound=bool(np.all(bound)),
        max_H_increase=float(dH.max()),
        max_fd_error=float(err.max()) if err.size else 0.0,
        max_pred_excess=float(excess.max()),
    )
