"""Circle-invariant Kähler metrics on the projective line.

A metric on the anticanonical bundle ``O(2)`` is described on the log-radial
coordinate ``t = log|z|^2`` by a convex potential ``f(t) = f0(t) + phi(t)``,
where ``f0(t) = 2 log(1 + e^t)`` is Fubini–Study.  With ``dt ^ dtheta`` as
reference measure the metric form has density ``w = f''``, the volume form
``Omega_h`` has density ``q = exp(t - f) / 2`` and the moment coordinate is
``tau = f'`` in ``(0, 2)``.

The grid is uniform on ``[-T, T]``; outside it ``phi`` is taken constant,
which gives closed-form tail corrections for every integral.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

TWO_PI = 2.0 * np.pi
C_NORM = 1.0 / (4.0 * np.pi)
BOUNDARY_FLATNESS = 1e-6


class ProfileError(ValueError):
    """A potential that does not define a Kähler metric on the grid."""


# Fubini-Study reference --------------------------------------------------


def f0(t):
    return 2.0 * np.logaddexp(0.0, t)


def f0_d1(t):
    return 2.0 * expit(t)


def f0_d2(t):
    return 2.0 * expit(t) * expit(-t)


def u0(tau):
    """Legendre transform of ``f0``: ``tau log tau + (2 - tau) log(2 - tau) - 2 log 2``."""
    tau = np.asarray(tau, dtype=float)
    a = tau / 2.0
    b = 1.0 - a
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * (np.where(a > 0, a * np.log(a), 0.0) + np.where(b > 0, b * np.log(b), 0.0))
    return out


def _u0_of_s(s):
    """``u0(2 expit(s))`` evaluated without cancellation near the endpoints."""
    a = expit(s)
    b = expit(-s)
    return 2.0 * (a * -np.logaddexp(0.0, -s) + b * -np.logaddexp(0.0, s))


# finite differences --------------------------------------------------------


@lru_cache(maxsize=None)
def _fd_weights(offsets, order):
    """Weights ``c`` with ``sum_k c_k g(x + o_k h) ~ h^order g^(order)(x)``."""
    offsets = np.array(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return tuple(np.linalg.solve(A, rhs))


def derivative(y, h, order):
    """Fourth-order finite-difference derivative (``order`` 1 or 2) on a uniform grid."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 7:
        raise ValueError("need at least 7 grid points")
    out = np.empty(n)
    centre = _fd_weights((-2, -1, 0, 1, 2), order)
    out[2:-2] = sum(c * y[2 + o : n - 2 + o] for c, o in zip(centre, (-2, -1, 0, 1, 2)))
    width = 5 if order == 1 else 6
    for i in (0, 1):
        offs = tuple(range(-i, width - i))
        wts = _fd_weights(offs, order)
        out[i] = sum(c * y[i + o] for c, o in zip(wts, offs))
        j = n - 1 - i
        offs_r = tuple(-o for o in offs)
        wts_r = _fd_weights(offs_r, order)
        out[j] = sum(c * y[j + o] for c, o in zip(wts_r, offs_r))
    return out / h**order


def trapezoid_weights(n, h):
    wts = np.full(n, h)
    wts[0] = wts[-1] = 0.5 * h
    return wts


def gregory_weights(n, h):
    """End-corrected trapezoid weights, exact for cubics (needs n >= 6)."""
    wts = np.full(n, h)
    ends = h * np.array([3 / 8, 7 / 6, 23 / 24])
    wts[:3] = ends
    wts[-3:] = ends[::-1]
    return wts


# profiles --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricProfile:
    T: float
    N: int
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.shape != (self.N + 1,):
            raise ValueError(f"phi must have N+1={self.N + 1} entries, got {phi.shape}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "phi", phi)

    @property
    def t(self):
        return np.linspace(-self.T, self.T, self.N + 1)

    @property
    def h(self):
        return 2.0 * self.T / self.N

    @property
    def f(self):
        return f0(self.t) + self.phi

    def d_phi(self):
        return derivative(self.phi, self.h, 1)

    def dd_phi(self):
        return derivative(self.phi, self.h, 2)

    def fp(self):
        return f0_d1(self.t) + self.d_phi()

    def fpp(self):
        return f0_d2(self.t) + self.dd_phi()

    def same_grid(self, other):
        return self.N == other.N and abs(self.T - other.T) <= 1e-12 * self.T

    def with_phi(self, phi):
        return MetricProfile(self.T, self.N, phi)

    def symmetrized(self):
        """Average with the reflection ``t -> -t`` (invariance under ``z -> 1/z``)."""
        return self.with_phi(0.5 * (self.phi + self.phi[::-1]))

    def validate(self, flatness=BOUNDARY_FLATNESS):
        fpp = self.fpp()
        bad = np.flatnonzero(fpp[1:-1] <= 0)
        if bad.size:
            i = int(bad[0]) + 1
            raise ProfileError(f"Kähler positivity violated: f'' = {fpp[i]:.3e} <= 0 at node {i} (t = {self.t[i]:.4f})")
        dphi = self.d_phi()
        if max(abs(dphi[0]), abs(dphi[-1])) > flatness:
            raise ProfileError(
                f"boundary derivative of phi not flat: {dphi[0]:.2e}, {dphi[-1]:.2e} (tolerance {flatness:.0e})"
            )
        return self

    def to_json(self):
        return {"T": self.T, "N": self.N, "phi": [float(x) for x in self.phi]}

    @classmethod
    def from_json(cls, data):
        unknown = set(data) - {"T", "N", "phi"}
        if unknown:
            raise ValueError(f"unknown profile field(s): {sorted(unknown)}")
        for key in ("T", "N", "phi"):
            if key not in data:
                raise ValueError(f"profile is missing field {key!r}")
        return cls(data["T"], data["N"], data["phi"])


def _sech2_half(t):
    # sech^2(t/2) = 4 e^t / (1 + e^t)^2, the Fubini-Study density shape
    return 4.0 * expit(t) * expit(-t)


def make_profile(T=15.0, N=1500, spec="fubini_study", validate=True):
    """Build a profile from a spec.

    ``spec`` is ``"fubini_study"`` or a mapping with ``kind`` among

    * ``sech2``: ``phi = a sech^2(t / 2)`` (key ``a``);
    * ``translated_fs``: ``phi = f0(t - a) - f0(t)``, Fubini–Study pulled back by a dilation;
    * ``fourier``: ``phi = sech^2(t / 2) sum_k (a_k cos(k pi x / 2) + b_k sin(k pi x / 2))``
      in ``x = tanh(t / 2)``, keys ``cos`` (``k = 0, 1, ...``) and ``sin`` (``k = 1, 2, ...``).
      Being a smooth function of ``x`` it extends smoothly over both poles;
    * ``random``: random ``fourier`` coefficients from ``seed`` (optional ``modes``,
      ``amplitude``, ``symmetric``), shrunk until the profile is valid.

    Any spec may carry ``symmetric: true`` to average with ``t -> -t``.
    """
    if N < 64 or T < 10:
        raise ValueError("need N >= 64 and T >= 10")
    t = np.linspace(-T, T, N + 1)
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind")
    symmetric = spec.pop("symmetric", False)
    if kind == "fubini_study":
        phi = np.zeros_like(t)
    elif kind == "sech2":
        phi = spec.pop("a") * _sech2_half(t)
    elif kind == "translated_fs":
        # f0(t - a) - f0(t) without cancelling two large logarithms
        phi = 2.0 * np.log1p(expit(t) * np.expm1(-spec.pop("a")))
    elif kind == "fourier":
        phi = _fourier(t, spec.pop("cos", ()), spec.pop("sin", ()))
    elif kind == "random":
        return random_profile(
            spec.pop("seed"), T, N, modes=spec.pop("modes", 4), amplitude=spec.pop("amplitude", 0.4),
            symmetric=symmetric,
        )
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    if spec:
        raise ValueError(f"unknown profile parameter(s) for {kind}: {sorted(spec)}")
    prof = MetricProfile(T, N, phi)
    if symmetric:
        prof = prof.symmetrized()
    return prof.validate() if validate else prof


def _fourier(t, cos, sin):
    x = np.tanh(0.5 * t)
    series = np.zeros_like(t)
    for k, a in enumerate(cos):
        series += a * np.cos(0.5 * np.pi * k * x)
    for k, b in enumerate(sin, start=1):
        series += b * np.sin(0.5 * np.pi * k * x)
    return _sech2_half(t) * series


def random_profile(seed, T=15.0, N=1500, modes=4, amplitude=0.4, symmetric=False, margin=0.5):
    """Random valid profile: a decaying Fourier perturbation of Fubini–Study.

    The amplitude is shrunk until the profile is valid and ``f'' >= margin * f0''``.
    """
    rng = np.random.default_rng(seed)
    decay = 1.0 / (1.0 + np.arange(modes))
    cos = rng.uniform(-1, 1, modes) * decay
    sin = np.zeros(0) if symmetric else rng.uniform(-1, 1, modes) * decay
    scale = amplitude
    for _ in range(60):
        prof = make_profile(T, N, {"kind": "fourier", "cos": scale * cos, "sin": scale * sin}, validate=False)
        try:
            prof.validate()
        except ProfileError:
            scale *= 0.7
            continue
        # keep a margin from degeneracy so random metrics are comparable to the reference
        if np.min(prof.fpp() / f0_d2(prof.t)) >= margin:
            return prof
        scale *= 0.7
    raise ProfileError("could not draw a valid random profile")


# densities -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeometryDensities:
    """Per-node densities against ``dt ^ dtheta`` plus tail masses beyond ``+-T``."""

    t: np.ndarray
    w: np.ndarray
    q: np.ndarray
    tau: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    mass_omega: float
    vol_omega: float
    quad: np.ndarray
    w_tails: tuple
    q_tails: tuple
    C: float = C_NORM

    def integrate(self, g, against="w"):
        """``2 pi int g * density dt`` including tails (``g`` frozen at its end values).

        ``against`` is ``"w"`` (the metric form), ``"q"`` (the volume form) or
        ``"theta"`` (the probability measure ``theta * omega = Omega / Mass``).
        """
        if against == "theta":
            return self.integrate(g, "q") / self.mass_omega
        dens, tails = (self.w, self.w_tails) if against == "w" else (self.q, self.q_tails)
        g = np.broadcast_to(np.asarray(g, dtype=float), self.t.shape)
        return TWO_PI * (float(np.dot(self.quad, g * dens)) + g[0] * tails[0] + g[-1] * tails[1])

    def integral_mu(self):
        """``int mu omega``; zero up to rounding for every profile."""
        return self.integrate(1.0, "theta") - self.C * self.vol_omega


def densities(profile):
    t = profile.t
    fp = profile.fp()
    w = profile.fpp()
    if np.any(w[1:-1] <= 0):
        profile.validate()
    q = 0.5 * np.exp(t - profile.f)
    quad = gregory_weights(len(t), profile.h)
    # f' runs from 0 at -inf to 2 at +inf beyond the grid
    w_tails = (float(fp[0]), float(2.0 - fp[-1]))
    edge = 0.5 / (1.0 + np.exp(profile.T))
    q_tails = (edge * np.exp(-profile.phi[0]), edge * np.exp(-profile.phi[-1]))
    mass = TWO_PI * (float(np.dot(quad, q)) + q_tails[0] + q_tails[1])
    vol = TWO_PI * (float(np.dot(quad, w)) + w_tails[0] + w_tails[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = q / (w * mass)
    return GeometryDensities(
        t=t, w=w, q=q, tau=fp, theta=theta, mu=theta - C_NORM, mass_omega=mass, vol_omega=vol,
        quad=quad, w_tails=w_tails, q_tails=q_tails,
    )


def ke_residual(profile):
    """``sup |theta - C| / C``: zero exactly for Kähler–Einstein metrics."""
    d = densities(profile)
    return float(np.max(np.abs(d.theta - d.C)) / d.C)


# toric duality -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymplecticPotential:
    """Legendre dual ``u(tau) = sup_t (t tau - f(t))`` on a uniform grid of ``[0, 2]``.

    Stored as the smooth correction ``v = u - u0`` to the Fubini–Study dual,
    which stays bounded up to the endpoints where ``u0`` is singular.
    """

    tau: np.ndarray
    v: np.ndarray

    @property
    def u(self):
        return u0(self.tau) + self.v

    def spline(self):
        return CubicSpline(self.tau, self.v)

    def is_convex(self, tol=0.0):
        u = self.u
        return bool(np.all(u[:-2] + u[2:] - 2 * u[1:-1] >= -tol))

    def __add__(self, other):
        self._check(other)
        return SymplecticPotential(self.tau, self.v + other.v)

    def scaled(self, s):
        return SymplecticPotential(self.tau, s * self.v)

    def _check(self, other):
        if self.tau.shape != other.tau.shape or not np.allclose(self.tau, other.tau, rtol=0, atol=1e-14):
            raise ValueError("symplectic potentials live on different tau grids")


def tau_grid(n):
    return np.linspace(0.0, 2.0, n)


def _solve_monotone(fun, dfun, target, lo, hi, x0, iters=100, tol=1e-14):
    """Vectorised safeguarded Newton for increasing ``fun(x) = target`` on ``[lo, hi]``."""
    x = np.clip(x0, lo, hi)
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iters):
        r = fun(x) - target
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        step = r / dfun(x)
        x_new = x - step
        outside = (x_new <= lo) | (x_new >= hi) | ~np.isfinite(x_new)
        x_new = np.where(outside, 0.5 * (lo + hi), x_new)
        if np.all(np.abs(x_new - x) <= tol * (1.0 + np.abs(x))):
            return x_new
        x = x_new
    return x


def legendre(profile, n_tau=None):
    """Symplectic potential of ``profile`` on a uniform ``tau`` grid of ``[0, 2]``."""
    n_tau = profile.N + 1 if n_tau is None else n_tau
    fp = profile.fp()
    if np.any(np.diff(fp) <= 0):
        i = int(np.flatnonzero(np.diff(fp) <= 0)[0])
        raise ProfileError(f"f' is not strictly increasing near node {i}")
    T = profile.T
    phi = CubicSpline(profile.t, profile.phi)
    dphi, ddphi = phi.derivative(1), phi.derivative(2)
    tau = tau_grid(n_tau)
    v = np.empty_like(tau)
    left = tau <= fp[0]
    right = tau >= fp[-1]
    # beyond the grid phi relaxes exponentially (phi - phi(-inf) ~ e^t, smooth at the poles),
    # so its limits are phi(-T) - phi'(-T) and phi(T) + phi'(T); v(0), v(2) are minus these.
    # The tail intervals in tau have width ~e^-T, so v is interpolated linearly across them.
    dphi_end = profile.d_phi()[[0, -1]]
    v_pole = (-(profile.phi[0] - dphi_end[0]), -(profile.phi[-1] + dphi_end[1]))
    v_edge = (
        -T * fp[0] - profile.f[0] - u0(fp[0]),
        T * fp[-1] - profile.f[-1] - u0(fp[-1]),
    )
    v[left] = v_pole[0] + (v_edge[0] - v_pole[0]) * tau[left] / fp[0]
    v[right] = v_pole[1] + (v_edge[1] - v_pole[1]) * (2.0 - tau[right]) / (2.0 - fp[-1])
    mid = ~(left | right)
    target = tau[mid]
    x0 = np.log(target) - np.log(2.0 - target)
    ts = _solve_monotone(
        lambda x: f0_d1(x) + dphi(x), lambda x: np.maximum(f0_d2(x) + ddphi(x), 1e-300),
        target, -T, T, x0,
    )
    # v = (t tau - f(t)) - u0(tau), arranged to avoid cancellation of large terms
    v[mid] = ts * target - f0(ts) - phi(ts) - u0(target)
    return SymplecticPotential(tau, v)


def legendre_inverse(potential, T=15.0, N=1500):
    """Metric profile ``f(t) = sup_tau (t tau - u(tau))`` on the ``t`` grid."""
    t = np.linspace(-T, T, N + 1)
    spl = potential.spline()
    dv, ddv = spl.derivative(1), spl.derivative(2)
    # parametrise tau = 2 expit(s) so that u0'(tau) = s; solve s + v'(tau) = t
    g = lambda s: s + dv(2.0 * expit(s))
    dg = lambda s: np.maximum(1.0 + ddv(2.0 * expit(s)) * f0_d2(s), 1e-12)
    spread = float(np.max(np.abs(dv(potential.tau)))) + 1.0
    s = _solve_monotone(g, dg, t, t - spread, t + spread, t - dv(f0_d1(t)))
    tau = 2.0 * expit(s)
    # f0(t) - t tau + u0(tau) written in terms of s to keep precision at large |t|
    phi = t * tau - _u0_of_s(s) - spl(tau) - f0(t)
    return MetricProfile(T, N, phi)


def geodesic_profile(p0, p1, s, n_tau=None):
    """Point ``s`` in ``[0, 1]`` on the geodesic joining two profiles (linear in ``u``)."""
    if not p0.same_grid(p1):
        raise ValueError("profiles must share a grid")
    u_a = legendre(p0, n_tau)
    u_b = legendre(p1, n_tau)
    u_s = SymplecticPotential(u_a.tau, (1.0 - s) * u_a.v + s * u_b.v)
    return legendre_inverse(u_s, p0.T, p0.N)
