"""Kempf–Ness package for a compact torus acting linearly on ``C^m``.

The torus ``T^k`` acts by ``z_a -> exp(i <w_a, phi>) z_a`` with moment map
``mu_j(z) = 1/2 sum_a w_ja |z_a|^2 - c_j``.  The complexified group is
restricted to its real slice ``exp(eta)``, ``eta in R^k``, acting by
``z_a -> exp(<w_a, eta>) z_a``; by invariance under the compact torus this
loses nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

GAUSS_ORDER = 40


@dataclass(frozen=True, eq=False)
class TorusSetup:
    weights: np.ndarray
    shift: np.ndarray
    base_point: np.ndarray
    lie_metric: np.ndarray = None

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights))
        if not np.all(np.equal(np.mod(w, 1), 0)):
            raise ValueError("weights must be integers")
        w = w.astype(float)
        k, m = w.shape
        c = np.asarray(self.shift, dtype=float).reshape(-1)
        z0 = np.asarray(self.base_point, dtype=complex).reshape(-1)
        if c.shape != (k,):
            raise ValueError(f"shift must have length k={k}, got {c.shape[0]}")
        if z0.shape != (m,):
            raise ValueError(f"base_point must have length m={m}, got {z0.shape[0]}")
        G = np.eye(k) if self.lie_metric is None else np.asarray(self.lie_metric, dtype=float)
        if G.shape != (k, k) or not np.allclose(G, G.T):
            raise ValueError("lie_metric must be a symmetric k x k matrix")
        if np.linalg.eigvalsh(G).min() <= 0:
            raise ValueError("lie_metric must be positive definite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "shift", c)
        object.__setattr__(self, "base_point", z0)
        object.__setattr__(self, "lie_metric", G)

    @property
    def k(self):
        return self.weights.shape[0]

    @property
    def m(self):
        return self.weights.shape[1]

    def act(self, eta, z=None):
        """Apply ``exp(eta)`` from the real slice of the complexified torus."""
        z = self.base_point if z is None else np.asarray(z, dtype=complex)
        return np.exp(self.weights.T @ np.asarray(eta, dtype=float)) * z

    def rotate(self, phi, z=None):
        """Apply the compact torus element ``exp(i phi)``."""
        z = self.base_point if z is None else np.asarray(z, dtype=complex)
        return np.exp(1j * (self.weights.T @ np.asarray(phi, dtype=float))) * z

    @classmethod
    def random(cls, m, k, seed, max_weight=2):
        """Random setup whose moment map has a zero on the orbit of the base point.

        Weights are positive so every orbit is closed; the shift is the moment
        of a random point with the same phases as the base point.
        """
        if k > m:
            raise ValueError("torus rank k cannot exceed m for an effective action")
        rng = np.random.default_rng(seed)
        while True:
            w = rng.integers(1, max_weight + 1, size=(k, m))
            if np.linalg.matrix_rank(w) == k:
                break
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=m))
        target = rng.uniform(0.5, 1.5, size=m) * phases
        shift = 0.5 * w @ np.abs(target) ** 2
        z0 = rng.uniform(0.8, 1.25, size=m) * target
        return cls(w, shift, z0)


def moment(setup, z):
    z = np.asarray(z, dtype=complex)
    if z.shape != (setup.m,):
        raise ValueError(f"z must have length m={setup.m}, got {z.shape}")
    return 0.5 * setup.weights @ np.abs(z) ** 2 - setup.shift


def one_form(setup, eta, d_eta):
    """``theta_eta(d_eta) = 2 <mu(exp(eta) z0), d_eta>``."""
    return 2.0 * float(moment(setup, setup.act(eta)) @ np.asarray(d_eta, dtype=float))


def path_integral(setup, vertices, order=GAUSS_ORDER):
    """Integral of the one-form along the polygon through ``vertices``."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        d = b - a
        total += sum(wt * one_form(setup, a + si * d, d) for si, wt in zip(s, weights))
    return total


def kn_potential(setup, eta, method="closed", base=None):
    """Kempf–Ness function, normalised to vanish at ``eta = 0``.

    ``method="closed"`` uses ``1/2 sum_a |z0_a|^2 (exp(2<w_a, eta>) - 1) - 2 <c, eta>``;
    ``method="line"`` integrates the one-form along the segment from 0.
    Its gradient is ``2 mu(exp(eta) z0)``.
    """
    eta = np.asarray(eta, dtype=float)
    if method == "line":
        if base is not None:
            setup = TorusSetup(setup.weights, setup.shift, base, setup.lie_metric)
        return path_integral(setup, [np.zeros_like(eta), eta])
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    z0 = setup.base_point if base is None else np.asarray(base, dtype=complex)
    growth = np.expm1(2.0 * (setup.weights.T @ eta))
    return float(0.5 * np.abs(z0) ** 2 @ growth - 2.0 * setup.shift @ eta)


def kn_hessian(setup, eta):
    z = setup.act(eta)
    return 2.0 * (setup.weights * np.abs(z) ** 2) @ setup.weights.T


def kn_minimize(setup, eta0=None, tol=1e-12, max_iter=100):
    """Newton's method with backtracking for the convex Kempf–Ness function.

    Stops when ``|grad F| <= tol * (1 + |c|)``.
    """
    eta = np.zeros(setup.k) if eta0 is None else np.asarray(eta0, dtype=float).copy()
    F = kn_potential(setup, eta)
    for _ in range(max_iter):
        grad = 2.0 * moment(setup, setup.act(eta))
        if np.linalg.norm(grad) <= tol * (1.0 + np.linalg.norm(setup.shift)):
            return eta
        step = np.linalg.solve(kn_hessian(setup, eta), grad)
        t = 1.0
        while True:
            trial = eta - t * step
            F_trial = kn_potential(setup, trial)
            if F_trial <= F - 0.25 * t * grad @ step + 1e-13 * (1.0 + abs(F)) or t < 1e-12:
                break
            t *= 0.5
        eta, F = trial, F_trial
    raise RuntimeError("Kempf–Ness minimisation did not converge; is the orbit stable?")


# invariant functions on the dual of the Lie algebra ------------------------


@dataclass(frozen=True)
class BFunction:
    """Convex non-negative function on ``Lie(T)^*`` with ``B(0) = 0``.

    ``quadratic``: ``1/2 mu^T G^{-1} mu`` (``G`` the Lie algebra metric).
    ``cosh_minus_one``: ``sum_j (cosh(a mu_j) - 1) / a^2``.
    ``shifted_entropy``: ``sum_j (mu_j + C) log(mu_j / C + 1) - mu_j``, defined for ``mu_j > -C``.
    """

    tag: str
    a: float = 1.0
    C: float = 1.0
    lie_metric: np.ndarray = field(default=None, compare=False)

    TAGS = ("quadratic", "cosh_minus_one", "shifted_entropy")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown B function {self.tag!r}; expected one of {self.TAGS}")
        if self.a <= 0 or self.C <= 0:
            raise ValueError("parameters a and C must be positive")

    def _dual_metric(self, k):
        G = np.eye(k) if self.lie_metric is None else np.asarray(self.lie_metric, dtype=float)
        return np.linalg.inv(G)

    def value(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.tag == "quadratic":
            return float(0.5 * mu @ self._dual_metric(mu.size) @ mu)
        if self.tag == "cosh_minus_one":
            # cosh(x) - 1 = 2 sinh(x/2)^2 without cancellation
            return float(np.sum(2.0 * np.sinh(0.5 * self.a * mu) ** 2) / self.a**2)
        self._check_domain(mu)
        x = mu / self.C
        return float(np.sum((mu + self.C) * np.log1p(x) - mu))

    def grad(self, mu):
        """``DB(mu)``, an element of the Lie algebra."""
        mu = np.asarray(mu, dtype=float)
        if self.tag == "quadratic":
            return self._dual_metric(mu.size) @ mu
        if self.tag == "cosh_minus_one":
            return np.sinh(self.a * mu) / self.a
        self._check_domain(mu)
        return np.log1p(mu / self.C)

    def _check_domain(self, mu):
        if np.any(mu <= -self.C):
            raise ValueError(f"shifted_entropy requires mu > -{self.C}")

    def check_convex(self, k=1, radius=2.0, samples=41):
        """Sample ``B(0) = 0``, ``B >= 0`` and midpoint convexity on a grid of lines."""
        lo = -min(radius, 0.99 * self.C) if self.tag == "shifted_entropy" else -radius
        grid = np.linspace(lo, radius, samples)
        ok = abs(self.value(np.zeros(k))) == 0.0
        for j in range(k):
            e = np.zeros(k)
            e[j] = 1.0
            vals = np.array([self.value(x * e) for x in grid])
            ok &= bool(np.all(vals >= 0))
            ok &= bool(np.all(vals[:-2] + vals[2:] - 2 * vals[1:-1] >= -1e-12))
        return ok


def energy(setup, z):
    mu = moment(setup, z)
    return float(0.5 * mu @ np.linalg.solve(setup.lie_metric, mu))


# gradient flows ------------------------------------------------------------


def finite_difference(y, t):
    """Time derivative of sampled data.

    Fourth-order centred differences where the sampling is uniform over a
    five-point window, second-order (``np.gradient``) elsewhere.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        return np.full_like(y, np.nan)
    out = np.gradient(y, t)
    if len(t) >= 5:
        h = np.diff(t)
        window = np.lib.stride_tricks.sliding_window_view(h, 4)
        uniform = np.ptp(window, axis=1) <= 1e-9 * window.max(axis=1)
        hc = h[1:-2]
        d4 = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * hc)
        inner = out[2:-2]
        inner[uniform] = d4[uniform]
    return out


@dataclass
class FlowTraceFD:
    """Samples of the gradient flow of ``B(mu)``.

    ``F`` is the Kempf–Ness function of the initial point in the gradient-flow
    normalisation ``dF = <mu, d eta>`` (half of :func:`kn_potential`), which is
    the one for which ``dF/dt = -(DB(mu), mu)``.
    """

    times: np.ndarray
    z: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    F: np.ndarray
    E: np.ndarray
    H: np.ndarray
    dF_dt: np.ndarray

    @property
    def dF_dt_fd(self):
        return finite_difference(self.F, self.times)

    @property
    def mu_norm(self):
        return np.linalg.norm(self.mu, axis=1)

    COLUMNS = ("t", "F", "E", "H", "dF_dt_analytic", "dF_dt_fd", "mu_norm")

    def rows(self):
        fd = self.dF_dt_fd
        return [
            (t, F, E, H, d, f, m)
            for t, F, E, H, d, f, m in zip(self.times, self.F, self.E, self.H, self.dF_dt, fd, self.mu_norm)
        ]


def flow(setup, B, z_init=None, t_max=1.0, dt=1e-3, sample_every=1):
    """RK4 integration of ``dz_a/dt = -<w_a, DB(mu(z))> z_a``.

    This is the gradient flow of ``H = B(mu)`` for the flat metric on ``C^m``.
    The real group coordinate ``eta`` is integrated alongside, with
    ``z(t) = exp(eta(t)) z_init``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = setup.base_point.copy() if z_init is None else np.asarray(z_init, dtype=complex).copy()
    z_start = z.copy()
    eta = np.zeros(setup.k)
    if B.lie_metric is None:
        B = replace(B, lie_metric=setup.lie_metric)
    W = setup.weights

    def rhs(z):
        xi = B.grad(moment(setup, z))
        return -(W.T @ xi) * z, -xi

    def record(t, z, eta):
        mu = moment(setup, z)
        F = 0.5 * kn_potential(setup, eta, base=z_start)
        return t, z.copy(), eta.copy(), mu, F, energy(setup, z), B.value(mu), -float(B.grad(mu) @ mu)

    n_steps = int(np.ceil(t_max / dt - 1e-12))
    samples = [record(0.0, z, eta)]
    t = 0.0
    for i in range(n_steps):
        h = min(dt, t_max - t)
        k1z, k1e = rhs(z)
        k2z, k2e = rhs(z + 0.5 * h * k1z)
        k3z, k3e = rhs(z + 0.5 * h * k2z)
        k4z, k4e = rhs(z + h * k3z)
        z_new = z + h / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
        if not np.all(np.isfinite(z_new)) or np.abs(z_new).max() > 1e150:
            raise OverflowError(f"flow overflowed at t={t:.6g}")
        z = z_new
        eta = eta + h / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e)
        t = (i + 1) * dt if i + 1 < n_steps else t_max
        if (i + 1) % sample_every == 0 or i + 1 == n_steps:
            samples.append(record(t, z, eta))

    cols = list(zip(*samples))
    return FlowTraceFD(*(np.array(c) for c in cols))


def flow_verdicts(trace, B=None, slack=1e-8, h_slack=1e-10, rel_fd=1e-5):
    """Pass/fail checks of the monotonicity package along a trace."""
    checks = {}
    checks["dF_dt_le_minus_H"] = bool(np.all(trace.dF_dt <= -trace.H + slack))
    checks["H_non_increasing"] = bool(np.all(np.diff(trace.H) <= h_slack))
    phases = np.angle(trace.z / trace.z[0])
    checks["phases_constant"] = bool(np.abs(phases).max() <= 1e-9)
    if len(trace.times) >= 5:
        fd = trace.dF_dt_fd[2:-2]
        an = trace.dF_dt[2:-2]
        checks["dF_dt_fd_matches"] = bool(np.all(np.abs(fd - an) <= rel_fd * np.abs(an) + 1e-10))
    if B is not None and B.tag == "quadratic":
        checks["dF_dt_eq_minus_2E"] = bool(np.allclose(trace.dF_dt, -2 * trace.E, rtol=1e-6, atol=1e-14))
    return checks
