"""Complex exterior algebra over a real symplectic vector space of dimension 2n.

Basis one-forms are ``e_1 .. e_2n`` and the complex coordinates are
``dz_a = e_{2a-1} + i e_{2a}``.  The symplectic form is
``omega = sum_a e_{2a-1} ^ e_{2a}`` so that ``omega^n / n!`` is exactly the
unit top form ``e_1 ^ ... ^ e_2n``; the Hermitian pairing is therefore read off
as a single coefficient.

Coefficients are stored densely, indexed by a bitmask over the 2n basis
elements (bit ``i`` set means ``e_{i+1}`` is present).  Only ``n <= 3`` is
supported (at most 64 coefficients).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

MAX_RANK = 3


def _check_rank(n):
    if not 1 <= n <= MAX_RANK:
        raise ValueError(f"rank n must be in 1..{MAX_RANK}, got {n}")


@lru_cache(maxsize=None)
def _tables(n):
    """Popcount, wedge-sign and union tables for rank ``n``."""
    dim = 2 * n
    size = 1 << dim
    popcount = np.array([bin(m).count("1") for m in range(size)])
    sign = np.zeros((size, size))
    union = np.zeros((size, size), dtype=np.intp)
    for a in range(size):
        for b in range(size):
            union[a, b] = a | b
            if a & b:
                continue
            # inversions: pairs (i in a, j in b) with i > j
            inv = 0
            for j in range(dim):
                if b >> j & 1:
                    inv += bin(a >> (j + 1)).count("1")
            sign[a, b] = -1.0 if inv % 2 else 1.0
    return popcount, sign, union


@dataclass(frozen=True, eq=False)
class Multivector:
    """Element of the complexified exterior algebra of ``R^{2n}``.

    ``coeffs`` has length ``4**n``; entry ``m`` multiplies the basis
    multivector whose indices are the set bits of ``m``.
    """

    n: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_rank(self.n)
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (1 << (2 * self.n),):
            raise ValueError(f"expected {1 << (2 * self.n)} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    # construction ---------------------------------------------------------

    @classmethod
    def zero(cls, n):
        _check_rank(n)
        return cls(n, np.zeros(1 << (2 * n), dtype=complex))

    @classmethod
    def scalar(cls, n, value):
        mv = cls.zero(n)
        mv.coeffs[0] = value
        return mv

    @classmethod
    def basis(cls, n, *indices):
        """Wedge product ``e_{i1} ^ ... ^ e_{ik}`` of 1-based basis indices."""
        out = cls.scalar(n, 1.0)
        for i in indices:
            out = out ^ cls.vector(n, np.eye(2 * n)[i - 1])
        return out

    @classmethod
    def vector(cls, n, components):
        """Grade-one element ``sum_i components[i] e_{i+1}``."""
        _check_rank(n)
        comps = np.asarray(components, dtype=complex)
        if comps.shape != (2 * n,):
            raise ValueError(f"expected {2 * n} components, got shape {comps.shape}")
        out = cls.zero(n)
        out.coeffs[[1 << i for i in range(2 * n)]] = comps
        return out

    @classmethod
    def from_dict(cls, n, terms):
        """Build from ``{(i1, ..., ik): coeff}`` with 1-based indices.

        Index tuples need not be sorted; the sign of the reordering is applied.
        Repeated indices give zero.
        """
        out = cls.zero(n)
        for idx, value in terms.items():
            out = out + value * cls.basis(n, *idx)
        return out

    def to_dict(self, tol=0.0):
        """Map of strictly increasing 1-based index tuples to coefficients."""
        out = {}
        for m in np.flatnonzero(np.abs(self.coeffs) > tol):
            idx = tuple(i + 1 for i in range(2 * self.n) if m >> i & 1)
            out[idx] = complex(self.coeffs[m])
        return out

    # algebra --------------------------------------------------------------

    def _check_same(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"rank mismatch: {self.n} vs {other.n}")
        return None

    def __add__(self, other):
        if self._check_same(other) is NotImplemented:
            return NotImplemented
        return Multivector(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check_same(other) is NotImplemented:
            return NotImplemented
        return Multivector(self.n, self.coeffs - other.coeffs)

    def __neg__(self):
        return Multivector(self.n, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, Multivector):
            return NotImplemented
        return Multivector(self.n, self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def conj(self):
        return Multivector(self.n, self.coeffs.conj())

    def grade_part(self, k):
        popcount, _, _ = _tables(self.n)
        return Multivector(self.n, np.where(popcount == k, self.coeffs, 0.0))

    def grades(self, tol=0.0):
        popcount, _, _ = _tables(self.n)
        return sorted(set(popcount[np.abs(self.coeffs) > tol].tolist()))

    def top(self):
        """Coefficient of ``e_1 ^ ... ^ e_2n``."""
        return complex(self.coeffs[-1])

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def allclose(self, other, atol=1e-12):
        self._check_same(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def __repr__(self):
        terms = ", ".join(f"{k}: {v:.6g}" for k, v in self.to_dict(tol=1e-15).items())
        return f"Multivector(n={self.n}, {{{terms}}})"


def wedge(a, b):
    """Exterior product of two multivectors of the same rank."""
    if a.n != b.n:
        raise ValueError(f"rank mismatch: {a.n} vs {b.n}")
    _, sign, union = _tables(a.n)
    prod = np.outer(a.coeffs, b.coeffs) * sign
    out = np.zeros_like(a.coeffs)
    np.add.at(out, union.ravel(), prod.ravel())
    return Multivector(a.n, out)


def contract(v, a):
    """Interior product ``v -| a`` of a complex vector with a multivector.

    ``v`` holds components on the basis dual to ``e_1 .. e_2n``, so that
    ``v -| e_i = v[i-1]``.  The contraction is complex bilinear and acts as
    an antiderivation on the first slot.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != (2 * a.n,):
        raise ValueError(f"vector must have {2 * a.n} components for rank {a.n}")
    popcount, _, _ = _tables(a.n)
    nz = np.abs(a.coeffs) > 0
    if nz.any() and popcount[nz].max() == 0:
        raise ValueError("cannot contract a 0-vector")
    out = np.zeros_like(a.coeffs)
    for m in np.flatnonzero(nz):
        before = 0
        for i in range(2 * a.n):
            if m >> i & 1:
                out[m ^ (1 << i)] += (-1) ** before * v[i] * a.coeffs[m]
                before += 1
    return Multivector(a.n, out)


# symplectic frame -----------------------------------------------------------


def dz(n, a):
    """Complex one-form ``dz_a`` (1-based ``a``)."""
    comps = np.zeros(2 * n, dtype=complex)
    comps[2 * (a - 1)] = 1.0
    comps[2 * (a - 1) + 1] = 1j
    return Multivector.vector(n, comps)


def dzbar(n, a):
    return dz(n, a).conj()


def d_dz(n, a):
    """Components of the vector ``d/dz_a = (d/dx_a - i d/dy_a) / 2``."""
    v = np.zeros(2 * n, dtype=complex)
    v[2 * (a - 1)] = 0.5
    v[2 * (a - 1) + 1] = -0.5j
    return v


def d_dzbar(n, a):
    return d_dz(n, a).conj()


def symplectic_matrix(n):
    """Matrix ``J`` of omega: ``J[2a, 2a+1] = 1`` (0-based)."""
    J = np.zeros((2 * n, 2 * n))
    for a in range(n):
        J[2 * a, 2 * a + 1] = 1.0
        J[2 * a + 1, 2 * a] = -1.0
    return J


def pairing_constant(n):
    """``c_n``: 1 for even n, i for odd n."""
    return 1.0 if n % 2 == 0 else 1j


@dataclass(frozen=True, eq=False)
class SymplecticFrame:
    n: int
    omega: Multivector
    vol: Multivector

    @classmethod
    def standard(cls, n):
        _check_rank(n)
        omega = Multivector.zero(n)
        for a in range(1, n + 1):
            omega = omega + Multivector.basis(n, 2 * a - 1, 2 * a)
        vol = Multivector.scalar(n, 1.0)
        for _ in range(n):
            vol = vol ^ omega
        return cls(n, omega, vol * (1.0 / math.factorial(n)))


def pair(a, b, frame=None):
    """Indefinite Hermitian pairing ``c_n a ^ conj(b)`` read against ``omega^n/n!``."""
    if a.n != b.n:
        raise ValueError(f"rank mismatch: {a.n} vs {b.n}")
    n = a.n
    for x in (a, b):
        if any(k != n for k in x.grades()):
            raise ValueError(f"pair expects grade-{n} multivectors, got grades {x.grades()}")
    top = pairing_constant(n) * (a ^ b.conj()).top()
    if frame is not None:
        top /= frame.vol.top()
    return complex(top)


def standard_alpha(n):
    """``alpha_0 = dz_1 ^ ... ^ dz_n``."""
    _check_rank(n)
    out = Multivector.scalar(n, 1.0)
    for a in range(1, n + 1):
        out = out ^ dz(n, a)
    return out


def act(g, a):
    """Push a multivector forward by the linear map ``e_i -> sum_j g[j, i] e_j``."""
    g = np.asarray(g, dtype=float)
    dim = 2 * a.n
    if g.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix")
    out = np.zeros_like(a.coeffs)
    out[0] = a.coeffs[0]
    for k in range(1, dim + 1):
        subsets = list(itertools.combinations(range(dim), k))
        masks = np.array([sum(1 << i for i in s) for s in subsets])
        src = a.coeffs[masks]
        if not np.any(src):
            continue
        compound = np.array([[np.linalg.det(g[np.ix_(K, I)]) for I in subsets] for K in subsets])
        out[masks] = compound @ src
    return Multivector(a.n, out)


def act_on_vector(g, v):
    """Transform vector components so that contraction is equivariant under ``act``."""
    return np.linalg.solve(np.asarray(g, dtype=float), np.asarray(v, dtype=complex))


def random_symplectic(n, rng, scale=0.5):
    """``exp(J S)`` with ``S`` symmetric, entries drawn from ``scale * U[-1, 1]``."""
    raw = rng.uniform(-1.0, 1.0, size=(2 * n, 2 * n))
    S = scale * 0.5 * (raw + raw.T)
    return expm(symplectic_matrix(n) @ S)


# cone points and tangent frames -------------------------------------------


@dataclass(frozen=True, eq=False)
class ConePoint:
    scale: complex
    sp_element: np.ndarray
    realized: Multivector

    @property
    def n(self):
        return self.realized.n

    @classmethod
    def from_group(cls, n, g=None, scale=1.0):
        g = np.eye(2 * n) if g is None else np.asarray(g, dtype=float)
        if scale == 0:
            raise ValueError("scale must be nonzero")
        return cls(complex(scale), g, complex(scale) * act(g, standard_alpha(n)))

    def holomorphic_frame(self):
        """Pushed-forward ``dz_a`` one-forms spanning the (1,0) part of this point."""
        return [act(self.sp_element, dz(self.n, a)) for a in range(1, self.n + 1)]


def random_cone_point(n, seed):
    _check_rank(n)
    rng = np.random.default_rng(seed)
    g = random_symplectic(n, rng)
    scale = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
    return ConePoint.from_group(n, g, scale)


@dataclass(frozen=True, eq=False)
class TangentFrame:
    base: ConePoint
    vectors: list

    @property
    def sigma(self):
        return self.vectors[1:]


def _replace_factor(n, slot, a):
    """``alpha_0`` with its ``slot``-th dz factor replaced by ``dzbar_a`` (0-based)."""
    out = Multivector.scalar(n, 1.0)
    for b in range(n):
        out = out ^ (dzbar(n, a + 1) if b == slot else dz(n, b + 1))
    return out


def tangent_frame(point):
    n = point.n
    vectors = [point.realized]
    for a in range(n):
        for b in range(a, n):
            sigma = _replace_factor(n, b, a)
            if a != b:
                sigma = sigma + _replace_factor(n, a, b)
            vectors.append(act(point.sp_element, sigma))
    return TangentFrame(point, vectors)


def tangent_gram(point, frame=None):
    """Gram matrix of the pairing on the transverse tangent directions.

    Returns ``(G, max_eig)`` where ``max_eig`` is the largest eigenvalue of
    the Hermitian part of ``G``.
    """
    sig = tangent_frame(point).sigma
    G = np.array([[pair(s, t, frame) for t in sig] for s in sig])
    herm = 0.5 * (G + G.conj().T)
    return G, float(np.linalg.eigvalsh(herm).max())


def identity5_residual(v, point, frame=None):
    """Relative residual of ``c_n omega ^ (v-|a) ^ conj(i v-|a) = (-1)^(n-1) |v'|^2 <a,a>``.

    ``v'`` is the (1,0) part of ``v`` with respect to the complex structure of
    ``point``; its components are ``v -| g.dz_a`` and the metric gives
    ``|d/dz_a|^2 = 1/2``.
    """
    n = point.n
    frame = frame or SymplecticFrame.standard(n)
    alpha = point.realized
    ca = contract(v, alpha)
    lhs = pairing_constant(n) * (frame.omega ^ ca ^ (1j * ca).conj()).top() / frame.vol.top()
    vprime = np.array([contract(v, form).coeffs[0] for form in point.holomorphic_frame()])
    rhs = (-1) ** (n - 1) * 0.5 * float(np.sum(np.abs(vprime) ** 2)) * pair(alpha, alpha, frame)
    return float(abs(lhs - rhs) / (1.0 + abs(rhs)))
