"""C^n-valued Laurent maps on circular domains.

A map is stored as a polynomial part in (z - c0), c0 the outer center, plus a
principal part in 1/(z - c_i) for every hole i:

    f(z) = sum_{p=0}^{D} a_p (z - c0)^p + sum_i sum_{p=1}^{D} b_{i,p} (z - c_i)^{-p}

Every such map is holomorphic on the closed domain. The loop around hole j
encloses only c_j, so its period is exactly 2 pi i b_{j,1}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .domain import DEFAULT_NODES, PlanarDomain
from .errors import DomainError, FitError, PeriodObstructionError

DEFAULT_DEGREE = 64
SVD_CUTOFF = 1e-12


class QuadratureWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LaurentMap:
    domain: PlanarDomain
    poly: np.ndarray  # (D + 1, n): coefficient of (z - c0)^p
    principal: np.ndarray  # (l, D, n): coefficient of (z - c_i)^-(p+1)
    fit_residual: float | None = field(default=None)

    def __post_init__(self):
        poly = np.array(self.poly, dtype=complex)
        principal = np.array(self.principal, dtype=complex)
        if poly.ndim != 2:
            raise ValueError("poly must have shape (D + 1, n)")
        l = self.domain.l
        if principal.size == 0:
            principal = np.zeros((l, max(poly.shape[0] - 1, 0), poly.shape[1]), dtype=complex)
        if principal.ndim != 3 or principal.shape[0] != l or principal.shape[2] != poly.shape[1]:
            raise ValueError(f"principal must have shape ({l}, D, {poly.shape[1]}), got {principal.shape}")
        D = max(poly.shape[0] - 1, principal.shape[1])
        poly = np.pad(poly, ((0, D + 1 - poly.shape[0]), (0, 0)))
        principal = np.pad(principal, ((0, 0), (0, D - principal.shape[1]), (0, 0)))
        for a in (poly, principal):
            a.setflags(write=False)
        object.__setattr__(self, "poly", poly)
        object.__setattr__(self, "principal", principal)

    @property
    def n(self) -> int:
        return self.poly.shape[1]

    @property
    def D(self) -> int:
        return self.poly.shape[0] - 1

    @property
    def centers(self):
        return self.domain.centers

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zeros(cls, domain, n, D=0):
        return cls(domain, np.zeros((D + 1, n)), np.zeros((domain.l, D, n)))

    @classmethod
    def constant(cls, domain, value):
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        return cls(domain, value[None, :], np.zeros((domain.l, 0, value.size)))

    @classmethod
    def from_terms(cls, domain, n, terms):
        """Build from {(center_index, power): vector} with center 0 the outer
        center (powers >= 0) and center i >= 1 hole i (powers <= -1)."""
        D = max([abs(p) for _, p in terms] + [0])
        poly = np.zeros((D + 1, n), dtype=complex)
        principal = np.zeros((domain.l, D, n), dtype=complex)
        for (ci, p), vec in terms.items():
            if ci == 0:
                if p < 0:
                    raise ValueError("outer-center terms need power >= 0")
                poly[p] += vec
            else:
                if p >= 0:
                    raise ValueError("hole terms need power <= -1")
                principal[ci - 1, -p - 1] += vec
        return cls(domain, poly, principal)

    # -- arithmetic ---------------------------------------------------------

    def _like(self, poly, principal):
        return LaurentMap(self.domain, poly, principal)

    def __add__(self, other):
        if not isinstance(other, LaurentMap):
            other = LaurentMap.constant(self.domain, np.broadcast_to(other, (self.n,)))
        D = max(self.D, other.D)
        a, b = self.padded(D), other.padded(D)
        return self._like(a.poly + b.poly, a.principal + b.principal)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.poly, -self.principal)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        c = complex(c)
        return self._like(c * self.poly, c * self.principal)

    __rmul__ = __mul__

    def padded(self, D):
        if D < self.D:
            raise ValueError("cannot pad to a smaller degree")
        return self._like(np.pad(self.poly, ((0, D - self.D), (0, 0))),
                          np.pad(self.principal, ((0, 0), (0, D - self.D), (0, 0))))

    def component(self, k):
        """Scalar map of component k (1-based) as an n = 1 map."""
        return self._like(self.poly[:, k - 1:k], self.principal[:, :, k - 1:k])

    def with_component(self, k, other):
        """Copy with component k (1-based) replaced by the same component of ``other``."""
        D = max(self.D, other.D)
        a, b = self.padded(D), other.padded(D)
        poly, principal = a.poly.copy(), a.principal.copy()
        poly[:, k - 1] = b.poly[:, k - 1]
        principal[:, :, k - 1] = b.principal[:, :, k - 1]
        return self._like(poly, principal)

    # -- evaluation ---------------------------------------------------------

    def eval(self, z, check=True):
        """Values at z (any shape); result has shape z.shape + (n,)."""
        z = np.asarray(z, dtype=complex)
        if check:
            self.domain.require(z)
        w = z - self.domain.outer_center
        out = np.zeros(z.shape + (self.n,), dtype=complex)
        for a in self.poly[::-1]:
            out = out * w[..., None] + a
        for (c, _), b in zip(self.domain.holes, self.principal):
            if not np.any(b):
                continue
            u = 1.0 / (z - c)
            acc = np.zeros_like(out)
            for coef in b[::-1]:
                acc = (acc + coef) * u[..., None]
            out = out + acc
        return out

    __call__ = eval

    # -- calculus -------------------------------------------------------------

    def differentiate(self):
        D = self.D
        p = np.arange(1, D + 1)[:, None]
        poly = p * self.poly[1:]
        principal = np.zeros((self.domain.l, D + 1, self.n), dtype=complex)
        principal[:, 1:] = -p[None] * self.principal
        if D == 0:
            poly = np.zeros((1, self.n), dtype=complex)
        return self._like(poly, principal)

    def antidifferentiate(self, tol=0.0):
        """Termwise antiderivative with zero constant term.

        Residues b_{i,1} with modulus above ``tol`` are period obstructions;
        those at or below it are discarded.
        """
        res = self.principal[:, 0, :] if self.D > 0 else np.zeros((self.domain.l, self.n))
        bad = np.argwhere(np.abs(res) > tol)
        if bad.size:
            i, k = bad[0]
            raise PeriodObstructionError(
                f"period obstruction at hole {i + 1}, component {k + 1}: "
                f"residue {res[i, k]:.3e}", hole=int(i + 1), component=int(k + 1))
        D = self.D
        p = np.arange(1, D + 2)[:, None]
        poly = np.zeros((D + 2, self.n), dtype=complex)
        poly[1:] = self.poly / p
        principal = np.zeros((self.domain.l, D + 1, self.n), dtype=complex)
        if D >= 2:
            q = np.arange(2, D + 1)[None, :, None]
            principal[:, : D - 1] = self.principal[:, 1:] / (1 - q)
        return self._like(poly, principal)

    def periods(self, mode="exact", N=DEFAULT_NODES, warn_tol=1e-9):
        """Period matrix, row j = integral of f dz around loop j (shape (l, n))."""
        if mode == "exact":
            if self.D == 0:
                return np.zeros((self.domain.l, self.n), dtype=complex)
            return 2j * np.pi * np.array(self.principal[:, 0, :])
        if mode != "quadrature":
            raise ValueError(f"unknown period mode {mode!r}")
        out = quadrature_periods(lambda z: self.eval(z, check=False), self.domain, N)
        if warn_tol is not None and self.domain.l:
            finer = quadrature_periods(lambda z: self.eval(z, check=False), self.domain, 2 * N)
            change = float(np.max(np.abs(finer - out)))
            if change > warn_tol:
                warnings.warn(f"period quadrature not converged at N={N}: "
                              f"doubling N changes entries by {change:.2e}", QuadratureWarning)
        return out

    def is_exact(self, tol=1e-9):
        return bool(np.all(np.abs(self.periods()) < tol))

    def drop_residues(self):
        """Copy with every (z - c_i)^-1 coefficient set to zero."""
        if self.D == 0:
            return self
        principal = self.principal.copy()
        principal[:, 0, :] = 0
        return self._like(self.poly, principal)

    # -- serialization ----------------------------------------------------------

    def to_json(self):
        return {
            "n": self.n,
            "D": self.D,
            "poly": jsonio.encode(self.poly),
            "principal": [{"hole": i + 1, "coeffs": jsonio.encode(self.principal[i])}
                          for i in range(self.domain.l)],
        }

    @classmethod
    def from_json(cls, data, domain):
        n, D = int(data["n"]), int(data["D"])
        poly = np.asarray(jsonio.decode(data["poly"]), dtype=complex).reshape(-1, n)
        principal = np.zeros((domain.l, D, n), dtype=complex)
        for entry in data.get("principal", []):
            i = int(entry["hole"])
            if not 1 <= i <= domain.l:
                raise DomainError(f"principal part names hole {i}, domain has {domain.l}")
            coeffs = np.asarray(jsonio.decode(entry["coeffs"]), dtype=complex).reshape(-1, n)
            principal[i - 1, : coeffs.shape[0]] = coeffs
        return cls(domain, poly, principal)


def eval_map(f: LaurentMap, z):
    return f.eval(z)


def quadrature_periods(func, domain, N=DEFAULT_NODES):
    """Trapezoidal periods of a vector-valued callable around every loop."""
    rows = []
    for ln in domain.all_loop_nodes(N):
        rows.append(ln.integrate(func(ln.nodes)))
    if not rows:
        return np.zeros((0, 0), dtype=complex)
    return np.array(rows)


def _design(z, domain, D):
    """Scaled Laurent basis: ((z-c0)/R0)^p and (r_i/(z-c_i))^p."""
    w = (z - domain.outer_center) / domain.outer_radius
    cols = [w[:, None] ** np.arange(D + 1)[None, :]]
    for c, r in domain.holes:
        u = r / (z - c)
        cols.append(u[:, None] ** np.arange(1, D + 1)[None, :])
    return np.concatenate(cols, axis=1)


def fit_map(z, values, domain, D=DEFAULT_DEGREE, cutoff=SVD_CUTOFF) -> LaurentMap:
    """Least-squares Laurent fit of samples; the max residual is attached."""
    z = np.asarray(z, dtype=complex).ravel()
    values = np.asarray(values, dtype=complex).reshape(z.size, -1)
    ncols = (D + 1) + domain.l * D
    if z.size < ncols:
        raise FitError(f"underdetermined fit: {z.size} samples for {ncols} coefficients")
    A = _design(z, domain, D)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > cutoff * s[0]))
    if rank < ncols:
        raise FitError(f"rank-deficient fit (rank {rank} of {ncols}); samples poorly distributed")
    coef = Vh.conj().T @ ((U.conj().T @ values) / s[:, None])
    residual = float(np.max(np.abs(A @ coef - values)))
    n = values.shape[1]
    poly = coef[: D + 1] / (domain.outer_radius ** np.arange(D + 1))[:, None]
    principal = np.zeros((domain.l, D, n), dtype=complex)
    for i, (_, r) in enumerate(domain.holes):
        block = coef[D + 1 + i * D: D + 1 + (i + 1) * D]
        principal[i] = block * (r ** np.arange(1, D + 1))[:, None]
    return LaurentMap(domain, poly, principal, fit_residual=residual)


def fit_function(func, domain, D=DEFAULT_DEGREE, N=None) -> LaurentMap:
    """Fit a callable holomorphic on the domain from boundary and loop samples."""
    if N is None:
        N = max(DEFAULT_NODES, 2 * (D + 1))
    z = domain.check_nodes(N)
    return fit_map(z, func(z), domain, D)


def random_map(domain, n, D, rng) -> LaurentMap:
    """Random coefficients scaled so every term has modulus ~1 on the boundary."""
    def gauss(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    poly = gauss((D + 1, n)) / (domain.outer_radius ** np.arange(D + 1))[:, None]
    principal = gauss((domain.l, D, n))
    for i, (_, r) in enumerate(domain.holes):
        principal[i] *= (r ** np.arange(1, D + 1))[:, None]
    return LaurentMap(domain, poly, principal)
