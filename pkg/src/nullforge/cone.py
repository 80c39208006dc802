"""Quadric cones A = {z : z^T Q z = 0} in C^n with their linear tangential flows.

For a nondegenerate quadric the vector fields

    V_jk(z) = dP/dz_j e_k - dP/dz_k e_j,   P(z) = z^T Q z,

are linear, z -> M_jk z with M_jk = 2 (e_k e_j^T - e_j e_k^T) Q, tangent to every
level set of P, and span T_z A at each point of A minus the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.linalg

from . import jsonio
from .errors import ConeMembershipError, DegenerateError

MEMBERSHIP_TOL = 1e-9
ZERO_TOL = 1e-14


def takagi(S):
    """Takagi factorization S = U diag(sigma) U^T of a complex symmetric matrix.

    Uses the real symmetric embedding [[A, B], [B, -A]] of S = A + iB, whose
    eigenvectors [x; y] for the eigenvalue sigma > 0 give Takagi vectors x + iy.
    Singular values come back in descending order. Repeated values are fine;
    an exactly singular S may produce a non-unitary U on its null block.
    """
    S = np.asarray(S, dtype=complex)
    m = S.shape[0]
    A, B = S.real, S.imag
    K = np.block([[A, B], [B, -A]])
    evals, evecs = np.linalg.eigh(K)
    order = np.argsort(evals)[::-1][:m]
    sigma = np.clip(evals[order], 0.0, None)
    U = evecs[:m, order] + 1j * evecs[m:, order]
    return sigma, U


def _sinhc(s):
    """sinh(s)/s, with its Taylor series near 0."""
    s = np.asarray(s, dtype=complex)
    small = np.abs(s) < 1e-4
    safe = np.where(small, 1.0, s)
    return np.where(small, 1.0 + s * s / 6.0, np.sinh(safe) / safe)


def _plane_rotate(w, e1, e2, phi):
    """Rotate rows of w by angle phi in the real plane span(e1, e2) (orthonormal)."""
    a = w @ e1
    b = w @ e2
    c = np.cos(phi)[:, None]
    s = np.sin(phi)[:, None]
    return (w + (c - 1.0) * (a[:, None] * e1 + b[:, None] * e2)
            + s * (a[:, None] * e2 - b[:, None] * e1))


def _rotation_plane(u, w, fallback):
    """Unit e orthogonal to u and the angle turning u onto w within span(u, e).

    Uses atan2 on a twice-orthogonalized difference, so nearly parallel unit
    vectors give a tiny angle and an exactly orthogonal e. Returns (None, 0)
    when u and w coincide; ``fallback`` supplies e for antiparallel inputs.
    """
    d = w - (w @ u) * u
    d = d - (d @ u) * u
    nd = np.linalg.norm(d)
    c = float(w @ u)
    if nd < 1e-15:
        if c > 0:
            return None, 0.0
        e = fallback() - (fallback() @ u) * u
        return e / np.linalg.norm(e), np.pi
    return d / nd, float(np.arctan2(nd, c))


def _perpendicular(vecs, n):
    """A unit real vector orthogonal to every vector in ``vecs``."""
    basis = scipy.linalg.null_space(np.atleast_2d(np.asarray(vecs, dtype=float)))
    return basis[:, 0]


@dataclass(frozen=True, eq=False)
class ConeVariety:
    """The cone P(z) = z^T Q z = 0 for an invertible complex symmetric Q."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=complex)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        if Q.shape[0] < 3:
            raise ValueError(f"ambient dimension must be >= 3, got {Q.shape[0]}")
        if not np.array_equal(Q, Q.T):
            raise ValueError("Q must be exactly symmetric")
        if np.linalg.cond(Q) > 1e12:
            raise ValueError("Q must be invertible (cone singular away from 0)")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def null3(cls) -> "ConeVariety":
        return cls(np.eye(3))

    @classmethod
    def from_spec(cls, spec) -> "ConeVariety":
        if isinstance(spec, str):
            if spec == "null3":
                return cls.null3()
            raise ValueError(f"unknown variety shorthand {spec!r}")
        Q = jsonio.decode(spec["Q"])
        if "n" in spec and int(spec["n"]) != Q.shape[0]:
            raise ValueError(f"n={spec['n']} does not match Q of shape {Q.shape}")
        return cls(Q)

    def to_spec(self):
        if self.is_null3:
            return "null3"
        return {"n": self.n, "Q": jsonio.encode(self.Q)}

    @property
    def is_null3(self) -> bool:
        return self.n == 3 and np.array_equal(self.Q, np.eye(3))

    # -- membership ---------------------------------------------------------

    def membership_residual(self, z):
        """P(z) = z^T Q z, vectorized over leading axes."""
        z = np.asarray(z, dtype=complex)
        return np.einsum("...i,ij,...j->...", z, self.Q, z)

    def scaled_residual(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(self.membership_residual(z)) / (1.0 + np.sum(np.abs(z) ** 2, axis=-1))

    def check_point(self, z, tol=MEMBERSHIP_TOL):
        z = np.asarray(z, dtype=complex)
        if np.linalg.norm(z) <= ZERO_TOL:
            raise ConeMembershipError("point is (numerically) the origin")
        res = float(self.scaled_residual(z))
        if res > tol:
            raise ConeMembershipError(f"point is off the cone: scaled residual {res:.3e} > {tol:.1e}")
        return z

    # -- tangential fields and flows -----------------------------------------

    def pairs(self, exclude=None):
        """Index pairs (j, k), 1-based with j < k, optionally avoiding one component."""
        idx = [i for i in range(1, self.n + 1) if i != exclude]
        return list(combinations(idx, 2))

    def _pair(self, pair):
        try:
            j, k = (int(x) for x in pair)
        except (TypeError, ValueError):
            raise ValueError(f"invalid index pair {pair!r}") from None
        if not 1 <= j < k <= self.n:
            raise ValueError(f"invalid index pair {pair!r}: need 1 <= j < k <= {self.n}")
        return j - 1, k - 1

    def field_matrix(self, pair):
        j, k = self._pair(pair)
        E = np.zeros((self.n, self.n), dtype=complex)
        E[k, j] = 2.0
        E[j, k] = -2.0
        return E @ self.Q

    def _flow_data(self, pair):
        j, k = self._pair(pair)
        M = self.field_matrix(pair)
        # M maps into span(e_j, e_k) and M^3 = mu^2 M there.
        mu2 = 4.0 * (self.Q[j, k] ** 2 - self.Q[j, j] * self.Q[k, k])
        return M, np.sqrt(complex(mu2))

    def tangent_flow(self, pair, t, z):
        """exp(t M_jk) z, vectorized: t of shape S and z of shape S + (n,).

        Closed form exp(tM) = I + t sinhc(mu t) M + t^2 (cosh(mu t) - 1)/(mu t)^2 M^2,
        exact because the minimal polynomial of M divides x (x^2 - mu^2).
        """
        M, mu = self._flow_data(pair)
        t = np.asarray(t, dtype=complex)
        z = np.asarray(z, dtype=complex)
        s = mu * t
        c1 = t * _sinhc(s)
        c2 = 0.5 * t * t * _sinhc(0.5 * s) ** 2
        Mz = z @ M.T
        MMz = Mz @ M.T
        return z + c1[..., None] * Mz + c2[..., None] * MMz

    def flow_matrix(self, pair, t):
        """exp(t M_jk) as an n x n matrix (scalar t)."""
        return self.tangent_flow(pair, t, np.eye(self.n, dtype=complex)).T

    # -- tangent spaces ---------------------------------------------------------

    def tangent_basis(self, z, tol=MEMBERSHIP_TOL):
        """Orthonormal basis (rows) of T_z A = {w : (Qz)^T w = 0}."""
        z = self.check_point(z, tol)
        return scipy.linalg.null_space((self.Q @ z)[None, :]).T

    # -- decompositions ---------------------------------------------------------

    def null_pair_decompose(self, target, tol=1e-14):
        """Cone points a, b with (a + b)/2 = target.

        A target with |P(t)| <= tol |t|^2 is returned as the pair (t, t).

        a = target + w, b = target - w where w is Q-orthogonal to target and
        P(w) = -P(target). Among such w the one of least norm is taken: it lies
        along the top Takagi vector of the restricted form, |w|^2 = |P(t)|/sigma_1.
        """
        t = np.asarray(target, dtype=complex)
        norm = np.linalg.norm(t)
        if norm <= ZERO_TOL:
            raise ValueError("cannot decompose the origin into cone points")
        r = complex(self.membership_residual(t))
        if abs(r) <= tol * norm**2:
            return t.copy(), t.copy()
        B = scipy.linalg.null_space((self.Q @ t)[None, :])
        S = B.T @ self.Q @ B
        sigma, U = takagi(S)
        if sigma[0] <= ZERO_TOL * np.linalg.norm(self.Q, 2):
            raise DegenerateError("Q-orthogonal complement of target is totally isotropic; no null pair")
        y = np.conj(U[:, 0])
        w = B @ (y * np.sqrt(-r / sigma[0]))
        return t + w, t - w

    # -- standard form and connecting arcs -----------------------------------

    @cached_property
    def _congruence(self):
        sigma, U = takagi(self.Q)
        root = np.sqrt(sigma)
        L = root[:, None] * U.T
        L_inv = np.conj(U) / root[None, :]
        return L, L_inv

    @property
    def congruence(self):
        """L with Q = L^T L, so P(z) = (Lz)^T (Lz)."""
        return self._congruence[0]

    def _frame(self, z):
        y = self.congruence @ z
        x, v = y.real.copy(), y.imag.copy()
        r = 0.5 * (np.linalg.norm(x) + np.linalg.norm(v))
        xh = x / np.linalg.norm(x)
        v = v - (v @ xh) * xh
        return r, xh, v / np.linalg.norm(v)

    def arc_bound(self, a, b):
        """Upper bound on |z| along :meth:`connecting_arc` from a to b."""
        ra = self._frame(np.asarray(a, dtype=complex))[0]
        rb = self._frame(np.asarray(b, dtype=complex))[0]
        L_inv = self._congruence[1]
        return float(np.linalg.norm(L_inv, 2) * np.sqrt(2.0) * max(ra, rb))

    def connecting_arc(self, a, b, s):
        """A path in A minus 0 from a (s=0) to b (s=1), sampled at parameters s.

        In standard coordinates y = Lz a cone point is r (x + i v) with x, v
        orthonormal real vectors. The path rotates x onto x_b (first half),
        then v onto v_b about x_b (second half), with r interpolated
        geometrically, so it never meets the origin.
        """
        a = self.check_point(a)
        b = self.check_point(b)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.array_equal(a, b):
            return np.broadcast_to(a, s.shape + (self.n,)).copy()
        ra, xa, va = self._frame(a)
        rb, xb, vb = self._frame(b)
        n = self.n
        s1 = np.clip(2.0 * s, 0.0, 1.0)
        s2 = np.clip(2.0 * s - 1.0, 0.0, 1.0)

        e2, alpha = _rotation_plane(xa, xb, lambda: va)
        frames_x = np.broadcast_to(xa, (s.size, n)).copy()
        frames_v = np.broadcast_to(va, (s.size, n)).copy()
        if e2 is not None:
            frames_x = _plane_rotate(frames_x, xa, e2, alpha * s1)
            frames_v = _plane_rotate(frames_v, xa, e2, alpha * s1)
            vmid = _plane_rotate(va[None, :], xa, e2, np.array([alpha]))[0]
        else:
            vmid = va
        # second stage: rotate vmid onto vb in a plane orthogonal to xb
        vmid = vmid - (vmid @ xb) * xb
        vmid /= np.linalg.norm(vmid)
        f2, beta = _rotation_plane(vmid, vb, lambda: _perpendicular([xb, vmid], n))
        if f2 is not None:
            frames_v = np.where((s2 > 0)[:, None],
                                _plane_rotate(frames_v, vmid, f2, beta * s2), frames_v)
        r = ra ** (1.0 - s) * rb ** s
        y = r[:, None] * (frames_x + 1j * frames_v)
        z = y @ self._congruence[1].T
        z[s == 0.0] = a
        z[s == 1.0] = b
        return z


def parametrize_null_quadric(g, w):
    """w ((1 - g^2)/2, i (1 + g^2)/2, g): a point of the n = 3 null quadric."""
    g = np.asarray(g, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(w == 0):
        raise ValueError("w = 0 maps to the origin")
    out = np.stack([(1 - g * g) / 2, 1j * (1 + g * g) / 2, g], axis=-1)
    return w[..., None] * out
