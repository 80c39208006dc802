"""Cone-valued paths with a prescribed weighted integral.

Given endpoint values a, b on the cone, a nonvanishing weight g on [0, 1] and a
target v, build h: [0, 1] -> A minus 0 with h(0) = a, h(1) = b and
int h g dt close to v. Writing k = h g (the cone is conical) reduces to g = 1.
Two plateaus p1, p2 with (p1 + p2)/2 = v fill almost all of [0, 1]; short cone
arcs join a -> p1 -> p2 -> b. The arcs occupy a fixed number of grid intervals,
so the error is proportional to the grid spacing and halves under refinement.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .cone import MEMBERSHIP_TOL, ConeVariety
from .errors import ConeMembershipError, ConvergenceError

END_INTERVALS = 2
MID_INTERVALS = 4
MIN_SAMPLES = 2 * END_INTERVALS + MID_INTERVALS + 1


def trapezoid(values, t):
    values = np.asarray(values)
    dt = np.diff(t)
    return np.tensordot(dt, 0.5 * (values[1:] + values[:-1]), axes=(0, 0))


@dataclass
class ConePath:
    t: np.ndarray
    values: np.ndarray
    weight: np.ndarray
    target: np.ndarray
    plateaus: tuple
    bound: float
    error: float

    @property
    def endpoints(self):
        return self.values[0], self.values[-1]

    def integral(self):
        return trapezoid(self.values * self.weight[:, None], self.t)

    def to_csv(self, path):
        n = self.values.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"{p}{k}" for k in range(1, n + 1) for p in ("re", "im")])
            for t, row in zip(self.t, self.values):
                w.writerow([repr(float(t))] + [repr(float(x)) for c in row for x in (c.real, c.imag)])


def _pieces(K):
    """Sample index ranges for arc, plateau, arc, plateau, arc."""
    mid = (K - 1) // 2
    i1 = END_INTERVALS
    i2 = mid - MID_INTERVALS // 2
    i3 = mid + MID_INTERVALS // 2
    i4 = K - 1 - END_INTERVALS
    return i1, i2, i3, i4


def integrate_to_target(endpoints, g, v, eps, variety: ConeVariety | None = None, t=None) -> ConePath:
    """Cone path h with |trapezoid(h g) - v| < eps and pinned endpoints.

    ``g`` holds weight samples on a uniform grid of [0, 1] (or on ``t``).
    Raises ConvergenceError carrying the achieved error when the grid is too
    coarse for ``eps``.
    """
    variety = ConeVariety.null3() if variety is None else variety
    a, b = (np.asarray(e, dtype=complex) for e in endpoints)
    for e, name in ((a, "h(0)"), (b, "h(1)")):
        variety.check_point(e)
        if np.linalg.norm(e) == 0:
            raise ConeMembershipError(f"endpoint {name} is the origin")
    g = np.asarray(g, dtype=complex)
    K = g.size
    t = np.linspace(0.0, 1.0, K) if t is None else np.asarray(t, dtype=float)
    if t.shape != g.shape:
        raise ValueError("weight and parameter grids differ")
    if np.min(np.abs(g)) == 0:
        raise ValueError("weight vanishes on the grid")
    if not eps > 0:
        raise ValueError("eps must be positive")
    v = np.asarray(v, dtype=complex)
    scale = 1.0 / np.min(np.abs(g))

    if np.array_equal(a, b):
        const = np.broadcast_to(a, (K, variety.n)).copy()
        err = float(np.linalg.norm(trapezoid(const * g[:, None], t) - v))
        if err < eps:
            return ConePath(t, const, g, v, (a, a), float(np.linalg.norm(a)), err)
    if K < MIN_SAMPLES:
        raise ConvergenceError(f"need at least {MIN_SAMPLES} samples, got {K}", achieved=np.inf)

    # plateau values of k = h g; the target 0 is split as (+a, -a)
    if np.linalg.norm(v) <= 1e-14 * (1.0 + np.linalg.norm(a)):
        p1, p2 = a.copy(), -a
    else:
        p1, p2 = variety.null_pair_decompose(v)

    ka, kb = a * g[0], b * g[-1]
    i1, i2, i3, i4 = _pieces(K)
    k = np.empty((K, variety.n), dtype=complex)
    k[:i1 + 1] = variety.connecting_arc(ka, p1, np.linspace(0, 1, i1 + 1))
    k[i1:i2 + 1] = p1
    k[i2:i3 + 1] = variety.connecting_arc(p1, p2, np.linspace(0, 1, i3 - i2 + 1))
    k[i3:i4 + 1] = p2
    k[i4:] = variety.connecting_arc(p2, kb, np.linspace(0, 1, K - i4))

    h = k / g[:, None]
    h[0], h[-1] = a, b
    bound = scale * max(variety.arc_bound(ka, p1), variety.arc_bound(p1, p2),
                        variety.arc_bound(p2, kb))
    err = float(np.linalg.norm(trapezoid(h * g[:, None], t) - v))
    res = variety.scaled_residual(h)
    if res.max() > MEMBERSHIP_TOL:
        raise ConeMembershipError(f"path leaves the cone: residual {res.max():.2e}")
    if err >= eps:
        raise ConvergenceError(
            f"tolerance {eps:.1e} unachievable with {K} samples: achieved {err:.3e}", achieved=err)
    return ConePath(t, h, g, v, (p1, p2), bound, err)


def attach_arc(curve, q1, q2, arc=None, samples=32769, eps=1e-3, variety=None) -> ConePath:
    """Cone path along an arc from q1 to q2 whose integral against dz equals
    F(q2) - F(q1), with endpoints f(q1) and f(q2).

    ``arc`` is an array of points from q1 to q2 (default: the straight segment
    with ``samples`` points); the weight is dz/dt along it.
    """
    variety = curve.variety if variety is None else variety
    dom = curve.domain
    q1, q2 = complex(q1), complex(q2)
    dom.require(np.array([q1, q2]), "arc endpoint")
    if arc is None:
        arc = q1 + (q2 - q1) * np.linspace(0.0, 1.0, samples)
    arc = np.asarray(arc, dtype=complex)
    t = np.linspace(0.0, 1.0, arc.size)
    target = curve.F(q2, check=False) - curve.F(q1, check=False)
    a = curve.f(q1, check=False)
    b = curve.f(q2, check=False)
    if np.all(arc == q1):
        if np.linalg.norm(target) < eps and np.array_equal(a, b):
            const = np.broadcast_to(a, (arc.size, variety.n)).copy()
            return ConePath(t, const, np.zeros(arc.size, dtype=complex), target, (a, a),
                            float(np.linalg.norm(a)), float(np.linalg.norm(target)))
        raise ValueError("closed arc of zero length cannot carry a nonzero target")
    g = np.gradient(arc, t)
    return integrate_to_target((a, b), g, target, eps, variety, t)
