"""Circular domains: a closed disc with finitely many disjoint open discs removed.

The holomorphic 1-form is fixed to dz throughout. Homology loop j is the circle
around hole j whose radius is the geometric mean of the hole radius and the
distance from the hole center to the nearest other boundary circle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import DomainError

DEFAULT_NODES = 256


@dataclass(frozen=True)
class LoopNodes:
    """Trapezoidal rule for the contour integral over one homology loop."""

    loop: int
    center: complex
    radius: float
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        """Sum of weights * values over the node axis (axis 0)."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))


def circle_nodes(center, radius, N):
    tau = 2.0 * np.pi * np.arange(N) / N
    return center + radius * np.exp(1j * tau)


@dataclass(frozen=True)
class PlanarDomain:
    outer_center: complex
    outer_radius: float
    holes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "outer_center", complex(self.outer_center))
        object.__setattr__(self, "outer_radius", float(self.outer_radius))
        holes = tuple((complex(c), float(r)) for c, r in self.holes)
        object.__setattr__(self, "holes", holes)
        if not self.outer_radius > 0:
            raise DomainError("outer radius must be positive")
        for i, (c, r) in enumerate(holes, start=1):
            if not r > 0:
                raise DomainError(f"hole {i} has nonpositive radius {r}")
            if abs(c - self.outer_center) + r >= self.outer_radius:
                raise DomainError(f"hole {i} touches or leaves the outer boundary")
        for i in range(len(holes)):
            for k in range(i + 1, len(holes)):
                (ci, ri), (ck, rk) = holes[i], holes[k]
                if abs(ci - ck) <= ri + rk:
                    raise DomainError(f"holes {i + 1} and {k + 1} overlap or touch")

    @property
    def l(self) -> int:
        """Rank of the first homology group (number of holes)."""
        return len(self.holes)

    @property
    def centers(self):
        """Outer center followed by the hole centers."""
        return (self.outer_center,) + tuple(c for c, _ in self.holes)

    @classmethod
    def from_json(cls, data) -> "PlanarDomain":
        outer = data["outer"]
        holes = [(jsonio.decode_scalar(h["c"]), float(h["r"])) for h in data.get("holes", [])]
        return cls(jsonio.decode_scalar(outer["c"]), float(outer["r"]), tuple(holes))

    def to_json(self):
        return {
            "outer": {"c": jsonio.encode(self.outer_center), "r": self.outer_radius},
            "holes": [{"c": jsonio.encode(c), "r": r} for c, r in self.holes],
        }

    def _check_loop(self, j):
        if not (isinstance(j, (int, np.integer)) and 1 <= j <= self.l):
            raise DomainError(f"loop index {j!r} out of range 1..{self.l}")

    def clearance(self, j) -> float:
        """Distance from the center of hole j to the nearest other boundary circle."""
        self._check_loop(j)
        c, _ = self.holes[j - 1]
        dists = [self.outer_radius - abs(c - self.outer_center)]
        dists += [abs(c - ck) - rk for k, (ck, rk) in enumerate(self.holes, start=1) if k != j]
        return min(dists)

    def loop_circle(self, j):
        self._check_loop(j)
        c, r = self.holes[j - 1]
        return c, float(np.sqrt(r * self.clearance(j)))

    def loop_nodes(self, j, N=DEFAULT_NODES) -> LoopNodes:
        self._check_loop(j)
        if N < 16:
            raise DomainError(f"need at least 16 nodes per loop, got {N}")
        c, s = self.loop_circle(j)
        e = np.exp(2j * np.pi * np.arange(N) / N)
        return LoopNodes(j, c, s, c + s * e, 1j * s * (2.0 * np.pi / N) * e)

    def all_loop_nodes(self, N=DEFAULT_NODES):
        return [self.loop_nodes(j, N) for j in range(1, self.l + 1)]

    def boundary_nodes(self, N=DEFAULT_NODES):
        """Points on every boundary circle: outer first, then each hole."""
        pts = [circle_nodes(self.outer_center, self.outer_radius, N)]
        pts += [circle_nodes(c, r, N) for c, r in self.holes]
        return np.concatenate(pts)

    def check_nodes(self, N=DEFAULT_NODES):
        """Boundary circles plus homology loops: where cone membership is audited."""
        pts = [self.boundary_nodes(N)]
        pts += [ln.nodes for ln in self.all_loop_nodes(N)]
        return np.concatenate(pts)

    def contains(self, z, tol=1e-12):
        """Membership in the closed domain, with a relative slack of ``tol``."""
        z = np.asarray(z, dtype=complex)
        slack = tol * self.outer_radius
        inside = np.abs(z - self.outer_center) <= self.outer_radius + slack
        for c, r in self.holes:
            inside &= np.abs(z - c) >= r - slack
        return inside

    def require(self, z, what="point"):
        z = np.asarray(z, dtype=complex)
        ok = self.contains(z)
        if not np.all(ok):
            bad = np.atleast_1d(z)[~np.atleast_1d(ok)][0]
            raise DomainError(f"{what} {bad:.6g} lies outside the closed domain")
        return z

    def grid(self, G=64):
        """Points of a G x G Cartesian grid over the outer disc's bounding box
        that fall in the closed domain; also returns the grid spacing."""
        x = np.linspace(-self.outer_radius, self.outer_radius, G)
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts = (self.outer_center + X + 1j * Y).ravel()
        return pts[self.contains(pts)], float(x[1] - x[0])

    def sample_points(self, count=64):
        """Deterministic spread of points: rings inside each annular region."""
        per = max(8, count // (2 + self.l))
        pts = [circle_nodes(self.outer_center, 0.9 * self.outer_radius, per)]
        for j in range(1, self.l + 1):
            c, s = self.loop_circle(j)
            pts.append(circle_nodes(c, s, per))
        if self.l == 0:
            pts.append(circle_nodes(self.outer_center, 0.45 * self.outer_radius, per))
        pts = np.concatenate(pts)
        return pts[self.contains(pts)]


def make_circular_domain(outer, holes=()) -> PlanarDomain:
    """``outer`` and each hole are (center, radius) pairs."""
    c0, r0 = outer
    return PlanarDomain(c0, r0, tuple(holes))


def annulus(r_in=0.5, r_out=2.0, center=0.0) -> PlanarDomain:
    return PlanarDomain(center, r_out, ((center, r_in),))
