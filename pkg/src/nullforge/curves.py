"""Directed curves: integration, certificates, SL2 image, meshes and growth."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cone import MEMBERSHIP_TOL, ConeVariety
from .domain import DEFAULT_NODES, PlanarDomain
from .errors import (
    CertificationError,
    ConeMembershipError,
    DomainError,
    ImmersionError,
    NullforgeError,
    PeriodObstructionError,
)
from .holo import LaurentMap
from . import periods as _periods

log = logging.getLogger(__name__)

PERIOD_TOL = 1e-9
PAIR_CHUNK = 256
SYMMETRY_BREAKERS = (-1, 0, 1)
STEP_FRACTION = 0.8


@dataclass(frozen=True, eq=False)
class DirectedCurve:
    f: LaurentMap
    F: LaurentMap
    base: tuple
    variety: ConeVariety
    membership_residual: float
    immersion_margin: float
    period_residual: float

    @property
    def domain(self) -> PlanarDomain:
        return self.f.domain

    def to_json(self):
        p, value = self.base
        return {
            "variety": self.variety.to_spec(),
            "domain": self.domain.to_json(),
            "f": self.f.to_json(),
            "F": self.F.to_json(),
            "base": {"p": [p.real, p.imag], "value": [[c.real, c.imag] for c in value]},
            "diagnostics": {
                "membership_residual": self.membership_residual,
                "immersion_margin": self.immersion_margin,
                "period_residual": self.period_residual,
            },
        }


def _audit_nodes(domain, N=DEFAULT_NODES):
    return np.concatenate([domain.check_nodes(N), domain.sample_points(N)])


def integrate_curve(f: LaurentMap, variety: ConeVariety | None = None, base=(None, None),
                    domain=None, tol=PERIOD_TOL) -> DirectedCurve:
    """F with F' = f and F(p) = value.

    ``base`` defaults to value 0 at the outer center, or at the point
    0.9 * outer radius to its right when the center lies in a hole.
    """
    variety = ConeVariety.null3() if variety is None else variety
    domain = f.domain if domain is None else domain
    if domain != f.domain:
        raise DomainError("map and domain disagree")
    if f.n != variety.n:
        raise ValueError(f"map has {f.n} components, variety lives in C^{variety.n}")
    per = f.periods()
    period_residual = float(np.max(np.abs(per))) if per.size else 0.0
    if period_residual >= tol:
        i, k = np.unravel_index(np.argmax(np.abs(per)), per.shape)
        raise PeriodObstructionError(
            f"nonzero period {abs(per[i, k]):.3e} on loop {i + 1}, component {k + 1}",
            hole=int(i + 1), component=int(k + 1))

    z = _audit_nodes(domain)
    vals = f.eval(z, check=False)
    res = variety.scaled_residual(vals)
    if res.max() > MEMBERSHIP_TOL:
        j = int(np.argmax(res))
        raise ConeMembershipError(f"derivative leaves the cone at z = {z[j]:.4g}: {res[j]:.2e}")
    norms = np.linalg.norm(vals, axis=1)
    margin = float(norms.min())
    if margin <= 1e-12 * max(norms.max(), 1.0):
        raise ImmersionError(f"derivative vanishes near z = {z[int(np.argmin(norms))]:.4g}")

    p, value = base
    if p is None:
        p = domain.outer_center
        if not domain.contains(p):
            p = p + 0.9 * domain.outer_radius
    p = complex(p)
    if not domain.contains(p):
        raise DomainError(f"base point {p} outside the domain")
    value = np.zeros(variety.n, dtype=complex) if value is None else np.asarray(value, dtype=complex)
    F0 = f.drop_residues().antidifferentiate()
    F = F0 + LaurentMap.constant(domain, value - F0.eval(p, check=False))
    return DirectedCurve(f, F, (p, value), variety, float(res.max()), margin, period_residual)


@dataclass
class DirectednessReport:
    max_residual: float
    min_norm: float
    worst_node: complex
    scale: float
    passed: bool


def directedness_report(c: DirectedCurve, N=DEFAULT_NODES) -> DirectednessReport:
    z = _audit_nodes(c.domain, N)
    vals = c.f.eval(z, check=False)
    res = np.abs(c.variety.membership_residual(vals))
    norms = np.linalg.norm(vals, axis=1)
    j = int(np.argmax(res))
    scale = float(max(np.max(norms) ** 2, 1.0))
    ok = bool(res[j] < MEMBERSHIP_TOL * scale and norms.min() > 0)
    return DirectednessReport(float(res[j]), float(norms.min()), complex(z[j]), scale, ok)


@dataclass
class GapResult:
    gap: float
    witness: tuple
    spacing: float
    delta: float
    G: int
    pairs: int


def embedding_gap(c: DirectedCurve, G=64, delta=None) -> GapResult:
    """min |F(y) - F(x)| over unordered grid pairs with |x - y| >= delta."""
    pts, h = c.domain.grid(G)
    delta = 2.0 * h if delta is None else float(delta)
    vals = c.F.eval(pts, check=False)
    best, wit, count = np.inf, None, 0
    K = pts.size
    for s in range(0, K, PAIR_CHUNK):
        x = pts[s:s + PAIR_CHUNK]
        # pair block (x_a, y_b) with global index b > a
        far = np.abs(pts[None, :] - x[:, None]) >= delta
        far &= np.arange(K)[None, :] > np.arange(s, s + x.size)[:, None]
        if not far.any():
            continue
        d = np.linalg.norm(vals[None, :, :] - vals[s:s + PAIR_CHUNK, None, :], axis=2)
        d = np.where(far, d, np.inf)
        count += int(far.sum())
        a, b = np.unravel_index(np.argmin(d), d.shape)
        if d[a, b] < best:
            best, wit = float(d[a, b]), (complex(x[a]), complex(pts[b]))
    if count == 0:
        raise CertificationError(f"no admissible pairs: delta = {delta} exceeds the grid's extent")
    return GapResult(best, wit, h, delta, G, count)


def _scaled_distance(f1, f2, z):
    a = f1.eval(z, check=False)
    b = f2.eval(z, check=False)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(a)))


@dataclass
class PerturbResult:
    curve: DirectedCurve
    gap: GapResult
    attempt: int
    gaps: list = field(default_factory=list)
    distances: list = field(default_factory=list)


def perturb_to_embedding(c: DirectedCurve, fam=None, seed=0, attempts=8, bound=1e-2, G=64,
                         delta=None) -> PerturbResult:
    """Random period-preserving perturbations of c; keep the one with the
    largest embedding gap among those within ``bound`` of c.

    Directions are drawn from the kernel of the period Jacobian, scaled so the
    first-order change of f is 0.8 of ``bound`` (sup norm relative to sup |f|
    on the audit nodes), and the periods are then re-corrected. Attempt 0 is
    c itself. The default family adds the powers -1, 0, 1 so that
    perturbations need not share symmetries of f.
    """
    if fam is None:
        fam = _periods.build_family(c.f, c.variety, seed=seed, extra_powers=SYMMETRY_BREAKERS)
    z = _audit_nodes(c.domain)
    best = (0, c, embedding_gap(c, G, delta))
    gaps, dists = [best[2].gap], [0.0]

    J = fam.jacobian()[fam._rows()]
    _, sv, Vh = np.linalg.svd(J)
    rank = int(np.sum(sv > _periods.RANK_RTOL * sv[0])) if sv.size else 0
    kernel = Vh[rank:].conj().T
    if kernel.shape[1] == 0:
        log.warning("period Jacobian has trivial kernel; only the identity attempt is available")
    fz = c.f.eval(z, check=False)
    G_vals = fam._multiplier_values(z)
    pairs = fam._slot_pairs()
    fscale = np.max(np.abs(fz))
    for a in range(1, attempts + 1 if kernel.shape[1] else 1):
        rng = np.random.default_rng([seed, a])
        xi = kernel @ (rng.standard_normal(kernel.shape[1]) + 1j * rng.standard_normal(kernel.shape[1]))
        first = sum(xi[s] * G_vals[s][:, None] * (fz @ fam.variety.field_matrix(p).T)
                    for s, p in enumerate(pairs))
        step = STEP_FRACTION * bound * fscale / np.max(np.abs(first))
        zeta = xi * min(step, 0.5 * fam.trust_radius / np.linalg.norm(xi))
        try:
            res = _periods.correct_periods(fam.with_zeta(zeta))
            cand = integrate_curve(res.corrected, c.variety, c.base)
        except NullforgeError as exc:
            log.info("attempt %d failed: %s", a, exc)
            gaps.append(float("nan"))
            dists.append(float("nan"))
            continue
        dist = _scaled_distance(c.f, cand.f, z)
        gap = embedding_gap(cand, G, delta)
        gaps.append(gap.gap)
        dists.append(dist)
        if dist < bound and gap.gap > best[2].gap:
            best = (a, cand, gap)
    if best[2].gap == 0.0:
        log.warning("no attempt separated the self-contact; gap stays 0")
    return PerturbResult(best[1], best[2], best[0], gaps, dists)


def sl2_map(F):
    """(1/z3) [[1, z1 + i z2], [z1 - i z2, z1^2 + z2^2 + z3^2]] for rows of F."""
    F = np.asarray(F, dtype=complex)
    z1, z2, z3 = F[..., 0], F[..., 1], F[..., 2]
    out = np.empty(F.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = z1 + 1j * z2
    out[..., 1, 0] = z1 - 1j * z2
    out[..., 1, 1] = z1**2 + z2**2 + z3**2
    return out / z3[..., None, None]


@dataclass
class Sl2Curve:
    points: np.ndarray
    Z: np.ndarray
    det_error: float
    null_error: float


def to_sl2(c: DirectedCurve, G=32, points=None, rtol=1e-6, step=1e-3) -> Sl2Curve:
    """Image of F under the SL2 map on a grid, with det and null-condition checks.

    The null condition is the determinant of dZ/dz, taken by fourth-order
    central differences; it is reported relative to |dZ/dz|^2.
    """
    if c.variety.n != 3 or not c.variety.is_null3:
        raise ValueError("the SL2 correspondence needs the n = 3 null quadric")
    pts = c.domain.grid(G)[0] if points is None else c.domain.require(points)
    Fv = c.F.eval(pts, check=False)
    f3 = np.abs(Fv[:, 2])
    if f3.min() <= rtol * max(np.abs(Fv).max(), 1.0):
        j = int(np.argmin(f3))
        raise CertificationError(f"third coordinate vanishes near z = {pts[j]:.4g}: "
                                 "the z3 = 0 locus meets the sample grid")
    Z = sl2_map(Fv)
    det = Z[:, 0, 0] * Z[:, 1, 1] - Z[:, 0, 1] * Z[:, 1, 0]
    h = step
    T = [sl2_map(c.F.eval(pts + k * h, check=False)) for k in (-2, -1, 1, 2)]
    dZ = (T[0] - 8 * T[1] + 8 * T[2] - T[3]) / (12 * h)
    ddet = dZ[:, 0, 0] * dZ[:, 1, 1] - dZ[:, 0, 1] * dZ[:, 1, 0]
    size = np.sum(np.abs(dZ) ** 2, axis=(1, 2))
    null = np.abs(ddet) / np.maximum(size, 1e-300)
    return Sl2Curve(pts, Z, float(np.max(np.abs(det - 1))), float(null.max()))


@dataclass
class SurfaceMesh:
    vertices: np.ndarray  # (R, T, 3)
    params: np.ndarray  # (R, T) complex parameters
    conformality: np.ndarray  # (R, T) max of | |Xu|^2 - |Xv|^2 | and |Xu . Xv|
    harmonicity: np.ndarray  # (R, T) |Laplacian X|
    h: float

    def interior(self, values):
        """Statistics exclude the first and last ring."""
        return values[1:-1]

    @property
    def max_conformality(self):
        return float(np.max(self.interior(self.conformality)))

    @property
    def max_harmonicity(self):
        return float(np.max(self.interior(self.harmonicity)))

    def faces(self):
        R, T = self.params.shape
        idx = np.arange(R * T).reshape(R, T) + 1
        out = []
        for i in range(R - 1):
            for j in range(T):
                k = (j + 1) % T
                out.append((idx[i, j], idx[i, k], idx[i + 1, k], idx[i + 1, j]))
        return out

    def to_obj(self, path):
        with open(path, "w") as fh:
            for x, y, zc in self.vertices.reshape(-1, 3):
                fh.write(f"v {x!r} {y!r} {zc!r}\n")
            for face in self.faces():
                fh.write("f " + " ".join(str(i) for i in face) + "\n")


def polar_grid(domain, rings=24, spokes=64, radii=None):
    """Polar grid about the outer center between ``radii`` (default: the
    central hole, or a tenth of the outer radius, out to the outer circle)."""
    c0 = domain.outer_center
    if radii is None:
        inner = [r for c, r in domain.holes if abs(c - c0) < 1e-12]
        radii = (inner[0] if inner else 0.1 * domain.outer_radius, domain.outer_radius)
    r = np.linspace(radii[0], radii[1], rings)
    th = 2 * np.pi * np.arange(spokes) / spokes
    pts = c0 + r[:, None] * np.exp(1j * th)[None, :]
    if not np.all(domain.contains(pts)):
        raise DomainError("polar grid leaves the domain")
    return pts


def minimal_surface_mesh(c: DirectedCurve, h=1e-2, rings=24, spokes=64, radii=None) -> SurfaceMesh:
    """Re F on a polar grid with finite-difference residuals at each vertex.

    Derivatives use central differences of step h in the u and v directions
    about each vertex; the Laplacian uses the 5-point stencil.
    """
    if c.variety.n != 3:
        raise ValueError("surface meshes need n = 3")
    pts = polar_grid(c.domain, rings, spokes, radii)
    X = lambda w: c.F.eval(w, check=False).real  # noqa: E731
    x0, xe, xw, xn, xs = X(pts), X(pts + h), X(pts - h), X(pts + 1j * h), X(pts - 1j * h)
    Xu = (xe - xw) / (2 * h)
    Xv = (xn - xs) / (2 * h)
    lap = (xe + xw + xn + xs - 4 * x0) / h**2
    conf = np.maximum(np.abs(np.sum(Xu**2, -1) - np.sum(Xv**2, -1)), np.abs(np.sum(Xu * Xv, -1)))
    return SurfaceMesh(x0, pts, conf, np.linalg.norm(lap, axis=-1), h)


def growth_profile(c: DirectedCurve, shells, N=DEFAULT_NODES):
    """Rows (radius, min over the circle |z - c0| = radius of max(|F1|, |F2|))."""
    c0 = c.domain.outer_center
    rows = []
    for r in shells:
        z = c0 + float(r) * np.exp(2j * np.pi * np.arange(N) / N)
        if not np.all(c.domain.contains(z)):
            raise DomainError(f"shell of radius {r} leaves the domain")
        Fv = c.F.eval(z, check=False)
        rows.append((float(r), float(np.min(np.maximum(np.abs(Fv[:, 0]), np.abs(Fv[:, 1]))))))
    return rows
