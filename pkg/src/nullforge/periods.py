"""Flow-composition deformation families and period correction.

For a base map f on the cone and holomorphic multipliers g_{i,k}, the family

    Psi(zeta, z) = phi^{1}_{zeta_{1,1} g_{1,1}(z)} o ... o phi^{m}_{zeta_{l,m} g_{l,m}(z)} (f(z))

composes the flows of the tangential fields V_k (one field per slot k) over all
loops i and slots k, so every member stays on the cone. Its period map is
holomorphic in zeta; when its differential at zeta = 0 has rank l*n, Gauss-Newton
with least-norm steps drives the periods to zero.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cone import MEMBERSHIP_TOL, ConeVariety
from .domain import DEFAULT_NODES, PlanarDomain
from .errors import (
    ConeMembershipError,
    ConvergenceError,
    DegenerateError,
    FitError,
    NullforgeError,
    PeriodObstructionError,
    TrustRegionError,
)
from .holo import DEFAULT_DEGREE, LaurentMap, fit_function

log = logging.getLogger(__name__)

RANK_RTOL = 1e-8
PINV_RCOND = 1e-10
TRUST_RADIUS = 1.0
MAX_RESEEDS = 8
MAX_POWER = 8
MAX_SLOTS = 24
COUPLING_RTOL = 1e-2
MAX_WIDTH = 3


@dataclass(frozen=True, eq=False)
class DeformationFamily:
    base: LaurentMap
    variety: ConeVariety
    pairs: tuple  # field pair used by each slot k = 1..m
    multipliers: tuple  # multipliers[i][k]: scalar LaurentMap for loop i+1, slot k+1
    zeta: np.ndarray = None
    fixed_component: int | None = None
    trust_radius: float = TRUST_RADIUS
    N: int = DEFAULT_NODES
    seed: int = 0

    def __post_init__(self):
        L = self.l * self.m
        zeta = np.zeros(L, dtype=complex) if self.zeta is None else np.array(self.zeta, dtype=complex)
        if zeta.shape != (L,):
            raise ValueError(f"zeta must have shape ({L},), got {zeta.shape}")
        zeta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if self.fixed_component is not None:
            k = self.fixed_component
            for pair in self.pairs:
                if k in pair:
                    raise ValueError(f"pair {pair} moves fixed component {k}")

    @property
    def domain(self) -> PlanarDomain:
        return self.base.domain

    @property
    def l(self) -> int:
        return self.domain.l

    @property
    def m(self) -> int:
        return len(self.pairs)

    def with_zeta(self, zeta) -> "DeformationFamily":
        return dataclasses.replace(self, zeta=zeta)

    def rescaled(self, c) -> "DeformationFamily":
        """Same multipliers and zeta on the base map c * f."""
        return dataclasses.replace(self, base=c * self.base)

    # slot s = i * m + k in lexicographic (loop, slot) order
    def _slot_pairs(self):
        return [self.pairs[s % self.m] for s in range(self.l * self.m)]

    def _multiplier_values(self, z):
        vals = [g.eval(z, check=False)[..., 0] for row in self.multipliers for g in row]
        return np.array(vals) if vals else np.zeros((0,) + np.shape(z), dtype=complex)

    @cached_property
    def _loop_data(self):
        loops = self.domain.all_loop_nodes(self.N)
        if not loops:
            return np.zeros(0, dtype=complex), np.zeros((0, 0), dtype=complex)
        z = np.concatenate([ln.nodes for ln in loops])
        W = np.zeros((self.l, z.size), dtype=complex)
        for j, ln in enumerate(loops):
            W[j, j * self.N:(j + 1) * self.N] = ln.weights
        return z, W

    @cached_property
    def _loop_values(self):
        z, _ = self._loop_data
        return self.base.eval(z, check=False), self._multiplier_values(z)

    def check_trust(self, zeta):
        size = float(np.linalg.norm(zeta))
        if size > self.trust_radius:
            raise TrustRegionError(f"|zeta| = {size:.3g} exceeds trust radius {self.trust_radius}")

    def _apply(self, zeta, fz, G, with_states=False):
        """Compose the flows on base values fz; innermost flow is the last slot."""
        pairs = self._slot_pairs()
        x = fz
        states = [None] * len(pairs)
        for s in range(len(pairs) - 1, -1, -1):
            if zeta[s] != 0:
                x = self.variety.tangent_flow(pairs[s], zeta[s] * G[s], x)
            states[s] = x
        return (x, states) if with_states else x

    def evaluate(self, z, zeta=None, check=True):
        """Psi(zeta, z); zeta defaults to the family's current parameter."""
        zeta = self.zeta if zeta is None else np.asarray(zeta, dtype=complex)
        self.check_trust(zeta)
        z = np.asarray(z, dtype=complex)
        fz = self.base.eval(z, check=check)
        return self._apply(zeta, fz, self._multiplier_values(z))

    def period_vector(self, zeta=None):
        """Periods of Psi(zeta, .) by trapezoidal quadrature, shape (l, n)."""
        zeta = self.zeta if zeta is None else np.asarray(zeta, dtype=complex)
        _, W = self._loop_data
        fz, G = self._loop_values
        return W @ self._apply(zeta, fz, G)

    def _rows(self):
        n = self.variety.n
        keep = [c for c in range(n) if c + 1 != self.fixed_component]
        return np.array([j * n + c for j in range(self.l) for c in keep], dtype=int)

    def jacobian(self, zeta=None):
        """Holomorphic derivative of the flattened period vector, (l*n, l*m).

        d Psi / d zeta_s = E_1 ... E_{s-1} (g_s M_s x_s), where x_s is the state
        right after flow s and E_r = exp(zeta_r g_r M_r); at zeta = 0 this is
        g_s V_s(f).
        """
        zeta = self.zeta if zeta is None else np.asarray(zeta, dtype=complex)
        _, W = self._loop_data
        fz, G = self._loop_values
        pairs = self._slot_pairs()
        _, states = self._apply(zeta, fz, G, with_states=True)
        n = self.variety.n
        cols = []
        for s, pair in enumerate(pairs):
            M = self.variety.field_matrix(pair)
            d = G[s][:, None] * (states[s] @ M.T)
            for r in range(s - 1, -1, -1):
                if zeta[r] != 0:
                    d = self.variety.tangent_flow(pairs[r], zeta[r] * G[r], d)
            cols.append((W @ d).reshape(self.l * n))
        if not cols:
            return np.zeros((self.l * n, 0), dtype=complex)
        return np.stack(cols, axis=1)


def _coupled_powers(values, spread, rtol=COUPLING_RTOL, width=MAX_WIDTH):
    """Multiplier powers p ranked by how strongly u^p turns the Fourier mode
    u^(-1-p) of ``values`` on the loop into a residue, per unit of its sup
    over the domain. ``spread = (umin, umax)`` bounds |u| on the domain."""
    N = values.shape[0]
    coef = np.fft.fft(values, axis=0) / N
    mag = np.max(np.abs(coef), axis=1)
    q = np.fft.fftfreq(N, d=1.0 / N).astype(int)
    p = -1 - q
    umin, umax = spread
    sup = np.where(p >= 0, umax ** np.maximum(p, 0), (1.0 / umin) ** np.maximum(-p, 0))
    score = np.where(np.abs(p) <= MAX_POWER, mag / sup, 0.0)
    order = np.argsort(-score, kind="stable")
    keep = [int(p[j]) for j in order if score[j] > 0 and score[j] >= rtol * score.max()]
    return keep[:width] or [-1]


def _loop_spread(domain, i):
    c, s = domain.loop_circle(i)
    r = domain.holes[i - 1][1]
    return r / s, (abs(c - domain.outer_center) + domain.outer_radius) / s


def _loop_multiplier(domain, i, powers, coeffs, N):
    """sum_p coeffs_p ((z - c_i)/s_i)^p normalized to unit sup on loop i."""
    c, s = domain.loop_circle(i)
    c0 = domain.outer_center
    pmax = max(max(powers), 0)
    pmin = min(min(powers), 0)
    poly = np.zeros(pmax + 1, dtype=complex)
    principal = np.zeros((domain.l, max(-pmin, 0)), dtype=complex)
    shift = c0 - c
    for p, a in zip(powers, coeffs):
        if p >= 0:
            # (z - c)^p = ((z - c0) + (c0 - c))^p
            binom = np.array([np.prod(np.arange(p - q + 1, p + 1)) / np.prod(np.arange(1, q + 1))
                              for q in range(p + 1)])
            poly[: p + 1] += a * binom * shift ** (p - np.arange(p + 1)) / s**p
        else:
            principal[i - 1, -p - 1] += a * s ** (-p)
    g = LaurentMap(domain, poly[:, None], principal[:, :, None])
    sup = np.max(np.abs(g.eval(domain.loop_nodes(i, N).nodes, check=False)))
    return g * (1.0 / sup)


def _check_base(f, variety, N, tol=MEMBERSHIP_TOL):
    z = f.domain.check_nodes(N)
    vals = f.eval(z, check=False)
    res = variety.scaled_residual(vals)
    worst = int(np.argmax(res))
    if res[worst] > tol:
        raise ConeMembershipError(
            f"base map leaves the cone at z = {z[worst]:.4g}: scaled residual {res[worst]:.2e}")
    norms = np.linalg.norm(vals, axis=1)
    if norms.min() <= 1e-14 * max(norms.max(), 1.0):
        raise ConeMembershipError(f"base map vanishes near z = {z[int(np.argmin(norms))]:.4g}")


def build_family(f, variety, domain=None, slots=None, seed=0, fixed_component=None,
                 N=DEFAULT_NODES, trust_radius=TRUST_RADIUS, extra_powers=()) -> DeformationFamily:
    """Family around f whose period differential at zeta = 0 has full rank.

    Multipliers are monomials u^p in u = (z - c_i)/s_i (unit sup on loop i)
    with a seeded phase. The powers p are those pairing with the Fourier
    modes of f on loop i to produce residues. Slot k uses field pair
    k mod P and cycles through the powers, so the default
    ``slots = P * (#powers)`` covers every combination. Up to eight reseeds
    (new phases and power offsets) are tried before giving up.

    ``extra_powers`` are appended to every loop's powers; they need not
    produce residues and widen the kernel of the period differential.
    """
    domain = f.domain if domain is None else domain
    if domain is not f.domain and domain != f.domain:
        raise ValueError("map and domain disagree")
    n = variety.n
    if fixed_component is not None and not 1 <= fixed_component <= n:
        raise ValueError(f"fixed component {fixed_component} out of range 1..{n}")
    _check_base(f, variety, N)
    span, verdict = nondegeneracy_rank(f, variety, domain)
    if verdict != "nondegenerate":
        raise DegenerateError(
            f"degenerate: tangent spaces along the map span rank {span} < {n}; "
            "periods cannot be steered", rank=span, required=n)
    field_pairs = variety.pairs(exclude=fixed_component)
    P = len(field_pairs)
    required = domain.l * (n - (fixed_component is not None))

    windows = [_coupled_powers(f.eval(domain.loop_nodes(i, N).nodes, check=False),
                               _loop_spread(domain, i))
               for i in range(1, domain.l + 1)]
    windows = [w + [int(p) for p in extra_powers if p not in w] for w in windows]
    if slots is None:
        width = max((len(w) for w in windows), default=1)
        slots = min(max(P * width, n), MAX_SLOTS)
    slots = int(slots)
    if slots < 1:
        raise ValueError("need at least one slot")
    pairs = [field_pairs[k % P] for k in range(slots)]
    if domain.l == 0:
        return DeformationFamily(f, variety, pairs, (), fixed_component=fixed_component,
                                 trust_radius=trust_radius, N=N, seed=seed)

    rank = 0
    for attempt in range(MAX_RESEEDS + 1):
        rng = np.random.default_rng([seed, attempt])
        mults = []
        for i, powers in enumerate(windows, start=1):
            shift = int(rng.integers(len(powers))) if attempt else 0
            phases = np.exp(2j * np.pi * rng.random(slots))
            row = tuple(
                _loop_multiplier(domain, i, [powers[(k // P + k % P + shift) % len(powers)]], [phases[k]], N)
                for k in range(slots))
            mults.append(row)
        fam = DeformationFamily(f, variety, pairs, tuple(mults), fixed_component=fixed_component,
                                trust_radius=trust_radius, N=N, seed=seed)
        J = fam.jacobian()[fam._rows()]
        sv = np.linalg.svd(J, compute_uv=False)
        rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0
        if rank >= required:
            if attempt:
                log.info("family reached rank %d after %d reseeds", rank, attempt)
            return fam
    raise DegenerateError(
        f"degenerate: period differential rank {rank} < required {required} "
        f"after {MAX_RESEEDS} reseeds", rank=rank, required=required)


def evaluate_family(fam: DeformationFamily, zeta, z):
    return fam.evaluate(z, zeta)


def period_jacobian(fam: DeformationFamily, check=False, step=1e-5):
    """Analytic period Jacobian at the family's zeta; ``check`` compares it
    against central differences and raises on a relative mismatch > 1e-6."""
    J = fam.jacobian()
    if check:
        Jfd = period_jacobian_fd(fam, step)
        err = np.linalg.norm(J - Jfd) / max(np.linalg.norm(Jfd), 1e-300)
        if err > 1e-6:
            raise NullforgeError(f"period Jacobian disagrees with finite differences: {err:.2e}")
    return J


def period_jacobian_fd(fam: DeformationFamily, step=1e-5):
    """Central differences of the period map along each zeta coordinate."""
    L = fam.l * fam.m
    cols = []
    for s in range(L):
        e = np.zeros(L, dtype=complex)
        e[s] = step
        plus = fam.period_vector(fam.zeta + e)
        minus = fam.period_vector(fam.zeta - e)
        cols.append(((plus - minus) / (2 * step)).ravel())
    return np.stack(cols, axis=1) if cols else np.zeros((fam.l * fam.variety.n, 0), dtype=complex)


@dataclass
class CorrectionResult:
    zeta: np.ndarray
    corrected: LaurentMap
    iterations: int
    period_residual: float
    fit_residual: float
    history: list = field(default_factory=list)

    def __iter__(self):
        # allows ``zeta, corrected = correct_periods(...)``
        return iter((self.zeta, self.corrected))


def correct_periods(fam: DeformationFamily, tol=1e-10, max_iter=50, D=DEFAULT_DEGREE,
                    fit_tol=1e-8) -> CorrectionResult:
    """Gauss-Newton on zeta until the periods of Psi(zeta, .) vanish, then refit.

    Steps are least-norm (SVD pseudoinverse, relative cutoff 1e-10) with
    backtracking on the period norm. The refit Laurent map of Psi(zeta*, .) is
    returned; in fixed-component mode that component is copied from the base.
    """
    rows = fam._rows()
    n = fam.variety.n
    zeta = np.array(fam.zeta, dtype=complex)

    def residual(z):
        return fam.period_vector(z).ravel()

    P = residual(zeta)
    if fam.fixed_component is not None and fam.l:
        k = fam.fixed_component
        stuck = np.abs(P.reshape(fam.l, n)[:, k - 1])
        if stuck.max() >= tol:
            raise PeriodObstructionError(
                f"fixed component {k} has period {stuck.max():.2e}; it cannot be corrected",
                hole=int(np.argmax(stuck)) + 1, component=k)
    norm = float(np.linalg.norm(P[rows])) if rows.size else 0.0
    history = [norm]
    it = 0
    while norm >= tol:
        if it >= max_iter:
            raise ConvergenceError(f"no convergence in {max_iter} iterations: |P| = {norm:.3e}",
                                   achieved=norm)
        J = fam.jacobian(zeta)[rows]
        step = -np.linalg.pinv(J, rcond=PINV_RCOND) @ P[rows]
        alpha, blocked = 1.0, False
        while True:
            trial = zeta + alpha * step
            if np.linalg.norm(trial) > fam.trust_radius:
                blocked, nt = True, np.inf
            else:
                Pt = residual(trial)
                nt = float(np.linalg.norm(Pt[rows]))
                if nt < (1.0 - 1e-4 * alpha) * norm:
                    break
            if alpha < 1e-6:
                break
            alpha *= 0.5
        if nt >= norm:
            if blocked:
                raise TrustRegionError(
                    f"every descent step leaves the trust radius {fam.trust_radius} (|P| = {norm:.3e})")
            raise ConvergenceError(f"line search stalled at |P| = {norm:.3e}", achieved=norm)
        zeta, P, norm = trial, Pt, nt
        history.append(norm)
        it += 1
        log.debug("gauss-newton iter %d: |P| = %.3e (alpha %.3g)", it, norm, alpha)

    if it == 0 and not np.any(zeta):
        return CorrectionResult(zeta, fam.base, 0, norm, 0.0, history)

    moved = fam.with_zeta(zeta)
    corrected = fit_function(lambda z: moved.evaluate(z, check=False), fam.domain, D)
    scale = float(np.max(np.abs(moved.evaluate(fam.domain.boundary_nodes(), check=False))))
    rel = corrected.fit_residual / max(scale, 1e-300)
    if rel > fit_tol:
        raise FitError(f"refit residual {rel:.2e} (relative) exceeds {fit_tol:.0e}; raise D")
    if fam.fixed_component is not None:
        corrected = corrected.with_component(fam.fixed_component, fam.base)
    return CorrectionResult(zeta, corrected, it, norm, rel, history)


def nondegeneracy_rank(f, variety, domain=None, samples=64, rtol=RANK_RTOL):
    """Rank of the span of cone tangent spaces along f, and the verdict."""
    domain = f.domain if domain is None else domain
    z = domain.sample_points(samples)
    vals = f.eval(z, check=False)
    res = variety.scaled_residual(vals)
    if res.max() > MEMBERSHIP_TOL:
        raise ConeMembershipError(f"map leaves the cone: scaled residual {res.max():.2e}")
    stack = np.concatenate([variety.tangent_basis(v) for v in vals])
    sv = np.linalg.svd(stack, compute_uv=False)
    rank = int(np.sum(sv > rtol * sv[0]))
    return rank, ("nondegenerate" if rank == variety.n else "degenerate")
