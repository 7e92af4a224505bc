"""Equilibria of the urn vector field: location, stability and limit sets.

Equilibria are found face by face.  On each closed face (coordinates
outside a vertex cover pinned to zero) the concave Lyapunov function is
maximized by projected gradient ascent, and the maximizer is filed under
the support it actually has.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dynamics import (
    DomainError,
    default_c,
    edge_sums,
    grad_lyapunov,
    hessian_lyapunov,
    in_domain,
    vector_field,
)
from .graph import DEFAULT_MAX_M, BipartiteClass, Graph, classify_bipartiteness, is_vertex_cover, vertex_covers

RESIDUAL_TOL = 1e-8  # sup-norm of F at an equilibrium
GRADIENT_TOL = 1e-8  # off-support gradient threshold for instability
DEDUP_TOL = 1e-6
SUPPORT_TOL = 1e-9
ZERO_EIG_TOL = 1e-8
ETA_TOL = 1e-12


class EquilibriumError(RuntimeError):
    pass


class ConvergenceError(EquilibriumError):
    pass


class NotAnEquilibriumError(EquilibriumError, ValueError):
    pass


class LimitSetError(EquilibriumError):
    """Zero or several disjoint non-unstable limit sets were found."""


class Stability(enum.Enum):
    UNSTABLE = "unstable"
    NON_UNSTABLE = "non-unstable"


class LimitKind(enum.Enum):
    SINGLETON = "singleton"
    INTERVAL = "interval"


@dataclass(frozen=True)
class LimitSet:
    """Either a point or a segment ``base + eta * direction``, eta in eta_range."""

    kind: LimitKind
    base: np.ndarray
    direction: np.ndarray
    eta_range: tuple[float, float]

    @classmethod
    def singleton(cls, w) -> LimitSet:
        w = np.asarray(w, dtype=float)
        return cls(LimitKind.SINGLETON, w, np.zeros_like(w), (0.0, 0.0))

    def point(self, eta: float) -> np.ndarray:
        return self.base + eta * self.direction

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return self.point(self.eta_range[0]), self.point(self.eta_range[1])

    def project(self, x) -> tuple[float, np.ndarray]:
        """Orthogonal projection onto the segment, clamped to its ends."""
        x = np.asarray(x, dtype=float)
        if self.kind is LimitKind.SINGLETON:
            return 0.0, self.base
        d = self.direction
        eta = float(np.dot(x - self.base, d) / np.dot(d, d))
        eta = min(max(eta, self.eta_range[0]), self.eta_range[1])
        return eta, self.point(eta)

    def distance(self, x, ord=2) -> float:
        _, p = self.project(x)
        return float(np.linalg.norm(np.asarray(x, dtype=float) - p, ord=ord))

    def to_dict(self) -> dict:
        lo, hi = self.endpoints
        return {
            "kind": self.kind.value,
            "base": self.base.tolist(),
            "direction": self.direction.tolist(),
            "eta_range": list(self.eta_range),
            "endpoints": [lo.tolist(), hi.tolist()],
        }


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues of DF(w) on the sum-zero tangent space."""

    eigenvalues: np.ndarray
    max_imag: float
    zero_count: int
    # interior points only: spectrum of the symmetrized Hessian with the
    # normal eigenvalue -1 removed, and its deviation from ``eigenvalues``
    symmetric_eigenvalues: np.ndarray | None = None
    symmetric_deviation: float | None = None

    @property
    def realness_verified(self) -> bool | None:
        if self.symmetric_deviation is None:
            return None
        return self.max_imag < 1e-9 and self.symmetric_deviation < 1e-9

    def to_dict(self) -> dict:
        out = {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "max_imag": self.max_imag,
            "zero_count": self.zero_count,
        }
        if self.symmetric_eigenvalues is not None:
            out["symmetric_eigenvalues"] = self.symmetric_eigenvalues.tolist()
            out["symmetric_deviation"] = self.symmetric_deviation
        return out


@dataclass(frozen=True)
class Equilibrium:
    point: np.ndarray
    support: tuple[int, ...]
    gradient: np.ndarray
    stability: Stability
    marginal: tuple[int, ...] = ()
    interval: LimitSet | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "support": list(self.support),
            "gradient": self.gradient.tolist(),
            "stability": self.stability.value,
            "marginal": list(self.marginal),
            "interval": None if self.interval is None else self.interval.to_dict(),
        }


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def _project_face(y, idx, m):
    out = np.zeros(m)
    out[idx] = project_simplex(y[idx])
    return out


def _centered_grad(g, v, idx):
    gr = grad_lyapunov(g, v)
    out = np.zeros(g.m)
    out[idx] = gr[idx] - gr[idx].mean()
    return out


def maximize_on_face(
    g: Graph,
    S,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    c: float | None = None,
) -> np.ndarray | None:
    """Maximize L over the closed face where coordinates outside ``S`` vanish.

    Projected gradient ascent with a backtracking step.  A trial step from
    ``v`` to ``w`` is accepted when the directional derivative of L at ``w``
    along ``w - v`` is still at least half the one at ``v``; by concavity
    this guarantees an increase of L without ever subtracting two nearly
    equal values of L.

    The edge-sum floor ``c`` never binds at the maximizer (there every edge
    sum is at least 1/N > c), so iterates are only kept off the zero-sum
    boundary where L is infinite.  Returns ``None`` when the face contains
    no point of the domain.
    """
    S = sorted(set(S))
    if not is_vertex_cover(g, S):
        raise ValueError(f"support {S} is not a vertex cover; its face is empty")
    c = default_c(g) if c is None else c
    idx = np.array(S, dtype=np.intp) - 1
    v = np.zeros(g.m)
    v[idx] = 1.0 / len(idx)
    if not in_domain(g, v, c):
        return None

    step = 1.0
    for _ in range(max_iter):
        gr = _centered_grad(g, v, idx)
        if np.linalg.norm(_project_face(v + gr, idx, g.m) - v) <= tol:
            break
        t = min(2.0 * step, 1e6)
        while True:
            w = _project_face(v + t * gr, idx, g.m)
            d = w - v
            if np.all(edge_sums(g, w) > 0):
                # slopes use the gradient centered over the coordinates that
                # move; zero coordinates with very negative gradients would
                # otherwise amplify the rounding error of sum(d)
                free = np.nonzero((v > 0) | (w > 0))[0]
                slope0 = float(np.dot(_centered_grad(g, v, free), d))
                slope1 = float(np.dot(_centered_grad(g, w, free), d))
                if slope0 > 0 and slope1 >= 0.5 * slope0:
                    break
            t *= 0.5
            if t < 1e-30:
                raise ConvergenceError(f"line search failed on face {S} at {v}")
        v, step = w, t
    else:
        raise ConvergenceError(f"projected gradient ascent on face {S} did not converge in {max_iter} iterations")
    return v


def _support(w) -> tuple[int, ...]:
    return tuple(int(i) + 1 for i in np.nonzero(np.asarray(w) > SUPPORT_TOL)[0])


def _require_equilibrium(g, w):
    w = np.asarray(w, dtype=float)
    res = float(np.max(np.abs(vector_field(g, w))))
    if res > RESIDUAL_TOL:
        raise NotAnEquilibriumError(f"|F(w)|_inf = {res:.3g} exceeds {RESIDUAL_TOL}; not an equilibrium")
    return w


def classify(g: Graph, w) -> Stability:
    """Unstable iff some coordinate outside the support has dL/dv_i > 1e-8."""
    w = _require_equilibrium(g, w)
    off = np.asarray(w) <= SUPPORT_TOL
    gr = grad_lyapunov(g, w)
    return Stability.UNSTABLE if np.any(gr[off] > GRADIENT_TOL) else Stability.NON_UNSTABLE


def _marginal(g, w, gr) -> tuple[int, ...]:
    off = np.asarray(w) <= SUPPORT_TOL
    hits = off & (np.abs(gr) <= GRADIENT_TOL)
    return tuple(int(i) + 1 for i in np.nonzero(hits)[0])


def make_equilibrium(g: Graph, w) -> Equilibrium:
    w = np.where(np.asarray(w, dtype=float) > SUPPORT_TOL, w, 0.0)
    stab = classify(g, w)
    gr = grad_lyapunov(g, w)
    return Equilibrium(w, _support(w), gr, stab, _marginal(g, w, gr))


def jacobian(g: Graph, w) -> np.ndarray:
    """dF_i/dv_j = v_i d2L/dv_i dv_j off the diagonal, dL/dv_i + v_i d2L/dv_i^2 on it."""
    w = np.asarray(w, dtype=float)
    if np.any(edge_sums(g, w) <= 0):
        raise DomainError("some edge sum is not positive")
    return np.diag(grad_lyapunov(g, w)) + w[:, None] * hessian_lyapunov(g, w)


def tangent_basis(m: int) -> np.ndarray:
    """Orthonormal basis (m x (m-1)) of the sum-zero subspace."""
    return scipy.linalg.null_space(np.ones((1, m)))


def tangent_spectrum(g: Graph, w) -> SpectrumReport:
    w = _require_equilibrium(g, w)
    if g.m > 64:
        raise ValueError("dense spectrum limited to m <= 64")
    J = jacobian(g, w)
    Q = tangent_basis(g.m)
    try:
        eig = np.linalg.eigvals(Q.T @ J @ Q)
    except np.linalg.LinAlgError as exc:
        raise EquilibriumError(f"eigensolver failed: {exc}") from exc
    eig = np.asarray(sorted(eig.astype(complex), key=lambda z: (-z.real, -z.imag)))
    max_imag = float(np.max(np.abs(eig.imag))) if eig.size else 0.0
    zero_count = int(np.sum(np.abs(eig) < ZERO_EIG_TOL))

    sym = dev = None
    if np.all(w > SUPPORT_TOL):
        # J = D H here (gradient vanishes), similar to D^1/2 H D^1/2
        r = np.sqrt(w)
        full = np.linalg.eigvalsh(r[:, None] * hessian_lyapunov(g, w) * r[None, :])
        # the normal direction carries eigenvalue -1 (1^T J = -1^T)
        full = np.delete(full, np.argmin(np.abs(full + 1.0)))
        sym = np.sort(full)[::-1]
        dev = float(np.max(np.abs(sym - eig.real))) if sym.size else 0.0
    return SpectrumReport(eig, max_imag, zero_count, sym, dev)


def _bisect_eta(g, w, d, c):
    """Largest eta in [0, 1] with w + eta d in the domain."""
    if not in_domain(g, w, c):
        raise DomainError("base point is not in the domain")
    lo, hi = 0.0, 1.0
    if in_domain(g, w + hi * d, c):
        return hi
    while hi - lo > ETA_TOL:
        mid = 0.5 * (lo + hi)
        if in_domain(g, w + mid * d, c):
            lo = mid
        else:
            hi = mid
    return lo


def _is_equilibrium(g, v):
    return float(np.max(np.abs(vector_field(g, v)))) <= RESIDUAL_TOL


def compute_interval(
    g: Graph, w, c: float | None = None, bip: BipartiteClass | None = None
) -> LimitSet:
    """Maximal segment of equilibria through a non-unstable equilibrium ``w``.

    Only balanced bipartite graphs admit a non-degenerate segment; it runs
    along +1 on A and -1 on B, the one direction that keeps every edge sum
    (hence every partial derivative of L) fixed.
    """
    w = _require_equilibrium(g, w)
    if classify(g, w) is not Stability.NON_UNSTABLE:
        raise NotAnEquilibriumError("compute_interval needs a non-unstable equilibrium")
    bip = classify_bipartiteness(g) if bip is None else bip
    if not bip.is_balanced:
        return LimitSet.singleton(w)
    c = default_c(g) if c is None else c
    d = np.array([1.0 if i in bip.A else -1.0 for i in range(1, g.m + 1)])
    ends = []
    for sign in (1.0, -1.0):
        eta = _bisect_eta(g, w, sign * d, c)
        if eta > 0 and not (
            _is_equilibrium(g, w + sign * eta * d) and _is_equilibrium(g, w + 0.5 * sign * eta * d)
        ):
            eta = 0.0
        ends.append(sign * eta)
    hi, lo = ends
    if hi - lo <= 1e-8:
        return LimitSet.singleton(w)
    return LimitSet(LimitKind.INTERVAL, w, d, (lo, hi))


def enumerate_equilibria(
    g: Graph,
    c: float | None = None,
    tol: float = 1e-10,
    max_m: int = DEFAULT_MAX_M,
) -> list[Equilibrium]:
    """All equilibria, one record per isolated point or per segment.

    A segment of equilibria (balanced bipartite graphs with an interior
    maximizer) is reported once, with ``interval`` set; maximizers of other
    faces lying on it are folded into that record.
    """
    c = default_c(g) if c is None else c
    bip = classify_bipartiteness(g)
    points: list[np.ndarray] = []
    for S in vertex_covers(g, max_m):
        v = maximize_on_face(g, S, tol=tol, c=c)
        if v is None:
            continue
        v = np.where(v > SUPPORT_TOL, v, 0.0)
        if any(np.max(np.abs(v - p)) < DEDUP_TOL for p in points):
            continue
        res = float(np.max(np.abs(vector_field(g, v))))
        if res > RESIDUAL_TOL:
            raise ConvergenceError(f"face {sorted(S)} maximizer has residual {res:.3g}")
        points.append(v)

    eqs = [make_equilibrium(g, v) for v in points]
    if bip.is_balanced:
        merged: list[Equilibrium] = []
        segments: list[LimitSet] = []
        # full-support points first so a segment is anchored at an interior point
        order = sorted(eqs, key=lambda e: -len(e.support))
        for e in order:
            if any(s.distance(e.point) < DEDUP_TOL for s in segments):
                continue
            if e.stability is Stability.NON_UNSTABLE:
                ls = compute_interval(g, e.point, c, bip)
                if ls.kind is LimitKind.INTERVAL:
                    segments.append(ls)
                    merged = [x for x in merged if ls.distance(x.point) >= DEDUP_TOL]
                    e = Equilibrium(e.point, e.support, e.gradient, e.stability, e.marginal, ls)
            merged.append(e)
        eqs = merged

    for e in eqs:
        if np.min(edge_sums(g, e.point)) < 2 * c:
            warnings.warn(f"equilibrium {e.point} has an edge sum within 2c of the floor c={c}")
    eqs.sort(key=lambda e: (len(e.support), e.support, tuple(e.point)))
    return eqs


def predict_limit(g: Graph, c: float | None = None, equilibria: list[Equilibrium] | None = None) -> LimitSet:
    """The set the urn proportions converge to almost surely.

    Not balanced bipartite: the unique non-unstable equilibrium.  Balanced
    bipartite: the maximal segment through it, which is non-degenerate
    exactly when every partial derivative of L vanishes there.
    """
    c = default_c(g) if c is None else c
    eqs = enumerate_equilibria(g, c) if equilibria is None else equilibria
    bip = classify_bipartiteness(g)
    stable = [e for e in eqs if e.stability is Stability.NON_UNSTABLE]
    if not stable:
        raise LimitSetError("no non-unstable equilibrium found")
    limit = stable[0].interval or compute_interval(g, stable[0].point, c, bip)
    for e in stable[1:]:
        if limit.distance(e.point) >= DEDUP_TOL:
            raise LimitSetError(f"disjoint non-unstable equilibria {limit.base} and {e.point}")
    if limit.kind is LimitKind.INTERVAL:
        for e in stable:
            if np.max(np.abs(e.gradient)) > GRADIENT_TOL:
                raise LimitSetError("interval limit set but a non-unstable equilibrium has a nonzero gradient")
    return limit


def has_expanding_direction(report: SpectrumReport) -> bool:
    """True when some tangent eigenvalue has real part > 1e-8."""
    return bool(report.eigenvalues.size and report.eigenvalues[0].real > GRADIENT_TOL)


__all__ = [
    "ConvergenceError",
    "Equilibrium",
    "EquilibriumError",
    "LimitKind",
    "LimitSet",
    "LimitSetError",
    "NotAnEquilibriumError",
    "SpectrumReport",
    "Stability",
    "classify",
    "compute_interval",
    "enumerate_equilibria",
    "has_expanding_direction",
    "jacobian",
    "make_equilibrium",
    "maximize_on_face",
    "predict_limit",
    "project_simplex",
    "tangent_spectrum",
]
