"""Stochastic side: the graph-based Polya urn and Monte Carlo harnesses.

Random streams
--------------
Each trial owns a ``numpy.random.Generator`` over ``PCG64(seed)``.  One step
draws one uniform double per edge, in the graph's edge-list order, and the
ball of edge ``{i, j}`` goes to ``i`` when the uniform is below
``B_i^a / (B_i^a + B_j^a)``.  Monte Carlo trial ``k`` uses seed
``seed + k``, so a trial's outcome never depends on which other trials run
or in which order.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import digamma

from .dynamics import default_c, edge_sums, trajectory, vector_field
from .equilibria import LimitKind, LimitSet, Stability, enumerate_equilibria, predict_limit
from .graph import Graph, GraphError

INT64_HEADROOM = 2**62


@dataclass(frozen=True)
class UrnState:
    """Ball counts ``B(n)`` after ``n`` steps, starting from ``N0`` balls."""

    balls: np.ndarray
    n: int
    N0: int

    @classmethod
    def initial(cls, b0) -> UrnState:
        b = np.asarray(b0, dtype=np.int64)
        if b.ndim != 1 or np.any(b < 1):
            raise ValueError("initial ball counts must all be >= 1")
        return cls(b.copy(), 0, int(b.sum()))

    def check(self, g: Graph) -> None:
        if int(self.balls.sum()) != self.N0 + self.n * g.N:
            raise AssertionError(f"ball total {self.balls.sum()} != N0 + nN = {self.N0 + self.n * g.N}")
        if np.any(self.balls < 1):
            raise AssertionError("some bin has fewer than one ball")


@dataclass(frozen=True)
class TrialConfig:
    steps: int
    seed: int = 0
    alpha: float = 1.0
    sample_stride: int = 100

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass(frozen=True)
class TrialResult:
    """Strided samples of one realization.

    ``steps[k]`` is the step index of the k-th sample and ``counts[k]`` the
    ball vector at that step.  The final state is always the last sample.
    """

    seed: int
    N0: int
    N: int
    steps: np.ndarray
    counts: np.ndarray

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / (self.N0 + self.steps * self.N)[:, None]

    @property
    def final(self) -> np.ndarray:
        return self.proportions[-1]

    @property
    def samples(self) -> list[tuple[int, np.ndarray]]:
        return list(zip(self.steps.tolist(), self.proportions))

    @property
    def tau(self) -> np.ndarray:
        return tau(self.steps, self.N0, self.N)

    def write_csv(self, fh) -> None:
        """Rows ``n, tau_n, x_1..x_m``."""
        w = csv.writer(fh)
        m = self.counts.shape[1]
        w.writerow(["n", "tau_n"] + [f"x_{i}" for i in range(1, m + 1)])
        for n, t, x in zip(self.steps.tolist(), self.tau, self.proportions):
            w.writerow([n, repr(float(t))] + [repr(float(v)) for v in x])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def proportions(s: UrnState, g: Graph) -> np.ndarray:
    """x_i(n) = B_i(n) / (N0 + nN)."""
    return s.balls / (s.N0 + s.n * g.N)


def gamma(n, N0: int, N: int):
    """Gain 1/(N0/N + n + 1) of the urn as a stochastic approximation."""
    out = 1.0 / (N0 / N + np.asarray(n, dtype=float) + 1.0)
    return float(out) if np.ndim(out) == 0 else out


def tau(n, N0: int, N: int):
    """tau_n = gamma_0 + ... + gamma_n, via the digamma function."""
    a = N0 / N
    out = digamma(a + np.asarray(n, dtype=float) + 2.0) - digamma(a + 1.0)
    return float(out) if np.ndim(out) == 0 else out


def _edge_prob(bi, bj, alpha):
    if alpha == 1.0:
        return bi / (bi + bj)
    return 1.0 / (1.0 + (bj / bi) ** alpha)


def step(g: Graph, s: UrnState, rng: np.random.Generator, alpha: float = 1.0) -> UrnState:
    """One urn step: every edge hands a ball to one endpoint.

    Probabilities use the counts from before the step for all edges.
    """
    ea = g.edge_array
    b = s.balls.astype(float)
    p = _edge_prob(b[ea[:, 0]], b[ea[:, 1]], alpha)
    u = rng.random(g.N)
    winner = np.where(u < p, ea[:, 0], ea[:, 1])
    new = s.balls + np.bincount(winner, minlength=g.m).astype(np.int64)
    out = UrnState(new, s.n + 1, s.N0)
    out.check(g)
    return out


@njit(cache=True, nogil=True)
def _trial_kernel(balls, e0, e1, steps, rng, alpha, stride, out_counts):
    m = balls.shape[0]
    N = e0.shape[0]
    adds = np.zeros(m, dtype=np.int64)
    out_counts[0, :] = balls
    k = 1
    for n in range(1, steps + 1):
        for e in range(N):
            bi = float(balls[e0[e]])
            bj = float(balls[e1[e]])
            if alpha == 1.0:
                p = bi / (bi + bj)
            else:
                p = 1.0 / (1.0 + (bj / bi) ** alpha)
            if rng.random() < p:
                adds[e0[e]] += 1
            else:
                adds[e1[e]] += 1
        for i in range(m):
            balls[i] += adds[i]
            adds[i] = 0
        if n % stride == 0 or n == steps:
            out_counts[k, :] = balls
            k += 1
    return k


def _sample_steps(steps, stride):
    s = list(range(0, steps + 1, stride))
    if s[-1] != steps:
        s.append(steps)
    return np.array(s, dtype=np.int64)


def run_trial(g: Graph, b0, cfg: TrialConfig, engine: str = "numba") -> TrialResult:
    """Simulate ``cfg.steps`` urn steps from ``b0`` with generator ``PCG64(cfg.seed)``.

    ``engine="numpy"`` drives :func:`step` directly; both engines consume
    the stream identically and return bit-identical results.
    """
    state = UrnState.initial(b0)
    if state.balls.size != g.m:
        raise ValueError(f"b0 has {state.balls.size} entries, graph has m={g.m}")
    if state.N0 + cfg.steps * g.N >= INT64_HEADROOM:
        raise OverflowError("ball counts would overflow 64-bit integers")
    rng = make_rng(cfg.seed)
    sample_n = _sample_steps(cfg.steps, cfg.sample_stride)
    counts = np.empty((sample_n.size, g.m), dtype=np.int64)
    if engine == "numba":
        ea = g.edge_array
        k = _trial_kernel(
            state.balls.copy(), ea[:, 0].copy(), ea[:, 1].copy(), cfg.steps, rng,
            float(cfg.alpha), cfg.sample_stride, counts,
        )
        assert k == sample_n.size
        total = counts.sum(axis=1)
        if np.any(total != state.N0 + sample_n * g.N):
            raise AssertionError("ball total identity violated")
    elif engine == "numpy":
        counts[0] = state.balls
        k = 1
        for n in range(1, cfg.steps + 1):
            state = step(g, state, rng, cfg.alpha)
            if n == sample_n[k]:
                counts[k] = state.balls
                k += 1
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return TrialResult(cfg.seed, int(np.sum(b0)), g.N, sample_n, counts)


def expected_increment(g: Graph, s: UrnState, max_edges: int = 20) -> np.ndarray:
    """E[x(n+1) - x(n) | B(n)] by enumerating all 2^N edge outcomes."""
    if g.N > max_edges:
        raise ValueError(f"N={g.N} edges is too many to enumerate (cap {max_edges})")
    ea = g.edge_array
    b = s.balls.astype(float)
    p = b[ea[:, 0]] / (b[ea[:, 0]] + b[ea[:, 1]])
    total = s.N0 + s.n * g.N
    expected = np.zeros(g.m)
    chunk = 1 << min(g.N, 16)
    shifts = np.arange(g.N)
    for start in range(0, 1 << g.N, chunk):
        codes = np.arange(start, start + chunk)
        # bit e set: the ball of edge e goes to its first endpoint
        first = ((codes[:, None] >> shifts) & 1).astype(bool)
        prob = np.prod(np.where(first, p, 1.0 - p), axis=1)
        adds = first @ g.incidence_first + (~first) @ g.incidence_second
        expected += prob @ (b + adds)
    return expected / (total + g.N) - s.balls / total


class WindowError(ValueError):
    pass


def shadowing_error(
    g: Graph, result: TrialResult, t: float, T: float, dt: float = 0.01, c: float | None = None
) -> float:
    """sup over h in [0, T] of |X(t+h) - flow_h(X(t))|.

    ``X`` interpolates the recorded proportions linearly in tau-time; the
    supremum is taken on the integrator grid.
    """
    taus = result.tau
    if len(taus) < 2 or t < taus[0] or t + T > taus[-1]:
        raise WindowError(f"window [{t}, {t + T}] is outside the recorded tau range [{taus[0]:.4g}, {taus[-1]:.4g}]")
    x = result.proportions

    def X(s):
        s = np.atleast_1d(s)
        return np.stack([np.interp(s, taus, x[:, i]) for i in range(x.shape[1])], axis=-1)

    start = X(t)[0]
    # early samples may sit below the default floor; the flow only needs positive edge sums
    floor = min(default_c(g), 0.5 * float(np.min(edge_sums(g, start))))
    times, states = trajectory(g, start, T, dt, c=floor)
    return float(np.max(np.linalg.norm(X(t + times) - states, axis=1)))


@dataclass
class TrialSummary:
    index: int
    seed: int
    final: np.ndarray
    distance: float | None = None
    distance_inf: float | None = None
    eta: float | None = None
    unstable_distances: list[float] = field(default_factory=list)

    @property
    def nearest_unstable(self) -> float | None:
        return min(self.unstable_distances) if self.unstable_distances else None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "seed": self.seed,
            "final": self.final.tolist(),
            "distance_to_limit": self.distance,
            "distance_to_limit_inf": self.distance_inf,
            "eta": self.eta,
            "unstable_distances": self.unstable_distances,
            "nearest_unstable": self.nearest_unstable,
        }


@dataclass
class MonteCarloSummary:
    trials: list[TrialSummary]
    limit: LimitSet | None
    unstable: list[np.ndarray]
    results: list[TrialResult] | None = None

    @property
    def finals(self) -> np.ndarray:
        return np.array([t.final for t in self.trials])

    @property
    def distances(self) -> np.ndarray:
        return np.array([t.distance for t in self.trials], dtype=float)

    @property
    def distances_inf(self) -> np.ndarray:
        return np.array([t.distance_inf for t in self.trials], dtype=float)

    @property
    def etas(self) -> np.ndarray:
        return np.array([t.eta for t in self.trials], dtype=float)

    @property
    def nearest_unstable(self) -> np.ndarray:
        return np.array([t.nearest_unstable for t in self.trials], dtype=float)

    def to_dict(self, bins: int = 10) -> dict:
        finals = self.finals
        edges = np.linspace(0.0, 1.0, bins + 1)
        out = {
            "trials": len(self.trials),
            "limit_set": None if self.limit is None else self.limit.to_dict(),
            "unstable_equilibria": [u.tolist() for u in self.unstable],
            "histogram_edges": edges.tolist(),
            "final_histograms": [np.histogram(finals[:, i], edges)[0].tolist() for i in range(finals.shape[1])],
            "per_trial": [t.to_dict() for t in self.trials],
        }
        if self.limit is not None:
            d = self.distances
            out["distance_stats"] = {
                "mean": float(d.mean()),
                "median": float(np.median(d)),
                "max": float(d.max()),
                "mean_inf": float(self.distances_inf.mean()),
            }
            if self.limit.kind is LimitKind.INTERVAL:
                e = self.etas
                lo, hi = self.limit.eta_range
                out["eta_stats"] = {
                    "mean": float(e.mean()),
                    "std": float(e.std(ddof=1)) if e.size > 1 else 0.0,
                    "histogram_edges": np.linspace(lo, hi, bins + 1).tolist(),
                    "histogram": np.histogram(e, np.linspace(lo, hi, bins + 1))[0].tolist(),
                }
        if self.unstable:
            out["nearest_unstable_min"] = float(np.min(self.nearest_unstable))
        return out


def summarize_trial(index: int, res: TrialResult, limit: LimitSet | None, unstable) -> TrialSummary:
    x = res.final
    ts = TrialSummary(index, res.seed, x)
    if limit is not None:
        eta, p = limit.project(x)
        ts.distance = float(np.linalg.norm(x - p))
        ts.distance_inf = float(np.max(np.abs(x - p)))
        if limit.kind is LimitKind.INTERVAL:
            ts.eta = eta
    ts.unstable_distances = [float(np.max(np.abs(x - u))) for u in unstable]
    return ts


def analyze(g: Graph, c: float | None = None):
    """Predicted limit set and unstable equilibria, or ``(None, [])`` if out of reach."""
    try:
        eqs = enumerate_equilibria(g, c)
    except GraphError as exc:
        warnings.warn(f"skipping equilibrium analysis: {exc}")
        return None, []
    limit = predict_limit(g, c, equilibria=eqs)
    unstable = [e.point for e in eqs if e.stability is Stability.UNSTABLE]
    return limit, unstable


def monte_carlo(
    g: Graph,
    b0,
    trials: int,
    cfg: TrialConfig,
    workers: int = 1,
    keep_results: bool = False,
    c: float | None = None,
    limit: LimitSet | None = None,
    unstable=None,
) -> MonteCarloSummary:
    """Run independent trials with seeds ``cfg.seed + k`` and score them.

    Distances to the limit set are Euclidean (``distance``) and sup-norm
    (``distance_inf``); distances to unstable equilibria are sup-norm.
    Scoring against equilibria is skipped for ``alpha != 1``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if limit is None and unstable is None and cfg.alpha == 1.0:
        limit, unstable = analyze(g, c)
    unstable = [] if unstable is None or cfg.alpha != 1.0 else list(unstable)
    if cfg.alpha != 1.0:
        limit = None

    def one(k):
        kcfg = TrialConfig(cfg.steps, cfg.seed + k, cfg.alpha, cfg.sample_stride)
        return run_trial(g, b0, kcfg)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(one, range(trials)))
    else:
        results = [one(k) for k in range(trials)]
    summaries = [summarize_trial(k, r, limit, unstable) for k, r in enumerate(results)]
    return MonteCarloSummary(summaries, limit, unstable, results if keep_results else None)


def saa_residual(g: Graph, s: UrnState) -> np.ndarray:
    """expected_increment - gamma_n F(x(n)); zero up to rounding when alpha = 1."""
    x = proportions(s, g)
    return expected_increment(g, s) - gamma(s.n, s.N0, g.N) * vector_field(g, x)
