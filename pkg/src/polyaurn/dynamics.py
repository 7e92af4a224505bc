"""Deterministic side of the urn: the domain, the Lyapunov function and the flow.

Every function accepts points of shape ``(m,)`` or batches ``(..., m)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph import Graph

SUM_TOL = 1e-9


class DomainError(ValueError):
    """A point lies outside the region where L and F are defined."""


class FlowExitError(DomainError):
    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(message)


@dataclass(frozen=True)
class DomainParams:
    """Edge-sum floor ``c`` defining the domain; must satisfy 0 < c < 1/N."""

    c: float

    @classmethod
    def default(cls, g: Graph) -> DomainParams:
        return cls(1.0 / (100 * g.N))

    def validate(self, g: Graph) -> None:
        if not 0 < self.c < 1.0 / g.N:
            raise ValueError(f"edge-sum floor c={self.c} must lie in (0, 1/N) = (0, {1.0 / g.N})")


def default_c(g: Graph) -> float:
    return DomainParams.default(g).c


def edge_sums(g: Graph, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    ea = g.edge_array
    return v[..., ea[:, 0]] + v[..., ea[:, 1]]


def _positive_edge_sums(g, v):
    s = edge_sums(g, v)
    if np.any(s <= 0):
        raise DomainError("some edge sum v_i + v_j is not positive")
    return s


def in_domain(g: Graph, v, c: float | None = None, sum_tol: float = SUM_TOL) -> bool:
    """Membership in the domain: nonnegative, sums to one, edge sums >= c."""
    c = default_c(g) if c is None else c
    v = np.asarray(v, dtype=float)
    return bool(
        np.all(v >= 0)
        and np.all(np.abs(v.sum(axis=-1) - 1.0) <= sum_tol)
        and np.all(edge_sums(g, v) >= c)
    )


def check_point(g: Graph, v, c: float | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != g.m:
        raise DomainError(f"point has {v.shape[-1]} coordinates, graph has m={g.m}")
    if not in_domain(g, v, c):
        raise DomainError(f"point {v} is not in the domain (c={default_c(g) if c is None else c})")
    return v


def lyapunov(g: Graph, v) -> np.ndarray | float:
    """L(v) = -sum_i v_i + (1/N) sum_{edges} log(v_i + v_j)."""
    v = np.asarray(v, dtype=float)
    s = _positive_edge_sums(g, v)
    out = -v.sum(axis=-1) + np.log(s).sum(axis=-1) / g.N
    return float(out) if np.ndim(out) == 0 else out


def grad_lyapunov(g: Graph, v) -> np.ndarray:
    """dL/dv_i = -1 + (1/N) sum_{j~i} 1/(v_i + v_j)."""
    v = np.asarray(v, dtype=float)
    s = _positive_edge_sums(g, v)
    return -1.0 + (1.0 / s) @ g.incidence / g.N


def hessian_lyapunov(g: Graph, v) -> np.ndarray:
    """Symmetric m x m Hessian of L (single point only)."""
    v = np.asarray(v, dtype=float)
    s = _positive_edge_sums(g, v)
    w = 1.0 / (g.N * s**2)
    H = np.zeros((g.m, g.m))
    for (i, j), wij in zip(g.edge_array, w):
        H[i, j] -= wij
        H[j, i] -= wij
        H[i, i] -= wij
        H[j, j] -= wij
    return H


def vector_field(g: Graph, v) -> np.ndarray:
    """F_i = -v_i + (1/N) sum_{j~i} v_i/(v_i + v_j).

    Summing over i gives 1 - sum(v) for any positive v, so F is tangent to
    the simplex.  Edge sums must be positive.
    """
    v = np.asarray(v, dtype=float)
    s = _positive_edge_sums(g, v)
    ea = g.edge_array
    share_i = v[..., ea[:, 0]] / s
    share_j = v[..., ea[:, 1]] / s
    acc = share_i @ g.incidence_first + share_j @ g.incidence_second
    return -v + acc / g.N


def lyapunov_time_derivative(g: Graph, v):
    """d/dt L along the flow: sum_i v_i (dL/dv_i)^2 >= 0."""
    v = np.asarray(v, dtype=float)
    gr = grad_lyapunov(g, v)
    out = (v * gr**2).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _rk4_step(g, v, dt):
    k1 = vector_field(g, v)
    k2 = vector_field(g, v + 0.5 * dt * k1)
    k3 = vector_field(g, v + 0.5 * dt * k2)
    k4 = vector_field(g, v + dt * k3)
    return v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def trajectory(g: Graph, v0, t: float, dt: float = 0.01, c: float | None = None):
    """Integrate the flow with classical fixed-step RK4.

    Returns ``(times, states)`` where ``states[k]`` approximates the flow at
    ``times[k]``.  The last step is shortened so the grid ends exactly at
    ``t``.  ``v0`` may be a batch of points, integrated together.
    Raises FlowExitError when an orbit leaves the domain.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    c = default_c(g) if c is None else c
    v = check_point(g, v0, c).copy()
    nfull = int(np.floor(t / dt + 1e-9))
    steps = [dt] * nfull
    rest = t - nfull * dt
    if rest > 1e-12:
        steps.append(rest)
    times = np.concatenate([[0.0], np.cumsum(steps)]) if steps else np.array([0.0])
    states = np.empty((len(times),) + v.shape)
    states[0] = v
    for k, h in enumerate(steps, start=1):
        try:
            v = _rk4_step(g, v, h)
        except DomainError:
            raise FlowExitError(f"orbit left the domain during the step ending at t={times[k]:.6g}", float(times[k])) from None
        if np.any(edge_sums(g, v) < c) or np.any(v < -1e-12):
            raise FlowExitError(f"orbit left the domain at t={times[k]:.6g}", float(times[k]))
        states[k] = v
    return times, states


def flow(g: Graph, v0, t: float, dt: float = 0.01, c: float | None = None) -> np.ndarray:
    """The semiflow at time ``t`` starting from ``v0``."""
    return trajectory(g, v0, t, dt, c)[1][-1]


def write_trajectory_csv(g: Graph, times, states, fh) -> None:
    """CSV rows ``t, v_1, ..., v_m, L`` for a single orbit."""
    w = csv.writer(fh)
    w.writerow(["t"] + [f"v_{i}" for i in range(1, g.m + 1)] + ["L"])
    for t, v in zip(times, states):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in v] + [repr(lyapunov(g, v))])
