"""Hitting-time transforms and Green-function normalizers for finite sets.

Two exact linear systems drive everything:

* at q > 0, first-passage decomposition of the resolvent gives
  M Phi = b with M[j, k] = r_q(a_j - a_k), b[j] = r_q(a_j - x); the solution
  Phi_k is the Laplace-transformed law of where the set A is first hit,
* in the q -> 0 limit the same system, renormalized, turns into an
  (n+1) x (n+1) system in the hitting-point probabilities P_k and the
  harmonic value phi:

      for each j:  sum_k P_k h(a_k - a_j) + phi = h(x - a_j)
      and          sum_k P_k = 1.

Solves use column-pivoted QR; the condition number is reported with every
solution because the matrices degenerate as points merge.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IllConditioned, NegativeProbability
from .levy_model import LevyModel
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig
from .resolvent import h as h_fn
from .resolvent import resolvent_density

_COND_LIMIT = 1e12
_NEG_PROB_FLOOR = -1e-6


@dataclass(frozen=True)
class PointSet:
    """A sorted finite set of target points."""

    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(sorted(float(p) for p in self.points))
        if len(pts) < 1:
            raise ValueError("a point set needs at least one point")
        if any(b - a < 1e-9 for a, b in zip(pts[:-1], pts[1:])):
            raise ValueError(
                "points must be distinct with gaps of at least 1e-9"
            )
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)


@dataclass(frozen=True)
class HittingSolution:
    """Where a set is first hit, started from x, plus the harmonic value.

    probs[k] is the probability that the k-th point is the first one hit;
    phi0 is the gamma = 0 harmonic value at x.
    """

    x: float
    set: PointSet
    probs: np.ndarray
    phi0: float
    condition_number: float


def _pivoted_qr_solve(m: np.ndarray, b: np.ndarray):
    """Solve m @ x = b by column-pivoted QR; returns (x, condition_number)."""
    cond = float(np.linalg.cond(m))
    if not math.isfinite(cond) or cond > _COND_LIMIT:
        raise IllConditioned(
            f"hitting system condition number {cond:.3e} exceeds {_COND_LIMIT:.0e}; "
            "points are too close for the working precision",
            condition_number=cond,
        )
    q, r, piv = scipy.linalg.qr(m, pivoting=True)
    y = q.T @ b
    z = scipy.linalg.solve_triangular(r, y)
    x = np.empty_like(z)
    x[piv] = z
    return x, cond


def one_point_laplace(
    model: LevyModel,
    q: float,
    x: float,
    a: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Laplace transform E_x[exp(-q T_a)] = r_q(a - x)/r_q(0)."""
    if x == a:
        return 1.0
    num = resolvent_density(model, q, a - x, cfg).value
    den = resolvent_density(model, q, 0.0, cfg).value
    return num / den


def finite_set_laplace(
    model: LevyModel,
    q: float,
    x: float,
    A: PointSet,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> np.ndarray:
    """Vector Phi with Phi_k = E_x[exp(-q T_A); first hit at a_k]."""
    pts = A.array()
    if x in A.points:
        out = np.zeros(len(pts))
        out[A.points.index(x)] = 1.0
        return out
    n = len(pts)
    m = np.empty((n, n))
    b = np.empty(n)
    for j in range(n):
        for k in range(n):
            m[j, k] = resolvent_density(model, q, pts[j] - pts[k], cfg).value
        b[j] = resolvent_density(model, q, pts[j] - x, cfg).value
    phi, _ = _pivoted_qr_solve(m, b)
    return phi


def _solve_hitting_system(hmat: np.ndarray, hvec: np.ndarray, x: float,
                          A: PointSet) -> HittingSolution:
    """Assemble and solve the bordered q -> 0 system from h-values.

    hmat[j, k] = h(a_k - a_j); hvec[j] = h(x - a_j).
    """
    n = hmat.shape[0]
    m = np.zeros((n + 1, n + 1))
    m[:n, :n] = hmat
    m[:n, n] = 1.0
    m[n, :n] = 1.0
    b = np.concatenate([hvec, [1.0]])
    sol, cond = _pivoted_qr_solve(m, b)
    probs, phi0 = sol[:n], float(sol[n])
    bad = probs < _NEG_PROB_FLOOR
    if np.any(bad):
        raise NegativeProbability(
            f"hitting probability {probs[bad].min():.3e} below the noise floor "
            f"{_NEG_PROB_FLOOR}; h values are inconsistent"
        )
    if np.any(probs < 0.0):
        # pure roundoff (>-1e-12) is zeroed silently; past that, warn
        if probs.min() < -1e-12:
            warnings.warn(
                "clamping slightly negative hitting probabilities "
                f"(min {probs.min():.3e}) to 0",
                stacklevel=3,
            )
        probs = np.clip(probs, 0.0, None)
    return HittingSolution(
        x=x, set=A, probs=probs, phi0=phi0, condition_number=cond
    )


def finite_set_hitting_limit(
    model: LevyModel,
    x: float,
    A: PointSet,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> HittingSolution:
    """Hitting-point distribution P_k and harmonic value phi for the set A.

    Assembled from the direct q = 0 integral h for determinism.
    """
    pts = A.array()
    n = len(pts)
    hmat = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            hmat[j, k] = h_fn(model, pts[k] - pts[j], cfg) if j != k else 0.0
    hvec = np.array([h_fn(model, x - aj, cfg) for aj in pts])
    return _solve_hitting_system(hmat, hvec, x, A)


def killed_resolvent(
    model: LevyModel,
    q: float,
    x: float,
    y: float,
    A: PointSet,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Resolvent density of the process killed on hitting A:

    r_q_A(x, y) = r_q(y - x) - sum_k Phi_k(x) r_q(y - a_k).

    Vanishes at y in A by construction of the defining system.
    """
    phi = finite_set_laplace(model, q, x, A, cfg)
    val = resolvent_density(model, q, y - x, cfg).value
    for k, a in enumerate(A.points):
        val -= phi[k] * resolvent_density(model, q, y - a, cfg).value
    return float(val)


def local_time_normalizer(
    model: LevyModel, B: PointSet, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Expected local time at 0 before the set B is hit (0 not in B).

    Equals the q -> 0 limit of the killed resolvent at (0, 0), computed
    exactly as phi_B(0) + sum_k P_k h(b_k).
    """
    sol = finite_set_hitting_limit(model, 0.0, B, cfg)
    extra = sum(
        p * h_fn(model, bk, cfg) for p, bk in zip(sol.probs, B.points)
    )
    return sol.phi0 + float(extra)


def green_normalizers(
    model: LevyModel,
    c: float,
    d: float | None = None,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Clock normalizers built from h.

    With d omitted: the one-point normalizer h(c) + h(-c) (expected local
    time at 0 before hitting c).  With d given: the two-point normalizer for
    the set {c, -d}, the interval Green function value at (0, 0).
    """
    if c == 0.0:
        raise ValueError("c must be nonzero")
    if d is None:
        return h_fn(model, c, cfg) + h_fn(model, -c, cfg)
    if d == 0.0:
        raise ValueError("d must be nonzero when given")
    pts = sorted((float(c), float(-d)))
    return local_time_normalizer(model, PointSet(tuple(pts)), cfg)
