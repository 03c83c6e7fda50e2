"""Conditioned dynamics: clock limits, weighted simulation, diagnostics.

The four conditioning clocks (exponential, one-point hit, two-point hit,
inverse local time) are verified without Monte Carlo: every normalized
quantity is a finite combination of resolvent and hitting values, so the
trajectories toward the limit are computed exactly on a parameter grid.

Simulation enters only for the transformed dynamics itself: paths are
weighted by phi(X_t) * survival / phi(x), the Doob h-transform density.
For BrownianMotion the survival factor is the Rao-Blackwellized bridge
product (exact at any step size); jump models fall back to skeleton
absorption and the ensemble is flagged biased.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._paths import MCConfig, first_passage_rejection, snapshot_survival
from .errors import GridTooCoarse, ZeroDenominator
from .harmonic import HarmonicFn, phi_n_points
from .hitting import (
    PointSet,
    finite_set_hitting_limit,
    finite_set_laplace,
    green_normalizers,
    local_time_normalizer,
)
from .levy_model import LevyModel
from .resolvent import DEFAULT_QUADRATURE, QuadratureConfig, h_gamma, resolvent_density

_GRID_JUMP_LIMIT = 0.05


@dataclass(frozen=True)
class ClockSpec:
    """Which family of random times drives the conditioning limit."""

    kind: str  # "exponential" | "one_point" | "two_point" | "inverse_local_time"
    q: float = 0.0
    c: float = 0.0
    d: float = 0.0
    gamma_target: float = 0.0
    u: float = 0.0

    @classmethod
    def exponential(cls, q: float) -> "ClockSpec":
        if not q > 0:
            raise ValueError("q must be positive")
        return cls(kind="exponential", q=float(q))

    @classmethod
    def one_point_hit(cls, c: float) -> "ClockSpec":
        return cls(kind="one_point", c=float(c))

    @classmethod
    def two_point_hit(
        cls, c: float, d: float | None = None, gamma_target: float | None = None
    ) -> "ClockSpec":
        """Hit time of {c, -d}; the ratio (d-c)/(c+d) fixes the tilt.

        Give either d or gamma_target; the other is derived.
        """
        c = float(c)
        if not c > 0:
            raise ValueError("c must be positive")
        if (d is None) == (gamma_target is None):
            raise ValueError("give exactly one of d and gamma_target")
        if d is None:
            g = float(gamma_target)
            if not -1.0 < g < 1.0:
                raise ValueError("gamma_target must lie strictly inside (-1, 1)")
            d = c * (1.0 + g) / (1.0 - g)
        else:
            d = float(d)
            if not d > 0:
                raise ValueError("d must be positive")
            g = (d - c) / (c + d)
        return cls(kind="two_point", c=c, d=d, gamma_target=g)

    @classmethod
    def inverse_local_time(cls, c: float, u: float) -> "ClockSpec":
        if u < 0:
            raise ValueError("u must be nonnegative")
        return cls(kind="inverse_local_time", c=float(c), u=float(u))


@dataclass
class ClockLimitTable:
    """Trajectory of the normalized avoidance quantity along a clock grid."""

    kind: str
    parameter: np.ndarray
    value: np.ndarray
    target: float
    gamma: float

    def rows(self) -> list[dict]:
        name = {"exponential": "Ex", "one_point": "OH",
                "two_point": "TH", "inverse_local_time": "IL"}[self.kind]
        key = "q" if self.kind == "exponential" else "c"
        return [
            {
                "check": f"clock_{name}",
                "params": {key: float(p), "gamma": self.gamma},
                "estimate": float(v),
                "stderr": None,
                "target": self.target,
                "z": None,
            }
            for p, v in zip(self.parameter, self.value)
        ]


def _phi_points(model, gamma, A: PointSet, x, cfg) -> float:
    if len(A) >= 2:
        return phi_n_points(model, gamma, A, x, cfg)
    return h_gamma(model, gamma, x - A.points[0], cfg)


def _hull_checks(A: PointSet, x: float, cs, gamma: float):
    top = max(max(A.points), x)
    bot = min(min(A.points), x)
    cs = [float(c) for c in cs]
    if gamma == 1.0:
        if not all(c > top for c in cs):
            raise ValueError("for gamma=+1 every c must exceed the set and x")
        if any(b <= a for a, b in zip(cs[:-1], cs[1:])):
            raise ValueError("c grid must increase toward +infinity")
    elif gamma == -1.0:
        if not all(c < bot for c in cs):
            raise ValueError("for gamma=-1 every c must lie below the set and x")
        if any(b >= a for a, b in zip(cs[:-1], cs[1:])):
            raise ValueError("c grid must decrease toward -infinity")
    else:
        raise ValueError("one-sided clocks require gamma = +1 or -1")
    return cs


def verify_clock_limit(
    model: LevyModel,
    A: PointSet,
    x: float,
    clock: ClockSpec,
    gamma: float,
    grid,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> ClockLimitTable:
    """Exact trajectory of the clock-normalized avoidance probability.

    exponential:        r_q(0) * P_x(T_A > e_q) along a decreasing q grid
    one_point:          (h(c) + h(-c)) * P_x(hit c before A) along c
    two_point:          two-point normalizer * P_x(hit {c,-d} before A),
                        with d tied to c by the clock's gamma_target
    inverse_local_time: the one_point quantity times exp(-u / ell(c)),
                        ell(c) the expected local time at c before T_A

    Raises GridTooCoarse when the last two trajectory values still differ
    by more than 5%.
    """
    grid = list(grid)
    if len(grid) < 2:
        raise ValueError("the clock grid needs at least two values")
    if any(float(c) in A.points for c in grid) and clock.kind != "exponential":
        raise ValueError("auxiliary points must avoid the set itself")

    if clock.kind == "exponential":
        if gamma != 0.0:
            raise ValueError("the exponential clock converges to gamma = 0")
        qs = [float(v) for v in grid]
        if any(v <= 0 for v in qs) or any(
            b >= a for a, b in zip(qs[:-1], qs[1:])
        ):
            raise ValueError("q grid must be positive and decreasing")
        vals = []
        for q in qs:
            phi_q = finite_set_laplace(model, q, x, A, cfg)
            r0 = resolvent_density(model, q, 0.0, cfg).value
            vals.append(r0 * (1.0 - float(phi_q.sum())))
        parameter = np.asarray(qs)

    elif clock.kind in ("one_point", "inverse_local_time"):
        cs = _hull_checks(A, x, grid, gamma)
        vals = []
        for c in cs:
            vals.append(_one_point_quantity(model, A, x, c, cfg))
        if clock.kind == "inverse_local_time" and clock.u != 0.0:
            for i, c in enumerate(cs):
                shifted = PointSet(tuple(sorted(a - c for a in A.points)))
                ell = local_time_normalizer(model, shifted, cfg)
                vals[i] *= math.exp(-clock.u / ell)
        parameter = np.asarray(cs)

    elif clock.kind == "two_point":
        g = clock.gamma_target
        if gamma != g:
            raise ValueError(
                "gamma must match the clock's gamma_target "
                f"({gamma} vs {g})"
            )
        cs = [float(c) for c in grid]
        if any(b <= a for a, b in zip(cs[:-1], cs[1:])):
            raise ValueError("c grid must increase toward +infinity")
        top = max(max(A.points), x)
        bot = min(min(A.points), x)
        vals = []
        for c in cs:
            d = c * (1.0 + g) / (1.0 - g)
            if not (c > top and -d < bot):
                raise ValueError(
                    f"auxiliary points c={c}, -d={-d} must bracket the set and x"
                )
            aug = PointSet(tuple(sorted([*A.points, c, -d])))
            sol = finite_set_hitting_limit(model, x, aug, cfg)
            p_aux = sum(
                p for p, pt in zip(sol.probs, aug.points) if pt in (c, -d)
            )
            vals.append(green_normalizers(model, c, d, cfg) * float(p_aux))
        parameter = np.asarray(cs)

    else:
        raise ValueError(f"unknown clock kind {clock.kind!r}")

    value = np.asarray(vals)
    target = _phi_points(model, gamma, A, x, cfg)
    tail_jump = abs(value[-1] - value[-2]) / max(abs(value[-1]), 1e-300)
    if tail_jump > _GRID_JUMP_LIMIT:
        raise GridTooCoarse(
            f"last two clock-grid values differ by {tail_jump:.1%} (> 5%); "
            "extend the grid toward the limit"
        )
    return ClockLimitTable(
        kind=clock.kind, parameter=parameter, value=value,
        target=float(target), gamma=float(gamma),
    )


def _one_point_quantity(model, A, x, c, cfg) -> float:
    aug = PointSet(tuple(sorted([*A.points, c])))
    sol = finite_set_hitting_limit(model, x, aug, cfg)
    p_c = float(sol.probs[aug.points.index(c)])
    return green_normalizers(model, c, None, cfg) * p_c


# --- weighted path ensembles ---------------------------------------------

@dataclass
class PathEnsemble:
    """Snapshots of unconditioned paths with their h-transform weights.

    weights[i, j] = phi(X_{t_j}) * survival / phi(x); survival is the exact
    bridge non-crossing product for BrownianMotion and the skeleton
    indicator otherwise (then biased is True).  Absorbed paths have weight
    exactly 0.
    """

    times: np.ndarray
    values: np.ndarray
    survival: np.ndarray
    weights: np.ndarray
    x: float
    phi_x: float
    root_seed: int
    biased: bool

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def absorbed(self) -> np.ndarray:
        return self.survival[:, -1] == 0.0

    def mean_weight(self, time_index: int = -1) -> tuple[float, float]:
        w = self.weights[:, time_index]
        return float(w.mean()), float(w.std(ddof=1) / math.sqrt(w.size))

    def expectation(self, fn, time_index: int = -1) -> tuple[float, float]:
        """Self-normalized weighted estimate of E[fn(X_t)] under the
        conditioned law, with a delta-method standard error."""
        w = self.weights[:, time_index]
        f = np.asarray(fn(self.values[:, time_index]), dtype=float)
        return _ratio_estimate(f, w)

    def weighted_median_abs(self, time_index: int = -1) -> float:
        w = self.weights[:, time_index]
        v = np.abs(self.values[:, time_index])
        return _weighted_median(v, w)


def _ratio_estimate(f: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    wbar = float(w.mean())
    if wbar <= 0.0:
        raise ZeroDenominator("all weights vanished; nothing survived")
    est = float((w * f).mean() / wbar)
    u = w * (f - est)
    se = float(math.sqrt((u * u).mean() / u.size) / wbar)
    return est, se


def _weighted_median(v: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(v)
    cum = np.cumsum(w[order])
    total = cum[-1]
    if total <= 0.0:
        raise ZeroDenominator("all weights vanished; nothing survived")
    k = int(np.searchsorted(cum, 0.5 * total))
    return float(v[order][min(k, v.size - 1)])


def _ensemble(
    model: LevyModel,
    phi: HarmonicFn,
    x: float,
    times,
    mc: MCConfig,
    threads: int | None,
) -> PathEnsemble:
    times = [float(t) for t in times]
    phi_x, _ = phi.eval(x)
    if phi_x <= 1e-12:
        raise ZeroDenominator(
            f"phi(x) = {phi_x:.3e} at x = {x}; the transform is undefined "
            "on or too close to the avoided set"
        )
    values, surv, biased = snapshot_survival(
        model, phi.set.kill_spec(), x, times, mc, threads
    )
    phi_vals, _ = phi.eval_array(values)
    weights = phi_vals * surv / phi_x
    return PathEnsemble(
        times=np.asarray(times), values=values, survival=surv,
        weights=weights, x=float(x), phi_x=float(phi_x),
        root_seed=mc.root_seed, biased=biased,
    )


def simulate_conditioned(
    model: LevyModel,
    phi: HarmonicFn,
    x: float,
    t,
    mc: MCConfig | None = None,
    threads: int | None = None,
) -> PathEnsemble:
    """Weighted ensemble at time t (or an increasing list of times): the
    h-transform change of measure.

    E[fn] under the conditioned law is ensemble.expectation(fn); the mean
    weight estimates 1 (martingale normalization).
    """
    mc = mc or MCConfig()
    times = [float(v) for v in (t if np.ndim(t) else [t])]
    if any(v < 0 for v in times):
        raise ValueError("t must be nonnegative")
    if any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise ValueError("times must be strictly increasing")
    return _ensemble(model, phi, x, times, mc, threads)


def martingale_check(
    model: LevyModel,
    phi: HarmonicFn,
    x: float,
    times,
    mc: MCConfig | None = None,
    threads: int | None = None,
) -> list[dict]:
    """Per-time z-scores of E[phi(X_t); T > t] against phi(x)."""
    mc = mc or MCConfig()
    ens = _ensemble(model, phi, x, sorted(float(t) for t in times), mc, threads)
    rows = []
    for j, tj in enumerate(ens.times):
        w = ens.weights[:, j]
        est = float(w.mean()) * ens.phi_x
        se = float(w.std(ddof=1) / math.sqrt(w.size)) * ens.phi_x
        if se > 0.0:
            z = (est - ens.phi_x) / se
        else:
            z = 0.0 if est == ens.phi_x else math.inf
        rows.append(
            {
                "check": "martingale",
                "params": {"t": float(tj)},
                "estimate": est,
                "stderr": se,
                "target": ens.phi_x,
                "z": float(z),
            }
        )
    return rows


def transience_diagnostic(
    model: LevyModel,
    phi: HarmonicFn,
    x: float,
    mc: MCConfig | None = None,
    threads: int | None = None,
    times=(0.5, 1.0, 2.0, 4.0),
) -> list[dict]:
    """Signatures of transience under the conditioned law.

    Reports the weighted mass of absorbed paths (zero by construction),
    whether E[1/phi(X_t)] = E[survival]/phi(x) decreases between
    consecutive times (one-sided: `passed` demands a 3-sigma margin), and
    the weighted median of |X_t| per time.
    """
    mc = mc or MCConfig()
    times = sorted(float(t) for t in times)
    ens = _ensemble(model, phi, x, times, mc, threads)
    rows = []

    absorbed_mass = float(ens.weights[ens.absorbed, -1].sum())
    rows.append(
        {
            "check": "transience_absorbed_mass",
            "params": {"t": times[-1]},
            "estimate": absorbed_mass,
            "stderr": 0.0,
            "target": 0.0,
            "z": 0.0,
        }
    )

    inv_phi = ens.survival / ens.phi_x
    for j in range(len(times) - 1):
        diff = inv_phi[:, j] - inv_phi[:, j + 1]
        est = float(diff.mean())
        se = float(diff.std(ddof=1) / math.sqrt(diff.size))
        rows.append(
            {
                "check": "transience_inverse_phi_decrease",
                "params": {"t_from": times[j], "t_to": times[j + 1]},
                "estimate": est,
                "stderr": se,
                "target": 0.0,
                "z": None,
                "passed": bool(est > 3.0 * se),
            }
        )

    medians = [ens.weighted_median_abs(j) for j in range(len(times))]
    for tj, med in zip(times, medians):
        rows.append(
            {
                "check": "transience_median_abs",
                "params": {"t": tj},
                "estimate": float(med),
                "stderr": None,
                "target": None,
                "z": None,
            }
        )
    rows.append(
        {
            "check": "transience_median_increase",
            "params": {"t_from": times[0], "t_to": times[-1]},
            "estimate": float(medians[-1] - medians[0]),
            "stderr": None,
            "target": None,
            "z": None,
            "passed": bool(medians[-1] > medians[0]),
        }
    )
    return rows


def rejection_estimator(
    model: LevyModel,
    A: PointSet,
    x: float,
    t: float,
    fn,
    q: float = 1e-3,
    mc: MCConfig | None = None,
    threads: int | None = None,
) -> tuple[float, float]:
    """Clock-based estimate of E[fn(X_t) | T_A > e_q], the small-q proxy of
    the conditioned law.

    The exponential clock is marginalized: each unkilled path carries the
    weight 1 - exp(-q T_A), so no sample is actually rejected.  Residual
    O(q) clock bias is the caller's tolerance to absorb.
    """
    mc = mc or MCConfig()
    if not q > 0:
        raise ValueError("q must be positive")
    x_t, w = first_passage_rejection(model, A.points, x, t, q, mc, threads)
    f = np.asarray(fn(x_t), dtype=float)
    return _ratio_estimate(f, w)
