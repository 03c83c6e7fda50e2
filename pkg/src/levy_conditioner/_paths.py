"""Low-level path simulation shared by the MC estimators.

Paths are generated in fixed blocks of 4096 with one RNG substream per
block, seeded as [root_seed, purpose, block_index].  Results are merged in
block order, so estimates are bit-identical for any thread count.

For BrownianMotion every per-step kill uses the exact Brownian-bridge
crossing probability exp(-2 d0 d1 / (sigma^2 h)), which is valid at any
step size h; this is what makes the far-field acceleration (growing h
quadratically with the distance to the nearest barrier) unbiased.  Jump
models get plain skeleton absorption and are flagged biased.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NoSampler
from .levy_model import LevyModel, sample_increments

BLOCK_SIZE = 4096

# seed-path salts keeping the substreams of different estimators disjoint
_PURPOSE_SNAPSHOT = 0
_PURPOSE_REJECTION = 1
_PURPOSE_INTERVALS = 2

_MAX_ITER = 2_000_000


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo budget: path count, step size, horizon, seed."""

    n_paths: int = 100_000
    delta: float = 1e-3
    t_max: float = 50.0
    root_seed: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not (self.delta > 0):
            raise ValueError("delta must be positive")
        if not (self.t_max > 0):
            raise ValueError("t_max must be positive")


@dataclass(frozen=True)
class KillSpec:
    """What terminates a path: point barriers, a lattice, or intervals."""

    mode: str  # "points" | "lattice" | "intervals" | "none"
    points: tuple[float, ...] = ()
    spacing: float = 0.0
    intervals: tuple[tuple[float, float], ...] = ()

    def barrier_points(self) -> tuple[float, ...]:
        if self.mode == "points":
            return self.points
        if self.mode == "intervals":
            return tuple(e for lu in self.intervals for e in lu)
        return ()


def _n_workers(threads: int | None) -> int:
    if threads is not None and threads >= 1:
        return threads
    return min(16, os.cpu_count() or 1)


def _blocks(n_paths: int) -> list[tuple[int, int]]:
    out = []
    start = 0
    b = 0
    while start < n_paths:
        size = min(BLOCK_SIZE, n_paths - start)
        out.append((b, size))
        start += size
        b += 1
    return out


def _rng(root_seed: int, purpose: int, block: int) -> np.random.Generator:
    return np.random.default_rng([root_seed, purpose, block])


def _run_blocks(fn, mc: MCConfig, threads: int | None):
    """Run fn(block_index, size) over all blocks; merge in block order."""
    blocks = _blocks(mc.n_paths)
    workers = min(_n_workers(threads), len(blocks))
    if workers <= 1:
        return [fn(b, size) for b, size in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, b, size) for b, size in blocks]
        return [f.result() for f in futs]


def _bridge_alive_points(points, x0, x1, s2h):
    """Product over barriers of the bridge non-crossing probability."""
    alive = np.ones_like(x0)
    for a in points:
        prod = (x0 - a) * (x1 - a)
        with np.errstate(over="ignore"):
            stay = -np.expm1(-2.0 * prod / s2h)
        alive = alive * np.where(prod <= 0.0, 0.0, np.clip(stay, 0.0, 1.0))
    return alive


def _bridge_alive_lattice(spacing, x0, x1, s2h):
    k = np.floor(x0 / spacing)
    same_cell = np.floor(x1 / spacing) == k
    lo = k * spacing
    hi = lo + spacing
    d0_lo = x0 - lo
    d1_lo = x1 - lo
    d0_hi = hi - x0
    d1_hi = hi - x1
    with np.errstate(over="ignore"):
        stay_lo = -np.expm1(-2.0 * d0_lo * d1_lo / s2h)
        stay_hi = -np.expm1(-2.0 * d0_hi * d1_hi / s2h)
    alive = np.clip(stay_lo, 0.0, 1.0) * np.clip(stay_hi, 0.0, 1.0)
    return np.where(same_cell, alive, 0.0)


def _landed_alive(kill: KillSpec, x1):
    """Skeleton absorption for jump models: killed only on landing in the set."""
    alive = np.ones_like(x1)
    if kill.mode == "intervals":
        for lo, hi in kill.intervals:
            alive = alive * np.where((x1 >= lo) & (x1 <= hi), 0.0, 1.0)
    elif kill.mode == "points":
        for a in kill.points:
            alive = alive * (x1 != a)
    elif kill.mode == "lattice":
        frac = x1 - kill.spacing * np.round(x1 / kill.spacing)
        alive = alive * (frac != 0.0)
    return alive


def snapshot_survival(
    model: LevyModel,
    kill: KillSpec,
    x: float,
    times,
    mc: MCConfig,
    threads: int | None = None,
):
    """Simulate to each snapshot time; return (values, survival, biased).

    values and survival have shape (n_paths, len(times)).  survival is the
    Rao-Blackwellized probability that the path has not yet hit the kill
    set (exact bridge product for BrownianMotion, hard 0/1 landing
    indicator otherwise).  Paths keep evolving after survival hits 0.
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(
        b <= a for a, b in zip(times[:-1], times[1:])
    ):
        raise ValueError("times must be nonnegative and strictly increasing")
    is_bm = model.kind == "brownian"
    sig2 = model.sigma**2 if is_bm else 0.0
    biased = (not is_bm) and kill.mode != "none"

    def run(block, size):
        rng = _rng(mc.root_seed, _PURPOSE_SNAPSHOT, block)
        pos = np.full(size, float(x))
        surv = np.ones(size)
        vals = np.empty((size, len(times)))
        survs = np.empty((size, len(times)))
        t_cur = 0.0
        for j, tj in enumerate(times):
            seg = tj - t_cur
            if seg > 1e-15:
                nst = max(1, int(math.ceil(seg / mc.delta - 1e-9)))
                h = seg / nst
                for _ in range(nst):
                    nxt = pos + sample_increments(model, h, rng, size)
                    if kill.mode != "none":
                        if is_bm:
                            if kill.mode == "lattice":
                                surv = surv * _bridge_alive_lattice(
                                    kill.spacing, pos, nxt, sig2 * h
                                )
                            else:
                                surv = surv * _bridge_alive_points(
                                    kill.barrier_points(), pos, nxt, sig2 * h
                                )
                        else:
                            surv = surv * _landed_alive(kill, nxt)
                    pos = nxt
                t_cur = tj
            vals[:, j] = pos
            survs[:, j] = surv
        return vals, survs

    parts = _run_blocks(run, mc, threads)
    values = np.concatenate([p[0] for p in parts], axis=0)
    survival = np.concatenate([p[1] for p in parts], axis=0)
    return values, survival, biased


def _gap_of(x: float, lows, highs):
    """Open gap (g_lo, g_hi) of x in the complement; +-inf when unbounded."""
    g_lo = -math.inf
    g_hi = math.inf
    for u in highs:
        if u <= x and u > g_lo:
            g_lo = u
    for low in lows:
        if low >= x and low < g_hi:
            g_hi = low
    return g_lo, g_hi


def absorb_in_intervals(
    model: LevyModel,
    intervals: tuple[tuple[float, float], ...],
    x: float,
    mc: MCConfig,
    threads: int | None = None,
):
    """First entry into a union of closed intervals.

    Returns (value, absorbed): value[i] is the path position at absorption
    (NaN when the horizon was reached first), absorbed[i] the flag.  For
    BrownianMotion the position is always the gap boundary that was hit and
    the far-field step growth pushes the effective horizon to ~1e7.
    """
    if model.kind == "brownian":
        return _absorb_bm(model, intervals, x, mc, threads)
    if model.sampler is None and model.kind == "user":
        raise NoSampler(
            "interval absorption needs a sampler for user-defined models"
        )
    return _absorb_jump(model, intervals, x, mc, threads)


def _absorb_bm(model, intervals, x, mc, threads):
    sigma = model.sigma
    g_lo, g_hi = _gap_of(
        x, [lu[0] for lu in intervals], [lu[1] for lu in intervals]
    )
    two_sided = math.isfinite(g_lo) and math.isfinite(g_hi)
    if two_sided:
        gap = g_hi - g_lo
        t_hor = 50.0 * (gap / sigma) ** 2
    else:
        t_hor = 1e7

    def run(block, size):
        rng = _rng(mc.root_seed, _PURPOSE_INTERVALS, block)
        pos = np.full(size, float(x))
        t_el = np.zeros(size)
        value = np.full(size, np.nan)
        absorbed = np.zeros(size, dtype=bool)
        idx = np.arange(size)
        it = 0
        while idx.size and it < _MAX_ITER:
            it += 1
            if two_sided:
                h = np.full(idx.size, mc.delta)
            else:
                bar = g_lo if math.isfinite(g_lo) else g_hi
                dist = np.abs(pos[idx] - bar)
                h = np.maximum(mc.delta, (dist / (3.0 * sigma)) ** 2)
            h = np.minimum(h, np.maximum(t_hor - t_el[idx], mc.delta))
            nxt = pos[idx] + sigma * np.sqrt(h) * rng.standard_normal(idx.size)
            u = rng.random(idx.size)
            s2h = sigma * sigma * h
            hit_val = np.full(idx.size, np.nan)
            if math.isfinite(g_lo):
                d0 = pos[idx] - g_lo
                d1 = nxt - g_lo
                with np.errstate(over="ignore"):
                    p_lo = np.where(
                        d0 * d1 <= 0.0,
                        1.0,
                        np.clip(np.exp(-2.0 * d0 * d1 / s2h), 0.0, 1.0),
                    )
            else:
                p_lo = np.zeros(idx.size)
            if math.isfinite(g_hi):
                d0 = g_hi - pos[idx]
                d1 = g_hi - nxt
                with np.errstate(over="ignore"):
                    p_hi = np.where(
                        d0 * d1 <= 0.0,
                        1.0,
                        np.clip(np.exp(-2.0 * d0 * d1 / s2h), 0.0, 1.0),
                    )
            else:
                p_hi = np.zeros(idx.size)
            # disjoint-event approximation; exact when only one can cross
            tot = np.clip(p_lo + p_hi, 0.0, 1.0)
            hit_lo = u < p_lo
            hit_hi = (~hit_lo) & (u < tot)
            hit_val[hit_lo] = g_lo
            hit_val[hit_hi] = g_hi
            done = hit_lo | hit_hi
            t_el[idx] += h
            pos[idx] = nxt
            gidx = idx[done]
            value[gidx] = hit_val[done]
            absorbed[gidx] = True
            keep = ~done & (t_el[idx] < t_hor)
            idx = idx[keep]
        return value, absorbed

    parts = _run_blocks(run, mc, threads)
    value = np.concatenate([p[0] for p in parts])
    absorbed = np.concatenate([p[1] for p in parts])
    return value, absorbed


def _absorb_jump(model, intervals, x, mc, threads):
    n_steps = max(1, int(math.ceil(mc.t_max / mc.delta)))
    ivs = tuple((float(lo), float(hi)) for lo, hi in intervals)

    def run(block, size):
        rng = _rng(mc.root_seed, _PURPOSE_INTERVALS, block)
        pos = np.full(size, float(x))
        value = np.full(size, np.nan)
        absorbed = np.zeros(size, dtype=bool)
        idx = np.arange(size)
        for _ in range(n_steps):
            if not idx.size:
                break
            nxt = pos[idx] + sample_increments(model, mc.delta, rng, idx.size)
            landed = np.zeros(idx.size, dtype=bool)
            for lo, hi in ivs:
                landed |= (nxt >= lo) & (nxt <= hi)
            pos[idx] = nxt
            gidx = idx[landed]
            value[gidx] = nxt[landed]
            absorbed[gidx] = True
            idx = idx[~landed]
        return value, absorbed

    parts = _run_blocks(run, mc, threads)
    value = np.concatenate([p[0] for p in parts])
    absorbed = np.concatenate([p[1] for p in parts])
    return value, absorbed


def first_passage_rejection(
    model: LevyModel,
    points: tuple[float, ...],
    x: float,
    t: float,
    q: float,
    mc: MCConfig,
    threads: int | None = None,
):
    """Value at time t plus the marginalized clock weight 1 - exp(-q T).

    T is the first passage time of the point set, sampled per step through
    the exact bridge crossing probability (BrownianMotion only); paths keep
    evolving past T because the conditioning is on the unkilled process.
    T is capped at 20/q where the weight saturates to 1 - exp(-20).
    """
    if model.kind != "brownian":
        raise NoSampler(
            "the rejection estimator needs exact crossing sampling, "
            "only available for BrownianMotion"
        )
    if x in points:
        raise ValueError("start point lies in the avoided set")
    sigma = model.sigma
    g_lo, g_hi = _gap_of(x, points, points)
    t_cap = 20.0 / q
    nst = max(1, int(math.ceil(t / mc.delta - 1e-9)))
    h_fine = t / nst

    def cross_probs(p0, p1, s2h):
        p = np.zeros_like(p0)
        stay = np.ones_like(p0)
        for g in (g_lo, g_hi):
            if math.isfinite(g):
                prod = (p0 - g) * (p1 - g)
                with np.errstate(over="ignore"):
                    pc = np.where(
                        prod <= 0.0,
                        1.0,
                        np.clip(np.exp(-2.0 * prod / s2h), 0.0, 1.0),
                    )
                stay = stay * (1.0 - pc)
        p = 1.0 - stay
        return p

    def run(block, size):
        rng = _rng(mc.root_seed, _PURPOSE_REJECTION, block)
        pos = np.full(size, float(x))
        t_hit = np.full(size, np.inf)
        t_cur = 0.0
        for _ in range(nst):
            nxt = pos + sigma * math.sqrt(h_fine) * rng.standard_normal(size)
            p = cross_probs(pos, nxt, sigma * sigma * h_fine)
            u = rng.random(size)
            newly = np.isinf(t_hit) & (u < p)
            t_hit[newly] = t_cur + 0.5 * h_fine
            pos = nxt
            t_cur += h_fine
        x_t = pos.copy()
        # continue only unhit paths, with far-field growing steps
        idx = np.flatnonzero(np.isinf(t_hit))
        t_el = np.full(idx.size, t_cur)
        it = 0
        while idx.size and it < _MAX_ITER:
            it += 1
            d = np.full(idx.size, np.inf)
            if math.isfinite(g_lo):
                d = np.minimum(d, np.abs(pos[idx] - g_lo))
            if math.isfinite(g_hi):
                d = np.minimum(d, np.abs(pos[idx] - g_hi))
            h = np.clip((d / (3.0 * sigma)) ** 2, 1e-2, None)
            h = np.minimum(h, np.maximum(t_cap - t_el, 1e-2))
            nxt = pos[idx] + sigma * np.sqrt(h) * rng.standard_normal(idx.size)
            p = cross_probs(pos[idx], nxt, sigma * sigma * h)
            u = rng.random(idx.size)
            hit = u < p
            t_hit[idx[hit]] = t_el[hit] + 0.5 * h[hit]
            pos[idx] = nxt
            t_el = t_el + h
            keep = ~hit & (t_el < t_cap)
            idx = idx[keep]
            t_el = t_el[keep]
        w = -np.expm1(-q * np.minimum(t_hit, t_cap))
        return x_t, w

    parts = _run_blocks(run, mc, threads)
    x_t = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    return x_t, w
