"""Harmonic functions that vanish on an avoided set.

Every avoidance family reduces to the renormalized zero resolvent h:

* two points / n points: phi(x) = h_gamma(x - anchor) minus the hitting-
  point average of h_gamma, with the hitting distribution solved from the
  h linear system (the anchor drops out),
* bounded interval unions: phi(x) = h(x) - E_x[h(X at first entry)],
  estimated by Monte Carlo in coordinates shifted so the leftmost endpoint
  sits at 0,
* a lattice of spacing L: a Fourier series over the dual lattice.

`HarmonicFn` packages a vectorized evaluator fast enough to weigh 1e5
Monte Carlo paths: closed forms for Brownian motion, power laws calibrated
against the quadrature for stable models, a spline interpolant otherwise.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.interpolate import CubicSpline

from ._paths import KillSpec, MCConfig, absorb_in_intervals
from .errors import IllConditioned, NonAbsorbed, TailNotConvergent
from .hitting import PointSet, finite_set_hitting_limit
from .levy_model import LevyModel, check_lattice_condition, eval_exponent
from .quadrature import _accelerated_series
from .resolvent import DEFAULT_QUADRATURE, QuadratureConfig, h as h_quad, h_gamma

_COND_LIMIT = 1e12
_LATTICE_N0 = 64
_LATTICE_CAP = 2**20
_LATTICE_EXTRA = 512


@dataclass(frozen=True)
class AvoidSet:
    """The set the process is conditioned to avoid.

    One of three variants: a finite point set, a union of disjoint bounded
    closed intervals, or the lattice {n*L}.
    """

    kind: str  # "points" | "intervals" | "lattice"
    points: PointSet | None = None
    intervals: tuple[tuple[float, float], ...] = ()
    spacing: float = 0.0

    @classmethod
    def from_points(cls, pts) -> "AvoidSet":
        ps = pts if isinstance(pts, PointSet) else PointSet(tuple(pts))
        return cls(kind="points", points=ps)

    @classmethod
    def from_intervals(cls, pairs) -> "AvoidSet":
        return cls(kind="intervals", intervals=tuple(tuple(p) for p in pairs))

    @classmethod
    def from_lattice(cls, spacing: float) -> "AvoidSet":
        return cls(kind="lattice", spacing=float(spacing))

    def __post_init__(self):
        if self.kind == "points":
            if self.points is None or len(self.points) < 1:
                raise ValueError("a point avoid set needs a nonempty PointSet")
        elif self.kind == "intervals":
            ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
            if not ivs:
                raise ValueError("an interval avoid set needs intervals")
            for lo, hi in ivs:
                if not (math.isfinite(lo) and math.isfinite(hi)):
                    raise ValueError("intervals must be bounded")
                if not lo < hi:
                    raise ValueError(
                        "intervals must satisfy lo < hi; use points for "
                        "degenerate intervals"
                    )
            for (_, u0), (l1, _) in zip(ivs[:-1], ivs[1:]):
                if l1 <= u0:
                    raise ValueError("intervals must be sorted and disjoint")
            object.__setattr__(self, "intervals", ivs)
        elif self.kind == "lattice":
            if not (self.spacing > 0 and math.isfinite(self.spacing)):
                raise ValueError("lattice spacing must be positive and finite")
        else:
            raise ValueError(f"unknown avoid set kind {self.kind!r}")

    def contains(self, x: float) -> bool:
        if self.kind == "points":
            return float(x) in self.points.points
        if self.kind == "intervals":
            return any(lo <= x <= hi for lo, hi in self.intervals)
        # tolerate representation error in computed multiples of the spacing
        nearest = round(x / self.spacing) * self.spacing
        return abs(x - nearest) <= 1e-12 * max(self.spacing, abs(x))

    def kill_spec(self) -> KillSpec:
        if self.kind == "points":
            return KillSpec(mode="points", points=self.points.points)
        if self.kind == "intervals":
            return KillSpec(mode="intervals", intervals=self.intervals)
        return KillSpec(mode="lattice", spacing=self.spacing)


# --- fast h evaluation backends -------------------------------------------

class _HBackend:
    """Vectorized h, matched to the quadrature values.

    Brownian motion and the stable family have exact power-law shapes; the
    stable amplitude is calibrated once per side against the quadrature.
    Other models fall back to a cubic spline through quadrature values on a
    geometric grid (relative accuracy around 1e-6, the `tol` attribute).
    """

    def __init__(self, model: LevyModel, cfg: QuadratureConfig):
        self.model = model
        self.cfg = cfg
        self.m2 = model.m2
        if model.kind == "brownian":
            self._mode = "bm"
            self._inv_s2 = 1.0 / model.sigma**2
            self.tol = 1e-14
        elif model.kind in ("symmetric_stable", "asymmetric_stable"):
            self._mode = "power"
            self._am1 = model.alpha - 1.0
            self._c_pos = h_quad(model, 1.0, cfg)
            self._c_neg = h_quad(model, -1.0, cfg)
            self.tol = 10.0 * cfg.abs_tol + 1e-12
        else:
            self._mode = "spline"
            self._spline = None
            self._radius = 0.0
            self.tol = 1e-6

    def _build_spline(self, radius: float):
        radius = max(radius, 1.0)
        grid = np.geomspace(radius * 1e-6, radius, 56)
        xs = np.concatenate([-grid[::-1], [0.0], grid])
        ys = np.array([h_quad(self.model, float(v), self.cfg) for v in xs])
        self._spline = CubicSpline(xs, ys)
        self._radius = radius

    def h_vec(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self._mode == "bm":
            return np.abs(y) * self._inv_s2
        if self._mode == "power":
            amp = np.where(y >= 0.0, self._c_pos, self._c_neg)
            return amp * np.abs(y) ** self._am1
        top = float(np.max(np.abs(y), initial=0.0))
        if self._spline is None or top > self._radius:
            self._build_spline(2.0 * top)
        return self._spline(y)

    def h_gamma_vec(self, y, gamma: float) -> np.ndarray:
        base = self.h_vec(y)
        if gamma == 0.0 or math.isinf(self.m2):
            return base
        return base + gamma * np.asarray(y, dtype=float) / self.m2


_backends: dict = {}


def _backend(model: LevyModel, cfg: QuadratureConfig) -> _HBackend:
    key = (model, cfg)
    be = _backends.get(key)
    if be is None:
        be = _HBackend(model, cfg)
        if len(_backends) > 64:
            _backends.clear()
        _backends[key] = be
    return be


# --- the harmonic-function object ------------------------------------------

class HarmonicFn:
    """A member of the phi family, with a vectorized evaluator.

    Attributes set, gamma, kind describe the function; eval(x) returns
    (value, error_estimate) and eval_array evaluates a whole grid.  For
    point sets the hitting system is factorized once, so a call costs one
    back-substitution however many evaluation points there are.  Interval
    sets evaluate by Monte Carlo (one run per point: slow, returns the MC
    standard error); the lattice kind is closed-form for Brownian motion
    and a Fourier sum otherwise.
    """

    def __init__(
        self,
        model: LevyModel,
        avoid: AvoidSet,
        gamma: float = 0.0,
        *,
        cfg: QuadratureConfig = DEFAULT_QUADRATURE,
        mc: MCConfig | None = None,
        tail_tol: float = 1e-10,
        threads: int | None = None,
    ):
        if not -1.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must lie in [-1, 1], got {gamma}")
        self.set = avoid
        self.gamma = float(gamma)
        self._model = model
        self._cfg = cfg
        self._mc = mc or MCConfig()
        self._tail_tol = tail_tol
        self._threads = threads
        self._backend = _backend(model, cfg)
        if avoid.kind == "points":
            self.kind = "TwoPoint" if len(avoid.points) == 2 else "NPoint"
            self._init_points(avoid.points)
        elif avoid.kind == "intervals":
            self.kind = "BoundedSet"
        else:
            self.kind = "Lattice"
        if self.kind in ("BoundedSet", "Lattice") and gamma != 0.0:
            raise ValueError(
                f"{self.kind} harmonic functions are defined for gamma = 0 only"
            )

    def _init_points(self, pts: PointSet):
        a = pts.array()
        n = a.size
        m = np.zeros((n + 1, n + 1))
        for j in range(n):
            m[j, :n] = self._backend.h_vec(a - a[j])
            m[j, n] = 1.0
        m[n, :n] = 1.0
        cond = float(np.linalg.cond(m))
        if not math.isfinite(cond) or cond > _COND_LIMIT:
            raise IllConditioned(
                f"point-set system condition number {cond:.3e} exceeds "
                f"{_COND_LIMIT:.0e}",
                condition_number=cond,
            )
        self._pts = a
        self._lu = scipy.linalg.lu_factor(m)

    @property
    def model(self) -> LevyModel:
        return self._model

    def eval(self, x: float) -> tuple[float, float]:
        vals, errs = self.eval_array(np.array([float(x)]))
        return float(vals[0]), float(errs[0])

    def __call__(self, x: float) -> float:
        return self.eval(x)[0]

    def eval_array(self, xs) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=float)
        if self.kind in ("TwoPoint", "NPoint"):
            return self._eval_points(xs)
        if self.kind == "Lattice":
            return self._eval_lattice(xs)
        return self._eval_intervals(xs)

    def _eval_points(self, xs):
        a = self._pts
        n = a.size
        flat = xs.ravel()
        rhs = np.empty((n + 1, flat.size))
        for j in range(n):
            rhs[j] = self._backend.h_vec(flat - a[j])
        rhs[n] = 1.0
        sol = scipy.linalg.lu_solve(self._lu, rhs)
        phi = sol[n]
        if self.gamma != 0.0 and math.isfinite(self._model.m2):
            hit_mean = a @ sol[:n]
            phi = phi + self.gamma / self._model.m2 * (flat - hit_mean)
        vals = np.maximum(phi, 0.0).reshape(xs.shape)
        err_base = (n + 2) * max(self._backend.tol, 1e-15)
        errs = err_base * (1.0 + np.abs(xs))
        return vals, errs

    def _eval_lattice(self, xs):
        L = self.set.spacing
        if self._model.kind == "brownian":
            frac = xs - L * np.floor(xs / L)
            vals = frac * (L - frac) / self._model.sigma**2
            return vals, np.full_like(vals, 1e-14 * (1.0 + L * L))
        flat = xs.ravel()
        vals = np.array(
            [phi_lattice(self._model, L, float(v), self._tail_tol) for v in flat]
        )
        return vals.reshape(xs.shape), np.full(xs.shape, self._tail_tol)

    def _eval_intervals(self, xs):
        flat = xs.ravel()
        vals = np.empty(flat.size)
        errs = np.empty(flat.size)
        for i, v in enumerate(flat):
            est = phi_bounded_set(
                self._model, self.set, float(v), self._mc,
                cfg=self._cfg, threads=self._threads,
            )
            vals[i] = est.value
            errs[i] = est.stderr
        return vals.reshape(xs.shape), errs.reshape(xs.shape)


# --- point-family operations ------------------------------------------------

def phi_two_points(
    model: LevyModel,
    gamma: float,
    a: float,
    b: float,
    x: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """phi for avoiding {a, b}: h_gamma(x - a) minus the chance of reaching
    b first times h_gamma(b - a)."""
    if a == b:
        raise ValueError("the two points must be distinct")
    lo, hi = sorted((float(a), float(b)))
    sol = finite_set_hitting_limit(model, x, PointSet((lo, hi)), cfg)
    p_b = sol.probs[0 if b == lo else 1]
    return h_gamma(model, gamma, x - a, cfg) - float(p_b) * h_gamma(
        model, gamma, b - a, cfg
    )


def phi_n_points(
    model: LevyModel,
    gamma: float,
    A: PointSet,
    x: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    anchor: int | None = None,
) -> float:
    """phi for avoiding the finite set A, anchored (by default) at its last
    point; the value does not depend on the anchor."""
    if len(A) < 2:
        raise ValueError("phi_n_points needs at least two points")
    j = len(A) - 1 if anchor is None else anchor
    a_j = A.points[j]
    sol = finite_set_hitting_limit(model, x, A, cfg)
    val = h_gamma(model, gamma, x - a_j, cfg)
    for p_k, a_k in zip(sol.probs, A.points):
        if p_k != 0.0:
            val -= float(p_k) * h_gamma(model, gamma, a_k - a_j, cfg)
    return val


# --- bounded interval unions -------------------------------------------------

@dataclass(frozen=True)
class BoundedSetEstimate:
    """Monte Carlo estimate of phi for an interval union.

    Iterates as (value, stderr) so it unpacks like a plain pair.  biased is
    True for jump models, where skeleton absorption misses within-step
    entries.
    """

    value: float
    stderr: float
    n_paths: int
    n_absorbed: int
    n_unabsorbed: int
    biased: bool

    def __iter__(self):
        return iter((self.value, self.stderr))


def _as_intervals(A) -> tuple[tuple[float, float], ...]:
    if isinstance(A, AvoidSet):
        if A.kind != "intervals":
            raise ValueError("phi_bounded_set needs an interval avoid set")
        return A.intervals
    return AvoidSet.from_intervals(A).intervals


def phi_bounded_set(
    model: LevyModel,
    A,
    x: float,
    mc: MCConfig | None = None,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    threads: int | None = None,
) -> BoundedSetEstimate:
    """phi(x) = h(x') - E[h(X at first entry)] in coordinates shifted so the
    leftmost endpoint is 0.

    Absorption positions come from the shared path engine: exact gap-
    boundary hits for BrownianMotion (bridge-sampled, any step size), plain
    skeleton landings for jump models.  Paths that outlive the horizon are
    excluded and counted; more than 1% of them raises NonAbsorbed.
    """
    ivs = _as_intervals(A)
    mc = mc or MCConfig()
    if any(lo <= x <= hi for lo, hi in ivs):
        return BoundedSetEstimate(
            value=0.0, stderr=0.0, n_paths=mc.n_paths,
            n_absorbed=mc.n_paths, n_unabsorbed=0, biased=False,
        )
    shift = ivs[0][0]
    ivs_s = tuple((lo - shift, hi - shift) for lo, hi in ivs)
    x_s = x - shift
    pos, absorbed = absorb_in_intervals(model, ivs_s, x_s, mc, threads)
    n_unabs = int((~absorbed).sum())
    n_abs = int(absorbed.sum())
    if n_abs == 0 or n_unabs > 0.01 * mc.n_paths:
        raise NonAbsorbed(
            f"{n_unabs} of {mc.n_paths} paths were not absorbed within the "
            "horizon; raise t_max or reduce the distance to the set"
        )
    if n_unabs > 1e-3 * mc.n_paths:
        warnings.warn(
            f"{n_unabs} of {mc.n_paths} paths unabsorbed (target < 0.1%); "
            "the estimate excludes them",
            stacklevel=2,
        )
    be = _backend(model, cfg)
    h_land = be.h_vec(pos[absorbed])
    h_x = float(be.h_vec(np.array([x_s]))[0])
    mean = float(h_land.mean())
    stderr = float(h_land.std(ddof=1) / math.sqrt(n_abs)) if n_abs > 1 else 0.0
    return BoundedSetEstimate(
        value=h_x - mean,
        stderr=stderr,
        n_paths=mc.n_paths,
        n_absorbed=n_abs,
        n_unabsorbed=n_unabs,
        biased=model.kind != "brownian",
    )


# --- lattice -----------------------------------------------------------------

def _fit_power(ns: np.ndarray, ts: np.ndarray):
    """LSQ fit ts ~ c * ns^(-p); returns (c, p, rms of log residuals)."""
    ln = np.log(ns)
    lt = np.log(ts)
    slope, intercept = np.polyfit(ln, lt, 1)
    resid = lt - (slope * ln + intercept)
    return math.exp(intercept), -slope, float(np.sqrt(np.mean(resid**2)))


def _mean_completion(c: float, p: float, n: int) -> tuple[float, float]:
    """Midpoint Euler-Maclaurin estimate of sum_{k>n} c*k^(-p)."""
    rem = c * (n + 0.5) ** (1.0 - p) / (p - 1.0)
    return rem, rem * (p * (p + 1.0) / (24.0 * n * n))


def _lattice_sums(model, L, q, theta, tail_tol):
    """Paired sums over n >= 1 of 2Re[1/(q+psi_n)] and 2Re[e^(in theta)/(q+psi_n)].

    The monotone part is completed from a fitted power law; the oscillatory
    part is truncated with iterated averaging over extra true terms.
    """
    n_terms = _LATTICE_N0
    while True:
        ns = np.arange(1, n_terms + 1, dtype=float)
        den = q + eval_exponent(model, 2.0 * math.pi * ns / L)
        if np.any(den == 0.0):
            raise TailNotConvergent(
                "the exponent vanishes at a dual-lattice frequency"
            )
        inv = 1.0 / den
        mean_terms = 2.0 * inv.real
        half = n_terms // 2
        c, p, rms = _fit_power(ns[half:], np.abs(mean_terms[half:]))
        if p <= 1.02:
            raise TailNotConvergent(
                f"lattice series terms decay like n^-{p:.3f}; sum diverges"
            )
        rem, rem_err = _mean_completion(c, p, n_terms)
        err_a = rem_err + 2.0 * rms * rem
        a_total = float(mean_terms.sum() + rem)

        if theta == 0.0:
            b_total, err_b = a_total, err_a
        else:
            osc = 2.0 * (np.exp(1j * theta * ns) * inv).real
            ns_x = np.arange(n_terms + 1, n_terms + 1 + _LATTICE_EXTRA, dtype=float)
            den_x = q + eval_exponent(model, 2.0 * math.pi * ns_x / L)
            osc_x = 2.0 * (np.exp(1j * theta * ns_x) / den_x).real
            tail, err_b = _accelerated_series(osc_x)
            b_total = float(osc.sum() + tail.real)
        err = err_a + err_b
        if err < tail_tol or n_terms >= _LATTICE_CAP:
            if err >= tail_tol:
                warnings.warn(
                    f"lattice sum truncated at {n_terms} terms with residual "
                    f"estimate {err:.2e} above tail_tol {tail_tol:.2e}",
                    stacklevel=3,
                )
            return a_total, b_total, err
        n_terms *= 2


def _lattice_theta(x: float, L: float) -> float:
    frac = x / L - math.floor(x / L)
    return 2.0 * math.pi * frac


def phi_lattice(model: LevyModel, L: float, x: float, tail_tol: float = 1e-10) -> float:
    """phi for avoiding the lattice {n*L}: the dual-lattice Fourier series,
    paired into real terms."""
    if not L > 0:
        raise ValueError("L must be positive")
    if not check_lattice_condition(model, L, max(tail_tol, 1e-12)):
        raise TailNotConvergent("the lattice summability condition fails")
    theta = _lattice_theta(x, L)
    if theta == 0.0:
        return 0.0
    a_total, b_total, _ = _lattice_sums(model, L, 0.0, theta, tail_tol)
    return max(float(a_total - b_total), 0.0)


def lattice_R_q(
    model: LevyModel, L: float, q: float, x: float, tail_tol: float = 1e-10
) -> tuple[float, float]:
    """The pair (R_q(0), R_q(x)) of lattice resolvent sums; their difference
    H_q(x) decreases to phi as q drops to 0."""
    if not (L > 0 and q > 0):
        raise ValueError("L and q must be positive")
    if not check_lattice_condition(model, L, q):
        raise TailNotConvergent("the lattice summability condition fails")
    theta = _lattice_theta(x, L)
    a_total, b_total, _ = _lattice_sums(model, L, q, theta, tail_tol)
    r0 = 1.0 / q + a_total
    rx = r0 if theta == 0.0 else 1.0 / q + b_total
    return float(r0), float(rx)


# --- closed-form oracles ------------------------------------------------------

def closed_form_oracle(family: str, params: dict, gamma: float, a: float,
                       b: float, x: float) -> float:
    """Reference values for phi avoiding {a, b}.

    family "brownian": the exact piecewise-linear form, all gamma.
    family "stable": the between-the-points form for the symmetric case,
    up to the global constant that every ratio test cancels; gamma is
    irrelevant there (infinite variance kills the tilt).
    """
    lo, hi = sorted((float(a), float(b)))
    fam = family.lower()
    if fam in ("bm", "brownian"):
        sigma = float(params.get("sigma", 1.0))
        if x < lo:
            return (1.0 - gamma) * (lo - x) / sigma**2
        if x > hi:
            return (1.0 + gamma) * (x - hi) / sigma**2
        return 0.0
    if fam == "stable":
        alpha = float(params["alpha"])
        beta = float(params.get("beta", 0.0))
        if beta != 0.0:
            raise ValueError("the stable oracle covers the symmetric case only")
        if not lo <= x <= hi:
            raise ValueError(
                "the stable oracle covers points between a and b only"
            )
        am1 = alpha - 1.0
        return (x - lo) ** am1 + (hi - x) ** am1 - (hi - lo) ** am1
    raise ValueError(f"unknown oracle family {family!r}")
