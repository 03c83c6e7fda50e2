"""Oscillatory quadrature engine for Fourier-type integrals on [0, inf).

Everything here evaluates integrals of the shape

    integral over [0, inf) of Re[(a + b*exp(i*omega*lam)) * g(lam)] dlam

where g decays like a power lam**(-p), p > 1, at infinity and is at worst
mildly singular (integrable) at the origin.  The strategy:

* head [0, L0]: adaptive Gauss-Legendre panels with oscillation-aware initial
  splitting; a power substitution lam = u**k tames integrable origin
  singularities,
* tail monotone part: decade blocks plus geometric completion from the fitted
  block-to-block ratio (exact for pure power laws),
* tail oscillatory part: half-period blocks summed with iterated averaging
  (Euler-style acceleration of the alternating block series).

The engine is model-agnostic: it sees only callables.  scipy is deliberately
not used here so tests can cross-check against scipy.integrate.quad as an
independent oracle.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IndeterminateTail, QuadratureDivergence, SingularOrigin

_GL_LO = np.polynomial.legendre.leggauss(12)
_GL_HI = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and panel limits for the oscillatory integrals.

    tail_cutoff is the head/tail split point; None selects it automatically
    from the decay scale of the integrand (the AutoByOscillation policy),
    a float fixes it.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_panels: int = 4096
    tail_cutoff: float | None = None
    check_q_extrapolation: bool = False

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_panels < 64:
            raise ValueError("max_panels must be at least 64")
        if self.tail_cutoff is not None and not self.tail_cutoff > 0:
            raise ValueError("tail_cutoff must be positive when fixed")


DEFAULT_QUADRATURE = QuadratureConfig()


def _gl_panel(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float):
    """One panel: GL-24 value with |GL24 - GL12| as the error estimate."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x1, w1 = _GL_LO
    x2, w2 = _GL_HI
    f1 = f(mid + half * x1)
    f2 = f(mid + half * x2)
    i1 = half * np.dot(w1, f1)
    i2 = half * np.dot(w2, f2)
    return i2, abs(i2 - i1)


def adaptive_panels(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    abs_tol: float,
    max_panels: int,
    breakpoints: list[float] | None = None,
):
    """Globally adaptive Gauss-Legendre integration of f over [lo, hi].

    f must accept numpy arrays.  Values may be complex.  Returns
    (value, error_estimate).  Raises QuadratureDivergence when the panel
    budget is exhausted above tolerance.
    """
    if hi <= lo:
        return 0.0, 0.0
    edges = [lo, hi]
    if breakpoints:
        edges.extend(p for p in breakpoints if lo < p < hi)
    edges = sorted(set(edges))
    heap = []
    total = 0.0 + 0.0j
    err = 0.0
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        val, e = _gl_panel(f, a, b)
        total += val
        err += e
        heapq.heappush(heap, (-e, i, a, b, val))
    counter = len(heap)
    while err > abs_tol:
        if counter >= max_panels:
            raise QuadratureDivergence(
                f"panel budget {max_panels} exhausted; error estimate {err:.3e} "
                f"above tolerance {abs_tol:.3e} on [{lo:.6g}, {hi:.6g}]"
            )
        neg_e, _, a, b, val = heapq.heappop(heap)
        if b - a < 1e-15 * (1.0 + abs(a)):
            # panel cannot shrink further; accept its contribution as is
            err += neg_e  # remove this panel's error from the budget
            continue
        total -= val
        err += neg_e
        m = 0.5 * (a + b)
        for aa, bb in ((a, m), (m, b)):
            v, e = _gl_panel(f, aa, bb)
            total += v
            err += e
            counter += 1
            heapq.heappush(heap, (-e, counter, aa, bb, v))
    if abs(total.imag) < 1e-300 or not np.iscomplexobj(total):
        return float(total.real), float(err)
    return total, float(err)


def _accelerated_series(terms: np.ndarray):
    """Sum an (eventually) alternating series by iterated averaging.

    terms may be complex.  Returns (sum_estimate, error_estimate), where the
    error is the last stable successive difference in the averaging pyramid.
    """
    s = np.cumsum(terms)
    row = s.astype(complex)
    best = row[-1]
    best_err = math.inf
    prev = row[-1]
    while row.size > 2:
        row = 0.5 * (row[:-1] + row[1:])
        diff = abs(row[-1] - prev)
        prev = row[-1]
        if diff < best_err:
            best_err = diff
            best = row[-1]
    return best, best_err


def fourier_tail(
    g: Callable[[np.ndarray], np.ndarray],
    omega: float,
    lam0: float,
    abs_tol: float,
    max_blocks: int = 4096,
):
    """Complex integral of exp(i*omega*lam) * g(lam) over [lam0, inf).

    Blocks are half-periods of the oscillation, so consecutive block
    integrals alternate in sign up to the slow variation of g; iterated
    averaging then converges fast.
    """
    if omega == 0.0:
        raise ValueError("fourier_tail requires omega != 0")
    hp = math.pi / abs(omega)

    def block(j):
        a = lam0 + j * hp
        b = a + hp
        # cap the index so per-block tolerances stay reachable at large j
        tol_j = abs_tol / (16.0 * min(j + 1, 64) ** 2)
        val, e = adaptive_panels(
            lambda lam: np.exp(1j * omega * lam) * g(lam), a, b, tol_j, 256
        )
        return complex(val), e

    n = 32
    terms = []
    block_err = 0.0
    while True:
        while len(terms) < n:
            val, e = block(len(terms))
            terms.append(val)
            block_err += e
        total, acc_err = _accelerated_series(np.asarray(terms))
        if acc_err + block_err <= abs_tol:
            return total, acc_err + block_err
        if n >= max_blocks:
            raise QuadratureDivergence(
                f"oscillatory tail did not converge after {n} half-period blocks "
                f"(error estimate {acc_err + block_err:.3e})"
            )
        n *= 2


def power_decay_tail(
    f: Callable[[np.ndarray], np.ndarray],
    lam0: float,
    abs_tol: float,
    max_decades: int = 60,
):
    """Integral of a power-decaying f over [lam0, inf).

    Integrates decade blocks [lam0*10^k, lam0*10^(k+1)] and completes the sum
    geometrically from the fitted block ratio.  Exact for pure power laws;
    convergence of the completion is monitored otherwise.
    """
    blocks = []
    block_err = 0.0
    partial = 0.0
    prev_total = None
    for k in range(max_decades):
        a = lam0 * 10.0**k
        b = a * 10.0
        tol_k = abs_tol / (8.0 * (k + 1) ** 2)
        val, e = adaptive_panels(f, a, b, tol_k, 256)
        blocks.append(float(val))
        block_err += e
        partial += float(val)
        if k >= 2:
            i0, i1 = blocks[-2], blocks[-1]
            if abs(i0) <= 1e-300:
                return partial, block_err
            r = i1 / i0
            if not (0.0 < r < 0.97):
                if abs(i1) < abs_tol / 10.0:
                    # terms negligible even without a clean geometric ratio
                    return partial + i1, block_err + abs(i1)
                if r >= 0.97:
                    raise QuadratureDivergence(
                        f"tail blocks decay too slowly (ratio {r:.4f}); "
                        "integral appears divergent or nearly so"
                    )
                continue
            total = partial + i1 * r / (1.0 - r)
            if prev_total is not None and abs(total - prev_total) < abs_tol / 4.0:
                return total, block_err + abs(total - prev_total)
            prev_total = total
    raise QuadratureDivergence(
        f"power tail did not stabilize within {max_decades} decades"
    )


def origin_exponent(f: Callable[[np.ndarray], np.ndarray]) -> float:
    """Growth order s of |f| ~ lam^(-s) near 0, from probes at 1e-8/1e-6/1e-4.

    Returns 0.0 when the integrand is bounded (or vanishing) at the origin.
    """
    lams = np.array([1e-8, 1e-6, 1e-4])
    vals = np.abs(np.asarray(f(lams), dtype=complex))
    if not np.all(np.isfinite(vals)):
        return math.inf
    if np.all(vals < 1e-300):
        return 0.0
    good = vals > 1e-300
    if good.sum() < 2:
        return 0.0
    slope = np.polyfit(np.log(lams[good]), np.log(vals[good]), 1)[0]
    return max(0.0, -float(slope))


def tail_growth_order(
    psi_abs: Callable[[np.ndarray], np.ndarray],
    lam_hi: float = 1e6,
    n_probe: int = 16,
) -> float:
    """Least-squares growth order p of |psi| ~ lam^p over the top probe decade.

    Raises IndeterminateTail when the fit is unusable.
    """
    lams = np.logspace(math.log10(lam_hi) - 1.0, math.log10(lam_hi), n_probe)
    vals = np.asarray(psi_abs(lams), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise IndeterminateTail("exponent magnitude not positive/finite on probes")
    x = np.log(lams)
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    spread = y.max() - y.min()
    if spread < 1e-6:
        raise IndeterminateTail("exponent magnitude flat over the probe decade")
    if np.max(np.abs(resid)) > 0.05 * max(spread, 1.0):
        raise IndeterminateTail(
            "exponent growth is not power-like over the probe decade"
        )
    return float(slope)


def choose_head_cutoff(psi_abs: Callable[[float], float], q: float) -> float:
    """Head/tail split: past the knee where |psi| dominates q."""
    target = max(1e3 * q, 10.0)
    lam = 1.0
    while psi_abs(lam) < target and lam < 1e8:
        lam *= 2.0
    return max(16.0, lam)


def _one_minus_exp(z: np.ndarray) -> np.ndarray:
    """1 - exp(i z) for real z, stable for small z."""
    return -2j * np.sin(0.5 * z) * np.exp(0.5j * z)


def oscillatory_real_integral(
    g: Callable[[np.ndarray], np.ndarray],
    a_coef: float,
    b_coef: float,
    omega: float,
    cfg: QuadratureConfig,
    psi_abs: Callable[[float], float],
    q: float,
):
    """Integral over [0, inf) of Re[(a + b*exp(i*omega*lam)) * g(lam)] dlam.

    The head integrand is evaluated fused (no cancellation between the a and
    b parts); the tail is split into a monotone power part and an oscillatory
    part.  Returns (value, error_estimate).
    """
    if a_coef == 0.0 and b_coef == 0.0:
        return 0.0, 0.0
    if omega == 0.0:
        a_coef, b_coef = a_coef + b_coef, 0.0
        if a_coef == 0.0:
            return 0.0, 0.0

    def head_f(lam):
        w = a_coef + b_coef * np.exp(1j * omega * lam)
        if a_coef == -b_coef:
            # write a(1 - exp(i omega lam)) stably for small lam
            w = a_coef * _one_minus_exp(omega * lam)
        return np.real(w * g(lam))

    lam_head = (
        cfg.tail_cutoff
        if cfg.tail_cutoff is not None
        else choose_head_cutoff(psi_abs, q)
    )

    s = origin_exponent(head_f)
    if s > 0.905:
        raise SingularOrigin(
            f"integrand grows like lam^(-{s:.3f}) near 0; not integrable "
            "to working tolerance"
        )

    budget_head = 0.45 * cfg.abs_tol
    budget_sub = 0.1 * cfg.abs_tol
    budget_tail = 0.2 * cfg.abs_tol

    total = 0.0
    err = 0.0

    lam_sub = 0.0
    if s > 0.05:
        lam_sub = min(1.0, lam_head / 16.0, 1.0 / max(1.0, abs(omega)))
        k = min(24, max(2, math.ceil(1.2 / (1.0 - s))))
        u_hi = lam_sub ** (1.0 / k)

        def sub_f(u):
            return head_f(u**k) * k * u ** (k - 1)

        v, e = adaptive_panels(sub_f, 0.0, u_hi, budget_sub, cfg.max_panels)
        total += v
        err += e

    breaks = None
    if omega != 0.0:
        period = 2.0 * math.pi / abs(omega)
        width = 6.0 * period
        if width < lam_head - lam_sub:
            n_b = int((lam_head - lam_sub) / width)
            breaks = [lam_sub + width * (i + 1) for i in range(n_b)]
    if breaks is None:
        # geometric refinement toward the origin resolves the knee scales
        breaks = [lam_head * 2.0**-j for j in range(1, 24)]
        breaks = [p for p in breaks if p > lam_sub * 1.0000001]
    v, e = adaptive_panels(
        head_f, lam_sub, lam_head, budget_head, cfg.max_panels, breakpoints=breaks
    )
    total += v
    err += e

    if a_coef != 0.0:
        v, e = power_decay_tail(
            lambda lam: a_coef * np.real(g(lam)), lam_head, budget_tail
        )
        total += v
        err += e
    if b_coef != 0.0 and omega != 0.0:
        v, e = fourier_tail(g, omega, lam_head, budget_tail)
        total += b_coef * float(np.real(v))
        err += e
    return float(total), float(err)
