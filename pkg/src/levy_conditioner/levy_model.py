"""Process models defined through their characteristic exponents.

A model is the exponent psi with E[exp(i*lam*X_t)] = exp(-t*psi(lam)), plus
the metadata the rest of the package needs: the variance of X_1 (infinity
allowed) and an increment sampler when one exists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import IndeterminateTail, ModelError, NoSampler
from .quadrature import adaptive_panels, power_decay_tail, tail_growth_order

# Growth order must clear 1 with a guard band before an integral of
# 1/(q+psi) is accepted as convergent.
_MIN_TAIL_ORDER = 1.02

# Probe grid for symmetry/zero checks: +/- logarithmic decades plus 0.
_PROBE_GRID = np.concatenate(
    [-np.logspace(-6.0, 6.0, 60)[::-1], [0.0], np.logspace(-6.0, 6.0, 60)]
)


@dataclass(frozen=True)
class LevyModel:
    """A one-dimensional process specified by its characteristic exponent.

    Use the factory classmethods; the constructor is not validated.
    kind is one of "brownian", "symmetric_stable", "asymmetric_stable",
    "user".  m2 is the variance of X_1 (math.inf allowed).  sampler, when
    present, maps (delta, rng, size) to an array of increments X_delta.
    """

    kind: str
    sigma: float = 1.0
    alpha: float = math.nan
    beta: float = 0.0
    exponent: Callable | None = None
    sampler: Callable | None = None
    m2: float = math.nan
    label: str = ""

    @classmethod
    def brownian(cls, sigma: float = 1.0) -> "LevyModel":
        if not sigma > 0:
            raise ModelError(f"sigma must be positive, got {sigma}")
        return cls(
            kind="brownian",
            sigma=sigma,
            m2=sigma * sigma,
            label=f"brownian(sigma={sigma!r})",
        )

    @classmethod
    def symmetric_stable(cls, alpha: float) -> "LevyModel":
        if not 1.0 < alpha < 2.0:
            raise ModelError(f"alpha must lie in (1, 2), got {alpha}")
        return cls(
            kind="symmetric_stable",
            alpha=alpha,
            m2=math.inf,
            label=f"symmetric_stable(alpha={alpha!r})",
        )

    @classmethod
    def asymmetric_stable(cls, alpha: float, beta: float) -> "LevyModel":
        if not 1.0 < alpha < 2.0:
            raise ModelError(f"alpha must lie in (1, 2), got {alpha}")
        if not -1.0 <= beta <= 1.0:
            raise ModelError(f"beta must lie in [-1, 1], got {beta}")
        return cls(
            kind="asymmetric_stable",
            alpha=alpha,
            beta=beta,
            m2=math.inf,
            label=f"asymmetric_stable(alpha={alpha!r}, beta={beta!r})",
        )

    @classmethod
    def from_exponent(
        cls,
        psi: Callable,
        m2: float | None = None,
        sampler: Callable | None = None,
        label: str = "user_exponent",
    ) -> "LevyModel":
        """Wrap a user-supplied exponent callable lam -> complex.

        When m2 is not given it is estimated from the central second
        difference of psi at 0; a non-convergent or huge second difference
        declares m2 infinite.
        """
        model = cls(
            kind="user",
            exponent=psi,
            sampler=sampler,
            m2=m2 if m2 is not None else _estimate_m2(psi),
            label=label,
        )
        validate_model(model)
        return model


def _estimate_m2(psi: Callable) -> float:
    # Variance of X_1 equals the second derivative of psi at 0; use the
    # central second difference 2*Re(psi(h))/h^2 at two steps and call the
    # result infinite when the two disagree (no finite second derivative).
    estimates = []
    for h in (1e-4, 1e-3):
        # = 2*Re psi(h) for valid psi; asarray tolerates shape-(1,) returns
        val = complex(np.asarray(psi(h)).reshape(()) + np.asarray(psi(-h)).reshape(()))
        estimates.append(val.real / (h * h))
    lo, hi = sorted(abs(e) for e in estimates)
    if hi > 1e8 or (hi - lo) > 0.01 * max(hi, 1e-30):
        return math.inf
    return float(0.5 * (estimates[0] + estimates[1]))


@dataclass(frozen=True)
class AdmissibilityReport:
    """Verdicts on the integrability assumptions behind the resolvent."""

    condition_A: bool
    condition_A_integral_estimate: float
    lattice_condition: bool | None = None
    notes: str = ""


def eval_exponent(model: LevyModel, lam):
    """The characteristic exponent psi(lam); accepts scalars or arrays."""
    arr = np.asarray(lam, dtype=float)
    scalar = arr.ndim == 0
    x = np.atleast_1d(arr)
    if model.kind == "brownian":
        out = 0.5 * model.sigma**2 * x * x + 0j
    elif model.kind == "symmetric_stable":
        out = np.abs(x) ** model.alpha + 0j
    elif model.kind == "asymmetric_stable":
        skew = model.beta * math.tan(0.5 * math.pi * model.alpha)
        out = np.abs(x) ** model.alpha * (1.0 - 1j * skew * np.sign(x))
    elif model.kind == "user":
        out = _eval_user(model.exponent, x)
    else:
        raise ModelError(f"unknown model kind {model.kind!r}")
    if not np.all(np.isfinite(out)):
        bad = x[~np.isfinite(out)][:3]
        raise ModelError(f"exponent not finite at lam={bad.tolist()}")
    if scalar:
        return complex(out[0])
    return out


def _eval_user(psi: Callable, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(psi(x), dtype=complex)
        if out.shape == x.shape:
            return out
    except Exception:
        pass
    return np.asarray([complex(psi(float(v))) for v in x])


def exponent_magnitude(model: LevyModel):
    """Callable lam -> |psi(lam)| usable on scalars and arrays."""

    def psi_abs(lam):
        val = np.abs(eval_exponent(model, lam))
        return float(val) if np.ndim(lam) == 0 else val

    return psi_abs


def validate_model(model: LevyModel) -> None:
    """Probe-grid checks: Hermitian symmetry, nonnegative real part,
    and psi(lam) = 0 only at lam = 0.  Raises ModelError on violation."""
    vals = eval_exponent(model, _PROBE_GRID)
    mid = _PROBE_GRID.size // 2
    neg, zero, pos = vals[:mid][::-1], vals[mid], vals[mid + 1 :]
    if abs(zero) > 1e-12:
        raise ModelError(f"psi(0) = {zero}, expected 0")
    herm = np.abs(neg - np.conj(pos))
    scale = 1.0 + np.abs(pos)
    if np.any(herm > 1e-12 * scale):
        raise ModelError("exponent violates Hermitian symmetry psi(-lam) = conj(psi(lam))")
    if np.any(vals.real < -1e-12):
        raise ModelError("exponent has negative real part on the probe grid")
    nonzero = np.abs(np.concatenate([neg, pos]))
    if np.any(nonzero == 0.0):
        raise ModelError("psi vanishes at a nonzero frequency; zero set must be {0}")


def tail_order(model: LevyModel) -> float:
    """Fitted power-law growth order of |psi| over the top probe decade."""
    return tail_growth_order(exponent_magnitude(model))


def check_condition_A(model: LevyModel, q: float) -> AdmissibilityReport:
    """Integrability of 1/(q + psi) on [0, inf): quadrature head plus a
    tail-order test (growth order must exceed 1)."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    validate_model(model)

    def integrand(lam):
        return 1.0 / np.abs(q + eval_exponent(model, lam))

    head, _ = adaptive_panels(integrand, 0.0, 1e3, 1e-8, 4096,
                              breakpoints=[10.0 ** -k for k in range(1, 7)] + [1.0, 10.0, 100.0])
    p = tail_order(model)
    if p > _MIN_TAIL_ORDER:
        tail, _ = power_decay_tail(integrand, 1e3, 1e-10)
        return AdmissibilityReport(
            condition_A=True,
            condition_A_integral_estimate=float(head + tail),
            notes=f"tail growth order {p:.4f} > {_MIN_TAIL_ORDER}",
        )
    return AdmissibilityReport(
        condition_A=False,
        condition_A_integral_estimate=math.inf,
        notes=f"tail growth order {p:.4f} <= {_MIN_TAIL_ORDER}; integral diverges",
    )


def check_lattice_condition(model: LevyModel, L: float, q: float) -> bool:
    """Summability of 1/|q + psi(2*pi*n/L)| over the integers.

    Terms behave like n^(-p) with p the exponent's growth order, so the sum
    converges exactly when the growth order clears 1.
    """
    if not (L > 0 and q > 0):
        raise ValueError("L and q must be positive")
    validate_model(model)
    p = tail_order(model)
    if p <= _MIN_TAIL_ORDER:
        return False
    # stabilization check on doubling partial sums, as a belt over the fit
    freqs = 2.0 * math.pi / L * np.arange(1, 4097)
    terms = 1.0 / np.abs(q + eval_exponent(model, freqs))
    s_half = terms[:2048].sum()
    s_full = terms.sum()
    tail_bound = terms[-1] * 4096 / (p - 1.0)
    return bool(s_full - s_half < terms[2047] * 2048 / (p - 1.0) + 1e-12) and bool(
        tail_bound < math.inf
    )


def _stable_standard(alpha: float, beta: float, rng, size) -> np.ndarray:
    """Standard stable draw matching psi(lam) = |lam|^a (1 - i b tan(pi a/2) sgn lam).

    Chambers-Mallows-Stuck transform.
    """
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size)
    w = rng.standard_exponential(size)
    if beta == 0.0:
        return (
            np.sin(alpha * v)
            / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
        )
    t = beta * math.tan(0.5 * math.pi * alpha)
    theta0 = math.atan(t) / alpha
    scale = (1.0 + t * t) ** (0.5 / alpha)
    return (
        scale
        * np.sin(alpha * (v + theta0))
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - alpha * (v + theta0)) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_increments(
    model: LevyModel, delta: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """size draws of X_delta; deterministic given the generator state."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if model.kind == "brownian":
        return rng.standard_normal(size) * (model.sigma * math.sqrt(delta))
    if model.kind in ("symmetric_stable", "asymmetric_stable"):
        draws = _stable_standard(model.alpha, model.beta, rng, size)
        return delta ** (1.0 / model.alpha) * draws
    if model.sampler is not None:
        return np.asarray(model.sampler(delta, rng, size), dtype=float)
    raise NoSampler(f"model {model.label} has no increment sampler")


def sample_increment(model: LevyModel, delta: float, rng: np.random.Generator) -> float:
    """One draw of X_delta."""
    return float(sample_increments(model, delta, rng, 1)[0])
