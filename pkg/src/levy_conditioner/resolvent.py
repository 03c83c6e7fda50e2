"""Resolvent densities and the renormalized zero resolvent.

For a model with exponent psi and q > 0 the resolvent density is

    r_q(x) = (1/pi) * integral over [0, inf) of Re[exp(-i lam x)/(q + psi(lam))]

h_q(x) = r_q(0) - r_q(-x) is evaluated as one fused integral of
Re[(1 - exp(i lam x))/(q + psi(lam))] to avoid cancellation, and the
renormalized zero resolvent h is the same integral at q = 0.  The linear
tilt h_gamma(x) = h(x) + gamma*x/m2 selects the one-sided variants (the tilt
vanishes when the variance m2 is infinite).
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureDivergence
from .levy_model import LevyModel, eval_exponent, exponent_magnitude, tail_order
from .quadrature import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    oscillatory_real_integral,
)

__all__ = [
    "QuadratureConfig",
    "DEFAULT_QUADRATURE",
    "ResolventValue",
    "resolvent_density",
    "h_q",
    "h",
    "h_gamma",
    "qr0_limit_check",
]


@dataclass(frozen=True)
class ResolventValue:
    """A quadrature result with its error estimate and inputs."""

    value: float
    error_estimate: float
    q: float
    x: float


_tail_order_cache: dict[tuple, float] = {}
_value_cache: dict[tuple, tuple[float, float]] = {}
_cache_lock = threading.Lock()


def _model_key(model: LevyModel):
    # the frozen dataclass hashes by fields; holding the model in the key
    # also keeps user exponent callables alive for the cache's lifetime
    return model


def _require_integrable(model: LevyModel) -> float:
    """Growth order gate: the defining integrals converge only when |psi|
    grows faster than linearly.  Cached per model."""
    key = _model_key(model)
    with _cache_lock:
        cached = _tail_order_cache.get(key)
    if cached is None:
        cached = tail_order(model)
        with _cache_lock:
            _tail_order_cache[key] = cached
    if cached <= 1.02:
        raise QuadratureDivergence(
            f"exponent growth order {cached:.4f} <= 1.02; the resolvent "
            "density integral diverges for this model"
        )
    return cached


def _integral(model: LevyModel, q: float, a_coef: float, b_coef: float,
              omega: float, cfg: QuadratureConfig):
    _require_integrable(model)
    key = (_model_key(model), q, a_coef, b_coef, omega, cfg)
    with _cache_lock:
        hit = _value_cache.get(key)
    if hit is not None:
        return hit

    def g(lam):
        return 1.0 / (q + eval_exponent(model, lam))

    val, err = oscillatory_real_integral(
        g, a_coef, b_coef, omega, cfg, exponent_magnitude(model), q
    )
    out = (val / math.pi, err / math.pi)
    with _cache_lock:
        if len(_value_cache) > 200_000:
            _value_cache.clear()
        _value_cache[key] = out
    return out


def resolvent_density(
    model: LevyModel, q: float, x: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> ResolventValue:
    """r_q(x), the q-resolvent density at x."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    val, err = _integral(model, q, 0.0, 1.0, -x, cfg)
    return ResolventValue(value=val, error_estimate=err, q=q, x=x)


def h_q(
    model: LevyModel, q: float, x: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> ResolventValue:
    """h_q(x) = r_q(0) - r_q(-x), fused into one nonnegative integral."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    if x == 0.0:
        return ResolventValue(value=0.0, error_estimate=0.0, q=q, x=0.0)
    val, err = _integral(model, q, 1.0, -1.0, x, cfg)
    return ResolventValue(value=val, error_estimate=err, q=q, x=x)


def h(model: LevyModel, x: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Renormalized zero resolvent: the q -> 0 limit of h_q, evaluated as the
    direct q = 0 integral (1/pi) Re[(1 - exp(i lam x))/psi(lam)]."""
    if x == 0.0:
        return 0.0
    val, _ = _integral(model, 0.0, 1.0, -1.0, x, cfg)
    if cfg.check_q_extrapolation:
        _extrapolation_warning(model, x, cfg, val)
    return val


def _extrapolation_warning(model, x, cfg, direct):
    qs = (1e-2, 1e-3, 1e-4)
    vals = [h_q(model, qv, x, cfg).value for qv in qs]
    # power-law fit h_q ~ h_inf + c*q^theta through the three points
    d0, d1 = vals[1] - vals[0], vals[2] - vals[1]
    if d1 == 0.0 or d0 == 0.0 or d1 / d0 <= 0:
        extrapolated = vals[2]
    else:
        ratio = d1 / d0
        extrapolated = vals[2] + d1 * ratio / (1.0 - ratio)
    if abs(extrapolated - direct) > 1e-4:
        warnings.warn(
            f"h({x}) direct integral {direct:.8g} vs q->0 extrapolation "
            f"{extrapolated:.8g} differ by more than 1e-4",
            stacklevel=3,
        )


def h_gamma(
    model: LevyModel,
    gamma: float,
    x: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Tilted function h(x) + gamma*x/m2; the tilt term is 0 when m2 = inf."""
    if not -1.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [-1, 1], got {gamma}")
    base = h(model, x, cfg)
    if math.isinf(model.m2) or gamma == 0.0:
        return base
    return base + gamma * x / model.m2


def qr0_limit_check(
    model: LevyModel, q_grid, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> list[tuple[float, float]]:
    """The sequence (q, q*r_q(0)) along a grid decreasing to 0; the product
    must decay for a recurrent model."""
    out = []
    for q in q_grid:
        rv = resolvent_density(model, q, 0.0, cfg)
        out.append((float(q), float(q * rv.value)))
    return out


def clear_caches() -> None:
    """Drop memoized integrals (useful between tests that tweak exponents)."""
    with _cache_lock:
        _value_cache.clear()
        _tail_order_cache.clear()
