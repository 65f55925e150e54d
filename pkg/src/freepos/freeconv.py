"""Free additive convolution powers and the projection-compression law.

Closed forms cover semicircles, free Poisson laws and their affine images.
Atomic and empirical measures go through a numeric engine that locates the
edges of ``mu^{boxplus T}`` as critical values of the inverse Cauchy transform

    K_T(w) = T * K(w) - (T - 1) / w,        K = G^{-1},

on the two outer real branches of ``G``. Atoms follow the rule that an atom of
weight ``p`` at ``x`` becomes an atom of weight ``max(T p - (T - 1), 0)`` at
``T x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConvergenceFailure, DomainError, UnsupportedVariant
from .measures import (
    Affine,
    Atomic,
    FreePoisson,
    MeasureSpec,
    Semicircle,
    SupportProfile,
    as_atomic,
    from_json,
    is_atomic,
    support,
    to_json,
)

GRID_SIZE = 10_000
GRID_RANGE = (1e-8, 1e8)
REFINE_TOL = 1e-12


@dataclass(frozen=True)
class FreePowerResult:
    input: MeasureSpec
    T: float
    result_spec: Optional[MeasureSpec]
    support: SupportProfile

    def to_json(self) -> dict:
        out = {"input": to_json(self.input), "T": self.T,
               "support": self.support.to_json()}
        if self.result_spec is not None:
            out["result_spec"] = to_json(self.result_spec)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "FreePowerResult":
        spec = obj.get("result_spec")
        return cls(from_json(obj["input"]), float(obj["T"]),
                   from_json(spec) if spec is not None else None,
                   SupportProfile.from_json(obj["support"]))


def _closed_form_power(spec: MeasureSpec, T: float) -> MeasureSpec:
    if isinstance(spec, Semicircle):
        return Semicircle(spec.a * T, spec.sigma * math.sqrt(T))
    if isinstance(spec, FreePoisson):
        return FreePoisson(spec.t * T)
    if isinstance(spec, Affine):
        # kappa_1 -> T(beta + gamma kappa_1), kappa_p -> T gamma^p kappa_p
        return Affine(_closed_form_power(spec.base, T), T * spec.offset, spec.scale)
    raise UnsupportedVariant(type(spec).__name__)


def free_power(spec: MeasureSpec, T: float) -> FreePowerResult:
    """``mu^{boxplus T}`` for real ``T >= 1``."""
    T = float(T)
    if not (T >= 1) or not math.isfinite(T):
        raise DomainError(f"free convolution powers need T >= 1, got {T}")
    if T == 1:
        return FreePowerResult(spec, T, spec, support(spec))
    if is_atomic(spec):
        prof = numeric_free_power_support(as_atomic(spec), T)
        return FreePowerResult(spec, T, None, prof)
    result = _closed_form_power(spec, T)
    return FreePowerResult(spec, T, result, support(result))


def compression_law(spec: MeasureSpec, t: float) -> FreePowerResult:
    """Law of ``t^{-1} p a p`` for a free projection ``p`` of trace ``t``.

    Multiply spectra by ``t`` to compare with the unnormalized corner ``p a p``.
    """
    if not (0 < t < 1):
        raise DomainError(f"compression trace must lie in (0, 1), got {t}")
    return free_power(spec, 1.0 / t)


# ---------------------------------------------------------------------------
# numeric engine for atomic measures
# ---------------------------------------------------------------------------

def _kt_derivative(x, p, T, w):
    """``K_T'(w)`` and the outer gap ``s`` on the right branch, vectorized."""
    s = _kernels.outer_gap_inverse(x, p, w)
    gaps = s[:, None] + (x.max() - x)[None, :]
    gprime = -(p / gaps ** 2).sum(axis=1)
    return T / gprime + (T - 1) / w ** 2, s


def _upper_edge(x, p, T):
    """Top of ``supp(mu^{boxplus T})`` from the right outer branch."""
    xmax = x.max()
    w = np.logspace(math.log10(GRID_RANGE[0]), math.log10(GRID_RANGE[1]), GRID_SIZE)
    deriv, _ = _kt_derivative(x, p, T, w)
    if not np.all(np.isfinite(deriv)):
        raise ConvergenceFailure("non-finite K_T' on the scan grid")
    if deriv[0] >= 0:
        raise ConvergenceFailure("K_T is not decreasing near w = 0+; grid too coarse")
    crossing = np.nonzero(deriv >= 0)[0]
    if crossing.size == 0:
        # K_T decreasing all the way to the top atom: the edge is that atom
        return T * xmax
    j = crossing[0]
    lo, hi = w[j - 1], w[j]
    for _ in range(200):
        if hi - lo <= REFINE_TOL * hi:
            break
        mid = 0.5 * (lo + hi)
        d, _ = _kt_derivative(x, p, T, np.array([mid]))
        if d[0] < 0:
            lo = mid
        else:
            hi = mid
    else:
        raise ConvergenceFailure("critical point refinement did not converge")
    wstar = 0.5 * (lo + hi)
    s = _kernels.outer_gap_inverse(x, p, np.array([wstar]))[0]
    return T * (xmax + s) - (T - 1) / wstar


def numeric_free_power_support(spec: Atomic, T: float) -> SupportProfile:
    """Support of ``spec^{boxplus T}`` by the critical-point method."""
    if not (T >= 1):
        raise DomainError("T must be >= 1")
    at = as_atomic(spec)
    x, p = at.locations, at.weights
    atoms = tuple((T * xi, T * pi - (T - 1)) for xi, pi in zip(x, p)
                  if T * pi - (T - 1) > 0)
    if len(x) == 1:
        c = T * x[0]
        return SupportProfile(c, c, ((c, 1.0),), "closed_form")
    top = _upper_edge(x, p, T)
    bottom = -_upper_edge(-x[::-1], p[::-1], T)
    return SupportProfile(bottom, top, atoms, "critical_point")
