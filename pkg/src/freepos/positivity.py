"""Deciding k-positivity of the free maps from supports of convolution powers.

The map attached to a measure ``mu`` on ``M_n`` is k-positive exactly when
``mu^{boxplus n/k}`` is supported in ``[0, inf)``. This module turns that
criterion into verdicts and exposes the closed-form thresholds of the three
worked families (shifted semicircle, reflected free Poisson, small-rank
projection).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import DomainError
from .freeconv import free_power
from .measures import MeasureSpec, Semicircle, support

CLOSED_FORM_TOL = 1e-9
NUMERIC_TOL = 1e-3


@dataclass(frozen=True)
class PositivityVerdict:
    """Outcome of a k-positivity test.

    ``is_k_positive`` is ``None`` when a two-sided bound could not decide.
    ``method`` is ``closed_form``, ``critical_point``, ``boundary`` (numeric
    support within the tolerance band of zero) or ``sandwich``.
    """

    n: int
    k: int
    is_k_positive: Optional[bool]
    margin: float
    method: str

    @property
    def status(self) -> str:
        if self.is_k_positive is None:
            return "inconclusive"
        return "k_positive" if self.is_k_positive else "not_k_positive"

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "is_k_positive": self.is_k_positive,
                "margin": self.margin, "method": self.method}


def _check_nk(n, k):
    if n < 1 or not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")


def is_k_positive(spec: MeasureSpec, n: int, k: int) -> PositivityVerdict:
    _check_nk(n, k)
    result = free_power(spec, n / k)
    margin = result.support.min_supp
    method = result.support.method
    if method == "closed_form":
        tol = CLOSED_FORM_TOL
    else:
        tol = NUMERIC_TOL
        if abs(margin) < NUMERIC_TOL:
            method = "boundary"
    return PositivityVerdict(n, k, margin >= -tol, margin, method)


def max_k_positive(spec: MeasureSpec, n: int) -> int:
    """Largest k for which the free map is k-positive; 0 if not even positive."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if support(spec).min_supp >= 0:
        return n
    best = 0
    for k in range(1, n + 1):
        if not is_k_positive(spec, n, k).is_k_positive:
            break
        best = k
    return best


def semicircle_threshold(a: float, sigma: float, n: int) -> int:
    """``min(n, floor(a^2 n / (4 sigma^2)))`` for ``a > 0``, else 0."""
    if not sigma > 0:
        raise DomainError("sigma must be > 0")
    if a <= 0:
        return 0
    k = min(n, math.floor(a * a * n / (4 * sigma * sigma)))
    # rounding can put the ratio a hair off an integer; settle such ties with
    # the same closed-form margin and tolerance that is_k_positive uses
    spec = Semicircle(a, sigma)
    if k < n and is_k_positive(spec, n, k + 1).is_k_positive:
        k += 1
    elif k >= 1 and not is_k_positive(spec, n, k).is_k_positive:
        k -= 1
    return k


def mp_bottom(a: float, t: float, n: int, k: int) -> float:
    """Bottom of the spectrum of ``p(1 - a X_t)p`` for a free projection of trace k/n."""
    _check_nk(n, k)
    if a < 0 or not t > 0:
        raise DomainError(f"need a >= 0 and t > 0, got a={a}, t={t}")
    ratio = n / k
    return 1.0 - (k / n) * a * (1.0 + t * ratio + 2.0 * math.sqrt(t * ratio))


def small_rank_threshold(n: int, k: int) -> float:
    """Limit, as the projection trace goes to 0, of the k-positivity threshold in ``a``."""
    _check_nk(n, k)
    return n / k


def finite_eps_small_rank_verdict(n: int, k: int, a: float,
                                  projection_trace: float) -> PositivityVerdict:
    """Three-valued verdict for ``1 - a P`` with ``tau(P) = projection_trace``.

    Uses the two-sided bound ``1 - (a + eta) Y <= X <= 1 - (a - eta) Y`` with
    ``Y`` free Poisson of rate ``projection_trace`` and ``eta = 6 sqrt(trace)``.
    """
    _check_nk(n, k)
    if not (0 < projection_trace < 1):
        raise DomainError("projection trace must lie in (0, 1)")
    eta = 6.0 * math.sqrt(projection_trace)
    upper = mp_bottom(a + eta, projection_trace, n, k)
    if upper >= 0:
        return PositivityVerdict(n, k, True, upper, "sandwich")
    if a - eta >= 0:
        lower = mp_bottom(a - eta, projection_trace, n, k)
        if lower < 0:
            return PositivityVerdict(n, k, False, lower, "sandwich")
    return PositivityVerdict(n, k, None, upper, "sandwich")
