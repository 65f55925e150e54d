"""Compactly supported probability measures on the real line.

Five families are supported: shifted semicircles, free Poisson laws, affine
images ``offset + scale * X`` of another measure, finite atomic measures and
empirical spectra. Every measure is an immutable dataclass; the analytic
accessors (:func:`mean`, :func:`free_cumulants`, :func:`support`,
:func:`cauchy_transform`, :func:`cdf`, :func:`quantile`) dispatch on the
family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import DomainError, UnsupportedVariant

WEIGHT_TOL = 1e-12
_BISECT_STEPS = 100


@dataclass(frozen=True)
class Semicircle:
    """Wigner semicircle with mean ``a`` and standard deviation ``sigma``."""

    a: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"semicircle needs sigma > 0, got {self.sigma}")
        if not math.isfinite(self.a):
            raise DomainError("semicircle mean must be finite")


@dataclass(frozen=True)
class FreePoisson:
    """Free Poisson (Marchenko-Pastur) law with rate ``t`` and unit jump size."""

    t: float

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise DomainError(f"free Poisson rate must be > 0, got {self.t}")


@dataclass(frozen=True)
class Affine:
    """Law of ``offset + scale * X`` where ``X`` has law ``base``."""

    base: "MeasureSpec"
    offset: float
    scale: float

    def __post_init__(self):
        if self.scale == 0 or not math.isfinite(self.scale):
            raise DomainError("affine scale must be finite and non-zero")
        if not math.isfinite(self.offset):
            raise DomainError("affine offset must be finite")


@dataclass(frozen=True)
class Atomic:
    """Finite sum of point masses; ``atoms`` holds ``(weight, location)`` pairs."""

    atoms: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(w), float(x)) for w, x in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise DomainError("atomic measure needs at least one atom")
        for w, x in atoms:
            if not (0 < w <= 1) or not math.isfinite(x):
                raise DomainError(f"bad atom ({w}, {x})")
        total = math.fsum(w for w, _ in atoms)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise DomainError(f"atom weights sum to {total!r}, not 1")

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.atoms])

    @property
    def locations(self) -> np.ndarray:
        return np.array([x for _, x in self.atoms])


@dataclass(frozen=True)
class Empirical:
    """Equal-weight spectrum of a finite matrix; ``samples`` must be sorted."""

    samples: Tuple[float, ...]

    def __post_init__(self):
        samples = tuple(float(s) for s in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise DomainError("empirical measure needs at least one sample")
        if any(b < a for a, b in zip(samples, samples[1:])):
            raise DomainError("empirical samples must be sorted")
        if not all(math.isfinite(s) for s in samples):
            raise DomainError("empirical samples must be finite")


MeasureSpec = Union[Semicircle, FreePoisson, Affine, Atomic, Empirical]


@dataclass(frozen=True)
class SupportProfile:
    """Convex hull of a support plus its atoms.

    ``atoms`` holds ``(location, weight)`` pairs. ``method`` records how the
    endpoints were obtained: ``closed_form``, ``critical_point`` or
    ``monte_carlo``.
    """

    min_supp: float
    max_supp: float
    atoms: Tuple[Tuple[float, float], ...] = ()
    method: str = "closed_form"

    def __post_init__(self):
        object.__setattr__(self, "min_supp", float(self.min_supp))
        object.__setattr__(self, "max_supp", float(self.max_supp))
        object.__setattr__(self, "atoms",
                           tuple((float(x), float(w)) for x, w in self.atoms))
        if self.min_supp > self.max_supp:
            raise DomainError("min_supp exceeds max_supp")
        if self.method not in ("closed_form", "critical_point", "monte_carlo"):
            raise DomainError(f"unknown support method {self.method!r}")

    def to_json(self) -> dict:
        return {
            "min": self.min_supp,
            "max": self.max_supp,
            "atoms": [[x, w] for x, w in self.atoms],
            "method": self.method,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SupportProfile":
        return cls(
            float(obj["min"]),
            float(obj["max"]),
            tuple((float(x), float(w)) for x, w in obj.get("atoms", [])),
            obj.get("method", "closed_form"),
        )


# ---------------------------------------------------------------------------
# canonical forms
# ---------------------------------------------------------------------------

def as_atomic(spec: MeasureSpec) -> Atomic:
    """Canonical atomic form of a purely atomic spec, merging equal locations.

    Works for ``Atomic``, ``Empirical`` and ``Affine`` wrappers around them.
    """
    if isinstance(spec, Atomic):
        pairs = spec.atoms
    elif isinstance(spec, Empirical):
        m = len(spec.samples)
        pairs = tuple((1.0 / m, x) for x in spec.samples)
    elif isinstance(spec, Affine) and is_atomic(spec.base):
        base = as_atomic(spec.base)
        pairs = tuple((w, spec.offset + spec.scale * x) for w, x in base.atoms)
    else:
        raise UnsupportedVariant(f"{type(spec).__name__} is not purely atomic")
    merged = {}
    for w, x in pairs:
        merged[x] = merged.get(x, 0.0) + w
    locs = sorted(merged)
    weights = np.array([merged[x] for x in locs])
    weights = weights / math.fsum(weights)
    return Atomic(tuple(zip(weights.tolist(), locs)))


def is_atomic(spec: MeasureSpec) -> bool:
    if isinstance(spec, (Atomic, Empirical)):
        return True
    if isinstance(spec, Affine):
        return is_atomic(spec.base)
    return False


def simplify(spec: MeasureSpec) -> MeasureSpec:
    """Collapse nested affine wrappers and affine images of semicircles."""
    if not isinstance(spec, Affine):
        return spec
    base = simplify(spec.base)
    if isinstance(base, Affine):
        return simplify(Affine(base.base, spec.offset + spec.scale * base.offset,
                               spec.scale * base.scale))
    if isinstance(base, Semicircle):
        return Semicircle(spec.offset + spec.scale * base.a, abs(spec.scale) * base.sigma)
    if is_atomic(base):
        return as_atomic(Affine(base, spec.offset, spec.scale))
    return Affine(base, spec.offset, spec.scale)


# ---------------------------------------------------------------------------
# moments and cumulants
# ---------------------------------------------------------------------------

def mean(spec: MeasureSpec) -> float:
    if isinstance(spec, Semicircle):
        return spec.a
    if isinstance(spec, FreePoisson):
        return spec.t
    if isinstance(spec, Affine):
        return spec.offset + spec.scale * mean(spec.base)
    if isinstance(spec, Atomic):
        return math.fsum(w * x for w, x in spec.atoms)
    if isinstance(spec, Empirical):
        return math.fsum(spec.samples) / len(spec.samples)
    raise UnsupportedVariant(type(spec).__name__)


def free_cumulants(spec: MeasureSpec, p_max: int) -> list:
    """First ``p_max`` free cumulants for the closed-form families."""
    if p_max < 1:
        raise DomainError("p_max must be >= 1")
    if isinstance(spec, Semicircle):
        return [spec.a, spec.sigma ** 2] [:p_max] + [0.0] * max(0, p_max - 2)
    if isinstance(spec, FreePoisson):
        return [spec.t] * p_max
    if isinstance(spec, Affine) and not is_atomic(spec.base):
        base = free_cumulants(spec.base, p_max)
        out = [spec.offset + spec.scale * base[0]]
        out += [spec.scale ** p * base[p - 1] for p in range(2, p_max + 1)]
        return out
    raise UnsupportedVariant(
        f"no closed-form free cumulants for {type(spec).__name__}; "
        "use the numeric transform engine")


# ---------------------------------------------------------------------------
# support
# ---------------------------------------------------------------------------

def _mp_edges(t: float) -> Tuple[float, float]:
    r = math.sqrt(t)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


def support(spec: MeasureSpec) -> SupportProfile:
    if isinstance(spec, Semicircle):
        return SupportProfile(spec.a - 2 * spec.sigma, spec.a + 2 * spec.sigma)
    if isinstance(spec, FreePoisson):
        lo, hi = _mp_edges(spec.t)
        if spec.t < 1:
            return SupportProfile(0.0, hi, ((0.0, 1.0 - spec.t),))
        return SupportProfile(lo, hi)
    if isinstance(spec, Affine):
        if is_atomic(spec):
            return support(as_atomic(spec))
        base = support(spec.base)
        ends = sorted((spec.offset + spec.scale * base.min_supp,
                       spec.offset + spec.scale * base.max_supp))
        atoms = tuple((spec.offset + spec.scale * x, w) for x, w in base.atoms)
        return SupportProfile(ends[0], ends[1], atoms)
    if isinstance(spec, (Atomic, Empirical)):
        at = as_atomic(spec)
        return SupportProfile(min(at.locations), max(at.locations),
                              tuple((x, w) for w, x in at.atoms))
    raise UnsupportedVariant(type(spec).__name__)


def absolutely_continuous_interval(spec: MeasureSpec):
    """Interval carrying the density, or ``None`` for atomic measures."""
    if isinstance(spec, Semicircle):
        return spec.a - 2 * spec.sigma, spec.a + 2 * spec.sigma
    if isinstance(spec, FreePoisson):
        return _mp_edges(spec.t)
    if isinstance(spec, Affine):
        inner = absolutely_continuous_interval(spec.base)
        if inner is None:
            return None
        ends = sorted(spec.offset + spec.scale * e for e in inner)
        return ends[0], ends[1]
    return None


# ---------------------------------------------------------------------------
# density, distribution function, quantiles
# ---------------------------------------------------------------------------

def density(spec: MeasureSpec, x):
    """Density of the absolutely continuous part (zero for atomic measures)."""
    x = np.asarray(x, dtype=float)
    if isinstance(spec, Semicircle):
        inside = np.clip(4 * spec.sigma ** 2 - (x - spec.a) ** 2, 0.0, None)
        return np.sqrt(inside) / (2 * np.pi * spec.sigma ** 2)
    if isinstance(spec, FreePoisson):
        t = spec.t
        inside = np.clip(4 * t - (x - 1 - t) ** 2, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(inside > 0, np.sqrt(inside) / (2 * np.pi * np.abs(x)), 0.0)
        return out
    if isinstance(spec, Affine):
        return density(spec.base, (x - spec.offset) / spec.scale) / abs(spec.scale)
    if is_atomic(spec):
        return np.zeros_like(x)
    raise UnsupportedVariant(type(spec).__name__)


def _semicircle_cdf(a, sigma, x):
    u = np.clip((x - a) / (2 * sigma), -1.0, 1.0)
    return 0.5 + (u * np.sqrt(1 - u * u) + np.arcsin(u)) / np.pi


def _free_poisson_cdf(t, x):
    # x = c + r cos(theta) turns the density into r^2 sin^2 / (2 pi (c + r cos))
    c, r = 1.0 + t, 2.0 * math.sqrt(t)
    lo, hi = _mp_edges(t)
    gap = abs(1.0 - t)
    q = abs(1.0 - math.sqrt(t)) / (1.0 + math.sqrt(t))

    def antideriv(theta):
        half = 0.5 * theta
        tail = gap / (2 * t) * np.arctan2(q * np.sin(half), np.cos(half))
        return -np.sin(theta) / r + c * theta / r ** 2 - tail

    theta = np.arccos(np.clip((x - c) / r, -1.0, 1.0))
    ac = r ** 2 / (2 * np.pi) * (antideriv(np.pi) - antideriv(theta))
    ac = np.where(x <= lo, 0.0, np.where(x >= hi, min(1.0, t), ac))
    atom = max(0.0, 1.0 - t)
    return np.where(x >= 0, atom, 0.0) + ac


def _atom_mass_at(spec: MeasureSpec, x):
    if isinstance(spec, FreePoisson):
        return np.where(x == 0, max(0.0, 1.0 - spec.t), 0.0)
    if isinstance(spec, Affine) and not is_atomic(spec):
        return _atom_mass_at(spec.base, (x - spec.offset) / spec.scale)
    if is_atomic(spec):
        at = as_atomic(spec)
        out = np.zeros_like(x, dtype=float)
        for w, loc in at.atoms:
            out = out + np.where(x == loc, w, 0.0)
        return out
    return np.zeros_like(x, dtype=float)


def cdf(spec: MeasureSpec, x):
    """Repartition function ``F(x) = mu((-inf, x])``."""
    x = np.asarray(x, dtype=float)
    if isinstance(spec, Semicircle):
        return _semicircle_cdf(spec.a, spec.sigma, x)
    if isinstance(spec, FreePoisson):
        return _free_poisson_cdf(spec.t, x)
    if isinstance(spec, Affine) and not is_atomic(spec):
        u = (x - spec.offset) / spec.scale
        if spec.scale > 0:
            return cdf(spec.base, u)
        return 1.0 - cdf(spec.base, u) + _atom_mass_at(spec.base, u)
    if is_atomic(spec):
        at = as_atomic(spec)
        cum = np.cumsum(at.weights)
        idx = np.searchsorted(at.locations, x, side="right")
        return np.where(idx == 0, 0.0, cum[np.maximum(idx - 1, 0)])
    raise UnsupportedVariant(type(spec).__name__)


def _quantile(spec: MeasureSpec, p: np.ndarray, strict: bool) -> np.ndarray:
    # strict=False: inf{x : F(x) >= p};  strict=True: inf{x : F(x) > p}
    if is_atomic(spec):
        at = as_atomic(spec)
        cum = np.cumsum(at.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, p, side="right" if strict else "left")
        return at.locations[np.minimum(idx, len(cum) - 1)]
    if isinstance(spec, Affine):
        if spec.scale > 0:
            return spec.offset + spec.scale * _quantile(spec.base, p, strict)
        return spec.offset + spec.scale * _quantile(spec.base, 1.0 - p, not strict)
    prof = support(spec)
    lo = np.full(p.shape, prof.min_supp)
    hi = np.full(p.shape, prof.max_supp)
    lo_hit = cdf(spec, lo)
    done = (lo_hit > p) if strict else (lo_hit >= p)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        fm = cdf(spec, mid)
        right = (fm > p) if strict else (fm >= p)
        hi = np.where(right, mid, hi)
        lo = np.where(right, lo, mid)
    return np.where(done, prof.min_supp, hi)


def quantile(spec: MeasureSpec, p):
    """Generalized inverse of the repartition function.

    Accepts a scalar or an array of levels in the open interval ``(0, 1)``.
    """
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0) | (arr >= 1)) or np.any(~np.isfinite(arr)):
        raise DomainError("quantile levels must lie in (0, 1)")
    out = _quantile(spec, np.atleast_1d(arr), strict=False)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def discretize(spec: MeasureSpec, m: int, rule: str = "barycenter") -> Atomic:
    """Equal-weight ``m``-atom approximation on the quantile grid.

    ``rule="midpoint"`` puts atom ``i`` at the quantile ``(i - 1/2) / m``;
    ``rule="barycenter"`` puts it at the conditional mean of the mass cell
    between quantiles ``(i - 1) / m`` and ``i / m``, which preserves the mean.
    """
    if m < 1:
        raise DomainError("need at least one atom")
    if rule == "midpoint":
        locs = quantile(spec, (np.arange(1, m + 1) - 0.5) / m)
    elif rule == "barycenter":
        nodes, wts = np.polynomial.legendre.leggauss(32)
        left = np.arange(m)[:, None] / m
        u = left + (nodes[None, :] + 1) / (2 * m)
        locs = (quantile(spec, u) * wts[None, :]).sum(axis=1) / 2
    else:
        raise DomainError(f"unknown discretization rule {rule!r}")
    return Atomic(tuple((1.0 / m, float(x)) for x in np.sort(locs)))


# ---------------------------------------------------------------------------
# Cauchy transform
# ---------------------------------------------------------------------------

def _sqrt_pair(z, p, q):
    # branch of sqrt((z-p)(z-q)) analytic off [p, q] and ~ z at infinity
    return np.sqrt(z - p) * np.sqrt(z - q)


def _cauchy(spec: MeasureSpec, z: complex) -> complex:
    if isinstance(spec, Semicircle):
        # rationalized resolvent: no cancellation for large |z|
        root = _sqrt_pair(z - spec.a, -2 * spec.sigma, 2 * spec.sigma)
        return 2 / (z - spec.a + root)
    if isinstance(spec, FreePoisson):
        t = spec.t
        lo, hi = _mp_edges(t)
        return 2 / (z + 1 - t + _sqrt_pair(z, lo, hi))
    if isinstance(spec, Affine) and not is_atomic(spec):
        u = (z - spec.offset) / spec.scale
        if u.imag < 0:
            return np.conj(_cauchy(spec.base, np.conj(u))) / spec.scale
        return _cauchy(spec.base, u) / spec.scale
    if is_atomic(spec):
        at = as_atomic(spec)
        return complex(np.sum(at.weights / (z - at.locations)))
    raise UnsupportedVariant(type(spec).__name__)


def cauchy_transform(spec: MeasureSpec, z: complex) -> complex:
    """``G(z) = int dmu(x) / (z - x)``.

    Defined for ``Im z > 0`` and, by real-analytic continuation, for real ``z``
    strictly outside ``[min_supp, max_supp]``.
    """
    z = complex(z)
    if z.imag < 0:
        raise DomainError("Cauchy transform needs Im z > 0")
    if z.imag == 0:
        prof = support(spec)
        if prof.min_supp <= z.real <= prof.max_supp:
            raise DomainError("real argument inside the support")
    return complex(_cauchy(spec, z))


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def to_json(spec: MeasureSpec) -> dict:
    if isinstance(spec, Semicircle):
        return {"family": "semicircle", "a": spec.a, "sigma": spec.sigma}
    if isinstance(spec, FreePoisson):
        return {"family": "free_poisson", "t": spec.t}
    if isinstance(spec, Affine):
        return {"family": "affine", "base": to_json(spec.base),
                "offset": spec.offset, "scale": spec.scale}
    if isinstance(spec, Atomic):
        return {"family": "atomic", "atoms": [[w, x] for w, x in spec.atoms]}
    if isinstance(spec, Empirical):
        return {"family": "empirical", "samples": list(spec.samples)}
    raise UnsupportedVariant(type(spec).__name__)


_FIELDS = {
    "semicircle": {"a", "sigma"},
    "free_poisson": {"t"},
    "affine": {"base", "offset", "scale"},
    "atomic": {"atoms"},
    "empirical": {"samples"},
}


def from_json(obj: dict) -> MeasureSpec:
    if not isinstance(obj, dict) or "family" not in obj:
        raise DomainError("measure JSON must be an object with a 'family' key")
    family = obj["family"]
    if family not in _FIELDS:
        raise DomainError(f"unknown measure family {family!r}")
    extra = set(obj) - _FIELDS[family] - {"family"}
    missing = _FIELDS[family] - set(obj)
    if extra or missing:
        raise DomainError(
            f"{family}: unexpected keys {sorted(extra)}, missing keys {sorted(missing)}")
    if family == "semicircle":
        return Semicircle(float(obj["a"]), float(obj["sigma"]))
    if family == "free_poisson":
        return FreePoisson(float(obj["t"]))
    if family == "affine":
        return Affine(from_json(obj["base"]), float(obj["offset"]), float(obj["scale"]))
    if family == "atomic":
        return Atomic(tuple((float(w), float(x)) for w, x in obj["atoms"]))
    return Empirical(tuple(float(s) for s in obj["samples"]))
