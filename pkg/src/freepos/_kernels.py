"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Two kernels live here:

* ``gaussian_stream`` -- standard normals from a counter-based SplitMix64
  generator followed by Box-Muller. Position ``i`` of a stream depends only on
  ``(key, i)``, so streams can be split across trials without coordination.
* ``outer_gap_inverse`` -- inverts the Cauchy transform of a finite atomic
  measure on its outer branch ``(x_max, +inf)`` for a grid of positive values,
  returning the gap ``z - x_max`` so that roots hugging the top atom keep
  their relative precision.

The backend is picked once at import time. Set ``FREEPOS_DISABLE_NUMBA=1`` to
force the numpy path; it is also used when numba cannot be imported. Both
implementations stay importable (``*_numpy`` / ``*_numba``) so they can be
compared directly.
"""
import os

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0

# bisection steps used to invert G on the outer branch; geometric midpoints,
# so this is enough for full double precision over any sane bracket ratio
_INVERSE_STEPS = 100


def _want_numba():
    flag = os.environ.get("FREEPOS_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes", "on")


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if (HAVE_NUMBA and _want_numba()) else "numpy"


# ---------------------------------------------------------------------------
# SplitMix64 counter-based generator
# ---------------------------------------------------------------------------

def _splitmix_numpy(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def mix64(x):
    """Scalar SplitMix64 finalizer, used to derive stream keys."""
    with np.errstate(over="ignore"):
        return int(_splitmix_numpy(np.uint64(x & 0xFFFFFFFFFFFFFFFF)))


def gaussian_stream_numpy(key, count, offset=0):
    key = np.uint64(key)
    npairs = (count + 1) // 2
    idx = np.arange(npairs, dtype=np.uint64) + np.uint64(offset)
    with np.errstate(over="ignore"):
        c1 = key + (np.uint64(2) * idx + np.uint64(1)) * _GOLDEN
        c2 = key + (np.uint64(2) * idx + np.uint64(2)) * _GOLDEN
        b1 = _splitmix_numpy(c1)
        b2 = _splitmix_numpy(c2)
    u1 = ((b1 >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (b2 >> np.uint64(11)).astype(np.float64) * _INV_2_53
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * npairs)
    out[0::2] = r * np.cos(_TWO_PI * u2)
    out[1::2] = r * np.sin(_TWO_PI * u2)
    return out[:count]


# ---------------------------------------------------------------------------
# Outer-branch inverse of the Cauchy transform of an atomic measure
# ---------------------------------------------------------------------------

def outer_gap_inverse_numpy(locations, weights, wgrid):
    """Return ``s > 0`` with ``G(x_max + s) = w`` for every ``w`` in ``wgrid``.

    ``wgrid`` must be strictly positive. ``G`` is strictly decreasing from
    ``+inf`` to ``0`` on the outer branch, so the root is unique and is
    bracketed in the gap variable ``s = z - x_max`` by
    ``[max(w_top / w, 1 / w - span), 1 / w]``.
    """
    x = np.asarray(locations, dtype=np.float64)
    p = np.asarray(weights, dtype=np.float64)
    w = np.asarray(wgrid, dtype=np.float64)
    top = np.argmax(x)
    xmax = x[top]
    span = xmax - x.min()
    hi = 1.0 / w
    lo = np.maximum(p[top] / w, hi - span)
    lo = np.minimum(lo, hi)
    gaps = xmax - x
    for _ in range(_INVERSE_STEPS):
        mid = np.sqrt(lo * hi)
        g = (p / (mid[:, None] + gaps)).sum(axis=1)
        above = g > w
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _splitmix_scalar(x):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @numba.njit(cache=True)
    def _gaussian_stream_jit(key, count, offset):
        npairs = (count + 1) // 2
        out = np.empty(2 * npairs)
        g = np.uint64(0x9E3779B97F4A7C15)
        for i in range(npairs):
            idx = np.uint64(i) + offset
            b1 = _splitmix_scalar(key + (np.uint64(2) * idx + np.uint64(1)) * g)
            b2 = _splitmix_scalar(key + (np.uint64(2) * idx + np.uint64(2)) * g)
            u1 = (np.float64(b1 >> np.uint64(11)) + 1.0) * _INV_2_53
            u2 = np.float64(b2 >> np.uint64(11)) * _INV_2_53
            r = np.sqrt(-2.0 * np.log(u1))
            out[2 * i] = r * np.cos(_TWO_PI * u2)
            out[2 * i + 1] = r * np.sin(_TWO_PI * u2)
        return out[:count]

    @numba.njit(cache=True)
    def _outer_gap_inverse_jit(x, p, w):
        top = 0
        for j in range(x.size):
            if x[j] > x[top]:
                top = j
        xmax = x[top]
        span = xmax - x.min()
        out = np.empty(w.size)
        for i in range(w.size):
            hi = 1.0 / w[i]
            lo = max(p[top] / w[i], hi - span)
            lo = min(lo, hi)
            for _ in range(_INVERSE_STEPS):
                mid = np.sqrt(lo * hi)
                g = 0.0
                for j in range(x.size):
                    g += p[j] / (mid + (xmax - x[j]))
                if g > w[i]:
                    lo = mid
                else:
                    hi = mid
            out[i] = 0.5 * (lo + hi)
        return out

    def gaussian_stream_numba(key, count, offset=0):
        return _gaussian_stream_jit(np.uint64(key), int(count), np.uint64(offset))

    def outer_gap_inverse_numba(locations, weights, wgrid):
        return _outer_gap_inverse_jit(
            np.ascontiguousarray(locations, dtype=np.float64),
            np.ascontiguousarray(weights, dtype=np.float64),
            np.ascontiguousarray(wgrid, dtype=np.float64),
        )

else:  # pragma: no cover
    gaussian_stream_numba = None
    outer_gap_inverse_numba = None


if BACKEND == "numba":
    gaussian_stream = gaussian_stream_numba
    outer_gap_inverse = outer_gap_inverse_numba
else:
    gaussian_stream = gaussian_stream_numpy
    outer_gap_inverse = outer_gap_inverse_numpy
