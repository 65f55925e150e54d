import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from freepos.rmt import BipartiteOperator

DATA = Path(__file__).resolve().parent / "data"

# property suites run 1000 cases each; keep every case small
settings.register_profile(
    "suite", max_examples=1000, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


def semicircle_pdf(a, sigma, x):
    u = (x - a) / sigma
    return np.where(np.abs(u) < 2, np.sqrt(np.clip(4 - u * u, 0, None)) / (2 * math.pi * sigma), 0.0)


def free_poisson_pdf(t, x):
    lo, hi = (1 - math.sqrt(t)) ** 2, (1 + math.sqrt(t)) ** 2
    inside = (x > lo) & (x < hi)
    val = np.sqrt(np.clip((hi - x) * (x - lo), 0, None)) / (2 * math.pi * np.where(x == 0, 1, x))
    return np.where(inside, val, 0.0)


def transposition_choi(n: int) -> BipartiteOperator:
    """Choi matrix of the transpose map on n x n matrices (the swap operator)."""
    s = np.zeros((n * n, n * n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            s[i * n + j, j * n + i] = 1
    return BipartiteOperator(n, n, s)


def random_hermitian(rng, dim):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


@pytest.fixture
def data_dir():
    return DATA
