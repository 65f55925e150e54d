import math

import numpy as np
import pytest

from freepos import measures as M
from freepos.errors import DomainError
from freepos.freeconv import (FreePowerResult, compression_law, free_power,
                              numeric_free_power_support)
from freepos.rmt import Seed, free_power_oracle

BERNOULLI = M.Atomic(((0.5, -1.0), (0.5, 1.0)))
SKEWED = M.Atomic(((0.75, -1.0), (0.25, 3.0)))
CLOSED = [M.Semicircle(1, 1), M.Semicircle(-0.5, 2), M.FreePoisson(0.25), M.FreePoisson(3),
          M.Affine(M.FreePoisson(0.25), 1, -0.6), M.Affine(M.Semicircle(0, 1), 2, -1.5)]


def test_semicircle_power_closed_form():
    res = free_power(M.Semicircle(1, 1), 4)
    assert res.result_spec == M.Semicircle(4, 2)
    assert (res.support.min_supp, res.support.max_supp) == (0, 8)
    assert res.support.method == "closed_form"


@pytest.mark.parametrize("spec", CLOSED + [BERNOULLI, M.Empirical((0.0, 1.0, 1.0))])
def test_power_one_is_identity(spec):
    res = free_power(spec, 1)
    assert res.result_spec == spec
    assert res.support == M.support(spec)


def test_power_rejects_small_T():
    with pytest.raises(DomainError):
        free_power(M.Semicircle(0, 1), 0.5)
    with pytest.raises(DomainError):
        free_power(M.Semicircle(0, 1), float("nan"))


def test_affine_free_poisson_power():
    res = free_power(M.Affine(M.FreePoisson(0.25), 1, -0.6), 2)
    assert res.result_spec == M.Affine(M.FreePoisson(0.5), 2, -0.6)


@pytest.mark.parametrize("spec", CLOSED)
@pytest.mark.parametrize("T", [1.5, 2, 7.25])
def test_cumulant_additivity(spec, T):
    base = M.free_cumulants(spec, 4)
    powered = M.free_cumulants(free_power(spec, T).result_spec, 4)
    assert powered == pytest.approx([T * c for c in base], abs=1e-12)


@pytest.mark.parametrize("spec", CLOSED)
def test_semigroup(spec):
    S, T = 1.7, 2.3
    twice = free_power(free_power(spec, S).result_spec, T).support
    once = free_power(spec, S * T).support
    assert twice.min_supp == pytest.approx(once.min_supp, abs=1e-10)
    assert twice.max_supp == pytest.approx(once.max_supp, abs=1e-10)


@pytest.mark.parametrize("spec", CLOSED)
def test_result_spec_matches_support(spec):
    res = free_power(spec, 3.5)
    prof = M.support(res.result_spec)
    assert prof.min_supp == pytest.approx(res.support.min_supp, abs=1e-10)
    assert prof.max_supp == pytest.approx(res.support.max_supp, abs=1e-10)


def test_compression_law():
    res = compression_law(M.Semicircle(0, 1), 0.5)
    assert res.result_spec == M.Semicircle(0, math.sqrt(2))
    assert res.support.max_supp == pytest.approx(2 * math.sqrt(2))
    for t in (0, 1, 1.5):
        with pytest.raises(DomainError):
            compression_law(M.Semicircle(0, 1), t)


def test_compression_near_one():
    spec = M.Semicircle(0.2, 0.7)
    res = compression_law(spec, 1 - 1e-12)
    assert res.support.min_supp == pytest.approx(M.support(spec).min_supp, abs=1e-9)


@pytest.mark.parametrize("a,t0,n,k", [(0.6, 0.25, 4, 2), (0.6, 0.25, 4, 3), (1.1, 0.1, 9, 2)])
def test_compression_of_mp_family(a, t0, n, k):
    res = compression_law(M.Affine(M.FreePoisson(t0), 1, -a), k / n)
    expected = 1 - (k / n) * a * (1 + t0 * n / k + 2 * math.sqrt(t0 * n / k))
    assert (k / n) * res.support.min_supp == pytest.approx(expected, abs=1e-12)


# ---- numeric engine ---------------------------------------------------------

@pytest.mark.parametrize("T", [1.5, 2, 10])
def test_numeric_single_atom(T):
    prof = numeric_free_power_support(M.Atomic(((1.0, 0.7),)), T)
    assert prof.min_supp == prof.max_supp == pytest.approx(0.7 * T)
    assert prof.atoms == ((pytest.approx(0.7 * T), 1.0),)


def test_numeric_bernoulli():
    prof = free_power(BERNOULLI, 2).support
    assert prof.method == "critical_point"
    assert prof.min_supp == pytest.approx(-2, abs=1e-6)
    assert prof.max_supp == pytest.approx(2, abs=1e-6)
    assert prof.atoms == ()


@pytest.mark.parametrize("T", [1.25, 1.5, 3, 6])
def test_numeric_bernoulli_kesten_edges(T):
    # symmetric Bernoulli: the a.c. part lives on [-2 sqrt(T-1), 2 sqrt(T-1)];
    # for T < 2 atoms of weight 1 - T/2 survive at +-T and set the hull
    prof = numeric_free_power_support(BERNOULLI, T)
    edge = max(2 * math.sqrt(T - 1), T) if T < 2 else 2 * math.sqrt(T - 1)
    if T < 2:
        assert prof.atoms == ((pytest.approx(-T), pytest.approx(1 - T / 2)),
                              (pytest.approx(T), pytest.approx(1 - T / 2)))
    assert prof.max_supp == pytest.approx(edge, abs=1e-6)
    assert prof.min_supp == pytest.approx(-edge, abs=1e-6)


def test_numeric_skewed_atom_rule():
    prof = numeric_free_power_support(SKEWED, 2)
    assert prof.atoms == ((pytest.approx(-2), pytest.approx(0.5)),)
    assert prof.min_supp == pytest.approx(-2)
    # frozen from the engine, cross-checked against the Monte Carlo oracle below
    assert prof.max_supp == pytest.approx(2 + 2 * math.sqrt(3), abs=1e-6)


def test_numeric_skewed_against_oracle():
    oracle = free_power_oracle(SKEWED, 2, 1, 4000, 1, Seed(11, "freeconv-test"))
    assert oracle.max_supp == pytest.approx(2 + 2 * math.sqrt(3), abs=0.05)
    assert oracle.min_supp == pytest.approx(-2, abs=0.05)


def test_numeric_discretized_semicircle():
    prof = free_power(M.discretize(M.Semicircle(0, 1), 40), 2).support
    assert prof.max_supp == pytest.approx(2 * math.sqrt(2), abs=0.02)
    assert prof.min_supp == pytest.approx(-2 * math.sqrt(2), abs=0.02)


def test_numeric_empirical_and_affine_atomic():
    emp = M.Empirical((-1.0, 1.0))
    assert free_power(emp, 2).support.max_supp == pytest.approx(2, abs=1e-6)
    shifted = M.Affine(BERNOULLI, 1.0, 2.0)
    prof = free_power(shifted, 2).support
    assert prof.min_supp == pytest.approx(2 - 4, abs=1e-6)
    assert prof.max_supp == pytest.approx(2 + 4, abs=1e-6)


@pytest.mark.parametrize("spec", CLOSED + [BERNOULLI, SKEWED])
def test_mean_scaling(spec):
    T = 2.5
    res = free_power(spec, T)
    if res.result_spec is not None:
        assert M.mean(res.result_spec) == pytest.approx(T * M.mean(spec), abs=1e-8)


def test_result_json_round_trip():
    for res in (free_power(M.Semicircle(1, 1), 4), free_power(BERNOULLI, 2)):
        back = FreePowerResult.from_json(res.to_json())
        assert back == res
    assert "result_spec" not in free_power(BERNOULLI, 2).to_json()
