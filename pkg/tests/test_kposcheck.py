import math

import numpy as np
import pytest

from conftest import random_hermitian, transposition_choi
from freepos import measures as M
from freepos.errors import DomainError, NotIsometry, ShapeMismatch, TooLarge
from freepos.kposcheck import (KPosResult, _Descent, _descend, compressed_min_eig,
                               compression, net_check, see_saw)
from freepos.positivity import is_k_positive
from freepos.rmt import BipartiteOperator, Seed, haar_isometry, sample_choi_map


def test_full_frame_is_bottom_of_c():
    rng = np.random.default_rng(0)
    c = BipartiteOperator(3, 2, random_hermitian(rng, 6))
    assert compressed_min_eig(c, np.eye(3)) == pytest.approx(np.linalg.eigvalsh(c.matrix)[0], abs=1e-12)


def test_identity_compressions():
    c = BipartiteOperator(4, 3, np.eye(12))
    for k in (1, 2, 4):
        v = haar_isometry(4, k, Seed(k, "idv"))
        assert compressed_min_eig(c, v) == pytest.approx(1, abs=1e-12)


def test_compression_matches_kron():
    rng = np.random.default_rng(1)
    c = BipartiteOperator(3, 2, random_hermitian(rng, 6))
    v = haar_isometry(3, 2, Seed(0, "kron"))
    big = np.kron(v, np.eye(2))
    assert np.allclose(compression(c, v), big.conj().T @ c.matrix @ big, atol=1e-13)


def test_compressed_min_eig_errors():
    c = BipartiteOperator(3, 2, np.eye(6))
    with pytest.raises(ShapeMismatch):
        compressed_min_eig(c, np.eye(2))
    with pytest.raises(NotIsometry):
        compressed_min_eig(c, 2 * np.eye(3)[:, :1])
    # a 1-d vector is accepted as a rank-one frame
    assert compressed_min_eig(c, np.array([1.0, 0, 0])) == pytest.approx(1)


def test_sampled_choi_rank_three_coordinate_frame():
    c = sample_choi_map(M.Semicircle(1, 1), 8, 400, Seed(0, "coord"))
    v = np.eye(8)[:, :3]
    expected = 1 - 0.75 * math.sqrt(8 / 3)
    assert compressed_min_eig(c, v) == pytest.approx(expected, abs=0.1)


# ---- see-saw ----------------------------------------------------------------

def test_see_saw_positive_semidefinite():
    rng = np.random.default_rng(2)
    g = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    c = BipartiteOperator(2, 4, g @ g.conj().T)
    for k in (1, 2):
        res = see_saw(c, k, restarts=3, seed=Seed(1, "psd"))
        assert res.status == "no_violation_found"
        assert res.best_value >= -1e-9


def test_see_saw_transposition():
    c = transposition_choi(2)
    r1 = see_saw(c, 1, restarts=4, seed=Seed(0, "swap"))
    assert r1.status == "no_violation_found"
    assert r1.best_value == pytest.approx(0, abs=1e-9)
    r2 = see_saw(c, 2, restarts=4, seed=Seed(0, "swap"))
    assert r2.status == "negative_certificate"
    assert r2.best_value == pytest.approx(-1, abs=1e-9)


@pytest.mark.parametrize("accelerate", [True, False])
def test_see_saw_result_invariants(accelerate):
    rng = np.random.default_rng(3)
    c = BipartiteOperator(4, 3, random_hermitian(rng, 12))
    res = see_saw(c, 2, restarts=3, seed=Seed(2, "inv"), accelerate=accelerate)
    assert res.k == 2 and res.restarts_used == 3
    frame = res.best_projection
    assert np.abs(frame.conj().T @ frame - np.eye(2)).max() < 1e-10
    assert compressed_min_eig(c, frame) == pytest.approx(res.best_value, abs=1e-9)
    assert all(b <= a + 1e-12 for a, b in zip(res.history, res.history[1:]))
    # a negative certificate recomputes independently
    if res.status == "negative_certificate":
        big = np.kron(frame, np.eye(3))
        assert np.linalg.eigvalsh(big.conj().T @ c.matrix @ big)[0] < 0


def test_see_saw_rank_above_local_dimension():
    # d < k: the Schmidt span is narrower than the frame
    rng = np.random.default_rng(8)
    c = BipartiteOperator(4, 1, random_hermitian(rng, 4))
    res = see_saw(c, 3, restarts=3, seed=Seed(0, "narrow"))
    assert res.best_projection.shape == (4, 3)
    # with d = 1 the rank-3 optimum is the bottom of the 3 smallest eigenvalues
    assert res.best_value == pytest.approx(np.linalg.eigvalsh(c.matrix)[0], abs=1e-9)


def test_see_saw_deterministic():
    rng = np.random.default_rng(4)
    c = BipartiteOperator(3, 3, random_hermitian(rng, 9))
    a = see_saw(c, 1, restarts=3, seed=Seed(5, "det"))
    b = see_saw(c, 1, restarts=3, seed=Seed(5, "det"))
    assert a.best_value == b.best_value
    assert np.array_equal(a.best_projection, b.best_projection)


def test_see_saw_arguments():
    c = BipartiteOperator(2, 2, np.eye(4))
    for k in (0, 3):
        with pytest.raises(DomainError):
            see_saw(c, k)
    with pytest.raises(DomainError):
        see_saw(c, 1, restarts=0)


def test_seesaw_step_monotone():
    rng = np.random.default_rng(5)
    c = BipartiteOperator(5, 4, random_hermitian(rng, 20))
    run = _Descent(c, haar_isometry(5, 2, Seed(0, "step")))
    values = [run.value]
    for _ in range(30):
        run.seesaw_step()
        values.append(run.value)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_result_json():
    res = KPosResult(2, -0.5, np.array([[1, 0], [0, 1j]]), 4, "negative_certificate")
    obj = res.to_json()
    assert obj["best_projection"]["column_major"] == [[1, 0], [0, 0], [0, 0], [0, 1]]
    assert obj["status"] == "negative_certificate" and obj["restarts_used"] == 4


# ---- net --------------------------------------------------------------------

def test_net_identity():
    assert net_check(BipartiteOperator(2, 3, np.eye(6)), 1, 8).best_value == pytest.approx(1)


def test_net_transposition():
    res = net_check(transposition_choi(2), 1, 40)
    assert res.best_value >= -1e-12
    assert res.best_value == pytest.approx(0, abs=1e-12)
    assert res.status == "no_violation_found"


def test_net_guard():
    with pytest.raises(TooLarge):
        net_check(BipartiteOperator(4, 1, np.eye(4)), 1, 4)
    with pytest.raises(TooLarge):
        net_check(BipartiteOperator(2, 2, np.eye(4)), 2, 4)


def test_net_three_dim():
    res = net_check(transposition_choi(3), 1, 6)
    assert res.best_value >= -1e-12


def test_net_bounds_see_saw():
    rng = np.random.default_rng(6)
    for trial in range(50):
        c = BipartiteOperator(2, 2, random_hermitian(rng, 4))
        net = net_check(c, 1, 24).best_value
        # default restarts: a handful can all land in the same local minimum
        ss = see_saw(c, 1, seed=Seed(trial, "net")).best_value
        assert net >= ss - 1e-6


# ---- agreement with the analytic criterion --------------------------------------

def test_see_saw_agrees_with_free_criterion():
    rng = np.random.default_rng(7)
    n, k, agree, total = 2, 1, 0, 0
    for trial in range(24):
        spec = M.Semicircle(rng.uniform(-0.5, 2.5), rng.uniform(0.3, 1.2))
        verdict = is_k_positive(spec, n, k)
        if abs(verdict.margin * k / n) < 0.05:
            continue
        c = sample_choi_map(spec, n, 50 * n, Seed(trial, "agree"))
        res = see_saw(c, k, restarts=4, seed=Seed(trial, "agree-ss"))
        total += 1
        agree += (res.best_value >= 0) == verdict.is_k_positive
    assert total >= 15
    assert agree / total >= 0.95
