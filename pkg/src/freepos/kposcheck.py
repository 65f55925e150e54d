"""Numeric k-positivity tests for concrete Choi matrices.

A map with Choi matrix ``C`` on ``C^n (x) C^d`` is k-positive exactly when
``(V* (x) I) C (V (x) I)`` is positive semidefinite for every ``n x k``
isometry ``V``. :func:`see_saw` searches for a violating frame by alternating
minimization and :func:`net_check` scans a deterministic grid for tiny ``n``.
A negative value found by either search is a certificate; failing to find
one proves nothing.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.optimize

from .errors import DomainError, NotIsometry, ShapeMismatch, TooLarge
from .rmt import (
    BipartiteOperator,
    Seed,
    bottom_eigenpair,
    haar_isometry,
    hermitize,
    thread_count,
)

ISOMETRY_TOL = 1e-10
DEFAULT_RESTARTS = 32
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 500
# alternating steps taken before the quasi-Newton polish
WARMUP_STEPS = 10


@dataclass(frozen=True)
class KPosResult:
    """Outcome of a search for a violating rank-k compression.

    ``status`` is ``negative_certificate`` when ``best_value < -cert_tol`` and
    ``no_violation_found`` otherwise.
    """

    k: int
    best_value: float
    best_projection: np.ndarray
    restarts_used: int
    status: str
    history: List[float] = field(default_factory=list, compare=False)

    def to_json(self) -> dict:
        frame = np.asarray(self.best_projection)
        flat = frame.reshape(-1, order="F")
        return {
            "k": self.k,
            "best_value": self.best_value,
            "best_projection": {
                "rows": int(frame.shape[0]),
                "cols": int(frame.shape[1]),
                "column_major": [[float(z.real), float(z.imag)] for z in flat],
            },
            "restarts_used": self.restarts_used,
            "status": self.status,
        }


def _status(value: float, cert_tol: float) -> str:
    return "negative_certificate" if value < -cert_tol else "no_violation_found"


def compression(C: BipartiteOperator, V: np.ndarray) -> np.ndarray:
    """``(V* (x) I_d) C (V (x) I_d)`` as a ``kd x kd`` array."""
    t = C.tensor()
    k = V.shape[1]
    # contract the two C^n legs against V
    out = np.einsum("ia,ixjy,jb->axby", V.conj(), t, V, optimize=True)
    return hermitize(out.reshape(k * C.d, k * C.d))


def compressed_min_eig(C: BipartiteOperator, V) -> float:
    """Bottom eigenvalue of the compression of ``C`` by ``V (x) I_d``."""
    V = np.asarray(V, dtype=np.complex128)
    if V.ndim == 1:
        V = V[:, None]
    if V.ndim != 2 or V.shape[0] != C.n or V.shape[1] > C.n:
        raise ShapeMismatch(f"frame shape {V.shape} does not fit n={C.n}")
    gram = V.conj().T @ V
    if np.abs(gram - np.eye(V.shape[1])).max() > ISOMETRY_TOL:
        raise NotIsometry("V* V differs from the identity")
    return bottom_eigenpair(compression(C, V))[0]


def _contraction(C: BipartiteOperator, Y: np.ndarray) -> np.ndarray:
    """``T[(i,a),(j,b)] = y_a* C(i,j) y_b`` for an orthonormal ``d x r`` frame ``Y``."""
    n, d, k = C.n, C.d, Y.shape[1]
    cy = (C.matrix.reshape(n * d * n, d) @ Y).reshape(n, d, n, k)
    out = np.einsum("xa,ixjb->iajb", Y.conj(), cy, optimize=True)
    return hermitize(out.reshape(n * k, n * k))


def _orthonormal(a: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(a)
    return q


class _Descent:
    """Monotone minimization of ``lambda_min`` of the rank-k compression.

    ``seesaw_step`` is the alternating update. Given ``V``, the bottom
    eigenvector of the compression is a vector ``u = sum_a V e_a (x) w_a`` of
    Schmidt rank at most ``k``; freezing the span ``Y`` of the ``w_a`` and
    minimizing over ``C^n (x) span(Y)`` is an ``nk``-dimensional eigenproblem
    whose minimizer ``sum_b x_b (x) y_b`` gives the next frame
    ``span{x_b}``. Neither half-step can raise the Rayleigh quotient.

    ``polish`` runs L-BFGS on an unconstrained ``n x k`` matrix ``A`` whose
    column span is the frame; its result is kept only if it is lower.
    """

    def __init__(self, C: BipartiteOperator, V: np.ndarray):
        self.C = C
        self.k = V.shape[1]
        self.V = V
        self.value, self.w = bottom_eigenpair(compression(C, V))
        self.history = [self.value]

    def _accept(self, V, value, w) -> bool:
        if value <= self.value:
            self.V, self.value, self.w = V, value, w
            self.history.append(value)
            return True
        return False

    def seesaw_step(self) -> bool:
        C, k = self.C, self.k
        Y = _orthonormal(self.w.reshape(k, C.d).T)
        r = Y.shape[1]
        _, xi = bottom_eigenpair(_contraction(C, Y))
        V = _orthonormal(xi.reshape(C.n, r))
        if r < k:
            # d < k: complete the frame with directions of the previous one
            V = _orthonormal(np.hstack([V, self.V]))[:, :k]
        value, w = bottom_eigenpair(compression(C, V), v0=self.w)
        return self._accept(V, value, w)

    def _objective(self, x):
        C, n, k, d = self.C, self.C.n, self.k, self.C.d
        A = (x[:n * k] + 1j * x[n * k:]).reshape(n, k)
        V, R = np.linalg.qr(A)
        value, w = bottom_eigenpair(compression(C, V), v0=self._warm)
        self._warm = w
        # envelope theorem: differentiate v = (A (x) I) u at the fixed minimizer
        U = np.linalg.solve(R, w.reshape(k, d))
        v = (A @ U).reshape(-1)
        r = (C.matrix @ v - value * v).reshape(n, d)
        g = r @ U.conj().T
        if value < self._best[0]:
            self._best = (value, V, w)
        return value, np.concatenate([2 * g.real.ravel(), 2 * g.imag.ravel()])

    def polish(self, max_iter: int, tol: float) -> bool:
        self._warm = self.w
        self._best = (self.value, self.V, self.w)
        x0 = np.concatenate([self.V.real.ravel(), self.V.imag.ravel()])
        scipy.optimize.minimize(self._objective, x0, jac=True, method="L-BFGS-B",
                                options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-10})
        value, V, w = self._best
        return value < self.history[-1] and self._accept(V, value, w)


def _descend(C: BipartiteOperator, V: np.ndarray, tol: float, max_iter: int,
             accelerate: bool = True):
    """One monotone run from frame ``V``; returns ``(value, frame, history)``.

    Plain mode iterates the alternating update until one step gains less than
    ``tol`` or ``max_iter`` steps are done. Accelerated mode takes a few
    alternating steps, polishes with L-BFGS, then resumes alternating steps
    until they stall.
    """
    run = _Descent(C, V)
    steps = 0
    if accelerate:
        for _ in range(min(WARMUP_STEPS, max_iter)):
            before = run.value
            steps += 1
            if not run.seesaw_step() or before - run.value < tol:
                break
        run.polish(max(1, max_iter - steps), tol)
    while steps < max_iter:
        before = run.value
        steps += 1
        if not run.seesaw_step() or before - run.value < tol:
            break
    return run.value, run.V, run.history


def see_saw(C: BipartiteOperator, k: int, restarts: int = DEFAULT_RESTARTS,
            seed: Optional[Seed] = None, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER, cert_tol: float = DEFAULT_TOL,
            accelerate: bool = True) -> KPosResult:
    """Alternating minimization of the bottom eigenvalue over rank-k frames.

    Parameters
    ----------
    C : BipartiteOperator
        Choi matrix of the map under test.
    k : int
        Rank of the compressions, ``1 <= k <= n``.
    restarts : int
        Number of Haar-random starting frames.
    seed : Seed
        Restart ``r`` starts from ``seed.child("restart", r)``.
    tol, max_iter : float, int
        Stop a run once one step improves by less than ``tol`` or after
        ``max_iter`` steps.
    cert_tol : float
        ``best_value < -cert_tol`` is reported as a negative certificate.
    accelerate : bool
        Interleave an L-BFGS polish of the frame with the alternating steps.
        Every accepted step still lowers the objective.

    Returns
    -------
    KPosResult
        Best value over all restarts; ties go to the lowest restart index.
        ``history`` holds the objective trace of the winning run.
    """
    if not (1 <= k <= C.n):
        raise DomainError(f"need 1 <= k <= n={C.n}, got k={k}")
    if restarts < 1:
        raise DomainError("restarts must be >= 1")
    seed = seed if seed is not None else Seed(0, "see_saw")

    def run(r):
        V0 = haar_isometry(C.n, k, seed.child("restart", r))
        return _descend(C, V0, tol, max_iter, accelerate)

    workers = min(thread_count(), restarts)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(run, range(restarts)))
    else:
        runs = [run(r) for r in range(restarts)]
    best = min(range(restarts), key=lambda r: (runs[r][0], r))
    _, V, history = runs[best]
    # the reported value always comes from a dense solve on the returned frame
    value = compressed_min_eig(C, V)
    return KPosResult(k, value, V, restarts, _status(value, cert_tol), history)


def _sphere_grid(n: int, resolution: int):
    """Unit vectors of ``C^n`` up to a global phase, on an angular grid."""
    if n == 1:
        yield np.ones(1, dtype=np.complex128)
        return
    thetas = np.linspace(0.0, math.pi / 2, resolution)
    phis = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
    if n == 2:
        for th in thetas:
            for ph in phis:
                yield np.array([math.cos(th), np.exp(1j * ph) * math.sin(th)])
        return
    for t1 in thetas:
        for t2 in thetas:
            for p1 in phis:
                for p2 in phis:
                    yield np.array([math.cos(t1),
                                    np.exp(1j * p1) * math.sin(t1) * math.cos(t2),
                                    np.exp(1j * p2) * math.sin(t1) * math.sin(t2)])


def net_check(C: BipartiteOperator, k: int, resolution: int,
              cert_tol: float = DEFAULT_TOL) -> KPosResult:
    """Exhaustive scan of rank-one compressions over an angular grid.

    Only ``n <= 3`` and ``k = 1`` are allowed; the grid has ``resolution``
    points per angle.
    """
    if C.n > 3 or k != 1:
        raise TooLarge(f"net_check supports n <= 3 and k = 1, got n={C.n}, k={k}")
    if resolution < 2:
        raise DomainError("resolution must be >= 2")
    t = C.tensor()
    best_value, best_x = math.inf, None
    for x in _sphere_grid(C.n, resolution):
        m = np.einsum("i,iajb,j->ab", x.conj(), t, x)
        value = float(np.linalg.eigvalsh(hermitize(m))[0])
        if value < best_value:
            best_value, best_x = value, x
    return KPosResult(1, best_value, best_x[:, None], 0, _status(best_value, cert_tol))
