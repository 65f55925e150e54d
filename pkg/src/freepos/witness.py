"""GUE-based PPT entanglement experiments.

For fixed ``n`` a single family of GUE_d blocks gives two operators on
``C^n (x) C^d``:

* ``Z = 2 I - alpha G`` with ``G`` the block-GUE assembly, positive and PPT
  for large ``d``;
* ``C = (2 + eps)/sqrt(n) I + G'`` with ``G'`` the same assembly built from
  the transposed blocks and the opposite sign on ``i Y``; it is the Choi
  matrix of a positive map for large ``d``.

The Bell-state witness value of the pair tends to ``2(2+eps)sqrt(n) - alpha n``,
which is negative exactly when ``2(2+eps) < alpha sqrt(n)``. The module also
builds the explicit separable decomposition of ``x I + GUE``, the
indecomposability certificate and a finite-size probe of the reduction
criterion.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DomainError, ShapeMismatch
from .rmt import (
    BipartiteOperator,
    Seed,
    apply_choi_map_ampliated,
    block_assembly,
    gue_array,
    haar_isometry,
    hermitize,
    min_eigenvalue,
    partial_transpose,
    sample_family,
    spectrum,
    thread_count,
)

log = logging.getLogger(__name__)

DEFAULT_TOL_W = 0.02


# ---------------------------------------------------------------------------
# configuration and the coupled pair
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WitnessExperimentConfig:
    """Parameters of the witness experiment.

    ``alpha = 0`` is accepted so that the degenerate case ``Z = 2I`` can be
    run; otherwise ``0 <= alpha < 1``.
    """

    n: int
    d: int
    alpha: float
    shift_eps: float
    trials: int = 1
    seed: Seed = field(default_factory=lambda: Seed(0, "witness"))
    tol_w: float = DEFAULT_TOL_W

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise DomainError("n and d must be >= 1")
        if not (0 <= self.alpha < 1):
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.shift_eps < 0:
            raise DomainError("shift_eps must be >= 0")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.tol_w < 0:
            raise DomainError("tol_w must be >= 0")

    @property
    def witness_limit(self) -> float:
        return 2 * (2 + self.shift_eps) * math.sqrt(self.n) - self.alpha * self.n

    @property
    def detection_expected(self) -> bool:
        return 2 * (2 + self.shift_eps) < self.alpha * math.sqrt(self.n)

    def to_json(self) -> dict:
        return {"n": self.n, "d": self.d, "alpha": self.alpha,
                "shift_eps": self.shift_eps, "trials": self.trials,
                "seed": self.seed.to_json(), "tol_w": self.tol_w}


@dataclass(frozen=True, eq=False)
class CoupledPair:
    Z: BipartiteOperator
    C: BipartiteOperator
    seed: Seed


def build_coupled_pair(cfg: WitnessExperimentConfig, trial: int) -> CoupledPair:
    """Build ``(Z, C)`` for one trial from one shared Gaussian family."""
    seed = cfg.seed.for_trial(trial).child("family")
    family = sample_family(cfg.n, cfg.d, seed)
    dim = cfg.n * cfg.d
    eye = np.eye(dim)
    Z = 2.0 * eye - cfg.alpha * block_assembly(family)
    C = (2.0 + cfg.shift_eps) / math.sqrt(cfg.n) * eye \
        + block_assembly(family, transpose=True, flip_imaginary=True)
    return CoupledPair(BipartiteOperator(cfg.n, cfg.d, Z),
                       BipartiteOperator(cfg.n, cfg.d, C), seed)


def _check_pair(Z: BipartiteOperator, C: BipartiteOperator):
    if (Z.n, Z.d) != (C.n, C.d):
        raise ShapeMismatch(f"Z is ({Z.n}, {Z.d}) but C is ({C.n}, {C.d})")


def bell_witness_value(Z: BipartiteOperator, C: BipartiteOperator) -> float:
    """``(1/d) sum_ij Tr[Z(i,j) C(i,j)^T]``."""
    _check_pair(Z, C)
    return float(np.real(np.sum(Z.matrix * C.matrix))) / Z.d


def bell_witness(pair: CoupledPair) -> float:
    return bell_witness_value(pair.Z, pair.C)


def bell_witness_direct(Z: BipartiteOperator, C: BipartiteOperator) -> float:
    """``<B_d, [Phi (x) id_d](Z) B_d>`` computed literally; for small sizes."""
    _check_pair(Z, C)
    d = Z.d
    image = apply_choi_map_ampliated(C, Z.matrix, d)
    bell = np.eye(d).reshape(-1) / math.sqrt(d)
    return float(np.real(bell @ image @ bell))


def ppt_check(Z: BipartiteOperator, tol: float = DEFAULT_TOL_W):
    """Bottom eigenvalue of the partial transpose and whether it clears ``-tol``."""
    lam = min_eigenvalue(partial_transpose(Z))
    return lam, lam >= -tol


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    trial: int
    witness: float
    lambda_min_Z: float
    lambda_min_PTZ: float
    detected: bool
    spectra: Optional[dict] = None

    def to_json(self) -> dict:
        return {"trial": self.trial, "witness": self.witness,
                "lambda_min_Z": self.lambda_min_Z,
                "lambda_min_PTZ": self.lambda_min_PTZ, "detected": self.detected}


@dataclass
class WitnessReport:
    config: WitnessExperimentConfig
    trials: List[TrialRecord]
    kind: str = "detection"
    extra: dict = field(default_factory=dict)

    def _stat(self, name):
        vals = np.array([getattr(t, name) for t in self.trials])
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
        return float(vals.mean()), se

    @property
    def mean_witness(self) -> float:
        return self._stat("witness")[0]

    @property
    def detection_rate(self) -> float:
        return sum(t.detected for t in self.trials) / len(self.trials)

    def theory(self) -> dict:
        cfg = self.config
        return {
            "witness_limit": cfg.witness_limit,
            "lhs_2_2_plus_eps": 2 * (2 + cfg.shift_eps),
            "rhs_alpha_sqrt_n": cfg.alpha * math.sqrt(cfg.n),
            "detection_expected": cfg.detection_expected,
            "lambda_min_limit": 2 - 2 * cfg.alpha,
        }

    def to_json(self) -> dict:
        aggregates = {}
        for name in ("witness", "lambda_min_Z", "lambda_min_PTZ"):
            m, se = self._stat(name)
            aggregates[name] = {"mean": m, "stderr": se}
        aggregates["detection_rate"] = self.detection_rate
        out = {"kind": self.kind, "config": self.config.to_json(),
               "trials": [t.to_json() for t in self.trials],
               "aggregates": aggregates, "theory": self.theory()}
        out.update(self.extra)
        return out


def _run_trial(cfg: WitnessExperimentConfig, trial: int, keep_spectra: bool) -> TrialRecord:
    pair = build_coupled_pair(cfg, trial)
    w = bell_witness(pair)
    ptz = partial_transpose(pair.Z)
    spectra = None
    if keep_spectra:
        spectra = {"Z": spectrum(pair.Z), "PTZ": spectrum(ptz), "C": spectrum(pair.C)}
        lz, lpt = float(spectra["Z"][0]), float(spectra["PTZ"][0])
    else:
        lz, lpt = min_eigenvalue(pair.Z), min_eigenvalue(ptz)
    tol = cfg.tol_w
    detected = w < -tol and lz >= -tol and lpt >= -tol
    return TrialRecord(trial, w, lz, lpt, detected, spectra)


def _run_trials(cfg, keep_spectra=False) -> List[TrialRecord]:
    workers = min(thread_count(), cfg.trials)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda t: _run_trial(cfg, t, keep_spectra),
                                 range(cfg.trials)))
    return [_run_trial(cfg, t, keep_spectra) for t in range(cfg.trials)]


def detection_verdict(cfg: WitnessExperimentConfig, keep_spectra: bool = False) -> WitnessReport:
    """Run all trials and flag detection.

    A trial detects entanglement when the witness is below ``-tol_w`` while
    both ``lambda_min(Z)`` and ``lambda_min(PT(Z))`` are at least ``-tol_w``.
    """
    return WitnessReport(cfg, _run_trials(cfg, keep_spectra))


def l_separability_witness(cfg: WitnessExperimentConfig, l: int,
                           keep_spectra: bool = False) -> WitnessReport:
    """Detection run certifying that ``Z`` is not ``l``-separable.

    The map is asymptotically ``l``-positive only when ``2 + eps > 2 sqrt(l)``;
    outside that range a negative witness proves nothing and ``DomainError`` is
    raised.
    """
    if not (1 <= l <= cfg.n):
        raise DomainError(f"need 1 <= l <= n={cfg.n}, got l={l}")
    if not (2 + cfg.shift_eps > 2 * math.sqrt(l)):
        raise DomainError(
            f"2 + eps = {2 + cfg.shift_eps} <= 2 sqrt(l) = {2 * math.sqrt(l):.6g}: "
            "the map is not asymptotically l-positive")
    report = detection_verdict(cfg, keep_spectra)
    report.kind = "l_separability"
    report.extra = {
        "l": l,
        "l_positivity_margin": 2 + cfg.shift_eps - 2 * math.sqrt(l),
        "alpha_threshold": 4 * math.sqrt(l) / math.sqrt(cfg.n),
        "not_l_separable": [t.detected for t in report.trials],
    }
    return report


# ---------------------------------------------------------------------------
# indecomposability
# ---------------------------------------------------------------------------

def certify_pair(Z: BipartiteOperator, C: BipartiteOperator, tol_w: float = DEFAULT_TOL_W) -> dict:
    """Check one (state, Choi matrix) pair for an indecomposability certificate.

    A decomposable positive map cannot detect a PPT state, so a negative
    witness on a positive PPT ``Z`` certifies that the map with Choi matrix
    ``C`` is indecomposable, provided the map is positive.
    """
    w = bell_witness_value(Z, C)
    lz = min_eigenvalue(Z)
    lpt = min_eigenvalue(partial_transpose(Z))
    cert = w < -tol_w and lz >= -tol_w and lpt >= -tol_w
    return {"witness": w, "lambda_min_Z": lz, "lambda_min_PTZ": lpt, "certificate": cert}


def indecomposability_certificate(cfg: WitnessExperimentConfig,
                                  keep_spectra: bool = False) -> WitnessReport:
    """Per-trial indecomposability certificates for the random maps.

    Raises ``DomainError`` unless ``2(2+eps) < alpha sqrt(n)``.
    """
    if not cfg.detection_expected:
        raise DomainError(
            f"regime violated: 2(2+eps) = {2 * (2 + cfg.shift_eps):.6g} is not below "
            f"alpha sqrt(n) = {cfg.alpha * math.sqrt(cfg.n):.6g}")
    report = detection_verdict(cfg, keep_spectra)
    report.kind = "indecomposability"
    tol = cfg.tol_w
    margins = [{"witness": -t.witness - tol, "lambda_min_Z": t.lambda_min_Z + tol,
                "lambda_min_PTZ": t.lambda_min_PTZ + tol} for t in report.trials]
    certs = [t.detected for t in report.trials]
    for t, c in zip(report.trials, certs):
        # soundness of the certificate by construction
        assert not c or (t.witness < 0 and t.lambda_min_Z >= -tol and t.lambda_min_PTZ >= -tol)
    report.extra = {"certificates": certs, "margins": margins,
                    "certificate_rate": sum(certs) / len(certs)}
    return report


# ---------------------------------------------------------------------------
# separability
# ---------------------------------------------------------------------------

def separability_threshold(n: int) -> dict:
    """Shift ``x_star`` above which ``x I + GUE`` is separable, the matching
    ``alpha_star`` for ``Z`` and the ratio of the enclosing balls."""
    if n < 2:
        raise DomainError("n must be >= 2")
    rn = math.sqrt(n)
    return {"x_star": 2 + 4 * (n - 1) / rn,
            "alpha_star": rn / (2 * (n - 1) + rn),
            "ball_ratio": 4 * (rn + 2 * (n - 1)) / n}


_PATTERNS = (
    (1.0, 1.0),     # E_ii + E_ij + E_ji + E_jj
    (-1.0, -1.0),   # E_ii - E_ij - E_ji + E_jj
    (1j, -1j),      # E_ii + i E_ij - i E_ji + E_jj
    (-1j, 1j),      # E_ii - i E_ij + i E_ji + E_jj
)


@dataclass
class SeparableConstruction:
    """Result of :func:`separable_construction`.

    ``components`` lists one entry per summand of ``Y``: product terms carry the
    pair ``(i, j)``, the pattern index ``s`` and the bottom eigenvalue of their
    ``d x d`` factor ``beta X + 2 I``; diagonal terms carry ``i`` and the bottom
    eigenvalue of ``T_i``. Both are unscaled; multiply by ``scale`` for the
    summands of ``Y`` itself.
    """

    n: int
    d: int
    beta: float
    x: float
    Y: BipartiteOperator
    components: List[dict]
    diagnostics: dict

    def to_json(self) -> dict:
        return {"n": self.n, "d": self.d, "beta": self.beta, "x": self.x,
                "components": self.components, "diagnostics": self.diagnostics}


def separable_construction(n: int, d: int, alpha: Optional[float], beta: float,
                           seed: Seed, x: Optional[float] = None) -> SeparableConstruction:
    """Explicit sum-of-products decomposition of ``Y = x I + GUE_{nd}``.

    Parameters
    ----------
    n, d : int
        Block count and block size, ``n >= 2``.
    alpha : float or None
        Sets ``x = 2 / alpha`` when ``x`` is not given.
    beta : float
        Free parameter in ``(0, 1)``.
    seed : Seed
    x : float, optional
        Overrides the shift.
    """
    if n < 2 or d < 1:
        raise DomainError("need n >= 2 and d >= 1")
    if not (0 < beta < 1):
        raise DomainError("beta must lie in (0, 1)")
    if x is None:
        if alpha is None or not (0 < alpha < 1):
            raise DomainError("give x or alpha in (0, 1)")
        x = 2.0 / alpha
        log.info("separable construction: alpha=%g converted to x=2/alpha=%g", alpha, x)
    rn = math.sqrt(n)
    scale = 1.0 / (2 * beta * rn)
    eye = np.eye(d)
    X = {}
    for i in range(n):
        X[(1, i, i)] = gue_array(d, seed.child("X", 1, i, i))
        for j in range(i + 1, n):
            for s in range(1, 5):
                X[(s, i, j)] = gue_array(d, seed.child("X", s, i, j))

    Y = np.zeros((n * d, n * d), dtype=np.complex128)
    components = []
    neighbour_sum = [np.zeros((d, d), dtype=np.complex128) for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for s, (up, down) in enumerate(_PATTERNS, start=1):
                xs = X[(s, i, j)]
                factor = beta * xs + 2 * eye
                lam = float(np.linalg.eigvalsh(factor)[0])
                components.append({"kind": "product", "i": i, "j": j, "s": s,
                                   "factor_lambda_min": lam})
                Y[i * d:(i + 1) * d, i * d:(i + 1) * d] += factor
                Y[j * d:(j + 1) * d, j * d:(j + 1) * d] += factor
                Y[i * d:(i + 1) * d, j * d:(j + 1) * d] += up * factor
                Y[j * d:(j + 1) * d, i * d:(i + 1) * d] += down * factor
                neighbour_sum[i] += xs
                neighbour_sum[j] += xs
    shift = 2 * x * beta * rn - 8 * (n - 1)
    for i in range(n):
        t_i = -beta * neighbour_sum[i] + 2 * beta * X[(1, i, i)] + shift * eye
        lam = float(np.linalg.eigvalsh(hermitize(t_i))[0])
        components.append({"kind": "diagonal", "i": i, "T_lambda_min": lam})
        Y[i * d:(i + 1) * d, i * d:(i + 1) * d] += t_i
    Y *= scale
    Y = hermitize(Y)

    # the same sample written directly as x I + block GUE
    direct = np.zeros_like(Y)
    for i in range(n):
        direct[i * d:(i + 1) * d, i * d:(i + 1) * d] = X[(1, i, i)] / rn
        for j in range(i + 1, n):
            blk = (X[(1, i, j)] - X[(2, i, j)] + 1j * (X[(3, i, j)] - X[(4, i, j)])) / (2 * rn)
            direct[i * d:(i + 1) * d, j * d:(j + 1) * d] = blk
            direct[j * d:(j + 1) * d, i * d:(i + 1) * d] = blk.conj().T
    direct += x * np.eye(n * d)
    residual = float(np.abs(Y - direct).max())

    factor_l = np.array([c["factor_lambda_min"] for c in components if c["kind"] == "product"])
    diag_l = np.array([c["T_lambda_min"] for c in components if c["kind"] == "diagonal"])
    diagnostics = {
        "reassembly_residual": residual,
        "scale": scale,
        "factor_lambda_min": float(factor_l.min()) if factor_l.size else None,
        "factor_positive_fraction": float((factor_l > 0).mean()) if factor_l.size else None,
        "factor_lambda_min_limit": 2 - 2 * beta,
        "T_lambda_min": float(diag_l.min()),
        "T_law": {"a": shift, "sigma": 2 * beta * rn},
        "T_lambda_min_limit": shift - 4 * beta * rn,
        "x_required": 2 + 4 * (n - 1) / (beta * rn),
        "component_lambda_min": float(min(factor_l.min() if factor_l.size else np.inf,
                                          diag_l.min()) * scale),
    }
    return SeparableConstruction(n, d, beta, x, BipartiteOperator(n, d, Y),
                                 components, diagnostics)


# ---------------------------------------------------------------------------
# reduction criterion probe
# ---------------------------------------------------------------------------

def reduction_test(rho: np.ndarray, n: int, m: int) -> float:
    """``lambda_min(I_n (x) Tr_n(rho) - rho)`` for ``rho`` on ``C^n (x) C^m``."""
    r = rho.reshape(n, m, n, m)
    reduced = np.einsum("ixiy->xy", r)
    return float(np.linalg.eigvalsh(hermitize(np.kron(np.eye(n), reduced) - rho))[0])


def probe_states(n: int, m: int, samples: int, seed: Seed) -> List[np.ndarray]:
    """Alternate normalized Wishart states ``G G* / Tr`` and random pure states."""
    states = []
    dim = n * m
    for s in range(samples):
        g = seed.child("state", s).normals(2 * dim * dim)
        G = (g[0::2] + 1j * g[1::2]).reshape(dim, dim)
        if s % 2 == 0:
            rho = G @ G.conj().T
        else:
            psi = G[:, 0]
            rho = np.outer(psi, psi.conj())
        states.append(hermitize(rho / np.trace(rho).real))
    return states


def reduction_probe_choi(n: int, d: int, projection_trace: float, seed: Seed) -> BipartiteOperator:
    """Choi matrix ``I - n P`` with ``P`` a Haar-rotated projection of rank ``round(eps n d)``."""
    rank = int(round(projection_trace * n * d))
    if rank < 1:
        raise DomainError(f"projection of rank {rank}; need projection_trace * n * d >= 1")
    V = haar_isometry(n * d, rank, seed)
    return BipartiteOperator(n, d, hermitize(np.eye(n * d) - n * (V @ V.conj().T)))


def reduction_limit_probe(n: int, d: int, projection_traces: Sequence[float], m: int,
                          samples: int, seed: Seed, states: Optional[List[np.ndarray]] = None,
                          tol: float = 1e-9) -> dict:
    """Compare the free map's positivity test with the reduction criterion.

    For every projection trace in ``projection_traces`` and every state, the
    two tests are said to agree when ``lambda_min([Phi (x) id_m](rho))`` and
    ``lambda_min(I (x) Tr_n rho - rho)`` fall on the same side of ``-tol``.
    """
    if m < 1 or m > d:
        raise DomainError("need 1 <= m <= d")
    if states is None:
        states = probe_states(n, m, samples, seed.child("states"))
    red = [reduction_test(r, n, m) for r in states]
    rows = []
    for idx, eps in enumerate(projection_traces):
        C = reduction_probe_choi(n, d, eps, seed.child("choi", idx))
        vals = [min_eigenvalue(hermitize(apply_choi_map_ampliated(C, r, m))) for r in states]
        agree = [(v >= -tol) == (rv >= -tol) for v, rv in zip(vals, red)]
        rows.append({"projection_trace": float(eps), "rank": int(round(eps * n * d)),
                     "map_lambda_min": vals, "agreement_rate": sum(agree) / len(agree)})
    rates = [r["agreement_rate"] for r in rows]
    return {"n": n, "d": d, "m": m, "red_lambda_min": red, "schedule": rows,
            "non_decreasing": all(b >= a for a, b in zip(rates, rates[1:]))}
