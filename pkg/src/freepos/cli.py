"""Command-line interface.

Every command validates its parameters against the versioned JSON schema in
``freepos/schemas``, writes its artifacts into ``--out`` and finishes with a
``manifest.json`` that is enough to rerun it (``freepos rerun-from-manifest``).

Exit codes: 0 success, 2 configuration error, 3 outcome inconsistent with the
predicted regime, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import jsonschema
import numpy as np

from . import __version__, svgplot
from ._kernels import BACKEND
from .errors import ConvergenceFailure, FreeposError, NumericalFailure
from .fileio import FormatError, read_matrix
from .freeconv import free_power
from .measures import Affine, FreePoisson, Semicircle, density, from_json
from .positivity import (
    finite_eps_small_rank_verdict,
    is_k_positive,
    max_k_positive,
    mp_bottom,
    semicircle_threshold,
    small_rank_threshold,
)
from .rmt import (
    Seed,
    build_block_gue,
    deterministic_diagonal,
    free_power_oracle,
    histogram,
    kolmogorov_distance,
    rational_power,
    sample_family,
    sample_gue,
    spectrum,
)
from .kposcheck import DEFAULT_RESTARTS, DEFAULT_TOL, DEFAULT_MAX_ITER, net_check, see_saw
from .witness import (
    DEFAULT_TOL_W,
    WitnessExperimentConfig,
    detection_verdict,
    indecomposability_certificate,
    l_separability_witness,
    separability_threshold,
    separable_construction,
)

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_NUMERIC = 0, 2, 3, 4
SCHEMA_FILE = "run_config.v1.json"
COMMANDS = ("threshold", "freeconv", "witness", "separability", "kpos", "spectrum")


class ConfigError(FreeposError):
    """Invalid command configuration."""


def load_schema() -> dict:
    text = resources.files("freepos").joinpath("schemas", SCHEMA_FILE).read_text()
    return json.loads(text)


def _describe(err: jsonschema.ValidationError, where: str) -> str:
    if err.validator == "oneOf" and err.context:
        # report the failure inside the branch whose "family" matched
        branches = {}
        for sub in err.context:
            branches.setdefault(sub.relative_schema_path[0], []).append(sub)
        for subs in branches.values():
            if not any(s.validator == "const" for s in subs):
                err = subs[0]
                break
    path = "/".join(str(p) for p in err.absolute_path)
    return f"{where}: key '{path or '<root>'}': {err.message}"


def validate_params(command: str, params: dict) -> dict:
    schema = load_schema()
    sub = {"$ref": f"#/$defs/{command}", "$defs": schema["$defs"]}
    validator = jsonschema.Draft202012Validator(sub)
    err = jsonschema.exceptions.best_match(validator.iter_errors(params))
    if err is not None:
        raise ConfigError(_describe(err, command))
    return params


def validate_run_config(obj: dict) -> dict:
    schema = load_schema()
    top = {k: v for k, v in schema.items() if k != "$defs"}
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(top).iter_errors(obj))
    if err is not None:
        raise ConfigError(_describe(err, "run config"))
    validate_params(obj["command"], obj["params"])
    return obj


# ---------------------------------------------------------------------------
# output handling
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


class Outputs:
    """Writes artifacts into one directory and remembers their names."""

    def __init__(self, out: Path, emit):
        self.out = Path(out)
        self.emit = set(emit)
        self.files: List[str] = []
        self.out.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def json(self, name: str, obj) -> None:
        if "json" in self.emit:
            self._path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def _write_csv(self, name: str, header, rows) -> None:
        with open(self._path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def csv(self, name: str, header, rows) -> None:
        if "csv" in self.emit:
            self._write_csv(name, header, rows)

    def svg(self, stem: str, header, rows, draw: Callable[[Path], None]) -> None:
        """SVG figure plus a CSV sibling holding exactly the plotted data."""
        if "svg" not in self.emit:
            return
        self._write_csv(stem + ".csv", header, rows)
        draw(self._path(stem + ".svg"))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _require(params: dict, command: str, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"{command}: missing required key(s) {missing}")


def cmd_threshold(params: dict, seed: Seed, out: Outputs) -> Tuple[dict, int]:
    family, n = params["family"], params["n"]
    rows = []
    if family == "semicircle":
        _require(params, "threshold", "a", "sigma")
        spec = Semicircle(params["a"], params["sigma"])
        for k in range(1, n + 1):
            v = is_k_positive(spec, n, k)
            rows.append({"k": k, "margin": v.margin, "status": v.status, "method": v.method})
        max_k = max_k_positive(spec, n)
        extra = {"closed_form_threshold": semicircle_threshold(params["a"], params["sigma"], n)}
    elif family == "mp":
        _require(params, "threshold", "a", "t")
        a, t = params["a"], params["t"]
        spec = Affine(FreePoisson(t), 1.0, -a)
        for k in range(1, n + 1):
            v = is_k_positive(spec, n, k)
            rows.append({"k": k, "margin": v.margin, "status": v.status, "method": v.method,
                         "compressed_bottom": mp_bottom(a, t, n, k) if a >= 0 else None})
        max_k = max_k_positive(spec, n)
        extra = {}
    else:
        _require(params, "threshold", "a", "eps")
        a, eps = params["a"], params["eps"]
        max_k = 0
        for k in range(1, n + 1):
            v = finite_eps_small_rank_verdict(n, k, a, eps)
            rows.append({"k": k, "margin": v.margin, "status": v.status, "method": v.method,
                         "limit_threshold": small_rank_threshold(n, k)})
            if v.is_k_positive and max_k == k - 1:
                max_k = k
        extra = {"note": "max_k counts only certified k"}
    result = {"family": family, "params": params, "n": n, "max_k": max_k, "table": rows}
    result.update(extra)
    out.json("threshold.json", result)
    header = ["k", "margin", "status"]
    table = [[r["k"], r["margin"], r["status"]] for r in rows]
    out.csv("threshold_table.csv", header, table)
    out.svg("threshold_margin", ["k", "margin"], [[r["k"], r["margin"]] for r in rows],
            lambda p: svgplot.line_chart(
                p, [("margin", [r["k"] for r in rows], [r["margin"] for r in rows])],
                title=f"{family}: bottom of the support vs k", xlabel="k",
                ylabel="margin", hlines=[("0", 0.0)]))
    return result, EXIT_OK


def cmd_freeconv(params: dict, seed: Seed, out: Outputs) -> Tuple[dict, int]:
    spec = from_json(params["spec"])
    T = float(params["T"])
    res = free_power(spec, T)
    result = res.to_json()
    rows = [["engine", res.support.min_supp, res.support.max_supp]]
    if "oracle_m" in params:
        n, k = rational_power(T)
        m = int(params["oracle_m"])
        m = -(-m // n) * n
        trials = int(params.get("oracle_trials", 1))
        orc = free_power_oracle(spec, n, k, m, trials, seed.child("oracle"))
        gap = max(abs(orc.min_supp - res.support.min_supp),
                  abs(orc.max_supp - res.support.max_supp))
        result["oracle"] = {"support": orc.to_json(), "m": m, "trials": trials,
                            "n": n, "k": k, "gap": gap}
        rows.append(["oracle", orc.min_supp, orc.max_supp])
    out.json("freeconv.json", result)
    out.svg("freeconv_support", ["source", "min", "max"], rows,
            lambda p: svgplot.interval_chart(
                p, [(r[0], r[1], r[2]) for r in rows], res.support.atoms,
                title=f"support of the T={T:g} free power"))
    return result, EXIT_OK


def cmd_witness(params: dict, seed: Seed, out: Outputs) -> Tuple[dict, int]:
    cfg = WitnessExperimentConfig(
        n=params["n"], d=params["d"], alpha=params["alpha"], shift_eps=params["shift_eps"],
        trials=params.get("trials", 1), seed=seed, tol_w=params.get("tol_w", DEFAULT_TOL_W))
    keep = params.get("spectra", True)
    l = params.get("l", 1)
    if params.get("certify", False):
        report = indecomposability_certificate(cfg, keep_spectra=keep)
    elif l > 1:
        report = l_separability_witness(cfg, l, keep_spectra=keep)
    else:
        report = detection_verdict(cfg, keep_spectra=keep)
    result = report.to_json()
    rate = report.detection_rate
    consistent = rate >= 0.9 if cfg.detection_expected else rate <= 0.1
    result["regime_consistent"] = consistent
    out.json("witness_report.json", result)
    if keep:
        rows = []
        for t in report.trials:
            for kind in ("Z", "PTZ", "C"):
                rows.extend([t.trial, kind, i, v] for i, v in enumerate(t.spectra[kind]))
        out.csv("witness_spectra.csv", ["trial", "kind", "index", "eigenvalue"], rows)
    trials = [t.trial for t in report.trials]
    values = [t.witness for t in report.trials]
    out.svg("witness_by_trial", ["trial", "witness", "theory"],
            [[t, v, cfg.witness_limit] for t, v in zip(trials, values)],
            lambda p: svgplot.line_chart(
                p, [("witness", trials, values)], title="Bell witness per trial",
                xlabel="trial", ylabel="witness",
                hlines=[("limit", cfg.witness_limit), ("-tol_w", -cfg.tol_w)]))
    return result, EXIT_OK if consistent else EXIT_REGIME


def cmd_separability(params: dict, seed: Seed, out: Outputs) -> Tuple[dict, int]:
    n = params["n"]
    result = {"n": n, "threshold": separability_threshold(n)}
    if params.get("analytic_only", False) or "d" not in params:
        out.json("separability.json", result)
        return result, EXIT_OK
    if "beta" not in params:
        raise ConfigError("separability: key 'beta' is required unless analytic_only is set")
    if "x" not in params and "alpha" not in params:
        raise ConfigError("separability: give 'x' or 'alpha'")
    trials = params.get("trials", 1)
    diag, rows = [], []
    for t in range(trials):
        sc = separable_construction(n, params["d"], params.get("alpha"), params["beta"],
                                    seed.for_trial(t), x=params.get("x"))
        diag.append({"trial": t, **sc.diagnostics})
        for c in sc.components:
            lam = c.get("factor_lambda_min", c.get("T_lambda_min"))
            rows.append([t, c["kind"], c["i"], c.get("j"), c.get("s"), lam,
                         lam * sc.diagnostics["scale"]])
    result.update({"d": params["d"], "beta": params["beta"], "x": sc.x, "trials": diag})
    out.json("separability.json", result)
    out.csv("separability_components.csv",
            ["trial", "kind", "i", "j", "s", "lambda_min", "scaled_lambda_min"], rows)
    return result, EXIT_OK


def cmd_kpos(params: dict, seed: Seed, out: Outputs) -> Tuple[dict, int]:
    C = read_matrix(params["matrix"], params.get("n"), params.get("d"))
    res = see_saw(C, params["k"], restarts=params.get("restarts", DEFAULT_RESTARTS),
                  seed=seed, tol=params.get("tol", DEFAULT_TOL),
                  max_iter=params.get("max_iter", DEFAULT_MAX_ITER),
                  cert_tol=params.get("cert_tol", DEFAULT_TOL))
    result = {"n": C.n, "d": C.d, "see_saw": res.to_json()}
    if "net" in params:
        result["net"] = net_check(C, params["k"], params["net"],
                                  cert_tol=params.get("cert_tol", DEFAULT_TOL)).to_json()
    out.json("kpos.json", result)
    hist = res.history
    out.svg("kpos_descent", ["step", "value"], [[i, v] for i, v in enumerate(hist)],
            lambda p: svgplot.line_chart(p, [("best run", list(range(len(hist))), hist)],
                                         title=f"see-saw descent, k={params['k']}",
                                         xlabel="accepted step", ylabel="lambda_min"))
    return result, EXIT_OK


def cmd_spectrum(params: dict, seed: Seed, out: Outputs) -> Tuple[dict, int]:
    ens = params["ensemble"]
    reference = Semicircle(0.0, 1.0)
    if ens == "gue":
        _require(params, "spectrum", "d")
        eig = spectrum(sample_gue(params["d"], seed))
    elif ens == "block_gue":
        _require(params, "spectrum", "n", "d")
        fam = sample_family(params["n"], params["d"], seed)
        eig = spectrum(build_block_gue(params["n"], params["d"], fam))
    else:
        _require(params, "spectrum", "spec", "d")
        reference = from_json(params["spec"])
        eig = deterministic_diagonal(reference, params["d"])
    bins = params.get("bins", 50)
    edges, dens = histogram(eig, bins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    try:
        ref = np.asarray(density(reference, centers), dtype=float)
    except FreeposError:
        ref = None
    result = {"ensemble": ens, "params": params, "size": int(eig.size),
              "min": float(eig[0]), "max": float(eig[-1]),
              "norm": float(max(abs(eig[0]), abs(eig[-1]))),
              "kolmogorov_distance": kolmogorov_distance(eig, reference)}
    out.json("spectrum.json", result)
    out.csv("eigenvalues.csv", ["index", "eigenvalue"], [[i, v] for i, v in enumerate(eig)])
    hist_rows = [[lo, hi, h, None if ref is None else r]
                 for lo, hi, h, r in zip(edges[:-1], edges[1:], dens,
                                         ref if ref is not None else [None] * len(dens))]
    out.svg("histogram", ["left", "right", "density", "reference_density"], hist_rows,
            lambda p: svgplot.histogram_chart(
                p, list(edges), list(dens),
                overlay=(list(centers), list(ref)) if ref is not None else None,
                title=f"{ens} spectrum", xlabel="eigenvalue"))
    return result, EXIT_OK


HANDLERS: Dict[str, Callable] = {
    "threshold": cmd_threshold,
    "freeconv": cmd_freeconv,
    "witness": cmd_witness,
    "separability": cmd_separability,
    "kpos": cmd_kpos,
    "spectrum": cmd_spectrum,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def execute(command: str, params: dict, seed_value: int, out_dir, emit) -> Tuple[dict, int]:
    """Validate, run one command and write its manifest."""
    params = validate_params(command, dict(params))
    if command == "kpos":
        params["matrix"] = str(Path(params["matrix"]).resolve())
    seed = Seed(seed_value, command)
    out = Outputs(Path(out_dir), emit)
    result, code = HANDLERS[command](params, seed, out)
    manifest = {
        "command": command,
        "params": params,
        "seed": seed_value,
        "emit": sorted(out.emit),
        "library_version": __version__,
        "backend": BACKEND,
        "schema": SCHEMA_FILE,
        "exit_code": code,
        "outputs": sorted(set(out.files)),
    }
    (out.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result, code


def _measure_arg(text: str):
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"bad measure JSON at line {exc.lineno}: {exc.msg}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with the command parameters")
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", default="freepos-out", help="output directory")
    common.add_argument("--emit", default="csv,json,svg",
                        help="comma-separated subset of csv,json,svg")

    parser = argparse.ArgumentParser(prog="freepos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"freepos {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("threshold", parents=[common], argument_default=S,
                       help="k-positivity table for a measure family")
    p.add_argument("--family", choices=["semicircle", "mp", "small_rank", "small-rank"])
    p.add_argument("--a", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--eps", type=float, help="projection trace for small_rank")
    p.add_argument("--n", type=int)

    p = sub.add_parser("freeconv", parents=[common], argument_default=S,
                       help="support of a free convolution power")
    p.add_argument("--spec", type=_measure_arg, help="measure JSON or @file")
    p.add_argument("--T", type=float)
    p.add_argument("--oracle", nargs=2, type=int, metavar=("M", "TRIALS"),
                   help="Monte Carlo cross-check with matrix size M")

    p = sub.add_parser("witness", parents=[common], argument_default=S,
                       help="Bell-witness detection experiment")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps", dest="shift_eps", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--tol-w", dest="tol_w", type=float)
    p.add_argument("--l", type=int, help="test l-separability instead of separability")
    p.add_argument("--certify", action="store_true",
                   help="issue indecomposability certificates")
    p.add_argument("--no-spectra", dest="spectra", action="store_false",
                   help="skip full spectra (faster)")

    p = sub.add_parser("separability", parents=[common], argument_default=S,
                       help="explicit separable decomposition of x I + GUE")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--x", type=float, help="shift; defaults to 2/alpha")
    p.add_argument("--trials", type=int)
    p.add_argument("--analytic-only", dest="analytic_only", action="store_true")

    p = sub.add_parser("kpos", parents=[common], argument_default=S,
                       help="see-saw search for k-positivity violations")
    p.add_argument("--matrix", help="FPRM binary or CSV (row,col,re,im) file")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--cert-tol", dest="cert_tol", type=float)
    p.add_argument("--net", type=int, metavar="RESOLUTION",
                   help="also scan an angular net (n <= 3, k = 1)")

    p = sub.add_parser("spectrum", parents=[common], argument_default=S,
                       help="eigenvalue histogram of a random ensemble")
    p.add_argument("--ensemble", choices=["gue", "block_gue", "block-gue", "diag"])
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--spec", type=_measure_arg)
    p.add_argument("--bins", type=int)

    p = sub.add_parser("rerun-from-manifest", help="repeat a run from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: <manifest dir>/rerun)")
    return parser


_COMMON = {"config", "seed", "out", "emit", "command"}


def _params_from_args(args: argparse.Namespace) -> dict:
    params = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            params = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
        if not isinstance(params, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    for key, value in vars(args).items():
        if key not in _COMMON:
            params[key] = value
    if "oracle" in params:
        m, trials = params.pop("oracle")
        params["oracle_m"], params["oracle_trials"] = m, trials
    if params.get("family") == "small-rank":
        params["family"] = "small_rank"
    if params.get("ensemble") == "block-gue":
        params["ensemble"] = "block_gue"
    return params


def _parse_emit(text: str) -> List[str]:
    emit = [e.strip() for e in text.split(",") if e.strip()]
    bad = [e for e in emit if e not in ("csv", "json", "svg")]
    if bad:
        raise ConfigError(f"--emit: unknown output kinds {bad}")
    return emit


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun-from-manifest":
            mpath = Path(args.manifest)
            manifest = json.loads(mpath.read_text())
            run = {k: manifest[k] for k in ("command", "params", "seed", "emit") if k in manifest}
            validate_run_config(run)
            out = args.out or str(mpath.parent / "rerun")
            result, code = execute(run["command"], run["params"], run.get("seed", 0), out,
                                   run.get("emit", ["csv", "json", "svg"]))
        else:
            result, code = execute(args.command, _params_from_args(args), args.seed,
                                   args.out, _parse_emit(args.emit))
    except (ConfigError, FormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"freepos: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ConvergenceFailure) as exc:
        print(f"freepos: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FreeposError, ValueError) as exc:
        print(f"freepos: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, indent=2, sort_keys=True, default=float))
    return code


if __name__ == "__main__":
    sys.exit(main())
