"""Command-line interface: ``kcp {detect,sweep,metrics,verify,simulate}``.

Every command prints one JSON document (to ``--output`` when given).
Failures print ``{"error": {"type": ..., "message": ...}}`` on stderr and
exit with 2 (usage), 3 (bad or uninformative data), 4 (infeasible
configuration) or 1 (a verification check failed).
"""
from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import math
import sys
from pathlib import Path

import numpy as np

from .gram import Segmentation, SegmentationError, build_gram, empirical_risk
from .kernels import FAMILIES, KernelError, KernelSpec
from .metrics import all_losses, check_lemma1, check_prop1
from .segmenter import (DEFAULT_D_MAX, CalibrationError, InfeasibleError, PenaltySpec, calibrate,
                        min_length, select_dimension, solve_all_d, solve_fixed_d)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int):
        super().__init__(message)
        self.kind, self.code = kind, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}", EXIT_USAGE)


def load_schema(name: str) -> dict:
    """Bundled JSON schema, e.g. ``load_schema("detect_result")``."""
    return json.loads(importlib.resources.files("kcp").joinpath("schemas", f"{name}.json").read_text())


def read_csv(path: str, header: bool = False) -> np.ndarray:
    """Numeric rows of constant width; blank lines are skipped."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise CliError("unreadable_input", f"cannot read {path}: {exc.strerror}", EXIT_DATA) from exc
    if header:
        rows = rows[1:]
    if len(rows) < 2:
        raise CliError("bad_data", f"{path}: need at least two observations", EXIT_DATA)
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise CliError("ragged_rows", f"{path}: row {i + 1} has {len(row)} columns, expected {width}",
                           EXIT_DATA)
        try:
            out[i] = [float(c) for c in row]
        except ValueError as exc:
            raise CliError("non_numeric", f"{path}: row {i + 1}: {exc}", EXIT_DATA) from exc
    if not np.all(np.isfinite(out)):
        raise CliError("non_numeric", f"{path}: non-finite values", EXIT_DATA)
    return out


def _kernel(args) -> KernelSpec:
    bw = args.bandwidth
    if bw is None and args.kernel in ("gaussian", "laplace"):
        bw = "median"
    if bw is not None and bw != "median":
        try:
            bw = float(bw)
        except ValueError:
            raise CliError("usage", f"--bandwidth must be a number or 'median', got {bw!r}", EXIT_USAGE)
    try:
        return KernelSpec(args.kernel, degree=args.degree, bandwidth=bw)
    except KernelError as exc:
        raise CliError("usage", str(exc), EXIT_USAGE) from exc


def _delta_n(text: str | None, n: int) -> float:
    if text is None:
        return 0.0
    num, sep, den = text.partition("/")
    try:
        if sep:
            if den.strip() != "n":
                raise ValueError
            return float(num) / n
        return float(text)
    except ValueError:
        raise CliError("usage", f"--delta-n must be a number or 'k/n', got {text!r}", EXIT_USAGE)


def _gram(args):
    x = read_csv(args.input, args.header)
    spec = _kernel(args)
    try:
        spec = spec.resolve(x)
        return x, spec, build_gram(spec, x)
    except (KernelError, ValueError) as exc:
        raise CliError("bad_data", str(exc), EXIT_DATA) from exc


def _profile(gram, d_max: int, min_seg_len: int):
    if d_max < 1:
        raise CliError("usage", "--d-max must be >= 1", EXIT_USAGE)
    d_max = min(d_max, gram.n // max(min_seg_len, 1))
    return solve_all_d(gram, d_max, min_seg_len)


def cmd_detect(args) -> dict:
    if args.fixed_d is not None and args.penalty_c is not None:
        raise CliError("usage", "--fixed-d and --penalty-c are mutually exclusive", EXIT_USAGE)
    _, spec, gram = _gram(args)
    n = gram.n
    m2 = gram.max_diag
    penalty_c = None
    if args.fixed_d is not None:
        m = max(args.min_seg_len, min_length(n, _delta_n(args.delta_n, n)))
        tau = solve_fixed_d(gram, args.fixed_d, m / n if m > 1 else 0.0)
        profile = _profile(gram, args.d_max, m)
        mode = "fixed_d"
    else:
        profile = _profile(gram, args.d_max, args.min_seg_len)
        if args.penalty_c is not None:
            penalty_c = args.penalty_c
            mode = "fixed_c"
        else:
            try:
                penalty_c = calibrate(profile, m2, n).c_selected
            except CalibrationError as exc:
                raise CliError("uninformative_data", f"cannot calibrate the penalty: {exc}", EXIT_DATA) from exc
            mode = "auto_penalty"
        tau = profile.segmentation(select_dimension(profile, PenaltySpec(penalty_c, m2), n))
    return {
        "boundaries": tau.to_list(),
        "d_hat": tau.n_segments,
        "risk": empirical_risk(gram, tau),
        "penalty_c": penalty_c,
        "m_squared": m2,
        "per_d": profile.to_dict()["per_d"],
        "selection": mode,
        "kernel": spec.to_dict(),
        "n": n,
    }


def cmd_sweep(args) -> dict:
    _, spec, gram = _gram(args)
    profile = _profile(gram, args.d_max, args.min_seg_len)
    m2 = gram.max_diag
    try:
        cal = calibrate(profile, m2, gram.n)
        calibration = {"c_grid": cal.c_grid.tolist(), "d_hat": cal.dims.tolist(),
                       "c_jump": cal.c_jump, "c_selected": cal.c_selected}
    except CalibrationError:
        calibration = None
    return {"n": gram.n, "kernel": spec.to_dict(), "m_squared": m2, **profile.to_dict(),
            "calibration": calibration}


def read_boundaries(text: str) -> Segmentation:
    """Boundaries from a JSON file (a list or an object with ``boundaries``), a JSON list, or ``0,8,17,19``."""
    path = Path(text)
    try:
        if path.is_file():
            data = json.loads(path.read_text())
        elif text.lstrip().startswith("["):
            data = json.loads(text)
        else:
            data = [int(v) for v in text.split(",")]
        if isinstance(data, dict):
            data = data["boundaries"]
        return Segmentation(data)
    except (ValueError, KeyError, TypeError, SegmentationError) as exc:
        raise CliError("bad_data", f"cannot read boundaries from {text!r}: {exc}", EXIT_DATA) from exc


def cmd_metrics(args) -> dict:
    t1, t2 = read_boundaries(args.tau1), read_boundaries(args.tau2)
    if t1.n != t2.n:
        raise CliError("bad_data", f"segmentations end at different n: {t1.n} vs {t2.n}", EXIT_DATA)
    out = {"n": t1.n, "d1": t1.n_segments, "d2": t2.n_segments, "losses": all_losses(t1, t2),
           "lemma1": check_lemma1(t1, t2).to_dict(), "prop1": None}
    if t1.n_segments == t2.n_segments:
        out["prop1"] = check_prop1(t1, t2).to_dict()
    return out


def cmd_verify(args) -> dict:
    from .oracle import (check_approx_bounds, check_kolmogorov, coarse_bound_equality_case, run_battery,
                         sample_max_partial_sums)

    seed = 0 if args.seed is None else args.seed
    battery = {k: v.to_dict() for k, v in run_battery(args.instances, seed).items()}
    mu, tau = coarse_bound_equality_case(10, 0.0, 1.0)
    coarse = check_approx_bounds(mu, tau)[0]
    battery["equality_case"] = {"slack": coarse.slack, "passed": abs(coarse.slack) < 1e-10}
    rng = np.random.default_rng(seed)
    samples = sample_max_partial_sums(100, args.trials, rng)
    kolm = [check_kolmogorov(100, x, args.trials, samples=samples).to_dict() for x in (15.0, 30.0, 60.0)]
    passed = all(v["passed"] for v in battery.values()) and all(k["passed"] for k in kolm)
    return {"passed": passed, "checks": battery, "kolmogorov": kolm}


def cmd_simulate(args) -> dict:
    from .simulate import ExperimentConfig, ExperimentError, run_experiment

    if args.seed is None:
        raise CliError("usage", "simulate requires --seed", EXIT_USAGE)
    try:
        data = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise CliError("unreadable_input", f"cannot read {args.config}: {exc.strerror}", EXIT_DATA) from exc
    except json.JSONDecodeError as exc:
        raise CliError("bad_data", f"{args.config}: invalid JSON: {exc}", EXIT_DATA) from exc
    data["master_seed"] = args.seed
    try:
        config = ExperimentConfig.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("bad_config", f"{args.config}: {exc}", EXIT_DATA) from exc
    try:
        result = run_experiment(config)
    except ExperimentError as exc:
        code = EXIT_INFEASIBLE if isinstance(exc.__cause__, InfeasibleError) else EXIT_DATA
        raise CliError("replication_failed", str(exc), code) from exc
    if args.csv:
        Path(args.csv).write_text(result.to_csv())
    return result.summary()


def _common(parser: argparse.ArgumentParser, suppress: bool):
    def d(value):
        return argparse.SUPPRESS if suppress else value

    g = parser.add_argument_group("global options")
    g.add_argument("--kernel", choices=FAMILIES, default=d("gaussian"))
    g.add_argument("--bandwidth", default=d(None), help="positive real or 'median' (default for gaussian/laplace)")
    g.add_argument("--degree", type=int, default=d(None), help="polynomial degree")
    g.add_argument("--penalty-c", type=float, default=d(None), help="fixed penalty constant C")
    g.add_argument("--fixed-d", type=int, default=d(None), help="fixed number of segments")
    g.add_argument("--delta-n", default=d(None), help="minimal segment fraction, number or 'k/n'")
    g.add_argument("--d-max", type=int, default=d(DEFAULT_D_MAX))
    g.add_argument("--min-seg-len", type=int, default=d(1))
    g.add_argument("--seed", type=int, default=d(None))
    g.add_argument("--output", default=d(None), help="write JSON here instead of stdout")
    g.add_argument("--header", action="store_true", default=d(False), help="skip the first CSV line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kcp", description="Kernel change-point detection.")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="segment a CSV series")
    p.add_argument("input")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="minimal risk for every number of segments")
    p.add_argument("input")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="losses between two segmentations")
    p.add_argument("tau1")
    p.add_argument("tau2")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("verify", help="randomized check of the risk-decomposition inequalities")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--trials", type=int, default=100_000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run a consistency experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--csv", help="also write per-replication losses here")
    p.set_defaults(func=cmd_simulate)

    for p in sub.choices.values():
        _common(p, suppress=True)
    return parser


def _clean(obj):
    # JSON has no NaN or infinity
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _emit_error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": {"type": kind, "message": message, "exit_code": code}}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        result = args.func(args)
        if args.command == "verify" and not result["passed"]:
            code = EXIT_FAILED
        else:
            code = EXIT_OK
        text = json.dumps(_clean(result), indent=2)
        if args.output:
            Path(args.output).write_text(text + "\n")
        else:
            print(text)
        return code
    except CliError as exc:
        return _emit_error(exc.kind, str(exc), exc.code)
    except InfeasibleError as exc:
        return _emit_error("infeasible", str(exc), EXIT_INFEASIBLE)
    except (SegmentationError, KernelError) as exc:
        return _emit_error("bad_data", str(exc), EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
