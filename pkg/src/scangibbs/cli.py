"""Experiment runner: binds models to analyses and emits plot-ready CSVs.

Every run writes a JSON manifest echoing the resolved configuration so
the outputs can be reproduced exactly. Summary rows share one schema
(experiment, model_id, sampler, unit, metric, value); wide results such
as TV curves and coalescence samples go to per-analysis files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import chain, coupling, lumped, mixing, model as model_mod, spectral

ENV_OUT_DIR = "SCANGIBBS_OUT_DIR"

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_NUMERICAL_ERROR = 2

_USER_ERRORS = (
    model_mod.ModelError,
    chain.StateSpaceCapError,
    mixing.MixingError,
    lumped.LumpingError,
    FileNotFoundError,
    ValueError,
)
_NUMERICAL_ERRORS = (
    chain.NumericalError,
    chain.StationarityError,
    spectral.NonErgodicError,
    coupling.CouplingInvariantError,
    FloatingPointError,
)


class _OutputSet:
    """Atomic CSV/JSON writer that can roll back on failure."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.written = []

    def write_text(self, name, text):
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, name)
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(path)
        return path

    def write_csv(self, name, header, rows):
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_format_cell(cell) for cell in row))
        return self.write_text(name, "\n".join(lines) + "\n")

    def rollback(self):
        for path in self.written:
            if os.path.exists(path):
                os.unlink(path)
        self.written.clear()


def _format_cell(cell):
    if isinstance(cell, bool):
        return "true" if cell else "false"
    if isinstance(cell, float):
        return repr(cell)
    return str(cell)


def _resolve_model(args) -> model_mod.BipartiteModel:
    if getattr(args, "model_file", None):
        with open(args.model_file) as fh:
            return model_mod.model_from_json(fh.read())
    kind = getattr(args, "model", None)
    if kind is None:
        raise model_mod.ModelError("no model given: use --model or --model-file")
    if kind == "hardcore_knn":
        return model_mod.build_hardcore_complete_bipartite(args.n)
    if kind == "random_rbm":
        if args.seed is None:
            raise model_mod.ModelError("random_rbm requires --seed")
        m = args.m if args.m is not None else args.n1 * args.n2
        return model_mod.random_bipartite_model(
            args.n1, args.n2, m, args.weight_low, args.weight_high, args.seed
        )
    if kind == "zero_rbm":
        return model_mod.build_rbm(
            np.zeros((args.n1, args.n2)), np.zeros(args.n1), np.zeros(args.n2)
        )
    raise model_mod.ModelError(f"unknown inline model kind {kind!r}")


def _samplers(args):
    names = [s.strip() for s in args.samplers.split(",") if s.strip()]
    known = {"random_update", "alternating_scan"}
    bad = set(names) - known
    if bad:
        raise ValueError(f"unknown samplers: {sorted(bad)}")
    if not names:
        raise ValueError("at least one sampler is required")
    return names


def _kernels_for(mdl, space, samplers, lazy):
    out = {}
    if "random_update" in samplers:
        out["random_update"] = chain.random_update_kernel(mdl, space, lazy=lazy)
    if "alternating_scan" in samplers:
        out["alternating_scan"] = chain.scan_kernels(mdl, space)["P_AS"]
    return out


def _spectral_rows(mdl, args):
    space = chain.enumerate_state_space(mdl, cap=args.cap)
    rows = []
    for sampler, kernel in _kernels_for(mdl, space, _samplers(args), args.lazy).items():
        report = spectral.relaxation_time(kernel, space)
        for metric, value in (
            ("gap", report.gap),
            ("relaxation_time", report.relaxation_time),
            ("second_largest_modulus", report.second_largest_modulus),
            ("reversible", report.reversible),
        ):
            rows.append(("spectral", mdl.label, sampler, kernel.unit, metric, value))
    return rows


def _mixing_rows(mdl, args):
    space = chain.enumerate_state_space(mdl, cap=args.cap)
    summary, curve = [], []
    for sampler, kernel in _kernels_for(mdl, space, _samplers(args), args.lazy).items():
        report = mixing.exact_mixing_time(
            kernel, space, threshold=args.threshold, t_max=args.t_max,
            method=args.mixing_method,
        )
        value = report.mixing_time if report.mixing_time is not None else "truncated"
        summary.append(("mixing", mdl.label, sampler, kernel.unit, "mixing_time", value))
        summary.append(
            ("mixing", mdl.label, sampler, kernel.unit, "truncated", report.truncated)
        )
        for t, tv in report.tv_curve:
            curve.append((mdl.label, sampler, kernel.unit, t, tv))
    return summary, curve


def _lumped_rows(args):
    summary, curve = [], []
    for n in range(args.n_min, args.n_max + 1):
        space = lumped.lumped_state_space(n)
        model_id = f"hardcore_knn_lumped:{n}"
        kernels = {
            "random_update": lumped.lumped_ru_kernel(n, lazy=args.lazy),
            "alternating_scan": lumped.lumped_as_kernel(n),
        }
        for sampler in _samplers(args):
            kernel = kernels[sampler]
            report = spectral.relaxation_time(kernel, space)
            summary.append(
                ("lumped", model_id, sampler, kernel.unit, "gap", report.gap)
            )
            summary.append(
                ("lumped", model_id, sampler, kernel.unit,
                 "relaxation_time", report.relaxation_time)
            )
            mix = mixing.exact_mixing_time(
                kernel, space, threshold=args.threshold, t_max=args.t_max,
                method="doubling",
            )
            value = mix.mixing_time if mix.mixing_time is not None else "truncated"
            summary.append(
                ("lumped", model_id, sampler, kernel.unit, "mixing_time", value)
            )
            for t, tv in mix.tv_curve:
                curve.append((model_id, sampler, kernel.unit, t, tv))
    return summary, curve


def _coupling_rows(mdl, args):
    if args.seed is None:
        raise model_mod.ModelError("coupling requires --seed")
    summary, wide = [], []
    for sampler in _samplers(args):
        report = coupling.grand_coupling_time(
            mdl, sampler, seed=args.seed, replicates=args.replicates,
            max_updates=args.max_updates, lazy=args.lazy,
        )
        for metric, value in (
            ("mean", report.mean),
            ("median", report.median),
            ("q90", report.q90),
            ("truncated_count", report.truncated_count),
            ("replicates", report.replicates),
        ):
            summary.append(
                ("coupling", mdl.label, sampler, "variable_update", metric, value)
            )
        for rep, time in enumerate(report.samples):
            wide.append((mdl.label, sampler, rep, time, False))
    return summary, wide


def _verify_rows(args):
    suite = args.suite
    rows = []
    if suite == "theorem1":
        if args.seed is None:
            raise model_mod.ModelError("the theorem1 suite requires --seed")
        rng = np.random.Generator(np.random.Philox(key=np.uint64(args.seed)))
        for trial in range(args.trials):
            n1 = int(rng.integers(1, 6))
            n2 = int(rng.integers(1, 6))
            m = int(rng.integers(0, n1 * n2 + 1))
            mdl = model_mod.random_bipartite_model(
                n1, n2, m, args.weight_low, args.weight_high,
                int(rng.integers(0, 2 ** 62)),
            )
            res = spectral.verify_theorem1(mdl, cap=args.cap, lazy=args.lazy)
            rows.append(
                ("verify_theorem1", mdl.label, "both", "mixed", "holds",
                 res["holds"] and res["contraction_holds"])
            )
        return rows, None
    if suite == "mixing_bounds":
        mdl = _resolve_model(args)
        res = mixing.verify_mixing_bounds(
            mdl, cap=args.cap, threshold=args.threshold, t_max=args.t_max,
            lazy=args.lazy,
        )
        for metric, value in res.items():
            rows.append(("verify_mixing_bounds", mdl.label, "both", "mixed", metric, value))
        return rows, None
    if suite == "fill":
        mdl = _resolve_model(args)
        space = chain.enumerate_state_space(mdl, cap=args.cap)
        for sampler, kernel in _kernels_for(
            mdl, space, _samplers(args), args.lazy
        ).items():
            res = mixing.verify_fill_inequality(kernel, space)
            rows.append(
                ("verify_fill", mdl.label, sampler, kernel.unit, "holds", res["holds"])
            )
        return rows, None
    raise ValueError(f"unknown verify suite {suite!r}")


def _run_analysis(analysis, args, outputs):
    if analysis == "spectral":
        mdl = _resolve_model(args)
        outputs.write_csv(
            "spectral.csv",
            ("experiment", "model_id", "sampler", "unit", "metric", "value"),
            _spectral_rows(mdl, args),
        )
    elif analysis == "mixing":
        mdl = _resolve_model(args)
        summary, curve = _mixing_rows(mdl, args)
        outputs.write_csv(
            "mixing.csv",
            ("experiment", "model_id", "sampler", "unit", "metric", "value"),
            summary,
        )
        outputs.write_csv(
            "mixing_curve.csv",
            ("model_id", "sampler", "unit", "t", "worst_tv"),
            curve,
        )
    elif analysis == "lumped":
        summary, curve = _lumped_rows(args)
        outputs.write_csv(
            "lumped.csv",
            ("experiment", "model_id", "sampler", "unit", "metric", "value"),
            summary,
        )
        outputs.write_csv(
            "lumped_curve.csv",
            ("model_id", "sampler", "unit", "t", "worst_tv"),
            curve,
        )
    elif analysis == "coupling":
        mdl = _resolve_model(args)
        summary, wide = _coupling_rows(mdl, args)
        outputs.write_csv(
            "coupling_summary.csv",
            ("experiment", "model_id", "sampler", "unit", "metric", "value"),
            summary,
        )
        outputs.write_csv(
            "coupling.csv",
            ("model_id", "sampler", "replicate", "coalescence_updates", "truncated"),
            wide,
        )
    elif analysis == "verify":
        rows, _ = _verify_rows(args)
        outputs.write_csv(
            f"verify_{args.suite}.csv",
            ("experiment", "model_id", "sampler", "unit", "metric", "value"),
            rows,
        )
    else:
        raise ValueError(f"unknown analysis {analysis!r}")


def _manifest(args, analyses):
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    resolved["analyses"] = analyses
    return json.dumps(resolved, indent=2, sort_keys=True, default=str) + "\n"


def _add_common(parser):
    parser.add_argument("--model", help="inline model kind: hardcore_knn, random_rbm, zero_rbm")
    parser.add_argument("--model-file", help="path to a JSON model description")
    parser.add_argument("--n", type=int, default=3)
    parser.add_argument("--n1", type=int, default=3)
    parser.add_argument("--n2", type=int, default=3)
    parser.add_argument("--m", type=int, default=None)
    parser.add_argument("--weight-low", type=float, default=-2.0)
    parser.add_argument("--weight-high", type=float, default=2.0)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--cap", type=int, default=chain.DEFAULT_CAP)
    parser.add_argument("--threshold", type=float, default=mixing.DEFAULT_THRESHOLD)
    parser.add_argument("--t-max", type=int, default=mixing.DEFAULT_T_MAX)
    parser.add_argument("--max-updates", type=int, default=10 ** 7)
    parser.add_argument("--replicates", type=int, default=50)
    parser.add_argument(
        "--samplers", default="random_update,alternating_scan",
        help="comma-separated subset of random_update, alternating_scan",
    )
    parser.add_argument("--lazy", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument(
        "--mixing-method", choices=("iterate", "doubling"), default="doubling"
    )
    parser.add_argument("--n-min", type=int, default=2)
    parser.add_argument("--n-max", type=int, default=8)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument(
        "--out", default=None,
        help=f"output directory (default: ${ENV_OUT_DIR} or the working directory)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scangibbs",
        description="Scan-order spectral and mixing experiments for bipartite Gibbs samplers",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectral", "mixing", "lumped", "coupling", "run"):
        p = sub.add_parser(name)
        _add_common(p)
    verify = sub.add_parser("verify")
    _add_common(verify)
    verify.add_argument(
        "--suite", choices=("theorem1", "mixing_bounds", "fill"), default="theorem1"
    )
    sub.choices["run"].add_argument(
        "--analyses", default="spectral,mixing",
        help="comma-separated subset of spectral, mixing, lumped, coupling",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = args.out or os.environ.get(ENV_OUT_DIR) or os.getcwd()
    outputs = _OutputSet(out_dir)
    if args.command == "run":
        analyses = [a.strip() for a in args.analyses.split(",") if a.strip()]
    else:
        analyses = [args.command]
    if not analyses:
        print("scangibbs: no analyses selected", file=sys.stderr)
        return EXIT_USER_ERROR
    try:
        for analysis in analyses:
            _run_analysis(analysis, args, outputs)
        outputs.write_text("run_manifest.json", _manifest(args, analyses))
    except _NUMERICAL_ERRORS as exc:
        outputs.rollback()
        print(f"scangibbs: numerical failure in {analyses}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR
    except _USER_ERRORS as exc:
        outputs.rollback()
        print(f"scangibbs: error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
