"""Command-line entry point: generate / detect / bench / decompose / theory-check.

Exit codes: 0 ok, 1 runtime failure, 2 usage error, 3 failed theory property.
Output paths are resolved against $DRIFTKIT_OUTPUT_DIR when set. A TOML or
JSON config file may provide per-detector parameter sections; flags given on
the command line win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tomllib
from pathlib import Path

import numpy as np

from . import theory
from .bench import (
    MatchingConfig,
    default_detector_configs,
    run_benchmark,
    run_detector,
    score_detections,
    table1_suite,
)
from .decompose import (
    decomposition_to_csv,
    kcurve_fit,
    kcurve_transform,
    linear_drifda,
)
from .stats import time_dependency_score
from .streams import (
    DATASETS,
    StreamSpec,
    UnknownDataset,
    generate,
    ingest_csv,
    read_truth,
    write_csv,
    write_truth,
)

THEOREM_LABELS = [
    ("Theorem 1 (no drift <=> constant distribution)", "drift_iff_changing"),
    ("Theorem 2 (proper drift <=> alternating pair)", "proper_iff_alternating"),
    ("Corollary 1 (proper drift <=> change point)", "proper_iff_change_point"),
    ("Theorem 4 (proper drift <=> data-time dependence)", "proper_iff_dependency"),
    ("Implication (proper drift => drift)", "proper_implies_drift"),
    ("Remark 3 (full support: drift <=> proper drift)",
     "full_support_drift_iff_proper"),
    ("Window merge (mixture consistency)", "window_merge_consistency"),
]


def _out_path(path: str) -> Path:
    base = os.environ.get("DRIFTKIT_OUTPUT_DIR", "")
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _parse_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise argparse.ArgumentTypeError(f"expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        params[key] = _parse_value(value)
    return params


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if p.suffix == ".toml":
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    with open(p) as fh:
        return json.load(fh)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftkit",
        description="Streaming drift detection, decomposition, and theory checks",
    )
    parser.add_argument("--config", help="TOML/JSON config file with defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p_gen = sub.add_parser("generate", help="write a benchmark stream to CSV",
                           formatter_class=fmt)
    p_gen.add_argument("--dataset", required=True,
                       help=f"one of: {', '.join(DATASETS)}")
    p_gen.add_argument("--n", type=int, required=True, help="sample count")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--param", action="append", default=[],
                       metavar="KEY=VALUE", help="dataset parameter override")
    p_gen.add_argument("-o", "--output", required=True, help="output CSV path")

    p_det = sub.add_parser("detect", help="run one detector over a stream CSV",
                           formatter_class=fmt)
    p_det.add_argument("--input", required=True, help="stream CSV path")
    p_det.add_argument("--detector", required=True,
                       help="swidd | adwin | ddm | hdddm | k2st")
    p_det.add_argument("--seed", type=int, default=0)
    p_det.add_argument("--truth", help="change-point sidecar JSON for scoring")
    p_det.add_argument("--tolerance", type=int, default=100,
                       help="matching window in samples")
    p_det.add_argument("--param", action="append", default=[],
                       metavar="KEY=VALUE", help="detector parameter override")
    p_det.add_argument("-o", "--output", help="write the report JSON here")

    p_bench = sub.add_parser("bench", help="run the detector comparison grid",
                             formatter_class=fmt)
    p_bench.add_argument("--suite", default="table1", choices=["table1"])
    p_bench.add_argument("--seeds", type=int, default=3,
                         help="number of seeds (0..seeds-1)")
    p_bench.add_argument("--tolerance", type=int, default=100)
    p_bench.add_argument("--emit-csv", help="write per-cell rows to this CSV")
    p_bench.add_argument("-o", "--output", help="write the report JSON here")

    p_dec = sub.add_parser("decompose",
                           help="split a stream into drifting/non-drifting parts",
                           formatter_class=fmt)
    p_dec.add_argument("--input", required=True, help="stream CSV path")
    p_dec.add_argument("--method", default="linear", choices=["linear", "kcurve"])
    p_dec.add_argument("--seed", type=int, default=0)
    p_dec.add_argument("--sources", type=int, default=None,
                       help="ICA source count (linear; default: features + 1)")
    p_dec.add_argument("--i-min", default="auto",
                       help="source relevance threshold (linear)")
    p_dec.add_argument("--k", type=int, default=20, help="curve count (kcurve)")
    p_dec.add_argument("--chunks", type=int, default=20,
                       help="ingestion chunk count (kcurve)")
    p_dec.add_argument("--prototypes", type=int, default=10,
                       help="prototypes per curve (kcurve)")
    p_dec.add_argument("--knn", type=int, default=5,
                       help="k for the dependency score")
    p_dec.add_argument("-o", "--output", required=True,
                       help="decomposition CSV; scores go to <output>.scores.json")

    p_thy = sub.add_parser("theory-check",
                           help="verify the drift equivalences on random instances",
                           formatter_class=fmt)
    p_thy.add_argument("--instances", type=int, default=1000)
    p_thy.add_argument("--seed", type=int, default=0)
    p_thy.add_argument("--max-times", type=int, default=6)
    p_thy.add_argument("--max-points", type=int, default=6)
    p_thy.add_argument("--fixture", help="JSON file with P_T and kernel to inspect")
    return parser


def _cmd_generate(args, parser) -> int:
    if args.n < 1:
        parser.error("--n must be at least 1")
    try:
        params = _parse_params(args.param)
        stream = generate(
            StreamSpec(args.dataset, n=args.n, seed=args.seed, params=params)
        )
    except UnknownDataset as exc:
        parser.error(str(exc))
    out = _out_path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(stream, out)
    write_truth(stream, out.with_suffix(".truth.json"))
    print(f"wrote {out} and {out.with_suffix('.truth.json')}")
    return 0


def _cmd_detect(args, config, parser) -> int:
    stream = ingest_csv(args.input)
    params = dict(config.get(args.detector, {}))
    params.update(_parse_params(args.param))
    detections, elapsed = run_detector(args.detector, stream, params,
                                       seed=args.seed)
    for idx in detections:
        print(f"drift at index {idx} (t={stream.t[idx]:.6g})")
    report = {
        "detector": args.detector,
        "n": len(stream),
        "detections": detections,
        "detection_timestamps": [float(stream.t[i]) for i in detections],
        "runtime": elapsed,
    }
    if args.truth:
        change_points, _ = read_truth(args.truth)
        truth_idx = [int(np.searchsorted(stream.t, cp)) for cp in change_points]
        score = score_detections(truth_idx, detections,
                                 MatchingConfig(args.tolerance))
        report.update(
            {
                "truth": truth_idx,
                "tolerance": args.tolerance,
                "f1": score.f1,
                "precision": score.precision,
                "recall": score.recall,
                "mean_delay": score.mean_delay,
            }
        )
        print(f"f1={score.f1:.3f} precision={score.precision:.3f} "
              f"recall={score.recall:.3f}")
    if args.output:
        out = _out_path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2))
    return 0


def _cmd_bench(args, config) -> int:
    suite = table1_suite()
    merged = []
    for spec, detector_cfgs in suite:
        cfgs = {
            name: {**params, **config.get(name, {})}
            for name, params in detector_cfgs.items()
        }
        merged.append((spec, cfgs))
    report = run_benchmark(
        merged, seeds=list(range(args.seeds)), cfg=MatchingConfig(args.tolerance)
    )
    print(report.text_table())
    if args.output:
        out = _out_path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.to_json())
    if args.emit_csv:
        out = _out_path(args.emit_csv)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(report.csv_rows()) + "\n")
    return 0


def _cmd_decompose(args) -> int:
    stream = ingest_csv(args.input)
    if args.method == "linear":
        i_min = args.i_min if args.i_min == "auto" else float(args.i_min)
        dec = linear_drifda(stream, n_sources=args.sources, i_min=i_min,
                            seed=args.seed)
        model_json = None
    else:
        model = kcurve_fit(stream, k=args.k, n_chunks=args.chunks,
                           prototypes_per_curve=args.prototypes, seed=args.seed)
        dec = kcurve_transform(model, stream)
        model_json = model.to_json()
    out = _out_path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    decomposition_to_csv(stream, dec, out)
    score_x = time_dependency_score(stream.x, stream.t, k=args.knn)
    score_resid = time_dependency_score(dec.residual, stream.t, k=args.knn)
    scores_path = Path(str(out) + ".scores.json")
    scores_path.write_text(
        json.dumps(
            {
                "method": args.method,
                "score_x": score_x,
                "score_residual": score_resid,
            },
            indent=2,
        )
    )
    if model_json is not None:
        Path(str(out) + ".model.json").write_text(model_json)
    print(f"dependency score: raw={score_x:.4f} residual={score_resid:.4f}")
    print(f"wrote {out} and {scores_path}")
    return 0


def _cmd_theory_check(args) -> int:
    failed = False
    if args.fixture:
        proc = theory.FiniteDriftProcess.from_json(Path(args.fixture).read_text())
        print(f"fixture: |T|={proc.n_times} |X|={proc.n_points}")
        proper = theory.has_proper_drift(proc)
        print(f"  has_drift: {theory.has_drift(proc)}")
        print(f"  has_proper_drift: {proper}")
        print(f"  has_dependency_drift: {theory.has_dependency_drift(proc)}")
        print(f"  change_point: {theory.change_point(proc)}")
        pair = theory.find_alternating_pair(proc)
        print(f"  alternating_pair: "
              f"{tuple(sorted(pair[0].members)) if pair else None}")
        consistent = (
            proper
            == theory.has_dependency_drift(proc)
            == (pair is not None)
            == (theory.change_point(proc) is not None)
        )
        if not consistent:
            print("  equivalences: FAIL")
            failed = True

    results = theory.verify_equivalences(
        args.instances, args.seed, args.max_times, args.max_points
    )
    for label, key in THEOREM_LABELS:
        violations, checked = results[key]
        if violations:
            print(f"{label}: FAIL ({violations}/{checked} violations)")
            failed = True
        else:
            print(f"{label}: PASS ({checked} instances)")
    return 3 if failed else 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config: {exc}")
    try:
        if args.command == "generate":
            return _cmd_generate(args, parser)
        if args.command == "detect":
            return _cmd_detect(args, config, parser)
        if args.command == "bench":
            return _cmd_bench(args, config)
        if args.command == "decompose":
            return _cmd_decompose(args)
        if args.command == "theory-check":
            return _cmd_theory_check(args)
        parser.error(f"unknown command {args.command!r}")
    except (ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
