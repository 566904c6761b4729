"""Command-line surface: ingest, estimate, sensitivity, paths, simulate.

Every artifact embeds the full run configuration and tool version; outputs
carry no timestamps, so re-running a command with the same inputs
reproduces them byte for byte. Exit codes: 0 success, 1 internal error,
2 input/schema error, 3 empty or degenerate data.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .dag import CreditDag, generic_dag
from .dataset import read_dataset, validate, write_dataset
from .errors import (
    AuditError,
    DegenerateAllocation,
    DegenerateOutcome,
    DomainError,
    EmptyCohort,
    EmptyGroup,
    EmptyPool,
    SchemaMismatch,
    TooFewUnits,
)
from .estimator import EstimatorConfig, cross_fit_estimate
from .hmda import CohortConfig, build_cohort, group_summary, parse_lar
from .nuisance import NuisanceConfig
from .oracle import ScmSpec, generate_dataset, oracle_effects, preset_scm
from .paths import path_specific_effects
from .sensitivity import bounds_statement, build_sensitivity

_INPUT_ERRORS = (SchemaMismatch, DomainError, ValueError, FileNotFoundError, KeyError)
_DATA_ERRORS = (EmptyCohort, EmptyGroup, DegenerateOutcome, TooFewUnits, EmptyPool)


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _tool_stamp(config: dict) -> dict:
    return {"tool": "fairdecomp", "version": __version__, "config": config}


def cmd_ingest(args) -> int:
    config = (
        CohortConfig.from_dict(json.loads(Path(args.cohort_config).read_text(encoding="utf-8")))
        if args.cohort_config
        else CohortConfig()
    )
    parsed = parse_lar(args.lar)
    result = build_cohort(parsed.records, config)
    report = validate(result.dataset)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(report.dataset, out / "dataset.csv", out / "schema.json")
    attrition = _tool_stamp(config.to_dict())
    attrition.update(result.to_dict())
    attrition["parse_skipped"] = parsed.skipped
    attrition["validation"] = report.to_dict()
    attrition["group_summary"] = group_summary(report.dataset)
    _write_json(out / "attrition.json", attrition)
    print(f"cohort: {result.n_cohort} of {result.n_input} rows -> {out / 'dataset.csv'}")
    return 0


def _load_estimator_config(args) -> EstimatorConfig:
    base: dict = {}
    if getattr(args, "config", None):
        base = json.loads(Path(args.config).read_text(encoding="utf-8"))
    nuis_kwargs = base.get("nuisance", {})
    if args.outcome_learner:
        nuis_kwargs["outcome_learner"] = args.outcome_learner
    if args.propensity_learner:
        nuis_kwargs["propensity_learner"] = args.propensity_learner
    if args.ratio_learner:
        nuis_kwargs["ratio_learner"] = args.ratio_learner
    if args.clip_probability is not None:
        lo = args.clip_probability
        nuis_kwargs["prob_clip"] = (lo, 1.0 - lo)
    if args.clip_ratio is not None:
        nuis_kwargs["ratio_clip"] = args.clip_ratio
    if "prob_clip" in nuis_kwargs:
        nuis_kwargs["prob_clip"] = tuple(nuis_kwargs["prob_clip"])
    fields = {}
    for key in ("k", "d_draws", "seed", "level", "positivity_warn_share"):
        if key in base:
            fields[key] = base[key]
        override = getattr(args, key if key != "k" else "folds", None)
        if override is not None:
            fields[key] = override
    return EstimatorConfig(nuisance=NuisanceConfig(**nuis_kwargs), **fields)


def cmd_estimate(args) -> int:
    dataset = read_dataset(args.dataset, args.schema)
    report = validate(dataset)
    dataset = report.dataset
    dag = CreditDag.load(args.dag) if args.dag else generic_dag(dataset.w_names, dataset.m_names)
    config = _load_estimator_config(args)
    est = cross_fit_estimate(dataset, dag, config)

    try:
        paths = path_specific_effects(dataset, est.iie)
        path_rows = paths.to_rows()
        path_note = "mixed-sign products; shares not interpretable" if paths.mixed_sign else None
    except DegenerateAllocation as exc:
        path_rows = [
            {"mediator": name, "alpha": float(exc.alpha[j]), "beta": float(exc.beta[j]),
             "product": float(exc.products[j]), "allocated": None}
            for j, name in enumerate(dataset.m_names)
        ]
        path_note = str(exc)

    total = est.total_contrast
    audit = _tool_stamp(config.to_dict())
    audit.update(est.to_dict())
    audit["validation"] = report.to_dict()
    audit["group_labels"] = list(dataset.group_labels)
    audit["estimates"]["pct_of_total_ide"] = 100.0 * est.ide / total if total else None
    audit["estimates"]["pct_of_total_iie"] = 100.0 * est.iie / total if total else None
    audit["paths"] = path_rows
    if path_note:
        audit["paths_note"] = path_note
    audit["bounds_statement"] = bounds_statement(est.ide, est.iie, args.assert_monotone)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "audit.json", audit)
    with open(out / "decomposition.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "estimate", "ci_lo", "ci_hi", "pct_of_total"])
        writer.writerow(["total_raw_gap", est.raw_gap, "", "", ""])
        writer.writerow(["total_contrast", total, "", "", "100.0"])
        writer.writerow(
            ["ide", est.ide, est.ci_ide[0], est.ci_ide[1],
             100.0 * est.ide / total if total else ""]
        )
        writer.writerow(
            ["iie", est.iie, est.ci_iie[0], est.ci_iie[1],
             100.0 * est.iie / total if total else ""]
        )
        for row in path_rows:
            writer.writerow(
                [f"iie_via_{row['mediator']}",
                 row["allocated"] if row["allocated"] is not None else row["product"],
                 "", "",
                 100.0 * row["allocated"] / total if row["allocated"] is not None and total else ""]
            )
    print(
        f"ide={est.ide:.4f} {est.ci_ide}  iie={est.iie:.4f} {est.ci_iie}  "
        f"e-value={est.evalue_point}"
    )
    return 0


def cmd_sensitivity(args) -> int:
    audit = json.loads(Path(args.audit).read_text(encoding="utf-8"))
    ide = audit["estimates"]["ide"]
    ci = audit["estimates"]["ci_ide"]
    baseline = audit["sensitivity"]["baseline_risk"]
    rr = (baseline + ide) / baseline
    if abs(rr - 1.0) < 1e-12:
        print("direct effect is null (risk ratio 1); no sensitivity curve to draw")
        return 0
    grid = None
    if args.grid_max is not None:
        oriented = 1.0 / rr if rr < 1.0 else rr
        if args.grid_max <= oriented:
            raise DomainError(f"--grid-max {args.grid_max} must exceed oriented rr {oriented:.4f}")
        from .sensitivity import default_grid

        grid = default_grid(oriented, n_points=args.grid_points, x_max=args.grid_max)
    bound = ci[0] if ide >= 0 else ci[1]
    result = build_sensitivity(ide, bound, baseline, grid=grid, n_points=args.grid_points)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "rr_with_treatment", "rr_with_outcome_needed"])
        for x, yv in result.curve:
            writer.writerow(["point_estimate", repr(x), repr(yv)])
        for x, yv in result.curve_ci:
            writer.writerow(["ci_bound", repr(x), repr(yv)])
    print(
        f"e-value point={result.evalue_point:.4f} ci={result.evalue_ci} -> {args.out}"
    )
    return 0


def cmd_paths(args) -> int:
    dataset = validate(read_dataset(args.dataset, args.schema)).dataset
    audit = json.loads(Path(args.audit).read_text(encoding="utf-8"))
    iie = audit["estimates"]["iie"]
    result = path_specific_effects(dataset, iie)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mediator", "alpha", "beta", "product", "allocated"])
        for row in result.to_rows():
            writer.writerow([row["mediator"], row["alpha"], row["beta"],
                             row["product"], row["allocated"]])
    print(f"path effects for {len(result.mediators)} mediators -> {args.out}")
    return 0


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise ValueError(f"--n must be >= 1, got {args.n}")
    scm = ScmSpec.load(args.scm) if args.scm else preset_scm(args.preset)
    scm.validate()
    dataset = generate_dataset(scm, args.n, args.seed)
    effects = oracle_effects(scm)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, out / "dataset.csv", out / "schema.json")
    truth = _tool_stamp({"preset": args.preset, "scm": args.scm, "n": args.n, "seed": args.seed})
    truth["oracle"] = effects.to_dict()
    truth["scm"] = scm.to_dict()
    _write_json(out / "truth.json", truth)
    print(
        f"simulated n={args.n} from {scm.name}: oracle ide={effects.ide:.5f} "
        f"iie={effects.iie:.5f} -> {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdecomp",
        description="Decompose group disparities in binary decisions into "
        "interventional direct and indirect effects.",
    )
    parser.add_argument("--version", action="version", version=f"fairdecomp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build an audit dataset from a LAR CSV extract")
    p.add_argument("--lar", required=True, help="LAR CSV path")
    p.add_argument("--cohort-config", help="cohort filter JSON (defaults to NY conventional purchase)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("estimate", help="cross-fitted decomposition with inference")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--dag", help="DAG JSON (defaults to the generic pattern over the columns)")
    p.add_argument("--config", help="estimator config JSON")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--d-draws", dest="d_draws", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--level", type=float, default=None)
    p.add_argument("--outcome-learner", choices=("logistic", "gbt"))
    p.add_argument("--propensity-learner", choices=("logistic", "gbt"))
    p.add_argument("--ratio-learner", choices=("logistic", "gbt"))
    p.add_argument("--clip-probability", type=float, default=None)
    p.add_argument("--clip-ratio", type=float, default=None)
    p.add_argument("--assert-monotone", action="store_true",
                   help="emit the natural-effect bound statement")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sensitivity", help="explain-away frontier CSV from an audit record")
    p.add_argument("--audit", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-max", type=float, default=None)
    p.add_argument("--grid-points", type=int, default=80)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("paths", help="path-specific indirect effect CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--audit", required=True, help="audit JSON holding the IIE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("simulate", help="draw a synthetic dataset with embedded oracle truth")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=("monotone-small", "confounded-small"))
    group.add_argument("--scm", help="ScmSpec JSON path")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except _INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except AuditError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failure surface
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
