"""Command-line interface.

Subcommands: validate-hierarchy, certify, evaluate, simulate, gridsearch.
Exit codes: 0 success, 1 hierarchy validation, 2 IO/protocol, 3 numeric
domain.  Option precedence is flags > manifest file > defaults.  The
values ``demo`` for --hierarchy, --synthetic-spec, --gt and --spec resolve
to small bundled files so every command can run offline.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .certify import (
    CertificationConfig,
    read_certification,
    run_certification,
    write_certification,
)
from .errors import DomainError, HierarchyError, StreamError
from .estimator import HierarchicalCertifier
from .hierarchy import load_hierarchy
from .metrics import evaluate, load_ground_truth
from .simulate import load_experiment_spec, run_experiment_spec
from .streams import open_process, open_stream
from .synthetic import load_synthetic_spec

_DEFAULTS = {"sigma": 0.25, "tau": 0.75, "alpha": 0.001, "n": 100, "n0": 10,
             "mode": "adaptive", "level": 0, "seed": 0, "margin": 10,
             "thresholds": (), "level_rule": "finest", "topclass": "counts"}


def _data_path(name: str) -> Path:
    return Path(str(resources.files("hiercert").joinpath("data", name)))


def _resolve(path: str | None, demo_name: str) -> str | None:
    if path == "demo":
        return str(_data_path(demo_name))
    return path


def _parse_thresholds(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(part) for part in text.split(","))


def _merge_config(args, manifest: dict) -> dict:
    merged = dict(_DEFAULTS)
    merged.update({k: v for k, v in manifest.items() if k in _DEFAULTS})
    if "thresholds" in manifest and manifest["thresholds"] is not None:
        merged["thresholds"] = tuple(manifest["thresholds"])
    for key in _DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _build_source(args, manifest: dict, merged: dict):
    stream = args.source or manifest.get("source")
    model_cmd = args.model_cmd or manifest.get("model_cmd")
    synthetic = _resolve(args.synthetic_spec or manifest.get("synthetic_spec"),
                         "demo_synthetic.json")
    chosen = [x for x in (stream, model_cmd, synthetic) if x]
    if len(chosen) != 1:
        raise DomainError(
            "exactly one of --source, --model-cmd, --synthetic-spec is required")
    if stream:
        return open_stream(stream)
    if model_cmd:
        return open_process(model_cmd, n=merged["n"], n0=merged["n0"],
                            sigma=merged["sigma"], seed=merged["seed"],
                            mode="both")
    return load_synthetic_spec(synthetic, seed=merged["seed"])


def _config_from(merged: dict) -> CertificationConfig:
    return CertificationConfig(
        sigma=merged["sigma"], tau=merged["tau"], alpha=merged["alpha"],
        n=merged["n"], n0=merged["n0"], thresholds=tuple(merged["thresholds"]),
        mode=merged["mode"], level=merged["level"],
        level_rule=merged["level_rule"], topclass_source=merged["topclass"])


def _load_manifest(args) -> dict:
    if getattr(args, "manifest", None):
        return json.loads(Path(args.manifest).read_text())
    return {}


def _print_summary(cert) -> None:
    shares = cert.level_shares()
    print(f"mode: {cert.config['mode']}")
    print(f"radius: {cert.radius:.6f}")
    n = cert.component_count
    print(f"abstain: {shares['abstain']:.2f}% ({cert.abstain_count}/{n})")
    per_level = " | ".join(
        f"H{lvl} {pct:.2f}%" for lvl, pct in sorted(shares["certified_per_level"].items()))
    print(f"certified per level: {per_level if per_level else '(none)'}")
    diag = cert.diagnostics
    schedule = diag.get("schedule") or {}
    print("flags: "
          f"level_rule={cert.config['level_rule']} "
          f"topclass={diag.get('topclass_used')} "
          f"selection={diag.get('selection_basis')} "
          f"orientation={schedule.get('orientation', 'n/a')}")


# --- subcommands ---------------------------------------------------------------

def cmd_validate_hierarchy(args) -> int:
    hierarchy = load_hierarchy(args.hierarchy)
    print(f"valid hierarchy: |V|={hierarchy.vertex_count} "
          f"leaves={hierarchy.leaf_count} levels={hierarchy.level_count}")
    for lvl in range(hierarchy.level_count):
        ids = hierarchy.vertices_at_level(lvl)
        gens = sorted(hierarchy.generality(v) for v in ids)
        hist: dict[int, int] = {}
        for g in gens:
            hist[g] = hist.get(g, 0) + 1
        hist_text = " ".join(f"G={g}:{c}" for g, c in sorted(hist.items()))
        print(f"  H{lvl}: {len(ids)} vertices | generality {hist_text if hist_text else '-'}")
    return 0


def cmd_certify(args) -> int:
    manifest = _load_manifest(args)
    merged = _merge_config(args, manifest)
    hierarchy = load_hierarchy(_resolve(args.hierarchy or manifest.get("hierarchy"),
                                        "urban_hierarchy.json"))
    config = _config_from(merged)
    with _build_source(args, manifest, merged) as source:
        cert = run_certification(source, hierarchy, config)
    _print_summary(cert)
    out = args.out or manifest.get("out")
    if out:
        write_certification(out, cert)
        print(f"wrote: {out}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = _load_manifest(args)
    hierarchy = load_hierarchy(_resolve(args.hierarchy or manifest.get("hierarchy"),
                                        "urban_hierarchy.json"))
    cert = read_certification(args.result)
    gt = load_ground_truth(_resolve(args.gt or manifest.get("gt"), "demo_gt.raw"))
    margin = args.margin if args.margin is not None else manifest.get("margin", 10)
    report = evaluate(cert, gt, hierarchy, margin=int(margin),
                      ccig_denominator=args.ccig_denominator)
    print(f"cig: {report.cig:.6f}")
    print(f"c_cig: {report.c_cig:.6f} (denominator={args.ccig_denominator})")
    print(f"abstain: {report.abstain_rate:.2f}%  class-abstain: "
          f"{report.class_abstain_rate:.2f}%")
    print(f"miou: {report.miou:.6f}")
    if report.boundary is not None:
        b, nb = report.boundary["boundary"], report.boundary["non_boundary"]
        def fmt(part):
            if part["components"] == 0:
                return "absent"
            return f"abstain {part['abstain_rate']:.2f}% cig {part['cig']:.6f}"
        print(f"boundary[{report.boundary['margin']}px]: {fmt(b)} | "
              f"non-boundary: {fmt(nb)}")
    if args.out:
        Path(args.out).write_text(report.to_json())
        print(f"wrote: {args.out}")
    if args.csv:
        rows = ["class,name,cig,certified_rate,abstain_rate,components"]
        for cid, row in sorted(report.per_class.items()):
            rows.append(f"{cid},{row['name']},{row['cig']:.6f},"
                        f"{row['certified_rate']:.4f},{row['abstain_rate']:.4f},"
                        f"{row['components']}")
        Path(args.csv).write_text("\n".join(rows) + "\n")
        print(f"wrote: {args.csv}")
    return 0


def cmd_simulate(args) -> int:
    spec_path = _resolve(args.spec, "demo_experiment.json")
    spec = load_experiment_spec(spec_path)
    report = run_experiment_spec(spec)
    if "type1" in report:
        t1 = report["type1"]
        print(f"type1: {t1['trials_with_false_certification']}/{t1['trials']} "
              f"trials with a false certification "
              f"(rate {t1['empirical_familywise_rate']:.6f}, "
              f"bound {t1['bound']:.6f}) -> "
              f"{'ok' if t1['passes'] else 'VIOLATION'}")
    if "monotonicity" in report:
        mono = report["monotonicity"]
        print(f"monotonicity: {mono['violations']} violations on "
              f"{mono['instances']} instances -> "
              f"{'ok' if mono['passes'] else 'VIOLATION'}")
    if "level_distribution" in report:
        coarse = report["level_distribution"]["certified_at_level_ge1"]
        print(f"certified at level >= 1: adaptive {coarse['adaptive']:.2f}% "
              f"flat {coarse['flat']:.2f}%")
    if "curves" in report:
        for row in report["curves"]:
            print(f"curve n={row['n']:>5} mode={row['mode']:<8} "
                  f"cig={row['cig']:.4f} abstain={row['abstain_rate']:.2f}%")
    if args.out:
        Path(args.out).write_text(json.dumps(report, sort_keys=True, indent=2))
        print(f"wrote: {args.out}")
    return 0


def cmd_gridsearch(args) -> int:
    manifest = _load_manifest(args)
    merged = _merge_config(args, manifest)
    hierarchy = load_hierarchy(_resolve(args.hierarchy or manifest.get("hierarchy"),
                                        "urban_hierarchy.json"))
    gt = load_ground_truth(_resolve(args.gt or manifest.get("gt"), "demo_gt.raw"))
    grid_text = Path(args.grid).read_text() if Path(args.grid).exists() else args.grid
    grid = json.loads(grid_text)
    if not isinstance(grid, list) or not grid:
        raise DomainError("the threshold grid must be a non-empty JSON list of tuples")

    base = HierarchicalCertifier(
        sigma=merged["sigma"], tau=merged["tau"], alpha=merged["alpha"],
        n=merged["n"], n0=merged["n0"], mode="adaptive",
        level_rule=merged["level_rule"], topclass_source=merged["topclass"])
    from sklearn.base import clone
    from .metrics import cig as cig_score

    rows = []
    for candidate in grid:
        estimator = clone(base).set_params(thresholds=tuple(candidate))
        with _build_source(args, manifest, merged) as source:
            cert = estimator.certify(source, hierarchy)
        rows.append({
            "thresholds": [float(t) for t in candidate],
            "cig": cig_score(cert, gt, hierarchy),
            "abstain_rate": 100.0 * cert.abstain_count / cert.component_count,
        })
    rows.sort(key=lambda r: (-r["cig"], r["abstain_rate"], r["thresholds"]))
    print("rank thresholds cig abstain%")
    for i, row in enumerate(rows, 1):
        label = ",".join(f"{t:g}" for t in row["thresholds"]) or "(empty)"
        print(f"{i:>4} {label:<16} {row['cig']:.6f} {row['abstain_rate']:.2f}")
    print(f"best: {rows[0]['thresholds']} cig={rows[0]['cig']:.6f}")
    if args.out:
        Path(args.out).write_text(json.dumps(rows, sort_keys=True, indent=2))
        print(f"wrote: {args.out}")
    return 0


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiercert",
        description="Adaptive hierarchical certification for segmentation "
                    "under Gaussian input noise")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-hierarchy", help="load and validate a hierarchy file")
    p.add_argument("hierarchy")
    p.set_defaults(func=cmd_validate_hierarchy)

    def add_run_options(p, with_mode=True):
        p.add_argument("--hierarchy", help="hierarchy JSON file, or 'demo'")
        p.add_argument("--manifest", help="JSON run manifest (flags override it)")
        p.add_argument("--source", help="HCS1 sample-stream file")
        p.add_argument("--model-cmd", dest="model_cmd",
                       help="external model command speaking the HCS1 protocol")
        p.add_argument("--synthetic-spec", dest="synthetic_spec",
                       help="synthetic model spec JSON, or 'demo'")
        p.add_argument("--sigma", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--n0", type=int)
        p.add_argument("--thresholds", type=_parse_thresholds,
                       help="comma-separated schedule, e.g. 0.3,0.1,0")
        p.add_argument("--seed", type=int)
        p.add_argument("--level-rule", dest="level_rule",
                       choices=["finest", "coarsest"])
        p.add_argument("--flat-topclass", dest="topclass",
                       choices=["counts", "n0"])
        if with_mode:
            p.add_argument("--mode", choices=["adaptive", "flat", "fixed"])
            p.add_argument("--level", type=int,
                           help="hierarchy level for --mode fixed")

    p = sub.add_parser("certify", help="run a certification and write an HCR1 file")
    add_run_options(p)
    p.add_argument("--out", help="HCR1 result path")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("evaluate", help="score an HCR1 result against ground truth")
    p.add_argument("--result", required=True, help="HCR1 result file")
    p.add_argument("--gt", help="ground-truth grid (raw u16 + sidecar or PGM), or 'demo'")
    p.add_argument("--hierarchy", help="hierarchy JSON file, or 'demo'")
    p.add_argument("--manifest")
    p.add_argument("--margin", type=int, help="boundary margin in pixels")
    p.add_argument("--ccig-denominator", dest="ccig_denominator",
                   choices=["present", "all"], default="present")
    p.add_argument("--out", help="metrics report JSON path")
    p.add_argument("--csv", help="per-class CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="run a guarantee-verification experiment")
    p.add_argument("--spec", default="demo", help="experiment spec JSON, or 'demo'")
    p.add_argument("--out", help="experiment report JSON path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gridsearch",
                       help="rank threshold schedules by certified information gain")
    add_run_options(p, with_mode=False)
    p.add_argument("--grid", required=True,
                   help="JSON list of threshold tuples (inline or a file path)")
    p.add_argument("--gt", help="ground truth, or 'demo'")
    p.add_argument("--out", help="ranked table JSON path")
    p.set_defaults(func=cmd_gridsearch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HierarchyError as exc:
        print(f"hierarchy error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except (StreamError, OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
