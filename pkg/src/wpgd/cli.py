"""Experiment CLI.

Subcommands: train, eval, compare, gen-data, validate-config. Each run
writes its outputs under <output_dir>/<config-hash>/ together with a
resolved-config snapshot, so any run can be reproduced from its own output
directory. Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import config as cfgmod
from . import metrics, plots
from .config import ARTIFACT_VERSION
from .errors import ConfigError, IdxFormatError, NumericError, ValidationError
from .errors import EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO
from .nn import load_checkpoint, save_checkpoint
from .training import train as run_train


def _write_json(path, doc, config_hash):
    doc = dict(doc)
    doc["artifact_version"] = ARTIFACT_VERSION
    doc["config_hash"] = config_hash
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=2)
        f.write("\n")


def _write_matrix_csv(path, m, config_hash):
    m = np.asarray(m)
    with open(path, "w") as f:
        f.write(f"# config_hash={config_hash} version={ARTIFACT_VERSION}\n")
        for row in m:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def _prepare(args):
    """Load, override, resolve; returns (resolved, run_dir, config_hash)."""
    raw = cfgmod.load_config(args.config)
    overrides = list(args.set or [])
    raw = cfgmod.apply_overrides(raw, overrides)
    if getattr(args, "eps_255", None) is not None:
        raw = cfgmod.apply_overrides(raw, [f"train.attack.eps={args.eps_255 / 255.0}"])
    base_dir = os.path.dirname(os.path.abspath(args.config))
    resolved = cfgmod.resolve(raw, base_dir=base_dir)
    if getattr(args, "output_dir", None):
        resolved["output_dir"] = args.output_dir
    h = cfgmod.config_hash(resolved)
    run_dir = os.path.join(resolved["output_dir"], h)
    return resolved, run_dir, h


def _snapshot(resolved, run_dir, h):
    os.makedirs(run_dir, exist_ok=True)
    _write_json(os.path.join(run_dir, "resolved_config.json"), {"config": resolved}, h)


def cmd_validate_config(args):
    resolved, _, h = _prepare(args)
    print(json.dumps({"config": resolved, "config_hash": h}, sort_keys=True, indent=2))
    return EXIT_OK


def cmd_gen_data(args):
    resolved, run_dir, h = _prepare(args)
    _snapshot(resolved, run_dir, h)
    for split in ("train", "test"):
        data = cfgmod.build_dataset(resolved, split)
        path = os.path.join(run_dir, f"data_{split}.csv")
        data.to_csv(path)
        print(f"wrote {path} ({len(data)} examples, K={data.num_classes})")
    return EXIT_OK


def cmd_train(args):
    resolved, run_dir, h = _prepare(args)
    t0 = time.perf_counter()
    data = cfgmod.build_dataset(resolved, "train")
    cost = cfgmod.build_cost_matrix(resolved)
    if cost is not None and cost.size != data.num_classes:
        raise ConfigError(f"cost matrix size {cost.size} != class count {data.num_classes}")
    spec = cfgmod.build_model_spec(resolved, data.input_dim, data.num_classes)
    tcfg = cfgmod.build_train_config(resolved, cost)
    params, report = run_train(spec, data, tcfg)
    _snapshot(resolved, run_dir, h)
    save_checkpoint(os.path.join(run_dir, "checkpoint.json"), params)
    _write_json(os.path.join(run_dir, "train_report.json"), report.to_dict(), h)
    plots.plot_training_curves(report, title=f"{tcfg.mode} training", path=os.path.join(run_dir, "training.png"))
    # wall time lives in a sidecar so report files are byte-reproducible
    with open(os.path.join(run_dir, "timing.json"), "w") as f:
        json.dump({"train_wall_time": time.perf_counter() - t0}, f)
        f.write("\n")
    last = report.epochs[-1]
    print(f"trained {tcfg.mode} model: final loss {last.loss:.4f}, NE {last.natural_error:.2f}%")
    print(f"run directory: {run_dir}")
    return EXIT_OK


def _eval_model(params, resolved, run_dir, h, prefix=""):
    data = cfgmod.build_dataset(resolved, "test")
    if params.spec.num_classes != data.num_classes:
        raise ConfigError(
            f"checkpoint has {params.spec.num_classes} classes, dataset has {data.num_classes}"
        )
    cost = cfgmod.build_cost_matrix(resolved)
    summary = {}

    natural = metrics.confusion(params, data)
    summary["natural_error"] = natural.error()
    _write_matrix_csv(os.path.join(run_dir, f"{prefix}confusion_natural.csv"), natural.counts, h)
    plots.plot_matrix(
        natural.normalized(), title="natural confusion", path=os.path.join(run_dir, f"{prefix}confusion_natural.png")
    )
    confusions = {"natural": natural}

    for name, atk in cfgmod.build_eval_attacks(resolved):
        adv = metrics.confusion(params, data, attack=atk, cost_matrix=cost)
        confusions[name] = adv
        entry = {"adversarial_error": adv.error(), "objective": atk.objective, "eps": atk.eps, "steps": atk.steps}
        if cost is not None:
            entry["robustness_score"] = metrics.robustness_score(adv.normalized(), cost)
        summary[f"attack_{name}"] = entry
        _write_matrix_csv(os.path.join(run_dir, f"{prefix}confusion_{name}.csv"), adv.counts, h)
        plots.plot_matrix(
            adv.normalized(), title=f"adversarial confusion ({name})",
            path=os.path.join(run_dir, f"{prefix}confusion_{name}.png"),
        )

    stats = metrics.entropy_stats(params, data)
    summary["entropy"] = {
        "mean": stats.mean,
        "median": stats.median,
        "hist_counts": stats.hist_counts.tolist(),
        "hist_edges": stats.hist_edges.tolist(),
    }
    plots.plot_entropy_hist(stats, data.num_classes, path=os.path.join(run_dir, f"{prefix}entropy_hist.png"))

    bcfg = resolved["eval"]["boundary"]
    if bcfg is not None and params.spec.input_dim == 2:
        xs, ys, grid = metrics.boundary_grid(params, bcfg["bbox"], bcfg["resolution"])
        metrics.write_boundary_csv(
            os.path.join(run_dir, f"{prefix}boundary.csv"), xs, ys, grid,
            meta_line=f"config_hash={h} version={ARTIFACT_VERSION}",
        )
        plots.plot_boundary(xs, ys, grid, data=data, path=os.path.join(run_dir, f"{prefix}boundary.png"))
        summary["boundary_changes"] = metrics.boundary_changes(grid)

    _write_json(os.path.join(run_dir, f"{prefix}metrics.json"), summary, h)
    return data, cost, confusions, summary


def cmd_eval(args):
    resolved, run_dir, h = _prepare(args)
    params = load_checkpoint(args.checkpoint)
    _snapshot(resolved, run_dir, h)
    _, _, _, summary = _eval_model(params, resolved, run_dir, h)
    print(f"natural error: {summary['natural_error']:.2f}%")
    for key, entry in summary.items():
        if key.startswith("attack_"):
            line = f"{key[7:]}: adversarial error {entry['adversarial_error']:.2f}%"
            if "robustness_score" in entry:
                line += f", score {entry['robustness_score']:.4f}"
            print(line)
    print(f"run directory: {run_dir}")
    return EXIT_OK


def cmd_compare(args):
    resolved, run_dir, h = _prepare(args)
    params_a = load_checkpoint(args.checkpoint_a)
    params_b = load_checkpoint(args.checkpoint_b)
    if params_a.spec.num_classes != params_b.spec.num_classes:
        raise ConfigError("checkpoints have different class counts")
    _snapshot(resolved, run_dir, h)
    data, cost, confs_a, _ = _eval_model(params_a, resolved, run_dir, h, prefix="a_")
    _, _, confs_b, _ = _eval_model(params_b, resolved, run_dir, h, prefix="b_")

    report = {}
    gap = metrics.accuracy_gap(confs_b["natural"], confs_a["natural"])
    _write_matrix_csv(os.path.join(run_dir, "gap_natural.csv"), gap, h)
    plots.plot_matrix(gap, title="accuracy gap (natural)", path=os.path.join(run_dir, "gap_natural.png"), cmap="magma")
    report["gap_natural"] = gap.tolist()
    if cost is not None:
        rho = metrics.gap_metric_correlation(gap, cost)
        report["gap_metric_correlation"] = None if np.isnan(rho) else rho
        # score deltas per attack, zero reference at checkpoint A
        for name, atk in cfgmod.build_eval_attacks(resolved):
            s_a = metrics.robustness_score(confs_a[name].normalized(), cost)
            s_b = metrics.robustness_score(confs_b[name].normalized(), cost)
            report[f"score_delta_{name}"] = s_b - s_a
    _write_json(os.path.join(run_dir, "compare.json"), report, h)
    if "gap_metric_correlation" in report:
        print(f"gap/metric correlation: {report['gap_metric_correlation']}")
    for key in report:
        if key.startswith("score_delta_"):
            print(f"{key}: {report[key]:+.4f}")
    print(f"run directory: {run_dir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="wpgd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--set", action="append", metavar="PATH=VALUE", help="override a config leaf")
        p.add_argument("--output-dir", help="override the configured output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (1 = bit-exact reference)")

    p = sub.add_parser("train", help="train a model from a config")
    p.add_argument("config")
    p.add_argument("--eps-255", type=float, help="training attack radius on the 0-255 byte scale")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="compare two checkpoints (gap, correlation, score delta)")
    p.add_argument("checkpoint_a")
    p.add_argument("checkpoint_b")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-data", help="materialize the configured dataset as CSV")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("validate-config", help="validate and print the resolved config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_validate_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, IdxFormatError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
