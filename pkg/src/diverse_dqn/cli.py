"""Command line entry point: ``diverse-dqn <subcommand>``.

Exit codes: 0 success, 1 configuration error, 2 one or more runs failed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

from .agents import records_to_csv
from .harness.config import ConfigError, ExperimentConfig
from .harness.plots import curves_svg, heatmap_svg, load_curve
from .harness.recipes import sine_demo, similarity_timeline, stats_tables
from .harness.runner import RunManifest, norm_inequality_csv, run_matrix, run_single
from .similarity import SimilarityHeatmap
from .stats import Score

log = logging.getLogger("diverse_dqn")


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["experiment.seeds"] = str(args.seed)
    if args.out is not None:
        overrides["experiment.out"] = args.out
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.config:
        return ExperimentConfig.load(args.config, overrides)
    return ExperimentConfig.parse("", overrides)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seeds[0]
    result = run_single(cfg.env, cfg.env_params, cfg.agent, seed, cfg.total_steps, cfg.eval_every)
    (out / "config.ini").write_text(cfg.to_text())
    (out / "train.csv").write_text(records_to_csv(result.records, result.agent.n_members))
    (out / "norms.csv").write_text(norm_inequality_csv(result.records))
    if result.records:
        last = result.records[-1]
        print(f"step {last.step}: return {last.return_mean:.3f} +- {last.return_std:.3f}")
    return 0


def cmd_matrix(args) -> int:
    cfg = _load_config(args)
    manifest = run_matrix(cfg)
    failed = manifest.failed
    print(f"{len(manifest.runs) - len(failed)} runs completed, {len(failed)} failed -> {cfg.out}")
    return 2 if failed else 0


def cmd_sine_demo(args) -> int:
    seed = 0 if args.seed is None else args.seed
    out = Path(args.out or "sine_demo")
    res = sine_demo(seed, seed + 1, steps=args.steps, out_dir=out)
    (out / "sine_heatmap_before.svg").write_text(heatmap_svg(res.before, "before training"))
    (out / "sine_heatmap_after.svg").write_text(heatmap_svg(res.after, "after training"))
    print(f"mse A={res.mse[0]:.5f} B={res.mse[1]:.5f}; output CKA "
          f"{res.output_cka_before:.3f} -> {res.output_cka_after:.3f}")
    return 0


def cmd_similarity(args) -> int:
    cfg = _load_config(args)
    agent_cfg = dataclasses.replace(cfg.agent, n_members=2)
    out = Path(cfg.out)
    points, result = similarity_timeline(cfg.env, cfg.env_params, agent_cfg, cfg.seeds[0],
                                         cfg.total_steps, args.every or cfg.eval_every, out_dir=out)
    (out / "train.csv").write_text(records_to_csv(result.records, 2))
    for p in points:
        (out / f"heatmap_step{p.step}.svg").write_text(heatmap_svg(p.heatmap, f"step {p.step}"))
    print(f"{len(points)} checkpoints written to {out}")
    return 0


def best_lambda_population(manifest: RunManifest) -> dict[tuple, list[Score]]:
    """Group completed runs by (env, algorithm, N); per regulariser keep the
    lambda with the best mean final return."""
    cfg = ExperimentConfig.parse(manifest.config_text)
    by_key: dict[tuple, dict[tuple, list]] = defaultdict(lambda: defaultdict(list))
    for run in manifest.runs.values():
        if run.get("status") != "completed":
            continue
        key = (cfg.env, run["algorithm"], f"N={cfg.agent.n_members}")
        by_key[key][(run["regularizer"], run["lam"])].append((run["seed"], run["final_return"]))
    groups = {}
    for key, cells in by_key.items():
        best: dict[str, tuple] = {}
        for (reg, lam), vals in cells.items():
            mean = sum(v for _, v in vals) / len(vals)
            if reg not in best or mean > best[reg][0]:
                best[reg] = (mean, lam, vals)
        pop = []
        for reg, (_, lam, vals) in sorted(best.items()):
            method = "baseline" if reg == "none" else reg
            pop += [Score(method, seed, v) for seed, v in sorted(vals)]
        groups[key] = pop
    return groups


def cmd_stats(args) -> int:
    groups = {}
    for path in args.manifests:
        manifest = RunManifest.from_json((Path(path) / "manifest.json").read_text())
        groups.update(best_lambda_population(manifest))
    z_csv, p_csv = stats_tables(groups)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "zscores.csv").write_text(z_csv)
    (out / "pvalues.csv").write_text(p_csv)
    print(z_csv + "\n" + p_csv)
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for path in args.heatmaps or []:
        hm = SimilarityHeatmap.from_csv(Path(path).read_text())
        (out / (Path(path).stem + ".svg")).write_text(heatmap_svg(hm, Path(path).stem))
    if args.manifest:
        root = Path(args.manifest)
        manifest = RunManifest.from_json((root / "manifest.json").read_text())
        grouped: dict[str, dict[str, list]] = defaultdict(lambda: defaultdict(list))
        for run in manifest.runs.values():
            if run.get("status") == "completed":
                grouped[run["algorithm"]][run["method"]].append(root / run["artifacts"]["training_csv"])
        for algo, methods in sorted(grouped.items()):
            curves = {m: load_curve(sorted(p)) for m, p in sorted(methods.items())}
            (out / f"curves_{algo}.svg").write_text(curves_svg(curves, algo))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diverse-dqn", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file")
    common.add_argument("--seed", type=int, help="override the seed list with one seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config key")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="one training run").set_defaults(fn=cmd_train)
    sub.add_parser("matrix", parents=[common], help="run the full sweep").set_defaults(fn=cmd_matrix)
    p = sub.add_parser("sine-demo", parents=[common], help="CKA on two sine regressors")
    p.add_argument("--steps", type=int, default=6000)
    p.set_defaults(fn=cmd_sine_demo)
    p = sub.add_parser("similarity", parents=[common], help="CKA timeline of a 2-member ensemble")
    p.add_argument("--every", type=int, help="checkpoint period in steps (default eval_every)")
    p.set_defaults(fn=cmd_similarity)
    p = sub.add_parser("stats", parents=[common], help="z-score and Welch tables from matrix outputs")
    p.add_argument("manifests", nargs="+", help="matrix output directories")
    p.set_defaults(fn=cmd_stats)
    p = sub.add_parser("plot", parents=[common], help="SVG curves and heatmaps")
    p.add_argument("--manifest", help="matrix output directory to plot training curves from")
    p.add_argument("--heatmaps", nargs="*", help="heatmap CSV files")
    p.set_defaults(fn=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if args.command == "matrix" else 1


if __name__ == "__main__":
    sys.exit(main())
