"""Command-line entry point: ``nibox run | summarize | stimulus | heatmap``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..network import ConfigError
from .analysis import preferred_stimulus, summarize
from .config import load_config
from .persist import export_connection_heatmap, load_network
from .runner import run_experiment

log = logging.getLogger("nibox")


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seeds:
        config = replace(config, seeds=args.seeds)
    if args.episodes is not None:
        config = replace(config, episodes=args.episodes)
    config.validate()
    out = Path(args.output_dir) / config.name if args.output_dir else None
    result = run_experiment(config, out)
    print(f"wrote {len(result.records)} episode records to {result.out_dir}")
    if result.eval_scores:
        scores = np.array(result.eval_scores)
        print(f"frozen eval: mean {scores.mean():.4f} variance {scores.var():.5f} over {len(scores)} seeds")
    return 0


def _print_summary(report: dict) -> None:
    pooled = report["pooled"]
    print(f"seeds: {report['seeds']}")
    print(f"pooled median steps: first quartile {pooled['first_quartile_median_steps']:g}, "
          f"last quartile {pooled['last_quartile_median_steps']:g}")
    for seed, s in report["per_seed"].items():
        print(f"seed {seed}: {s['episodes']} episodes, {s['goals']} goals, "
              f"median steps {s['first_quartile_median_steps']:g} -> {s['last_quartile_median_steps']:g}, "
              f"mean reward/step {s['first_quartile_mean_reward']:.4f} -> {s['last_quartile_mean_reward']:.4f}, "
              f"best episode {s['best_steps_episode']['episode']} ({s['best_steps_episode']['steps']} steps)")
    if "eval" in report:
        ev = report["eval"]
        line = f"frozen eval: mean {ev['mean']:.4f}, variance {ev['variance']:.5f}"
        if "chance" in ev:
            line += f", chance {ev['chance']}"
        print(line)


def cmd_summarize(args) -> int:
    report = summarize(args.path)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        _print_summary(report)
    return 0


def cmd_stimulus(args) -> int:
    net = load_network(args.snapshot)
    stim, inhib = preferred_stimulus(net, args.neuron, n_samples=args.samples, n_rounds=args.rounds,
                                     n_repeats=args.repeats, steps=args.steps, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / f"neuron_{args.neuron}_stimulating.csv", stim, delimiter=",")
    np.savetxt(out / f"neuron_{args.neuron}_inhibitory.csv", inhib, delimiter=",")
    print(f"wrote preferred stimulus images for neuron {args.neuron} to {out}")
    return 0


def cmd_heatmap(args) -> int:
    net = load_network(args.snapshot)
    c_path, p_path = export_connection_heatmap(net, args.out)
    print(f"wrote {c_path} and {p_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nibox", description="Spatial STDP network experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="JSON experiment config")
    r.add_argument("--seeds", type=int, nargs="+", help="override the config's seed list")
    r.add_argument("--episodes", type=int, help="override the episode count")
    r.add_argument("--output-dir", help="parent directory for the run (beats NIBOX_OUTPUT_DIR)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("summarize", help="aggregate a run's episode log")
    s.add_argument("path", help="run directory or episodes.jsonl")
    s.add_argument("--json", action="store_true", help="print the full report as JSON")
    s.set_defaults(func=cmd_summarize)

    st = sub.add_parser("stimulus", help="preferred stimulus images of one neuron")
    st.add_argument("snapshot", help="network.npz written by a run")
    st.add_argument("--neuron", type=int, required=True)
    st.add_argument("--samples", type=int, default=1000)
    st.add_argument("--rounds", type=int, default=5)
    st.add_argument("--repeats", type=int, default=10)
    st.add_argument("--steps", type=int, default=1, help="network steps per presented frame")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--out", default=".", help="directory for the two CSV images")
    st.set_defaults(func=cmd_stimulus)

    h = sub.add_parser("heatmap", help="export the connection matrix as CSV")
    h.add_argument("snapshot", help="network.npz written by a run")
    h.add_argument("out", help="CSV path; the fixed-connection mask goes alongside")
    h.set_defaults(func=cmd_heatmap)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
