"""Command line entry point: ``beamslot {train,eval,compare}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import harness
from .env import BeamSlotEnv
from .ppo import train, write_curve_csv

log = logging.getLogger("beamslot")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="JSON RunConfig file; omitted fields keep their defaults")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--episodes", type=int, help="training episodes (train) or test episodes (eval/compare)")
    p.add_argument("--slots", type=int, help="slots per episode K")
    p.add_argument("--out", help="output directory")
    p.add_argument("--deterministic-init", action="store_true", help="start users exactly at the configured positions")


def build_parser():
    parser = _Parser(prog="beamslot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a PPO scheduler")
    _common(p)
    p.add_argument("--checkpoint-every", type=int, default=0, metavar="N")

    p = sub.add_parser("eval", help="evaluate one policy")
    _common(p)
    p.add_argument("--policy", required=True, help="random, tdma-1, tdma-3, tdma-6 or an actor weight file")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("compare", help="evaluate the baselines plus any given policies")
    _common(p)
    p.add_argument("--policy", action="append", default=[], help="extra policy; may repeat")
    p.add_argument("--workers", type=int)
    return parser


def load_config(args) -> harness.RunConfig:
    cfg = harness.RunConfig.load(args.config) if args.config else harness.RunConfig()
    env = cfg.env
    try:
        if args.slots is not None:
            env = replace(env, slots=args.slots)
        if args.deterministic_init:
            env = replace(env, deterministic_init=True)
        cfg = replace(cfg, env=env)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if getattr(args, "workers", None) is not None:
            cfg = replace(cfg, workers=args.workers)
        if args.episodes is not None:
            if args.command == "train":
                cfg = replace(cfg, ppo=replace(cfg.ppo, episodes=args.episodes))
            else:
                cfg = replace(cfg, test_episodes=args.episodes)
    except ValueError as exc:
        raise harness.ConfigError(str(exc)) from exc
    return harness.RunConfig.from_dict(cfg.to_dict())


def cmd_train(cfg, args):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    def report(point, agent):
        if point.episode % 100 == 0:
            log.info("episode %d reward %.1f PER %.3f sensing %.3f (%.0fs)", point.episode,
                     point.cumulative_reward, point.per, point.sensing_fraction, time.time() - t0)

    agent, curve = train(lambda: BeamSlotEnv(cfg.env), cfg.ppo, cfg.seed, callback=report,
                         checkpoint_every=args.checkpoint_every,
                         checkpoint_prefix=str(out / "ppo") if args.checkpoint_every else None)
    agent.save(out / "ppo")
    curve_path = out / "training_curve.csv"
    write_curve_csv(curve_path, curve)
    text = curve_path.read_text()
    curve_path.write_text("# config: " + cfg.to_json() + "\n" + text)
    (out / "run_config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"weights: {out / 'ppo.actor.bin'}  curve: {curve_path}")


def cmd_eval(cfg, args):
    result = harness.evaluate(args.policy, cfg)
    paths = harness.write_campaign(result, cfg.out_dir)
    print(harness.summary_text(harness.summarize([result])), end="")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")


def cmd_compare(cfg, args):
    results = []
    for pol in list(harness.BASELINES) + args.policy:
        log.info("evaluating %s", pol)
        res = harness.evaluate(pol, cfg)
        harness.write_campaign(res, cfg.out_dir)
        results.append(res)
    rows = harness.summarize(results)
    paths = harness.write_summary(rows, [r.config for r in results], cfg.out_dir)
    print(harness.summary_text(rows), end="")
    print(f"wrote {paths['csv']} and {paths['txt']}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors exit 1, --help exits 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "eval":
            harness.resolve_policy(args.policy, cfg)
        elif args.command == "compare":
            for pol in args.policy:
                harness.resolve_policy(pol, cfg)
    except (harness.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        {"train": cmd_train, "eval": cmd_eval, "compare": cmd_compare}[args.command](cfg, args)
    except Exception as exc:  # noqa: BLE001 - top-level exit code mapping
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
