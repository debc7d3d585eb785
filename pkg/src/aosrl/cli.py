"""Command-line entry point: ``python -m aosrl <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as dsio
from .baselines import a2c_policy, cql_policy
from .config import ConfigError, RunConfig, full_scale, load_config
from .evaluation import evaluate_policy
from .experiment import (Cell, cell_env_config, collect_dataset, run_experiment, train_a2c,
                         train_cql, train_offline_dac, train_online)
from .neural import TrainingError, load_checkpoint, save_checkpoint
from .policies import PolicyHandle, random_policy
from .tabular import TabularNumericalError, lower_bound_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _seed_seq(seed: int, tag: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, sum(ord(ch) << (8 * (i % 4)) for i, ch in enumerate(tag))])


def _env(cfg: RunConfig, seed: int):
    return cell_env_config(cfg, Cell(cfg.I_list[0], cfg.chi_list[0], cfg.varphi_list[0], seed))


def _write_rows(path: Path, rows: list[dict]) -> None:
    fields = list(rows[0]) if rows else []
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _uniform_rows(rows: list[dict]) -> list[dict]:
    """Give every row the union of keys (evaluation columns appear only periodically)."""
    keys: dict[str, None] = {}
    for r in rows:
        keys.update(dict.fromkeys(r))
    return [{k: r.get(k, "") for k in keys} for r in rows]


def _meta(cfg: RunConfig, seed: int, scheme: str, kind: str, env_cfg) -> dict:
    return {"scheme": scheme, "kind": kind, "seed": seed, "config_hash": cfg.digest(),
            "feature_dim": env_cfg.feature_dim, "num_actions": env_cfg.num_actions}


def _load_policy(path: str) -> PolicyHandle:
    try:
        nets, meta = load_checkpoint(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint {path}: {exc}") from exc
    kind = meta.get("kind", "actor")
    net = nets["actor"] if kind == "actor" else nets["q"]
    return PolicyHandle(kind, net.shape[2], net)


def _load_dataset(path: str) -> dsio.Dataset:
    try:
        return dsio.load(path)
    except dsio.DatasetIOError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Subcommands

def cmd_gen_data(args, cfg: RunConfig, out: Path) -> None:
    env_cfg = _env(cfg, args.seed)
    nA = env_cfg.num_actions
    if args.policy == "random":
        pol = random_policy(nA)
    elif args.checkpoint:
        pol = _load_policy(args.checkpoint)
    else:
        pol = a2c_policy(train_a2c(env_cfg, cfg, _seed_seq(args.seed, "a2c")))
    size = args.count or cfg.dataset_size
    data = collect_dataset(env_cfg, pol, size, _seed_seq(args.seed, "collect-" + args.policy),
                           "random" if args.policy == "random" else "a2c", args.seed)
    path = out / (args.output or ("random.aosd" if args.policy == "random" else "expert.aosd"))
    dsio.save(data, path)
    print(f"wrote {len(data)} tuples to {path}")


def cmd_mix_data(args, cfg: RunConfig, out: Path) -> None:
    expert = _load_dataset(args.expert)
    rnd = _load_dataset(args.random)
    if not 0 <= args.xi <= 1:
        raise ConfigError("--xi must lie in [0, 1]")
    try:
        mixed = dsio.mix(expert, rnd, args.xi, np.random.default_rng(_seed_seq(args.seed, "mix")),
                         size=args.count)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = out / (args.output or f"mix_{args.xi:g}.aosd")
    dsio.save(mixed, path)
    print(f"wrote {len(mixed)} tuples ({mixed.header['expert_count']} expert) to {path}")


def cmd_train_online(args, cfg: RunConfig, out: Path) -> None:
    env_cfg = _env(cfg, args.seed)
    tr = train_online(env_cfg, cfg, _seed_seq(args.seed, "online"))
    save_checkpoint(out / "online_dac.ckpt", {"actor": tr.actor, "critic": tr.critic},
                    **_meta(cfg, args.seed, "online_dac", "actor", env_cfg), slots=tr.slot)
    _write_rows(out / "online_dac_log.csv", tr.log)
    _report(env_cfg, cfg, PolicyHandle("actor", env_cfg.num_actions, tr.actor), args.seed,
            out / "online_dac_eval.csv", "online_dac")


def cmd_train_a2c(args, cfg: RunConfig, out: Path) -> None:
    env_cfg = _env(cfg, args.seed)
    tr = train_a2c(env_cfg, cfg, _seed_seq(args.seed, "a2c"))
    save_checkpoint(out / "a2c.ckpt", {"actor": tr.actor, "critic": tr.critic},
                    **_meta(cfg, args.seed, "a2c", "actor", env_cfg), slots=tr.slot)
    _write_rows(out / "a2c_log.csv", tr.log)
    _report(env_cfg, cfg, a2c_policy(tr), args.seed, out / "a2c_eval.csv", "a2c")


def cmd_train_offline(args, cfg: RunConfig, out: Path) -> None:
    data = _load_dataset(args.data)
    env_cfg = _env(cfg, args.seed)
    if data.feature_dim != env_cfg.feature_dim:
        raise ConfigError("dataset feature length does not match the configured system")
    eval_seed = int(_seed_seq(args.seed, "eval").generate_state(1)[0])
    tr, curve = train_offline_dac(env_cfg, cfg, data, _seed_seq(args.seed, "offline"),
                                  eval_seed)
    save_checkpoint(out / "offline_dac.ckpt",
                    {"actor": tr.actor, "critic": tr.critic, "target": tr.target},
                    **_meta(cfg, args.seed, "offline_dac", "actor", env_cfg), iters=tr.it,
                    data_policy=data.header.get("policy"))
    _write_rows(out / "offline_dac_log.csv", _uniform_rows(tr.log))
    _write_rows(out / "offline_dac_curve.csv",
                [{"iter": it, "mean_u": mu, "seed": args.seed, "config_hash": cfg.digest()}
                 for it, mu in curve])
    _report(env_cfg, cfg, PolicyHandle("actor", env_cfg.num_actions, tr.actor), args.seed,
            out / "offline_dac_eval.csv", "offline_dac")


def cmd_train_cql(args, cfg: RunConfig, out: Path) -> None:
    data = _load_dataset(args.data)
    env_cfg = _env(cfg, args.seed)
    tr = train_cql(env_cfg, cfg, data, _seed_seq(args.seed, "cql"))
    save_checkpoint(out / "cql.ckpt", {"q": tr.q, "target": tr.target},
                    **_meta(cfg, args.seed, "cql", "greedy-q", env_cfg), iters=tr.it,
                    data_policy=data.header.get("policy"))
    _write_rows(out / "cql_log.csv", tr.log)
    _report(env_cfg, cfg, cql_policy(tr), args.seed, out / "cql_eval.csv", "cql")


def _report(env_cfg, cfg: RunConfig, policy, seed: int, path: Path, scheme: str) -> dict:
    eval_seed = int(_seed_seq(seed, "eval").generate_state(1)[0])
    res = evaluate_policy(env_cfg, policy, cfg.eval_horizon, np.random.default_rng(eval_seed),
                          env_seed=eval_seed)
    row = {"scheme": scheme, "seed": seed, **res._asdict(), "config_hash": cfg.digest()}
    _write_rows(path, [row])
    print(f"{scheme}: mean_u={res.mean_u:.4f} mean_c={res.mean_c:.3f} "
          f"mean_energy={res.mean_energy:.5f}")
    return row


def cmd_evaluate(args, cfg: RunConfig, out: Path) -> None:
    env_cfg = _env(cfg, args.seed)
    if args.checkpoint:
        pol = _load_policy(args.checkpoint)
        scheme = Path(args.checkpoint).stem
    else:
        pol, scheme = random_policy(env_cfg.num_actions), "random"
    if pol.num_actions != env_cfg.num_actions:
        raise ConfigError("checkpoint action count does not match the configured system")
    _report(env_cfg, cfg, pol, args.seed, out / f"{scheme}_eval.csv", scheme)


def cmd_verify_theory(args, cfg: RunConfig, out: Path) -> None:
    rho = None if args.rho is None and args.mode == "sampled" else (
        cfg.offline.rho if args.rho is None else args.rho)
    report = lower_bound_experiment(range(args.seed, args.seed + args.num_seeds), mode=args.mode,
                                 rho=rho, nu=cfg.offline.nu, eps=args.eps,
                                 count=args.count)
    path = out / f"theory_{args.mode}.json"
    path.write_text(json.dumps(report, indent=1, sort_keys=True))
    print(f"{args.mode}: violation rate {report['violation_rate']:.4f} over "
          f"{report['checks']} checks, rho used {report['rho_used']:.4g}, "
          f"bound {report['rho_bound']:.4g}; report in {path}")


def cmd_sweep(args, cfg: RunConfig, out: Path) -> None:
    if args.seed_given:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    run_experiment(cfg, out, workers=args.workers, log=print)
    print(f"results in {out / 'results.csv'}, curves in {out / 'curves.csv'}")


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress: bool):
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        parser.add_argument("--config", default=d(None), help="JSON file overriding RunConfig fields")
        parser.add_argument("--seed", type=int, default=d(None), help="master seed (default 0)")
        parser.add_argument("--out-dir", default=d("."), help="directory for outputs")
        parser.add_argument("--full-scale", action="store_true", default=d(False),
                            help="|D|=2e5, minibatch 5000, evaluation horizon 1e5")
        return parser

    # flags are accepted before or after the subcommand
    common = global_flags(argparse.ArgumentParser(add_help=False), suppress=True)
    p = global_flags(argparse.ArgumentParser(
        prog="aosrl", description="AoS-aware status-update learning workbench"), suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="collect an experience dataset")
    g.add_argument("--policy", choices=("random", "expert", "a2c"), default="random",
                   help="expert/a2c: train A2C (or load --checkpoint) and roll it out")
    g.add_argument("--checkpoint", help="actor checkpoint to use as the expert")
    g.add_argument("--count", type=int, help="number of tuples (default: dataset_size)")
    g.add_argument("--output", "--out", dest="output", help="file name inside --out-dir")
    g.set_defaults(func=cmd_gen_data)

    m = sub.add_parser("mix-data", parents=[common], help="mix expert and random datasets")
    m.add_argument("--expert", required=True)
    m.add_argument("--random", required=True)
    m.add_argument("--xi", type=float, required=True, help="expert fraction")
    m.add_argument("--count", type=int)
    m.add_argument("--output", "--out", dest="output", help="file name inside --out-dir")
    m.set_defaults(func=cmd_mix_data)

    for name, func in (("train-online", cmd_train_online), ("train-a2c", cmd_train_a2c)):
        sub.add_parser(name, parents=[common]).set_defaults(func=func)
    for name, func in (("train-offline", cmd_train_offline), ("train-cql", cmd_train_cql)):
        t = sub.add_parser(name, parents=[common])
        t.add_argument("--data", required=True, help="dataset file")
        t.set_defaults(func=func)

    e = sub.add_parser("evaluate", parents=[common], help="roll out a policy")
    e.add_argument("--checkpoint", help="network checkpoint; uniform random if omitted")
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify-theory", parents=[common], help="tabular pessimism check")
    v.add_argument("--mode", choices=("known", "sampled"), default="known")
    v.add_argument("--num-seeds", type=int, default=100)
    v.add_argument("--rho", type=float)
    v.add_argument("--eps", type=float, default=0.05)
    v.add_argument("--count", type=int, default=300, help="tuples per tabular dataset")
    v.set_defaults(func=cmd_verify_theory)

    s = sub.add_parser("sweep", parents=[common], help="grid x seeds experiment")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        cfg = load_config(args.config)
        if args.full_scale:
            cfg = full_scale(cfg)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        args.func(args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, TabularNumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
