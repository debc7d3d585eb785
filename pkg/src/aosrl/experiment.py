"""Grid x seed experiment driver producing tidy CSV tables.

Each cell (grid point, seed) trains every requested scheme from seed-derived
streams and evaluates all of them on the same environment seed, so scheme
comparisons within a cell are paired.
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .baselines import a2c_policy, a2c_train, cql_policy, cql_train, make_a2c_trainer, make_cql_trainer
from .config import ConfigError, RunConfig
from .dataset import Dataset, collect, mix
from .env import AosEnv, with_process, with_radio
from .evaluation import evaluate_policy
from .offline import make_offline_trainer, run_offline
from .online import make_online_trainer, run_online
from .policies import PolicyHandle, random_policy

KNOWN_SCHEMES = ("random", "a2c", "online_dac", "offline_dac_expert", "offline_dac_random",
                 "cql_expert", "cql_random", "offline_dac_mix", "cql_mix")

RESULT_FIELDS = ["scheme", "I", "chi", "varphi", "xi", "seed", "mean_u", "mean_c",
                 "mean_energy", "std_u", "config_hash"]
CURVE_FIELDS = ["scheme", "I", "chi", "varphi", "xi", "seed", "iter", "mean_u", "config_hash"]

# child stream indices of a cell's SeedSequence
_A2C, _ONLINE, _EXPERT, _RANDOM, _MIX, _OFFLINE, _CQL, _EVAL = range(8)


@dataclasses.dataclass(frozen=True)
class Cell:
    I: int
    chi: float
    varphi: float
    seed: int


def grid_cells(cfg: RunConfig) -> list[Cell]:
    return [Cell(I, chi, vp, seed) for I, chi, vp, seed in
            itertools.product(cfg.I_list, cfg.chi_list, cfg.varphi_list, cfg.seeds)]


def cell_env_config(cfg: RunConfig, cell: Cell):
    env = with_radio(cfg.env, I=cell.I)
    return with_process(env, chi=cell.chi, varphi=cell.varphi)


def _cell_seed(cell: Cell) -> np.random.SeedSequence:
    return np.random.SeedSequence([cell.seed, cell.I, round(cell.chi * 1e6),
                                   round(cell.varphi * 1e6)])


def _child(root: np.random.SeedSequence, idx: int, sub: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(root.entropy, spawn_key=(idx, sub))


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def check_schemes(schemes: Iterable[str]) -> None:
    for name in schemes:
        if name not in KNOWN_SCHEMES:
            raise ConfigError(f"unknown scheme {name!r}; choose from {', '.join(KNOWN_SCHEMES)}")


def train_a2c(env_cfg, cfg: RunConfig, ss: np.random.SeedSequence):
    rng = np.random.default_rng(ss)
    env = AosEnv(env_cfg, seed=_int_seed(_child(ss, 0)))
    tr = make_a2c_trainer(env.feature_dim, env.num_actions, cfg.a2c, rng)
    tr.log = a2c_train(env, tr, cfg.a2c_slots, rng, window=cfg.a2c.window)
    return tr


def train_online(env_cfg, cfg: RunConfig, ss: np.random.SeedSequence):
    rng = np.random.default_rng(ss)
    env = AosEnv(env_cfg, seed=_int_seed(_child(ss, 0)))
    tr = make_online_trainer(env.feature_dim, env.num_actions, cfg.online, rng)
    tr.log = run_online(env, tr, cfg.online_slots, rng, window=cfg.online.window)
    return tr


def collect_dataset(env_cfg, policy, size: int, ss: np.random.SeedSequence, policy_id: str,
                    seed: int) -> Dataset:
    rng = np.random.default_rng(ss)
    env = AosEnv(env_cfg, seed=_int_seed(_child(ss, 0)))
    return collect(env, policy, size, rng, policy_id=policy_id, seed=seed)


def train_offline_dac(env_cfg, cfg: RunConfig, dataset: Dataset, ss: np.random.SeedSequence,
                      curve_env_seed: int | None = None):
    """Returns (trainer, curve) where curve is a list of (iteration, mean utility).

    Per-iteration loss rows are left on ``trainer.log``.
    """
    rng = np.random.default_rng(ss)
    tr = make_offline_trainer(dataset.feature_dim, env_cfg.num_actions, cfg.offline, rng)
    curve = []
    hook = None
    if curve_env_seed is not None and cfg.eval_every > 0:
        def hook(actor, it):
            pol = PolicyHandle("actor", env_cfg.num_actions, actor.copy())
            res = evaluate_policy(env_cfg, pol, cfg.curve_horizon,
                                  np.random.default_rng(curve_env_seed), env_seed=curve_env_seed)
            curve.append((it, res.mean_u))
            return res.mean_u
        hook(tr.actor, 0)
    tr.log = run_offline(dataset, tr, cfg.offline.num_iters, rng, eval_hook=hook,
                         eval_every=cfg.eval_every)
    return tr, curve


def train_cql(env_cfg, cfg: RunConfig, dataset: Dataset, ss: np.random.SeedSequence):
    rng = np.random.default_rng(ss)
    tr = make_cql_trainer(dataset.feature_dim, env_cfg.num_actions, cfg.cql, rng)
    tr.log = cql_train(dataset, tr, cfg.cql.num_iters, rng)
    return tr


def run_cell(cfg: RunConfig, cell: Cell) -> tuple[list[dict], list[dict]]:
    """Train and evaluate every scheme of one grid cell."""
    schemes = set(cfg.schemes)
    env_cfg = cell_env_config(cfg, cell)
    root = _cell_seed(cell)
    digest = cfg.digest()
    eval_seed = _int_seed(_child(root, _EVAL))
    base = {"I": cell.I, "chi": cell.chi, "varphi": cell.varphi, "seed": cell.seed,
            "config_hash": digest}
    rows: list[dict] = []
    curves: list[dict] = []

    def record(name: str, policy, xi=""):
        res = evaluate_policy(env_cfg, policy, cfg.eval_horizon,
                              np.random.default_rng(eval_seed), env_seed=eval_seed)
        rows.append({"scheme": name, **base, "xi": xi, "mean_u": res.mean_u,
                     "mean_c": res.mean_c, "mean_energy": res.mean_energy, "std_u": res.std_u})

    def record_curve(name: str, curve, xi=""):
        for it, mu in curve:
            curves.append({"scheme": name, **base, "xi": xi, "iter": it, "mean_u": mu})

    nA = env_cfg.num_actions
    if "random" in schemes:
        record("random", random_policy(nA))
    needs_expert = schemes & {"a2c", "offline_dac_expert", "cql_expert", "offline_dac_mix",
                              "cql_mix"}
    a2c = train_a2c(env_cfg, cfg, _child(root, _A2C)) if needs_expert else None
    if "a2c" in schemes:
        record("a2c", a2c_policy(a2c))
    if "online_dac" in schemes:
        tr = train_online(env_cfg, cfg, _child(root, _ONLINE))
        record("online_dac", PolicyHandle("actor", nA, tr.actor.copy()))
    expert = random_data = None
    if needs_expert - {"a2c"}:
        expert = collect_dataset(env_cfg, a2c_policy(a2c), cfg.dataset_size,
                                 _child(root, _EXPERT), "a2c", cell.seed)
    if schemes & {"offline_dac_random", "cql_random", "offline_dac_mix", "cql_mix"}:
        random_data = collect_dataset(env_cfg, random_policy(nA), cfg.dataset_size,
                                      _child(root, _RANDOM), "random", cell.seed)
    for tag, data, sub in (("expert", expert, 0), ("random", random_data, 1)):
        if f"offline_dac_{tag}" in schemes:
            tr, curve = train_offline_dac(env_cfg, cfg, data, _child(root, _OFFLINE, sub),
                                          eval_seed)
            record(f"offline_dac_{tag}", PolicyHandle("actor", nA, tr.actor.copy()))
            record_curve(f"offline_dac_{tag}", curve)
        if f"cql_{tag}" in schemes:
            record(f"cql_{tag}", cql_policy(train_cql(env_cfg, cfg, data, _child(root, _CQL, sub))))
    if schemes & {"offline_dac_mix", "cql_mix"}:
        for j, xi in enumerate(cfg.xi_list):
            mixed = mix(expert, random_data, xi, np.random.default_rng(_child(root, _MIX, j)))
            if "offline_dac_mix" in schemes:
                tr, curve = train_offline_dac(env_cfg, cfg, mixed,
                                              _child(root, _OFFLINE, 10 + j), eval_seed)
                record("offline_dac_mix", PolicyHandle("actor", nA, tr.actor.copy()), xi)
                record_curve("offline_dac_mix", curve, xi)
            if "cql_mix" in schemes:
                tr = train_cql(env_cfg, cfg, mixed, _child(root, _CQL, 10 + j))
                record("cql_mix", cql_policy(tr), xi)
    return rows, curves


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(cfg: RunConfig, out_dir, workers: int = 1,
                   log: Callable[[str], None] | None = None) -> tuple[list[dict], list[dict]]:
    """Run all cells; writes results.csv and curves.csv under ``out_dir``.

    Rows are written in cell order as each cell completes, whatever the
    worker count, so the files are identical across reruns.
    """
    check_schemes(cfg.schemes)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = grid_cells(cfg)
    all_rows: list[dict] = []
    all_curves: list[dict] = []
    with open(out / "results.csv", "w", newline="") as fr, \
            open(out / "curves.csv", "w", newline="") as fc:
        wr = csv.DictWriter(fr, RESULT_FIELDS, lineterminator="\n")
        wc = csv.DictWriter(fc, CURVE_FIELDS, lineterminator="\n")
        wr.writeheader()
        wc.writeheader()
        if workers > 1:
            pool = ProcessPoolExecutor(workers)
            results = pool.map(_run_cell_args, [(cfg, c) for c in cells])
        else:
            pool = None
            results = (run_cell(cfg, c) for c in cells)
        try:
            for cell, (rows, curves) in zip(cells, results):
                wr.writerows(rows)
                wc.writerows(curves)
                fr.flush()
                fc.flush()
                all_rows.extend(rows)
                all_curves.extend(curves)
                if log is not None:
                    summary = ", ".join(f"{r['scheme']}{'@' + str(r['xi']) if r['xi'] != '' else ''}"
                                        f"={r['mean_u']:.4f}" for r in rows)
                    log(f"I={cell.I} chi={cell.chi} varphi={cell.varphi} seed={cell.seed}: "
                        f"{summary}")
        finally:
            if pool is not None:
                pool.shutdown()
    return all_rows, all_curves


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
