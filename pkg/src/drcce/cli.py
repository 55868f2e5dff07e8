"""Command-line experiment runner.

Subcommands: train, regret, sweep, hardness-demo, validate, env.
All randomness comes from explicit ``--seed``/``--seeds`` flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .envs import ENVIRONMENTS, PerturbationSpec, make_env, make_hardness_pair, make_sim_game, perturb
from .game import GameError, LinearMarkovGame, validate
from .learner import LearnerConfig, train
from .oracles import (
    attach_regret,
    evaluate_under_perturbation,
    robust_best_response,
    robust_policy_eval,
)
from .records import RunRecord

REGRET_SCHEMA = "# drcce-regret v1"
SWEEP_SCHEMA = "# drcce-sweep v1"
ALGOS = {"drcce": "robust", "baseline": "baseline"}
DEFAULT_RHOS = "0,0.1,0.2,0.3,0.4,0.5"


def _floats(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _seeds(text: str) -> list:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            out.append(int(part))
    return out


def _params(items) -> dict:
    out = {}
    for item in items or []:
        key, _, value = item.partition("=")
        if not _:
            raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {item!r}")
        out[key.replace("-", "_")] = float(value)
    return out


def perturbation_factory(env: dict):
    """rho -> test-time game for a recorded environment."""
    name, params = env["name"], dict(env.get("params", {}))
    if name == "sim":
        params.pop("rho", None)
        return lambda rho: make_sim_game(rho, **params)
    game = make_env(name, **params)
    spec = lambda rho: PerturbationSpec(rho, tuple(range(game.horizon)), tuple(range(game.dim)))
    return lambda rho: perturb(game, spec(rho))


def _train_one(env: dict, algo: str, K: int, sigma, seed: int, args) -> RunRecord:
    game = make_env(env["name"], **env.get("params", {}))
    sigma = list(np.broadcast_to(np.asarray(sigma, float), (game.n_players,)))
    cfg = LearnerConfig(
        K=K,
        sigma=tuple(sigma),
        lam=args.lam,
        c_beta=args.c_beta,
        delta=args.delta,
        eps=args.eps,
        mode=ALGOS[algo],
        beta=None if args.beta is None else tuple(_floats(args.beta)),
    )
    record = train(game, cfg, np.random.default_rng(seed), snapshot_every=args.snapshot_every)
    record.env = env
    record.seed = seed
    if not args.no_regret:
        eval_sigma = sigma if args.eval_sigma is None else _floats(args.eval_sigma)
        attach_regret(record, game, eval_sigma)
    return record


def cmd_train(args) -> int:
    env = {"name": args.env, "params": _params(args.env_param)}
    record = _train_one(env, args.algo, args.K, _floats(args.sigma), args.seed, args)
    record.save(args.out)
    print(f"wrote {args.out} ({args.K} episodes, {record.wall_clock:.2f}s)")
    return 0


def regret_csv(record: RunRecord) -> str:
    if record.gaps is None:
        raise ValueError("run record has no regret data (trained with --no-regret?)")
    buf = io.StringIO()
    buf.write(REGRET_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    n = record.gaps.shape[1]
    w.writerow(["k"] + [f"gap_player_{i + 1}" for i in range(n)] + ["cumulative"])
    cum = record.regret()
    for k, gaps, c in zip(record.gap_episodes, record.gaps, cum):
        w.writerow([int(k) + 1] + [repr(float(g)) for g in gaps] + [repr(float(c))])
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_regret(args) -> int:
    _emit(regret_csv(RunRecord.load(args.run)), args.out)
    return 0


def sweep_table(records, rhos) -> list:
    """Seed-averaged value per (algo, player, rho) and cross-player average."""
    groups = {}
    for rec in records:
        algo = "drcce" if rec.config["mode"] == "robust" else "baseline"
        rows = evaluate_under_perturbation(perturbation_factory(rec.env), rec.final_policy, rhos)
        groups.setdefault(algo, []).append([r["values"] for r in rows])
    table = []
    for algo in sorted(groups):
        vals = np.mean(np.array(groups[algo]), axis=0)  # (rho, n)
        for i in range(vals.shape[1]):
            for r, rho in enumerate(rhos):
                table.append(
                    dict(rho=float(rho), algo=algo, player=i + 1, value=float(vals[r, i]), average=float(vals[r].mean()))
                )
    return table


def sweep_csv(table) -> str:
    buf = io.StringIO()
    buf.write(SWEEP_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho", "algo", "player", "value", "average"])
    for row in table:
        w.writerow([repr(row["rho"]), row["algo"], row["player"], repr(row["value"]), repr(row["average"])])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    rhos = _floats(args.rho)
    if args.runs:
        records = [RunRecord.load(p) for p in args.runs]
    else:
        if args.seeds is None:
            raise SystemExit("sweep: --seeds is required when no --runs are given")
        env = {"name": args.env, "params": _params(args.env_param)}
        args.no_regret, args.eval_sigma, args.snapshot_every = True, None, args.K
        records = [
            _train_one(env, algo, args.K, _floats(args.sigma), seed, args)
            for algo in args.algos.split(",")
            for seed in _seeds(args.seeds)
        ]
    _emit(sweep_csv(sweep_table(records, rhos)), args.out)
    return 0


def hardness_report(p: float, q: float, sigma: float) -> dict:
    """Closed-form floor and oracle gaps for a policy uniform at s_bad."""
    g1, g2, meta = make_hardness_pair(p, q, sigma)
    pi = np.full((g1.horizon, g1.n_states, g1.n_joint_actions), 0.25)
    B, G = meta["s_bad"], meta["s_good"]
    out = {"floor": meta["floor"], "games": []}
    total = 0.0
    for theta, game in ((1, g1), (2, g2)):
        V, Q = robust_policy_eval(game, pi, sigma)
        entry = {"theta": theta, "Q_step2_s_bad": Q[:, 1, B].tolist(), "br_action_s_bad": [], "gaps": []}
        for i in range(2):
            br = robust_best_response(game, pi, i, sigma)
            entry["br_action_s_bad"].append(int(br.policy[1, B]) + 1)
            gap = float(br.V[0, G] - V[i, 0, G])
            entry["gaps"].append(gap)
            total += gap
        out["games"].append(entry)
    out["summed_gap"] = total
    return out


def cmd_hardness(args) -> int:
    rep = hardness_report(args.p, args.q, args.sigma)
    print(f"closed-form floor sigma*min(2p-1, 1-2q) = {rep['floor']:.6g}")
    for g in rep["games"]:
        qs = ", ".join("[" + ", ".join(f"{x:.4f}" for x in row) + "]" for row in g["Q_step2_s_bad"])
        print(f"theta={g['theta']}: Q_2(s_bad, a11..a22) per player = {qs}")
        print(f"  best response at s_bad per player = {g['br_action_s_bad']}; gaps = {[round(x, 6) for x in g['gaps']]}")
    print(f"summed gap over both instances and players = {rep['summed_gap']:.6g}")
    return 0


def cmd_validate(args) -> int:
    try:
        game = LinearMarkovGame.load(args.game)
    except (GameError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    problems = validate(game)
    for v in problems:
        print(v)
    if not problems:
        print("ok: no violations")
    return 1 if problems else 0


def cmd_env(args) -> int:
    game = make_env(args.name, **_params(args.env_param))
    text = json.dumps(game.to_dict(), indent=1)
    _emit(text + "\n", args.out)
    return 0


def _learner_flags(p):
    p.add_argument("--K", type=int, default=2000)
    p.add_argument("--sigma", default="0.3", help="TV radius, one value or comma-separated per player")
    p.add_argument("--beta", default=None, help="override the bonus scale (one value or one per player)")
    p.add_argument("--c-beta", type=float, default=LearnerConfig.c_beta)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=None, help="cover width (default 1/(K H))")
    p.add_argument("--env", default="sim", choices=sorted(ENVIRONMENTS))
    p.add_argument("--env-param", action="append", metavar="KEY=VALUE", help="environment constructor override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drcce", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one learner and write a run record")
    _learner_flags(p)
    p.add_argument("--algo", choices=sorted(ALGOS), default="drcce")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eval-sigma", default=None, help="radii for regret evaluation (default --sigma)")
    p.add_argument("--snapshot-every", type=int, default=1)
    p.add_argument("--no-regret", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("regret", help="per-episode regret CSV from a run record")
    p.add_argument("run")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_regret)

    p = sub.add_parser("sweep", help="value of trained policies under test-time perturbation")
    _learner_flags(p)
    p.add_argument("--runs", nargs="*", default=None)
    p.add_argument("--seeds", default=None, help="e.g. 0-19; trains every algo per seed when --runs is absent")
    p.add_argument("--algos", default="drcce,baseline")
    p.add_argument("--rho", default=DEFAULT_RHOS)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hardness-demo", help="closed-form floor vs oracle gaps on the hardness pair")
    p.add_argument("--p", type=float, default=0.8)
    p.add_argument("--q", type=float, default=0.2)
    p.add_argument("--sigma", type=float, default=0.1)
    p.set_defaults(func=cmd_hardness)

    p = sub.add_parser("validate", help="check a game document")
    p.add_argument("game")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("env", help="write a built-in environment as a game document")
    p.add_argument("name", choices=sorted(ENVIRONMENTS))
    p.add_argument("--env-param", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_env)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, GameError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
