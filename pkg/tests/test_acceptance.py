"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from drcce.cce import cce_gap, find_cce, round_to_cover
from drcce.cli import main, sweep_table
from drcce.envs import make_hardness_pair, make_learnability_mdp, make_sim_game
from drcce.learner import LearnerConfig, bonus, train, value_cap
from drcce.oracles import attach_regret, robust_best_response, robust_policy_eval
from drcce.robust import dual_worst_case, primal_worst_case, tilted_kernel_check

SIGMA = 0.3
K_FIG = 2000
SEEDS = range(20)
RHOS = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]


@pytest.fixture(scope="module")
def sim_runs():
    """Both learners on the nominal sim game, 20 seeds, with regret attached to the robust runs."""
    start = time.perf_counter()
    game = make_sim_game(0.0)
    runs = {"drcce": [], "baseline": []}
    for seed in SEEDS:
        for algo, mode in (("drcce", "robust"), ("baseline", "baseline")):
            cfg = LearnerConfig(K=K_FIG, sigma=(SIGMA, SIGMA), mode=mode)
            rec = train(game, cfg, np.random.default_rng(seed))
            rec.env = {"name": "sim", "params": {}}
            rec.seed = seed
            if algo == "drcce":
                attach_regret(rec, game, SIGMA)
            runs[algo].append(rec)
    return runs, time.perf_counter() - start


def test_criterion_1_strong_duality(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        S = int(rng.integers(1, 11))
        mu = rng.dirichlet(np.ones(S))
        V = rng.uniform(0, 3, S) * (rng.random(S) < 0.8)
        sigma = round(0.1 * int(rng.integers(0, 11)), 1)
        worst = max(worst, abs(dual_worst_case(mu, V, sigma).value - primal_worst_case(mu, V, sigma)[0]))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5
    assert report(1, ok, f"max |dual - primal| = {worst:.2e} over 1000 instances in {elapsed:.2f}s")


def test_criterion_2_hardness_closed_forms(report):
    p, q, sigma = 0.8, 0.2, 0.1
    g1, g2, meta = make_hardness_pair(p, q, sigma)
    B, G = meta["s_bad"], meta["s_good"]
    uniform = np.full((g1.horizon, g1.n_states, 4), 0.25)
    _, Q = robust_policy_eval(g1, uniform, sigma)
    # joint actions a11, a12, a21, a22; player i's own diagonal action is a_ii
    q_ok = np.allclose(Q[0, 1, B], [p - sigma, 0.5 - sigma, 0.5 - sigma, q - sigma], atol=1e-9) and np.allclose(
        Q[1, 1, B], [q - sigma, 0.5 - sigma, 0.5 - sigma, p - sigma], atol=1e-9
    )
    br = [int(robust_best_response(g1, uniform, i, sigma).policy[1, B]) for i in range(2)]
    br_ok = br == [0, 1]  # player i picks its own action i (0-based i - 1)
    total = 0.0
    for game in (g1, g2):
        V, _ = robust_policy_eval(game, uniform, sigma)
        total += sum(robust_best_response(game, uniform, i, sigma).V[0, G] - V[i, 0, G] for i in range(2))
    gap_ok = total >= meta["floor"] - 1e-9
    ok = q_ok and br_ok and gap_ok
    assert report(
        2,
        ok,
        f"Q_2(s_bad) player 1 = {np.round(Q[0, 1, B], 10).tolist()}, BR actions = {[b + 1 for b in br]}, "
        f"summed gap {total:.6f} vs floor {meta['floor']:.6f}",
    )


def test_criterion_3_learnability_bonus(report):
    K = 1000
    game = make_learnability_mdp()
    diag_err, total = 0.0, 0.0
    phi = game.phi[0, 0]

    def check(k, gram, Q, V, pi):
        nonlocal diag_err, total
        expected = (1 + k / 4) / (1 + k / 2)  # k = episodes already played
        diag_err = max(diag_err, float(np.abs(np.diag(gram.inverse(0)) - expected).max()))
        total += float(bonus(phi, gram, 0, 1.0))

    start = time.perf_counter()
    train(game, LearnerConfig(K=K, sigma=0.1), np.random.default_rng(0), behavior=lambda k, h, s: 0, on_episode=check)
    elapsed = time.perf_counter() - start
    ok = diag_err <= 1e-12 and total >= K / np.sqrt(2) and elapsed < 10
    assert report(
        3, ok, f"max diag error {diag_err:.2e}, bonus sum {total:.2f} vs K/sqrt(2) = {K / np.sqrt(2):.2f}, {elapsed:.2f}s"
    )


def test_criterion_4_find_cce(report):
    rng = np.random.default_rng(7)
    H = 3.0
    worst_slack, unstable = -np.inf, 0
    for t in range(1000):
        n = int(rng.integers(1, 4))
        shape = (n,) + tuple(int(c) for c in rng.integers(1, 5, size=n))
        Q = rng.uniform(0, H, shape)
        eps = (0.01, 0.1)[t % 2]
        worst_slack = max(worst_slack, cce_gap(Q, find_cce(Q, eps)) - 2 * eps)
        R = round_to_cover(Q, eps)
        Q2 = R + rng.uniform(-0.9 * eps, 0.9 * eps, shape)
        assert np.array_equal(round_to_cover(Q2, eps), R)
        unstable += not np.array_equal(find_cce(Q, eps), find_cce(Q2, eps))
    ok = worst_slack <= 1e-9 and unstable == 0
    assert report(4, ok, f"max (gap - 2 eps) = {worst_slack:.2e}; {unstable} unstable pairs of 1000")


def test_criterion_5_shrinkage(report, sim_runs):
    runs, _ = sim_runs
    cap = value_cap(SIGMA, 3)
    learned = max(max(r.final_Q.max(), r.final_V.max()) for r in runs["drcce"])
    oracle = 0.0
    game = make_sim_game(0.0)
    rng = np.random.default_rng(0)
    for sigma in (0.3, 0.5, 0.8, 1.0):
        for _ in range(20):
            pi = rng.dirichlet(np.ones(4), size=(3, 5))
            V, Q = robust_policy_eval(game, pi, sigma)
            br = max(robust_best_response(game, pi, i, sigma).V.max() for i in range(2))
            oracle = max(oracle, (max(V.max(), Q.max(), br)) - value_cap(sigma, 3))
    ok = learned <= cap + 1e-9 and oracle <= 1e-9
    assert report(5, ok, f"max learned Q/V {learned:.4f} <= cap {cap:.4f}; max oracle excess over cap {oracle:.2e}")


def test_criterion_6_perturbation_ordering(report, sim_runs):
    runs, elapsed = sim_runs
    table = sweep_table(runs["drcce"] + runs["baseline"], RHOS)
    curve = {
        algo: np.array([next(r["average"] for r in table if r["algo"] == algo and r["rho"] == rho) for rho in RHOS])
        for algo in ("drcce", "baseline")
    }
    rob, base = curve["drcce"], curve["baseline"]
    high = [i for i, r in enumerate(RHOS) if r >= 0.3]
    better = all(rob[i] > base[i] for i in high)
    base_mono = bool((np.diff(base) <= 1e-12).all())
    drop = (base[0] - base[-1]) > (rob[0] - rob[-1])
    ok = better and base_mono and drop and elapsed < 600
    assert report(
        6,
        ok,
        f"robust {np.round(rob, 4).tolist()} vs baseline {np.round(base, 4).tolist()}; "
        f"robust > baseline for rho >= 0.3: {better}, baseline non-increasing: {base_mono}, "
        f"baseline drop larger: {drop}; training {elapsed:.0f}s",
    )


def test_criterion_7_regret_sublinear(report, sim_runs):
    runs, _ = sim_runs
    reg = np.mean([r.regret() for r in runs["drcce"]], axis=0)
    early, late = reg[199] / 200, reg[1999] / 2000
    ok = late <= 0.6 * early
    assert report(7, ok, f"Regret(200)/200 = {early:.5f}, Regret(2000)/2000 = {late:.5f}, ratio {late / early:.3f}")


def test_criterion_8_tilted_kernel(report):
    rng = np.random.default_rng(43)
    agree, sigma_form_fail, lines = 0, 0, []
    for t in range(100):
        S = int(rng.integers(2, 9))
        mu = rng.dirichlet(np.ones(S))
        V = rng.uniform(0, 3, S)
        V[rng.integers(S)] = 0.0
        sigma = float(rng.uniform(0.05, 0.95))
        rep = tilted_kernel_check(mu, V, sigma)
        brute = primal_worst_case(mu, V, sigma)[0]
        consistent = (
            abs(rep.factor - (1 - sigma)) < 1e-15
            and abs(rep.factor * rep.tilted @ V - brute) <= 1e-9
            and rep.ratio_bound_ok
            and abs(rep.tilted.sum() - 1) <= 1e-12
        )
        agree += consistent
        sigma_form_fail += not rep.sigma_form_ok
        if t < 3:
            lines.append(rep.summary())
    for line in lines:
        print("  " + line)
    ok = agree == 100
    assert report(
        8,
        ok,
        f"(1-sigma, 1/(1-sigma)) pair consistent on {agree}/100; "
        f"the (sigma, 1/sigma) pair misses the worst-case value on {sigma_form_fail}/100",
    )


def test_criterion_9_determinism(report, tmp_path):
    paths = []
    for tag in ("a", "b"):
        run, csv = tmp_path / f"{tag}.json", tmp_path / f"{tag}.csv"
        assert main(["train", "--K", "200", "--seed", "17", "--out", str(run)]) == 0
        assert main(["regret", str(run), "--out", str(csv)]) == 0
        paths.append((run.read_bytes(), csv.read_bytes()))
    ok = paths[0] == paths[1]
    assert report(9, ok, f"run record {len(paths[0][0])} bytes and regret CSV {len(paths[0][1])} bytes identical: {ok}")
