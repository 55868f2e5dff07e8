"""Online distributionally robust learning in linear Markov games."""

from .cce import cce_gap, find_cce, round_to_cover, solve_cce
from .envs import make_hardness_pair, make_learnability_mdp, make_sim_game, perturb, sim_perturbation
from .game import LinearMarkovGame, sample_next_state, tabular_embedding, transition_distribution, validate
from .learner import GramState, LearnerConfig, beta_schedule, train, train_baseline
from .oracles import (
    evaluate_under_perturbation,
    marginalize_out,
    regret_curve,
    robust_best_response,
    robust_policy_eval,
)
from .records import RunRecord
from .robust import dual_worst_case, primal_worst_case, robust_factor_expectation, tilted_kernel_check

__version__ = "0.1.0"
