from .analytic import AnalyticQuadraticProblem, make_analytic
from .base import BilevelProblem
from .supernet import ToySupernet, discretized_alpha, evaluate_architecture, random_alpha

__all__ = [
    "AnalyticQuadraticProblem",
    "BilevelProblem",
    "ToySupernet",
    "discretized_alpha",
    "evaluate_architecture",
    "random_alpha",
    "make_analytic",
    "build_problem",
]


def build_problem(cfg):
    """Construct the problem selected by a ProblemConfig."""
    if cfg.problem == "analytic":
        return make_analytic(
            d_alpha=cfg.d_alpha,
            d_omega=cfg.d_omega,
            seed=cfg.data_seed,
            reg=cfg.reg,
            cond=cfg.cond,
        )
    return ToySupernet(
        nodes=cfg.nodes,
        ops_per_edge=cfg.ops_per_edge,
        data_seed=cfg.data_seed,
        batch_size=cfg.batch_size,
    )
