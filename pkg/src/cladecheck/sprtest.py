"""Topology test statistics over SPR neighborhoods.

Both variants first optimize the focal tree's branch lengths (numerator),
then divide its likelihood by a log-sum-exp over the neighborhood:

- plain: every type ii/iii move result is evaluated as-is with the
  midpoint-assigned branch lengths; the four length-variants of each type-ii
  topology are down-weighted by 1/4.
- opt: one term per distinct neighbor topology, with branch lengths
  re-optimized starting from the best-scoring midpoint variant.  Since the
  optimizer never loses likelihood from its warm start, each opt denominator
  term is at least the corresponding weighted plain contribution, which
  forces statistic_opt <= statistic_plain.

The focal tree itself enters the denominator once with weight 1, so the
statistic always lies in (0, 1].
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .alignment import Alignment, PatternTable, compress
from .brlenopt import DEFAULT_CONFIG, OptimizerConfig, optimize_all
from .likelihood import flatten
from .spr import apply_move_plain, grouped_neighbor_moves
from .treemodel import Tree, TreeError, topology_newick, write_newick

__all__ = ["TestReport", "NeighborTerm", "spr_plain", "spr_opt", "score_topology", "evaluate"]

PLAIN = "plain"
OPT = "opt"
VARIANTS = (PLAIN, OPT)


@dataclass
class NeighborTerm:
    """One denominator term: a topology id, its weight, and a log-likelihood."""

    topology: str
    weight: Fraction
    log_likelihood: float
    provenance: str  # "self", "spr", or "spr-opt"


@dataclass
class TestReport:
    variant: str
    statistic: float
    numerator_log_likelihood: float
    denominator_log_sum: float
    neighbors: list[NeighborTerm]
    timings: dict[str, float] = field(default_factory=dict)
    tree_newick: str = ""
    n_sites: int = 0

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "statistic": self.statistic,
            "numerator_log_likelihood": self.numerator_log_likelihood,
            "denominator_log_sum": self.denominator_log_sum,
            "tree": self.tree_newick,
            "n_sites": self.n_sites,
            "timings_s": dict(self.timings),
            "neighbors": [
                {
                    "topology": t.topology,
                    "weight": str(t.weight),
                    "log_likelihood": t.log_likelihood,
                    "provenance": t.provenance,
                }
                for t in self.neighbors
            ],
        }


def _as_table(data: Alignment | PatternTable) -> PatternTable:
    if isinstance(data, PatternTable):
        return data
    return compress(data)


def _log_sum(terms: list[tuple[float, Fraction]]) -> float:
    lls = np.array([ll for ll, _ in terms])
    weights = np.array([float(w) for _, w in terms])
    return float(logsumexp(lls, b=weights))


def evaluate(
    tree: Tree,
    data: Alignment | PatternTable,
    variants=VARIANTS,
    config: OptimizerConfig | None = None,
) -> dict[str, TestReport]:
    """Run the requested variants, sharing the optimized numerator and the
    midpoint neighbor evaluations between them."""
    cfg = config or DEFAULT_CONFIG
    table = _as_table(data)
    if tree.leaf_count < 4:
        raise TreeError("the SPR tests need at least four leaves")
    variants = tuple(variants)
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")

    t0 = time.perf_counter()
    t_opt, numerator = optimize_all(tree, table, cfg)
    t_numerator = time.perf_counter() - t0

    t0 = time.perf_counter()
    groups = grouped_neighbor_moves(t_opt)
    t_enumerate = time.perf_counter() - t0

    # Evaluate every midpoint-length variant once (plain denominator terms,
    # and warm-start selection for the opt variant).
    t0 = time.perf_counter()
    evaluated = []  # per group: list of (tree, loglik)
    for moves in groups:
        row = []
        for mv in moves:
            nb = apply_move_plain(t_opt, mv)
            row.append((nb, flatten(nb, table).loglik()))
        evaluated.append(row)
    t_evaluate = time.perf_counter() - t0

    reports: dict[str, TestReport] = {}
    self_text = topology_newick(t_opt)
    tree_text = write_newick(t_opt)

    if PLAIN in variants:
        neighbors = [NeighborTerm(self_text, Fraction(1), numerator, "self")]
        for moves, row in zip(groups, evaluated):
            weight = Fraction(1, 4) if moves[0].move_type == "ii" else Fraction(1)
            topo = topology_newick(row[0][0])
            for _, ll in row:
                neighbors.append(NeighborTerm(topo, weight, ll, "spr"))
        denom = _log_sum([(t.log_likelihood, t.weight) for t in neighbors])
        reports[PLAIN] = TestReport(
            variant=PLAIN,
            statistic=float(np.exp(numerator - denom)),
            numerator_log_likelihood=numerator,
            denominator_log_sum=denom,
            neighbors=neighbors,
            timings={
                "numerator_s": t_numerator,
                "enumerate_s": t_enumerate,
                "evaluate_s": t_evaluate,
            },
            tree_newick=tree_text,
            n_sites=table.n_sites,
        )

    if OPT in variants:
        t0 = time.perf_counter()
        neighbors = [NeighborTerm(self_text, Fraction(1), numerator, "self")]
        for row in evaluated:
            best_tree, _best_ll = max(row, key=lambda item: item[1])
            _, ll_opt = optimize_all(best_tree, table, cfg)
            neighbors.append(
                NeighborTerm(topology_newick(best_tree), Fraction(1), ll_opt, "spr-opt")
            )
        t_reopt = time.perf_counter() - t0
        denom = _log_sum([(t.log_likelihood, t.weight) for t in neighbors])
        reports[OPT] = TestReport(
            variant=OPT,
            statistic=float(np.exp(numerator - denom)),
            numerator_log_likelihood=numerator,
            denominator_log_sum=denom,
            neighbors=neighbors,
            timings={
                "numerator_s": t_numerator,
                "enumerate_s": t_enumerate,
                "evaluate_s": t_evaluate,
                "reoptimize_s": t_reopt,
            },
            tree_newick=tree_text,
            n_sites=table.n_sites,
        )
    return reports


def spr_plain(tree: Tree, data: Alignment | PatternTable, config: OptimizerConfig | None = None) -> TestReport:
    """Test statistic with midpoint-length neighbors (no re-optimization)."""
    return evaluate(tree, data, (PLAIN,), config)[PLAIN]


def spr_opt(tree: Tree, data: Alignment | PatternTable, config: OptimizerConfig | None = None) -> TestReport:
    """Test statistic with per-topology re-optimized neighbors."""
    return evaluate(tree, data, (OPT,), config)[OPT]


def score_topology(
    tree: Tree,
    data: Alignment | PatternTable,
    variant: str,
    config: OptimizerConfig | None = None,
) -> TestReport:
    """Score an arbitrary topology (not necessarily the ML tree): its own
    branch lengths are optimized first, then the chosen variant is computed."""
    return evaluate(tree, data, (variant,), config)[variant]
