"""Comparison methods sharing the same engine: iterative magnitude pruning
with weight rewinding, uniform random masks, plain one-shot thresholding,
and the dense reference arm.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import TicketReport, mac_count
from .data import Dataset
from .masks import (BinaryMasks, init_soft_masks, kept_count,
                    one_shot_threshold)
from .nn import GcnParams, evaluate_accuracy, glorot_params
from .train import train_oneshot_phase, train_theta_only, verify_ticket


@dataclass
class ImpConfig:
    """Per-round prune fractions and training budget for iterative pruning."""

    p_g: float = 0.05
    p_theta: float = 0.2
    epochs_per_round: int = 200
    rewind: bool = True

    def validate(self) -> "ImpConfig":
        for name, p in (("p_g", self.p_g), ("p_theta", self.p_theta)):
            if not 0.0 <= p < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {p}")
        if self.p_g == 0.0 and self.p_theta == 0.0:
            raise ValueError("at least one prune fraction must be positive")
        if self.epochs_per_round < 1:
            raise ValueError("epochs_per_round must be >= 1")
        return self


def imp_rounds_needed(p: float, target: float) -> int:
    """Smallest k with 1 - (1-p)^k >= target."""
    if target <= 0.0:
        return 0
    if p <= 0.0:
        raise ValueError(f"target sparsity {target} unreachable with p=0")
    return int(np.ceil(np.log(1.0 - target) / np.log(1.0 - p) - 1e-12))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _prune_lowest(mask: np.ndarray, scores: np.ndarray, n: int) -> np.ndarray:
    """Drop the n kept entries of smallest |score| (ties by index)."""
    kept = np.flatnonzero(mask)
    order = kept[np.argsort(np.abs(scores[kept]), kind="stable")]
    out = mask.copy()
    out[order[:n]] = False
    return out


@dataclass
class ImpResult:
    report: TicketReport
    binary: BinaryMasks
    round_masks: list[BinaryMasks]          # mask state after each round
    level_masks: dict[float, np.ndarray] = field(default_factory=dict)
    params: GcnParams = None


def run_imp(dataset: Dataset, imp: ImpConfig, *, s_g: float, s_theta: float,
            seed: int = 0, lr: float = 0.001, hidden: int = 512,
            dtype=np.float64, retrain_epochs: int | None = None,
            params0: GcnParams | None = None,
            record_levels: list[float] | None = None,
            config_digest: str = "") -> ImpResult:
    """Train, prune a fraction of what remains, rewind, repeat.

    Each round trains weights and soft masks for the round budget, prunes
    p_g of the kept edges and p_theta of the kept weights by soft-mask
    magnitude, and rewinds the weights to their initialization. A mask type
    stops pruning once its own target is met; the loop ends when both are.

    ``record_levels`` (graph sparsities) makes the edge prune counts land
    exactly on each requested level as it is crossed and snapshots the edge
    mask there, so distance curves can compare methods at matched levels.
    """
    imp.validate()
    t_start = time.perf_counter()
    if params0 is not None:
        params = params0.fresh_copy()
    else:
        params = glorot_params(dataset.num_features, hidden,
                               dataset.num_classes, seed=seed, dtype=dtype)
    hidden = params.hidden
    shape0, shape1 = params.theta0.shape, params.theta1.shape
    soft0 = init_soft_masks(dataset, shape0, shape1, seed=seed, dtype=dtype)

    if s_g > 0 and imp.p_g == 0.0:
        raise ValueError("graph target unreachable with p_g=0")
    if s_theta > 0 and imp.p_theta == 0.0:
        raise ValueError("weight target unreachable with p_theta=0")

    n_edges = dataset.num_edges
    binary = BinaryMasks.all_ones(n_edges, shape0, shape1)
    w_universe = binary.weight_universe
    tgt_kept_e = kept_count(n_edges, s_g)
    tgt_kept_w = kept_count(w_universe, s_theta)
    levels = sorted(record_levels) if record_levels else []
    level_kept = {lvl: kept_count(n_edges, lvl) for lvl in levels}
    level_masks: dict[float, np.ndarray] = {}

    round_masks: list[BinaryMasks] = []
    last_train = None
    while True:
        kept_e = int(binary.edges.sum())
        kept_w = int(binary.weights_flat().sum())
        pending_levels = [lvl for lvl in levels if lvl not in level_masks]
        done = kept_e <= tgt_kept_e and kept_w <= tgt_kept_w \
            and not pending_levels
        if done:
            break

        if imp.rewind:
            params.rewind()
        soft = soft0.copy()
        last_train = train_oneshot_phase(dataset, params, soft,
                                         epochs=imp.epochs_per_round, lr=lr,
                                         binary=binary)
        best = last_train.best_soft

        new_edges = binary.edges
        if kept_e > tgt_kept_e or pending_levels:
            n_drop = _round_half_up(imp.p_g * kept_e)
            n_drop = max(n_drop, 1)
            if pending_levels:
                next_level_kept = level_kept[pending_levels[0]]
                if kept_e - n_drop < next_level_kept:
                    n_drop = kept_e - next_level_kept
            new_edges = _prune_lowest(binary.edges, best.edges, n_drop)
            for lvl in pending_levels:
                if int(new_edges.sum()) == level_kept[lvl]:
                    level_masks[lvl] = new_edges.copy()

        new_wflat = binary.weights_flat()
        if kept_w > tgt_kept_w:
            n_drop = max(_round_half_up(imp.p_theta * kept_w), 1)
            new_wflat = _prune_lowest(new_wflat, best.weights_flat(), n_drop)

        binary = binary.with_edges(new_edges).with_weights_flat(new_wflat)
        round_masks.append(binary)

    t_search = time.perf_counter()
    if last_train is None:     # degenerate (0, 0) targets: nothing to prune
        last_train = train_oneshot_phase(dataset, params, soft0.copy(),
                                         epochs=imp.epochs_per_round, lr=lr,
                                         binary=binary)
        t_search = time.perf_counter()

    acc_inplace = evaluate_accuracy(params, last_train.best_soft, binary,
                                    dataset, dataset.test_idx)
    verify_epochs = retrain_epochs if retrain_epochs is not None \
        else imp.epochs_per_round
    verify = verify_ticket(dataset, params, binary, verify_epochs, lr=lr)
    t_end = time.perf_counter()

    report = TicketReport(
        method="imp",
        s_g=binary.graph_sparsity(), s_theta=binary.weight_sparsity(),
        acc_inplace=acc_inplace, acc_retrained=verify.test_at_best,
        macs=mac_count(dataset, binary, hidden),
        dense_macs=mac_count(dataset, None, hidden),
        seed=seed, config_digest=config_digest,
        phase_seconds={"rounds": t_search - t_start,
                       "verify": t_end - t_search},
        search_seconds=t_search - t_start, total_seconds=t_end - t_start,
        search_epochs=len(round_masks) * imp.epochs_per_round,
        verify_epochs=verify_epochs,
        extra={"rounds": len(round_masks), "p_g": imp.p_g,
               "p_theta": imp.p_theta})
    return ImpResult(report=report, binary=binary, round_masks=round_masks,
                     level_masks=level_masks, params=params)


@dataclass
class BaselineResult:
    report: TicketReport
    binary: BinaryMasks
    params: GcnParams
    soft_edges: np.ndarray | None = None


def random_masks(dataset: Dataset, shape0, shape1, *, s_g: float,
                 s_theta: float, seed: int) -> BinaryMasks:
    """Uniformly random masks at exactly the target kept counts."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A17]))
    edges = np.zeros(dataset.num_edges, dtype=bool)
    edges[rng.permutation(dataset.num_edges)[:kept_count(dataset.num_edges,
                                                         s_g)]] = True
    w_universe = shape0[0] * shape0[1] + shape1[0] * shape1[1]
    wflat = np.zeros(w_universe, dtype=bool)
    wflat[rng.permutation(w_universe)[:kept_count(w_universe,
                                                  s_theta)]] = True
    return BinaryMasks(edges=edges, theta0=np.ones(shape0, dtype=bool),
                       theta1=np.ones(shape1, dtype=bool)
                       ).with_weights_flat(wflat)


def run_random(dataset: Dataset, *, s_g: float, s_theta: float,
               epochs: int, seed: int = 0, lr: float = 0.001,
               hidden: int = 512, dtype=np.float64,
               retrain_epochs: int | None = None,
               params0: GcnParams | None = None,
               config_digest: str = "") -> BaselineResult:
    """Random masks at exact target sparsity, trained and then verified."""
    t_start = time.perf_counter()
    if params0 is not None:
        params = params0.fresh_copy()
    else:
        params = glorot_params(dataset.num_features, hidden,
                               dataset.num_classes, seed=seed, dtype=dtype)
    hidden = params.hidden
    binary = random_masks(dataset, params.theta0.shape, params.theta1.shape,
                          s_g=s_g, s_theta=s_theta, seed=seed)
    inplace = train_theta_only(dataset, params, binary, epochs, lr=lr)
    t_search = time.perf_counter()
    verify_epochs = retrain_epochs if retrain_epochs is not None else epochs
    verify = verify_ticket(dataset, params, binary, verify_epochs, lr=lr)
    t_end = time.perf_counter()

    report = TicketReport(
        method="random",
        s_g=binary.graph_sparsity(), s_theta=binary.weight_sparsity(),
        acc_inplace=inplace.test_at_best, acc_retrained=verify.test_at_best,
        macs=mac_count(dataset, binary, hidden),
        dense_macs=mac_count(dataset, None, hidden),
        seed=seed, config_digest=config_digest,
        phase_seconds={"train": t_search - t_start,
                       "verify": t_end - t_search},
        search_seconds=t_search - t_start, total_seconds=t_end - t_start,
        search_epochs=epochs, verify_epochs=verify_epochs)
    return BaselineResult(report=report, binary=binary, params=params)


def run_oneshot_only(dataset: Dataset, *, s_g: float, s_theta: float,
                     epochs: int, seed: int = 0, lr: float = 0.001,
                     hidden: int = 512, dtype=np.float64,
                     retrain_epochs: int | None = None,
                     params0: GcnParams | None = None,
                     config_digest: str = "") -> BaselineResult:
    """One co-training phase, then threshold straight to the targets."""
    t_start = time.perf_counter()
    if params0 is not None:
        params = params0.fresh_copy()
    else:
        params = glorot_params(dataset.num_features, hidden,
                               dataset.num_classes, seed=seed, dtype=dtype)
    hidden = params.hidden
    shape0, shape1 = params.theta0.shape, params.theta1.shape
    soft = init_soft_masks(dataset, shape0, shape1, seed=seed, dtype=dtype)
    oneshot = train_oneshot_phase(dataset, params, soft, epochs=epochs,
                                  lr=lr)
    best = oneshot.best_soft
    binary = BinaryMasks(
        edges=one_shot_threshold(best.edges, s_g),
        theta0=np.ones(shape0, dtype=bool),
        theta1=np.ones(shape1, dtype=bool),
    ).with_weights_flat(one_shot_threshold(best.weights_flat(), s_theta))
    t_search = time.perf_counter()

    acc_inplace = evaluate_accuracy(params, best, binary, dataset,
                                    dataset.test_idx)
    verify_epochs = retrain_epochs if retrain_epochs is not None else epochs
    verify = verify_ticket(dataset, params, binary, verify_epochs, lr=lr)
    t_end = time.perf_counter()

    report = TicketReport(
        method="oneshot",
        s_g=binary.graph_sparsity(), s_theta=binary.weight_sparsity(),
        acc_inplace=acc_inplace, acc_retrained=verify.test_at_best,
        macs=mac_count(dataset, binary, hidden),
        dense_macs=mac_count(dataset, None, hidden),
        seed=seed, config_digest=config_digest,
        phase_seconds={"oneshot": t_search - t_start,
                       "verify": t_end - t_search},
        search_seconds=t_search - t_start, total_seconds=t_end - t_start,
        search_epochs=epochs, verify_epochs=verify_epochs,
        extra={"oneshot_best_epoch": oneshot.best_epoch})
    return BaselineResult(report=report, binary=binary, params=params,
                          soft_edges=best.edges)


def run_dense(dataset: Dataset, *, epochs: int, seed: int = 0,
              lr: float = 0.001, hidden: int = 512, dtype=np.float64,
              params0: GcnParams | None = None,
              config_digest: str = "") -> BaselineResult:
    """The unpruned reference arm every ticket is judged against."""
    t_start = time.perf_counter()
    if params0 is not None:
        params = params0.fresh_copy()
    else:
        params = glorot_params(dataset.num_features, hidden,
                               dataset.num_classes, seed=seed, dtype=dtype)
    hidden = params.hidden
    trained = train_theta_only(dataset, params, None, epochs, lr=lr)
    t_end = time.perf_counter()

    report = TicketReport(
        method="dense", s_g=0.0, s_theta=0.0,
        acc_inplace=trained.test_at_best,
        acc_retrained=trained.test_at_best,
        macs=mac_count(dataset, None, hidden),
        dense_macs=mac_count(dataset, None, hidden),
        seed=seed, config_digest=config_digest,
        phase_seconds={"train": t_end - t_start},
        search_seconds=t_end - t_start, total_seconds=t_end - t_start,
        search_epochs=epochs, verify_epochs=0,
        extra={"best_epoch": trained.best_epoch})
    return BaselineResult(report=report,
                          binary=None, params=params)
