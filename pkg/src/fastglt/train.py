"""Training loops: one-shot mask co-training, masked weight-only training,
and the retrain-from-initialization check that decides whether a sparse
(graph, network) pair really is a winning ticket.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import Dataset
from .graph import normalize_adjacency
from .masks import BinaryMasks
from .nn import (GcnParams, Gradients, SoftMasks, backward, evaluate_accuracy,
                 feature_operator, gcn_forward, masked_loss)
from .optim import AdamState, adam_step


@dataclass
class EpochStats:
    loss: float
    val_acc: float
    test_acc: float
    grads: Gradients = field(repr=False, default=None)


class TrainLoop:
    """Owns the mutable state of one full-batch training session.

    Which tensors move is fixed at construction: the one-shot phase trains
    weights and both soft masks, the denoising phase trains weights and the
    soft edge mask only, verification retrains train weights alone. Binary
    masks, when present, gate both the forward pass and the updates; call
    :meth:`rebuild_norm` after changing the binary edge mask.
    """

    def __init__(self, dataset: Dataset, params: GcnParams, soft: SoftMasks,
                 binary: BinaryMasks | None = None, lr: float = 0.001,
                 update_theta: bool = True, update_soft_edges: bool = False,
                 update_soft_weights: bool = False):
        self.dataset = dataset
        self.params = params
        self.soft = soft
        self.binary = binary
        self.update_theta = update_theta
        self.update_soft_edges = update_soft_edges
        self.update_soft_weights = update_soft_weights
        self.x_op = feature_operator(dataset, params.theta0.dtype)
        self.norm = None
        self.rebuild_norm()
        self.opt_theta0 = AdamState.for_param(params.theta0, lr)
        self.opt_theta1 = AdamState.for_param(params.theta1, lr)
        self.opt_m_edges = AdamState.for_param(soft.edges, lr)
        self.opt_m_theta0 = AdamState.for_param(soft.theta0, lr)
        self.opt_m_theta1 = AdamState.for_param(soft.theta1, lr)

    def rebuild_norm(self) -> None:
        mask = self.binary.edges if self.binary is not None else None
        self.norm = normalize_adjacency(self.dataset, mask)

    def _binary_or_none(self, attr: str):
        return getattr(self.binary, attr) if self.binary is not None else None

    def run_epoch(self) -> EpochStats:
        """One forward/backward/update sweep plus a post-update eval."""
        ds = self.dataset
        logits, cache = gcn_forward(self.params, self.soft, self.binary, ds,
                                    norm=self.norm, x_op=self.x_op)
        loss = masked_loss(logits, ds.labels, ds.train_idx)
        grads = backward(cache, ds.labels, ds.train_idx)

        if self.update_theta:
            adam_step(self.opt_theta0, self.params.theta0, grads.theta0,
                      self._binary_or_none("theta0"), name="theta0")
            adam_step(self.opt_theta1, self.params.theta1, grads.theta1,
                      self._binary_or_none("theta1"), name="theta1")
        if self.update_soft_edges:
            adam_step(self.opt_m_edges, self.soft.edges, grads.m_edges,
                      self._binary_or_none("edges"), name="m_edges")
        if self.update_soft_weights:
            adam_step(self.opt_m_theta0, self.soft.theta0, grads.m_theta0,
                      self._binary_or_none("theta0"), name="m_theta0")
            adam_step(self.opt_m_theta1, self.soft.theta1, grads.m_theta1,
                      self._binary_or_none("theta1"), name="m_theta1")

        eval_logits, _ = gcn_forward(self.params, self.soft, self.binary, ds,
                                     norm=self.norm, x_op=self.x_op)
        val = evaluate_accuracy(self.params, self.soft, self.binary, ds,
                                ds.val_idx, logits=eval_logits)
        test = evaluate_accuracy(self.params, self.soft, self.binary, ds,
                                 ds.test_idx, logits=eval_logits)
        return EpochStats(loss=loss, val_acc=val, test_acc=test, grads=grads)


@dataclass
class OneShotResult:
    best_soft: SoftMasks          # mask snapshot from the best-val epoch
    best_epoch: int               # 1-based
    best_val_acc: float
    history: list[EpochStats]


def train_oneshot_phase(dataset: Dataset, params: GcnParams,
                        soft: SoftMasks, epochs: int, lr: float = 0.001,
                        binary: BinaryMasks | None = None) -> OneShotResult:
    """Co-optimize weights and both soft masks for ``epochs`` full batches.

    Snapshots (m_g, m_theta) at the epoch with the highest validation
    accuracy, earliest epoch on ties. ``params`` is trained in place and
    left at its final-epoch state. No l1 term is applied to the masks.
    """
    if epochs < 1:
        raise ValueError("one-shot phase needs at least one epoch")
    loop = TrainLoop(dataset, params, soft, binary=binary, lr=lr,
                     update_theta=True, update_soft_edges=True,
                     update_soft_weights=True)
    best = OneShotResult(best_soft=soft.copy(), best_epoch=0,
                         best_val_acc=-1.0, history=[])
    for epoch in range(1, epochs + 1):
        stats = loop.run_epoch()
        stats.grads = None      # keep history light
        best.history.append(stats)
        if stats.val_acc > best.best_val_acc:
            best.best_val_acc = stats.val_acc
            best.best_epoch = epoch
            best.best_soft = soft.copy()
    return best


@dataclass
class ThetaTrainResult:
    best_val_acc: float
    best_epoch: int
    test_at_best: float
    final_test: float
    history: list[EpochStats]


def train_theta_only(dataset: Dataset, params: GcnParams,
                     binary: BinaryMasks | None, epochs: int,
                     lr: float = 0.001) -> ThetaTrainResult:
    """Train the weights under fixed masks; soft masks stay at identity.

    Reports the test accuracy at the best-validation epoch (earliest on
    ties), the usual protocol for semi-supervised node classification.
    """
    if epochs < 1:
        raise ValueError("need at least one epoch")
    shape0, shape1 = params.theta0.shape, params.theta1.shape
    soft = SoftMasks.identity(dataset.num_edges, shape0, shape1,
                              dtype=params.theta0.dtype)
    loop = TrainLoop(dataset, params, soft, binary=binary, lr=lr,
                     update_theta=True)
    out = ThetaTrainResult(best_val_acc=-1.0, best_epoch=0,
                           test_at_best=0.0, final_test=0.0, history=[])
    for epoch in range(1, epochs + 1):
        stats = loop.run_epoch()
        stats.grads = None
        out.history.append(stats)
        if stats.val_acc > out.best_val_acc:
            out.best_val_acc = stats.val_acc
            out.best_epoch = epoch
            out.test_at_best = stats.test_acc
        out.final_test = stats.test_acc
    return out


def verify_ticket(dataset: Dataset, params: GcnParams,
                  binary: BinaryMasks | None, epochs: int,
                  lr: float = 0.001) -> ThetaTrainResult:
    """Retrain from the recorded initialization under the final masks.

    This is the winning-ticket check: the masks are kept, the weights are
    rewound to their initialization, and the sparse model is trained in
    isolation. ``params`` is not modified.
    """
    fresh = params.fresh_copy()
    return train_theta_only(dataset, fresh, binary, epochs, lr=lr)
