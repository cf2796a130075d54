"""Per-fold training loop."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..engine import ops
from ..engine.optim import AdamW
from ..engine.tensor import Tape, backward
from ..errors import DiscretizationError, EmptyInputError, TrainingDivergedError
from ..models import AplConfig, CaseRecord, TrainConfig
from ..network.apl import AplModel, forward, init_model
from ..survival.loss import nll_survival_loss

log = logging.getLogger(__name__)


@dataclass
class TrainHistory:
    """Mean per-case training loss of every epoch and every optimizer step."""

    epoch_losses: list[float] = field(default_factory=list)
    batch_losses: list[float] = field(default_factory=list)
    val_loss: Optional[float] = None

    @property
    def initial_loss(self) -> float:
        return self.epoch_losses[0]

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1]


def case_loss(model: AplModel, case: CaseRecord, alpha: float, training: bool,
              rng: Optional[np.random.Generator] = None):
    """Forward one labelled case and return its scalar NLL tensor."""
    if case.bin is None:
        raise DiscretizationError(f"Case {case.case_id} has no survival bin; discretize first")
    out = forward(model, case, training=training, rng=rng)
    return nll_survival_loss(out.logits, case.bin, case.event, alpha)


def mean_loss(model: AplModel, cases: Sequence[CaseRecord], alpha: float = 0.0) -> float:
    """Eval-mode mean NLL over ``cases`` without recording a tape."""
    return float(np.mean([case_loss(model, c, alpha, training=False).item() for c in cases]))


def train_fold(
    cases_train: Sequence[CaseRecord],
    cases_val: Sequence[CaseRecord],
    apl_config: AplConfig,
    train_config: TrainConfig,
    progress: bool = False,
) -> tuple[AplModel, TrainHistory]:
    """Train a freshly initialized model on one split.

    A mini-batch accumulates the gradients of its per-case losses, each
    scaled by 1/len(batch), then takes one AdamW step. Cases are reshuffled
    every epoch. Initialization uses ``apl_config.seed``; shuffling and
    dropout masks are drawn from generators spawned from
    (``train_config.seed``, ``apl_config.seed``).

    Args:
        cases_train: Normalized training cases with bins assigned
        cases_val: Held-out cases scored once after training (may be empty)
        apl_config: Architecture
        train_config: Optimization settings
        progress: Show a tqdm bar over epochs

    Returns:
        Tuple of (model in eval mode, loss history)

    Raises:
        TrainingDivergedError: If any per-case loss is not finite
    """
    if not cases_train:
        raise EmptyInputError("train_fold needs at least one training case")

    model = init_model(apl_config)
    shuffle_seq, dropout_seq = np.random.SeedSequence([train_config.seed, apl_config.seed]).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    optimizer = AdamW(model.parameters(), lr=train_config.lr, weight_decay=train_config.weight_decay,
                      betas=train_config.betas, eps=train_config.eps)

    history = TrainHistory()
    n = len(cases_train)
    batch_size = max(1, train_config.batch_size)
    model.train()
    epochs = tqdm(range(train_config.epochs), desc="epochs", unit="epoch", disable=not progress, leave=False)
    for epoch in epochs:
        order = shuffle_rng.permutation(n)
        epoch_total = 0.0
        for batch_no, start in enumerate(range(0, n, batch_size)):
            batch = order[start:start + batch_size]
            scale = 1.0 / len(batch)
            batch_total = 0.0
            for idx in batch:
                case = cases_train[idx]
                with Tape():
                    loss = case_loss(model, case, train_config.alpha, training=True, rng=dropout_rng)
                    value = loss.item()
                    if not np.isfinite(value):
                        raise TrainingDivergedError(epoch, batch_no, case.case_id, value)
                    backward(ops.mul_scalar(loss, scale))
                batch_total += value
            optimizer.step()
            optimizer.zero_grad()
            history.batch_losses.append(batch_total * scale)
            epoch_total += batch_total
        history.epoch_losses.append(epoch_total / n)
        log.debug("epoch %d: mean training loss %.6f", epoch, history.epoch_losses[-1])
        epochs.set_postfix(loss=f"{history.epoch_losses[-1]:.4f}")

    model.eval()
    if cases_val:
        history.val_loss = mean_loss(model, cases_val, train_config.alpha)
    return model, history
