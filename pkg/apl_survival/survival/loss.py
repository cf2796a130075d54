"""Discrete-time negative log-likelihood for censored survival."""

from ..engine import ops
from ..engine.tensor import Tensor
from ..errors import DiscretizationError

PROB_EPS = 1e-12


def nll_survival_loss(logits: Tensor, bin: int, event: bool, alpha: float = 0.0,
                      eps: float = PROB_EPS) -> Tensor:
    """Negative log-likelihood of one case under discrete-time hazards.

    With h = sigmoid(logits) and S(t) = prod_{j<=t} (1 - h_j), S(-1) = 1:

    - observed death in ``bin``:  -[log S(bin-1) + log h_bin]
    - censored in ``bin``:        -(1 - alpha) * log S(bin)

    Probabilities are clamped to ``eps`` before the log.

    Raises:
        DiscretizationError: If ``bin`` lies outside [0, len(logits))
    """
    n_bins = logits.shape[0]
    if logits.data.ndim != 1 or not 0 <= bin < n_bins:
        raise DiscretizationError(f"Bin {bin} outside [0, {n_bins}) for logits of shape {logits.shape}")

    hazards = ops.sigmoid(logits)
    survival = ops.cumprod(ops.add_scalar(ops.mul_scalar(hazards, -1.0), 1.0))

    if event:
        log_h = ops.log(ops.clamp_min(ops.take(hazards, bin), eps))
        if bin == 0:
            return ops.mul_scalar(log_h, -1.0)
        log_s_prev = ops.log(ops.clamp_min(ops.take(survival, bin - 1), eps))
        return ops.mul_scalar(ops.add(log_s_prev, log_h), -1.0)

    log_s = ops.log(ops.clamp_min(ops.take(survival, bin), eps))
    return ops.mul_scalar(log_s, -(1.0 - alpha))
