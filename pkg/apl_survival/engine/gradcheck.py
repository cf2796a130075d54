"""Finite-difference verification of tape gradients."""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import GradCheckError
from .tensor import Parameter, Tape, Tensor, backward

REL_ERROR_FLOOR = 1e-5


@dataclass
class GradCheckReport:
    """Result of comparing autodiff gradients with central differences."""

    max_rel_error: float
    tol: float
    n_coords: int
    worst_param: str = ""
    worst_index: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def _as_tensor(p: Union[Parameter, Tensor]) -> tuple[str, Tensor]:
    if isinstance(p, Parameter):
        return p.name, p.tensor
    return p.name or "<tensor>", p


def _value(f: Callable[[], Tensor]) -> float:
    value = f().item()
    if not np.isfinite(value):
        raise GradCheckError(f"Function value is not finite ({value!r}) during gradient check")
    return value


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Union[Parameter, Tensor]],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """Check d f / d params against central differences.

    ``f`` takes no arguments and must be deterministic; it is re-evaluated
    with every perturbed coordinate. The relative error of a coordinate is
    |a - n| / max(|a|, |n|, 1e-5).

    Args:
        f: Scalar function of the parameters
        params: Parameters (or requires_grad tensors) to check
        h: Finite-difference step
        tol: Pass threshold on the maximum relative error
        max_coords: If set, check at most this many random coordinates per parameter
        rng: Generator used to pick coordinates when ``max_coords`` is set

    Raises:
        GradCheckError: If ``f`` is not finite at the point or a perturbation
    """
    named = [_as_tensor(p) for p in params]
    for _, t in named:
        t.zero_grad()

    with Tape():
        root = f()
        if not np.all(np.isfinite(root.data)):
            raise GradCheckError(f"Function value is not finite ({root.data!r}) at the check point")
        backward(root)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for _, t in named]

    rng = rng if rng is not None else np.random.default_rng(0)
    report = GradCheckReport(max_rel_error=0.0, tol=tol, n_coords=0)
    for (name, t), grad in zip(named, analytic):
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            f_plus = _value(f)
            flat[c] = orig - h
            f_minus = _value(f)
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = grad.reshape(-1)[c]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), REL_ERROR_FLOOR)
            report.n_coords += 1
            if rel > report.max_rel_error:
                report.max_rel_error = float(rel)
                report.worst_param = name
                report.worst_index = tuple(int(i) for i in np.unravel_index(c, t.shape))
    return report
