"""Central finite-difference verification of tape gradients."""
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from src.autodiff.tensor import Tape, Tensor
from src.common.logging import get_logger

logger = get_logger(__name__)


class GroupResult(BaseModel):
    group: str
    checked: int
    max_rel_error: float
    passed: bool


class GradcheckReport(BaseModel):
    tolerance: float
    floor: float = 1e-2
    groups: List[GroupResult]

    @property
    def passed(self) -> bool:
        return all(group.passed for group in self.groups)

    def lines(self) -> List[str]:
        out = []
        for group in self.groups:
            verdict = "PASS" if group.passed else "FAIL"
            relation = "<" if group.passed else ">="
            out.append(
                f"{verdict} rel_err{relation}{self.tolerance:g} {group.group} "
                f"(max {group.max_rel_error:.3e} over {group.checked} coordinates, "
                f"denominator floor {self.floor:g})"
            )
        return out


def relative_error(analytic: float, numeric: float, floor: float = 1e-2) -> float:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from dividing by ~0."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def numeric_gradient(loss_fn: Callable[[], Tensor], param: Tensor, index: tuple,
                     eps: float = 1e-6) -> float:
    original = param.data[index]
    try:
        param.data[index] = original + eps
        plus = float(loss_fn().data)
        param.data[index] = original - eps
        minus = float(loss_fn().data)
    finally:
        param.data[index] = original
    return (plus - minus) / (2.0 * eps)


def analytic_gradients(loss_fn: Callable[[], Tensor], params: Sequence[Tensor]) -> List[np.ndarray]:
    with Tape() as tape:
        loss = loss_fn()
    return tape.gradients(loss, params)


def _sample_indices(shape: tuple, count: Optional[int], rng: np.random.Generator) -> List[tuple]:
    total = int(np.prod(shape))
    flat = np.arange(total) if count is None or count >= total else rng.choice(
        total, size=count, replace=False
    )
    return [np.unravel_index(int(i), shape) for i in np.sort(flat)]


def check_gradients(
    loss_fn: Callable[[], Tensor],
    groups: Mapping[str, Sequence[Tensor]],
    eps: float = 1e-6,
    tolerance: float = 1e-4,
    points_per_tensor: Optional[int] = 25,
    seed: int = 0,
    floor: float = 1e-2,
) -> GradcheckReport:
    """Compare tape gradients with central differences, one report row per parameter group.

    Errors are relative to max(|analytic|, |numeric|, floor), so gradients
    smaller than `floor` are held to an absolute bound of tolerance * floor.

    `loss_fn` must be a pure function of the parameters (no dropout, no
    randomness) so both evaluations of a difference see the same function.
    """
    rng = np.random.default_rng(seed)
    flat_params = [p for tensors in groups.values() for p in tensors]
    analytic: Dict[int, np.ndarray] = {
        id(p): g for p, g in zip(flat_params, analytic_gradients(loss_fn, flat_params))
    }

    results = []
    for name, tensors in groups.items():
        worst, checked = 0.0, 0
        for param in tensors:
            for index in _sample_indices(param.shape, points_per_tensor, rng):
                numeric = numeric_gradient(loss_fn, param, index, eps)
                worst = max(worst, relative_error(float(analytic[id(param)][index]), numeric, floor))
                checked += 1
        results.append(GroupResult(group=name, checked=checked, max_rel_error=worst,
                                   passed=worst < tolerance))
        logger.info("gradcheck_group", group=name, checked=checked, max_rel_error=worst,
                    passed=worst < tolerance)
    return GradcheckReport(tolerance=tolerance, floor=floor, groups=results)
