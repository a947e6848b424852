"""Kernel SVMs trained by sequential minimal optimization."""
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import torch as th
from numpy.typing import NDArray

from ..errors import ConvergenceError, DetectionError

logger = logging.getLogger(__name__)

KernelName = Literal["cubic", "gaussian"]


@dataclass(frozen=True)
class KernelSpec:
    """A kernel function and its scale."""

    name: KernelName
    scale: float

    def __call__(self, x: th.Tensor, z: th.Tensor) -> th.Tensor:
        """Gram matrix between the rows of `x` and `z`."""
        if self.name == "cubic":
            return (1.0 + (x / self.scale) @ (z / self.scale).T) ** 3
        if self.name == "gaussian":
            sq = (x * x).sum(-1)[:, None] + (z * z).sum(-1)[None, :] - 2 * x @ z.T
            return th.exp(-sq.clamp_min(0.0) / (2 * self.scale**2))
        raise DetectionError(f"Unknown kernel '{self.name}'")


CUBIC = KernelSpec("cubic", 1.0)
FINE_GAUSSIAN = KernelSpec("gaussian", 1.8)


@dataclass
class SvmModel:
    """Support vectors with their signed dual coefficients `alpha_i * y_i`."""

    support_vectors: th.Tensor
    dual_coef: th.Tensor
    bias: float
    kernel: KernelSpec
    kkt_violation: float = 0.0

    def decision_function(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Signed distance-like score; positive means abnormal."""
        xt = th.as_tensor(np.atleast_2d(x), dtype=th.float64)
        scores = self.kernel(xt, self.support_vectors) @ self.dual_coef + self.bias
        return scores.numpy()

    def predict(self, x: NDArray[np.float64]) -> NDArray[np.int64]:
        """Labels in {0, 1}."""
        return (self.decision_function(x) > 0).astype(np.int64)

    def state_dict(self) -> dict:
        """Tensors and scalars for serialization."""
        return dict(
            support_vectors=self.support_vectors,
            dual_coef=self.dual_coef,
            bias=self.bias,
            kkt_violation=self.kkt_violation,
        )


def train_svm(
    x: NDArray[np.float64],
    y: NDArray[np.int64],
    kernel: KernelSpec,
    c: float = 1.0,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
) -> SvmModel:
    """Solve the soft-margin dual with the maximal-violating-pair working set.

    Args:
        x: Training inputs, shape (n, d).
        y: Labels in {0, 1}; 1 maps to the positive class.
        kernel: Kernel function.
        c: Box constraint.
        tol: Stop once the largest KKT violation falls below this value.
        max_iter: Iteration cap.

    Raises:
        DetectionError: If the data are empty or hold a single class.
        ConvergenceError: If the tolerance is not reached within `max_iter`.
    """
    if len(y) == 0:
        raise DetectionError("Cannot train an SVM on an empty dataset")
    if len(np.unique(y)) < 2:
        raise DetectionError("SVM training needs both classes")

    xt = th.as_tensor(x, dtype=th.float64)
    yt = th.as_tensor(np.where(y > 0, 1.0, -1.0), dtype=th.float64)
    gram = kernel(xt, xt)
    diag = gram.diagonal()

    n = len(yt)
    alpha = th.zeros(n, dtype=th.float64)
    # Gradient of the dual objective 1/2 a'Qa - 1'a
    grad = -th.ones(n, dtype=th.float64)
    pos = yt > 0

    violation = float("inf")
    for it in range(max_iter):
        score = -yt * grad
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < c))
        i = int(score.masked_fill(~up, -float("inf")).argmax())
        j = int(score.masked_fill(~low, float("inf")).argmin())
        violation = float(score[i] - score[j])
        if violation < tol:
            break

        eta = float(diag[i] + diag[j] - 2 * gram[i, j])
        step = violation / max(eta, 1e-12)
        step = min(
            step,
            float(c - alpha[i]) if yt[i] > 0 else float(alpha[i]),
            float(alpha[j]) if yt[j] > 0 else float(c - alpha[j]),
        )
        alpha[i] += yt[i] * step
        alpha[j] -= yt[j] * step
        alpha[[i, j]] = alpha[[i, j]].clamp(0.0, c)
        grad += step * yt * (gram[:, i] - gram[:, j])
    else:
        raise ConvergenceError(max_iter, violation)

    score = -yt * grad
    free = (alpha > 1e-8) & (alpha < c - 1e-8)
    if free.any():
        bias = float(score[free].mean())
    else:
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < c))
        hi = float(score[up].max()) if up.any() else 0.0
        lo = float(score[low].min()) if low.any() else 0.0
        bias = (hi + lo) / 2

    support = alpha > 1e-8
    logger.debug(
        f"SMO ({kernel.name}) converged after {it} iterations with "
        f"{int(support.sum())} support vectors"
    )
    return SvmModel(
        support_vectors=xt[support].clone(),
        dual_coef=(alpha * yt)[support].clone(),
        bias=bias,
        kernel=kernel,
        kkt_violation=violation,
    )
