"""Per-layer sparsity regularization updates.

Four update families share one dispatch point:

* ``l2_decay``        -- classical weight decay; folded into the gradient by
                         the trainer, so the post-step update is a no-op here.
* ``l1_subgradient``  -- W -= delta * sign(W). Drives weights near zero but
                         overshoots, so it almost never lands exactly on zero.
* ``l1_shrinkage``    -- soft thresholding, the l1 proximal operator. Weights
                         cannot change sign; small ones land exactly on zero.
* ``l0_projection``   -- every `period` iterations, keep the t largest
                         magnitudes of the layer and zero the rest.

``threshold_posthoc`` is the baseline the projection is compared against: a
one-shot magnitude cutoff applied after training, never during it.
"""

from dataclasses import dataclass, field

import numpy as np

REG_KINDS = (
    "none",
    "l2_decay",
    "l1_subgradient",
    "l1_shrinkage",
    "l0_projection",
    "threshold_posthoc",
)


@dataclass(frozen=True)
class RegSpec:
    """Regularization assignment for one layer.

    ``strength`` is the objective weight (lambda); per-iteration l1 step
    sizes are delta = strength * lr unless ``fixed_delta`` is set, in which
    case delta = strength regardless of the learning-rate schedule.
    ``stages`` optionally tightens an l0 cap over time: a sorted tuple of
    (iteration, t) pairs, the last pair whose iteration has been reached
    wins. Biases are left untouched unless ``apply_to_biases`` is set; they
    contribute little to model size and sparsifying them destabilizes
    small nets.
    """

    kind: str = "none"
    strength: float = 0.0
    t: int | None = None
    period: int = 100
    apply_to_biases: bool = False
    fixed_delta: bool = False
    stages: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in REG_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.strength < 0:
            raise ValueError("regularizer strength must be >= 0")
        if self.kind == "l0_projection":
            if self.t is None or self.t < 1:
                raise ValueError("l0_projection requires a nonzero cap t >= 1")
            if self.period < 1:
                raise ValueError("l0_projection requires period >= 1")
        if self.stages and self.kind != "l0_projection":
            raise ValueError("staged schedules only apply to l0_projection")
        if any(t < 1 for _, t in self.stages):
            raise ValueError("staged caps must be >= 1")

    def effective_t(self, iteration: int) -> int:
        """Cap in force at `iteration` under the staged schedule."""
        t = self.t
        for start, staged_t in self.stages:
            if iteration >= start:
                t = staged_t
        return t


def l1_subgradient_update(w: np.ndarray, delta: float) -> np.ndarray:
    """W_i - delta * sign(W_i), with sign(0) = 0."""
    if delta <= 0:
        raise ValueError("l1 subgradient step requires delta > 0")
    return w - w.dtype.type(delta) * np.sign(w)


def l1_shrinkage_update(w: np.ndarray, delta: float) -> np.ndarray:
    """Soft threshold: (|W_i| - delta)_+ * sign(W_i)."""
    if delta <= 0:
        raise ValueError("shrinkage requires delta > 0")
    return np.maximum(np.abs(w) - w.dtype.type(delta), w.dtype.type(0)) * np.sign(w)


def l0_project(w: np.ndarray, t: int) -> np.ndarray:
    """Keep the t largest-magnitude elements, zero the rest.

    Minimizes ||W - W'||_2^2 subject to ||W'||_0 <= t. Ties in magnitude are
    broken by keeping the lowest flat index, so the result is deterministic
    and idempotent. Surviving elements are copied bit-for-bit.
    """
    if t < 1:
        raise ValueError("l0 projection requires t >= 1")
    flat = w.reshape(-1)
    if t >= flat.size:
        return w.copy()
    # stable sort on -|w| keeps the lowest index first among ties
    keep = np.argsort(-np.abs(flat), kind="stable")[:t]
    out = np.zeros_like(flat)
    out[keep] = flat[keep]
    return out.reshape(w.shape)


def threshold(w: np.ndarray, delta: float) -> np.ndarray:
    """Zero every element with |W_i| < delta; delta=0 is the identity."""
    if delta < 0:
        raise ValueError("threshold requires delta >= 0")
    return np.where(np.abs(w) < delta, w.dtype.type(0), w)


def regularization_term(w: np.ndarray, spec: RegSpec) -> float:
    """lambda * r(W) where r is defined (l2, l1 kinds); 0.0 otherwise."""
    if spec.kind == "l2_decay":
        return spec.strength * float(np.sum(np.square(w, dtype=np.float64)))
    if spec.kind in ("l1_subgradient", "l1_shrinkage"):
        return spec.strength * float(np.sum(np.abs(w, dtype=np.float64)))
    return 0.0


def apply_regularization(layer, spec: RegSpec, lr: float, iteration: int) -> None:
    """Apply the post-gradient-step update for `spec` to `layer` in place.

    l1 kinds run every iteration with delta = strength * lr (or a fixed
    delta, see RegSpec); l0 projection runs only when
    ``iteration % period == 0``. ``none``, ``l2_decay`` (handled in the
    gradient) and ``threshold_posthoc`` (applied after training) are no-ops.
    """
    if spec.kind not in REG_KINDS:
        raise ValueError(f"unknown regularizer kind {spec.kind!r}")
    if spec.kind in ("none", "l2_decay", "threshold_posthoc"):
        return
    if spec.kind == "l0_projection":
        if iteration % spec.period != 0:
            return
        t = spec.effective_t(iteration)
        layer.weights = l0_project(layer.weights, t)
        if spec.apply_to_biases:
            layer.biases = l0_project(layer.biases, t)
        return
    delta = spec.strength if spec.fixed_delta else spec.strength * lr
    if delta == 0.0:
        return
    update = {
        "l1_subgradient": l1_subgradient_update,
        "l1_shrinkage": l1_shrinkage_update,
    }[spec.kind]
    layer.weights = update(layer.weights, delta)
    if spec.apply_to_biases:
        layer.biases = update(layer.biases, delta)
