"""Local update: anchor construction and masked proximal SGD.

Each activation quantizes the model against the shared dictionary to fix
the assignment map and pruning mask, builds the centroid anchor, runs E
epochs of mini-batch SGD on the anchored objective (re-applying the mask
after every step), and re-encodes the result for communication. Per-step
inequalities from the analysis (drift bound and anchor contraction) are
asserted as they are derived, when enabled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .codec import CentroidPayload, CentroidTable, wcp_encode
from .ledger import LemmaCheckError
from .params import LayerLayout, ParamVector, PruneMask
from .pushsum import PushSumState


@dataclass
class TrainerConfig:
    eta: float = 0.05
    lam: float = 0.1
    epochs: int = 1
    batch_size: int = 32
    k: int = 32
    t_max: int = 20
    value_bits: int = 32
    pretrain_quantize: bool = True  # overwrite w at the pre-training encode
    lemma_checks: bool = True

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("learning rate must be positive")
        if self.lam < 0:
            raise ValueError("regularization weight must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def check_stepsize(self, smoothness: float | None = None) -> None:
        """Warn (not fail) when eta exceeds the analysis stepsize condition."""
        limits = []
        if smoothness is not None and smoothness > 0:
            limits.append(1.0 / (8.0 * smoothness * self.epochs))
        if self.lam > 0:
            limits.append(1.0 / (4.0 * self.lam))
        if limits and self.eta > min(limits):
            warnings.warn(
                f"eta={self.eta} exceeds the stepsize condition {min(limits):.3g}",
                stacklevel=2,
            )


def build_anchor(
    table: CentroidTable,
    payload: CentroidPayload,
    layout: LayerLayout,
    current_w: ParamVector,
) -> ParamVector:
    """Anchor = dictionary lookup on compressible layers, current w elsewhere."""
    values = current_w.values.copy()
    slices = layout.slices()
    for name in layout.compressible_names():
        assign = payload.assignments.assignments[name]
        values[slices[name]] = table.tables[name].astype(np.float64)[assign]
    return ParamVector(layout, values)


@dataclass
class LocalUpdateResult:
    payload: CentroidPayload  # post-training re-encoding, ready to transmit
    mask: PruneMask
    drift: np.ndarray  # w_after - w_before over the whole update
    n_steps: int
    train_loss: float


def local_update(
    state: PushSumState,
    X: np.ndarray,
    y: np.ndarray,
    objective,
    cfg: TrainerConfig,
    rng: np.random.Generator,
    encode_seed: int = 0,
) -> LocalUpdateResult:
    """Run one full local update on ``state`` (model and mask mutate in place)."""
    w = state.w
    layout = w.layout
    w_before = w.values.copy()

    pre_payload, mask, _ = wcp_encode(
        w, cfg.k, init=state.table, t_max=cfg.t_max, seed=encode_seed,
        value_bits=cfg.value_bits, overwrite=cfg.pretrain_quantize,
    )
    anchor = build_anchor(state.table, pre_payload, layout, w)
    anchor_masked = cfg.lemma_checks and bool(np.all(anchor.values[~mask.bits] == 0.0))

    eta, lam = cfg.eta, cfg.lam
    w.values[~mask.bits] = 0.0
    w_sgd_start = w.values.copy()
    grad_sq_sum = 0.0
    n_steps = 0
    last_loss = float("nan")
    n = len(y)
    for _ in range(cfg.epochs):
        w.values[~mask.bits] = 0.0  # enforce pruning at every epoch boundary
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, g = objective.loss_grad(w.values, X[batch], y[batch])
            if not np.isfinite(loss) or not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite loss/gradient in local update")
            reg_dir = g + 2.0 * lam * (w.values - anchor.values)
            if cfg.lemma_checks:
                grad_sq_sum += float(reg_dir @ reg_dir)
                u_prev = w.values - anchor.values
            stepped = w.values - eta * reg_dir
            stepped[~mask.bits] = 0.0
            w.values = stepped
            n_steps += 1
            last_loss = loss
            if (
                cfg.lemma_checks
                and anchor_masked
                and lam > 0
                and eta * lam <= 0.5
            ):
                u_new = w.values - anchor.values
                lhs = float(u_new @ u_new)
                rhs = (1 - eta * lam) * float(u_prev @ u_prev) + (eta / lam) * float(g @ g)
                if lhs > rhs + 1e-9:
                    raise LemmaCheckError(
                        f"anchor contraction violated: {lhs} > {rhs}"
                    )

    if cfg.lemma_checks:
        delta = w.values - w_sgd_start
        lhs = float(delta @ delta)
        rhs = n_steps * eta**2 * grad_sq_sum
        if lhs > rhs + 1e-9:
            raise LemmaCheckError(f"drift bound violated: {lhs} > {rhs}")

    payload, mask, _ = wcp_encode(
        w, cfg.k, init=state.table, t_max=cfg.t_max, seed=encode_seed + 1,
        value_bits=cfg.value_bits, overwrite=True,
    )
    state.mask = mask
    return LocalUpdateResult(payload, mask, w.values - w_before, n_steps, last_loss)


def reg_gradient_check(
    objective,
    w: ParamVector,
    anchor: ParamVector,
    lam: float,
    X: np.ndarray,
    y: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Max componentwise gap between the analytic anchored gradient and
    central finite differences."""
    _, g = objective.loss_grad(w.values, X, y)
    analytic = g + 2.0 * lam * (w.values - anchor.values)
    numeric = np.empty_like(analytic)
    base = w.values.copy()
    for i in range(len(base)):
        hi, lo = base.copy(), base.copy()
        hi[i] += h
        lo[i] -= h
        f_hi = objective.loss(hi, X, y) + lam * float((hi - anchor.values) @ (hi - anchor.values))
        f_lo = objective.loss(lo, X, y) + lam * float((lo - anchor.values) @ (lo - anchor.values))
        numeric[i] = (f_hi - f_lo) / (2 * h)
    return float(np.abs(analytic - numeric).max())
