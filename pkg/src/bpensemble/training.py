"""Dataset generation, multiloss, reverse-mode gradients, and RMSProp training.

The training forward pass unrolls the decoder to a fixed depth (early
stopping disabled so the graph is static) and shares bp.py's message-update
routines, so trained weights transfer to the decoder exactly. The backward
pass is hand-derived reverse mode over that graph: clip and clamp
saturations have zero gradient, and the leave-one-out tanh products are
differentiated with forward/backward recurrences so no division by a
possibly-zero tanh occurs.

Batch reductions run over the stacked batch axis in list order via numpy
sums, so the gradient is a fixed function of the ordered batch.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import bp
from .bp import ARTANH_EPS, CLIP, EdgeSpace, LayerOps, WeightsSet, edge_space
from .channel import ChannelConfig, hard_decision, make_rng, modulate_bpsk, transmit
from .codes import CodeSpec, ParityCheckMatrix

#: Soft outputs are clamped to [EPS_OUT, 1 - EPS_OUT] inside the loss.
EPS_OUT = 1e-12

FROM_SCRATCH_LR = 0.01
FINETUNE_LR = 0.001


class NonFiniteMessageError(RuntimeError):
    def __init__(self, iteration: int, edge: int):
        super().__init__(f"non-finite message at iteration {iteration}, edge {edge}")
        self.iteration = iteration
        self.edge = edge


@dataclass(frozen=True)
class TrainConfig:
    snr_grid_db: tuple = (4.0, 5.0, 6.0, 7.0)
    batch_per_snr: int = 1000
    mode: str = "from_scratch"  # or "finetune"
    learning_rate: float | None = None  # None -> 0.01 scratch, 0.001 finetune
    epochs: int = 200
    seed: int = 0
    iterations: int = 5
    tied: bool = False
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    val_fraction: float = 0.1
    plateau_epochs: int = 10
    plateau_min_improvement: float = 1e-4
    clip_range: tuple = (-CLIP, CLIP)

    def __post_init__(self):
        if self.mode not in ("from_scratch", "finetune"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must be non-empty")
        if self.resolved_learning_rate < 0:
            raise ValueError("learning rate must be >= 0")

    @property
    def resolved_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return FROM_SCRATCH_LR if self.mode == "from_scratch" else FINETUNE_LR

    @property
    def batch_size(self) -> int:
        return self.batch_per_snr * len(self.snr_grid_db)


@dataclass
class TrainingSample:
    llr: np.ndarray
    target: np.ndarray
    true_error: np.ndarray


def generate_dataset(code: CodeSpec, pcm: ParityCheckMatrix, cfg: TrainConfig,
                     count: int) -> list:
    """Zero-codeword transmissions, equally split over the SNR grid.

    If count is not divisible by the grid size, the largest equal split is
    used and the remainder is dropped. The true error of each sample is the
    hard decision of its LLRs (the target is the zero codeword); no HDD is
    involved here.
    """
    per_snr = count // len(cfg.snr_grid_db)
    x = modulate_bpsk(np.zeros(code.n, dtype=np.uint8))
    samples = []
    for idx, snr in enumerate(cfg.snr_grid_db):
        ch = ChannelConfig.from_snr(snr, code.rate)
        rng = make_rng(cfg.seed, stream=idx)
        llrs = transmit(np.tile(x, (per_snr, 1)), ch, rng)
        errors = hard_decision(llrs)
        target = np.zeros(code.n, dtype=np.uint8)
        for i in range(per_snr):
            samples.append(TrainingSample(llr=llrs[i], target=target.copy(),
                                          true_error=errors[i]))
    return samples


def stack_batch(batch) -> tuple:
    llrs = np.stack([s.llr for s in batch]).astype(np.float64)
    targets = np.stack([s.target for s in batch]).astype(np.float64)
    return llrs, targets


def multiloss(soft_outputs: np.ndarray, target: np.ndarray) -> float:
    """Binary cross-entropy summed over every iteration's outputs.

    soft_outputs is (T, V) for one word or (B, T, V) for a batch; target is
    (V,) or (B, V). The result is the per-word sum averaged over the batch.
    """
    o = np.asarray(soft_outputs, dtype=np.float64)
    single = o.ndim == 2
    if single:
        o = o[None]
    c = np.atleast_2d(np.asarray(target, dtype=np.float64))[:, None, :]
    o = np.clip(o, EPS_OUT, 1.0 - EPS_OUT)
    bce = -(c * np.log(o) + (1.0 - c) * np.log(1.0 - o))
    return float(bce.sum(axis=(1, 2)).mean())


def forward_soft(pcm: ParityCheckMatrix, llrs: np.ndarray, weights: WeightsSet,
                 iterations: int | None = None) -> np.ndarray:
    """Fixed-depth forward pass returning per-iteration soft outputs (B, T, V)."""
    es = edge_space(pcm)
    ops = LayerOps(es, weights)
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    T = weights.iterations if iterations is None else iterations
    ll = np.ascontiguousarray(llrs.T)
    m_cv_v = np.zeros((es.num_vars, es.dv, llrs.shape[0]))
    soft = np.zeros((llrs.shape[0], T, es.num_vars))
    for t in range(T):
        li = weights.layer(t)
        _, m_vc_v = bp.var_to_check(es, ll, m_cv_v, ops.w_llr_v[li], ops.w_pair_vT[li])
        m_cv_v = bp.check_to_var(es, m_vc_v)["m_cv_v"]
        z = bp.marginal_llr(es, ll, m_cv_v, ops.w_out_llr[li], ops.w_out_edge_v[li])
        soft[:, t] = bp.soft_output(z.T)
    return soft


def _loo_backward(es: EdgeSpace, th, prefix, suffix, g):
    """Gradient of sum(g * leave-one-out-products) w.r.t. each tanh value.

    For slot j of a check: out_j = U_j * suffix_j + prefix_j * V_j with
    U_{j+1} = th_j U_j + g_j prefix_j and V_{j-1} = th_j V_j + g_j suffix_j.
    Padding slots carry th = 1, g = 0 and pass through unchanged.
    Arrays are check-major (C, dc, B); the recurrences run over slots.
    """
    c_arr = g * prefix
    d_arr = g * suffix
    depth = th.shape[1]
    u = np.zeros_like(th)
    for j in range(1, depth):
        u[:, j] = th[:, j - 1] * u[:, j - 1] + c_arr[:, j - 1]
    v = np.zeros_like(th)
    for j in range(depth - 1, 0, -1):
        v[:, j - 1] = th[:, j] * v[:, j] + d_arr[:, j]
    return u * suffix + prefix * v


def _check_non_finite(es, tr, t):
    flat = tr["m_cv_v"].reshape(-1, tr["m_cv_v"].shape[2])
    finite = np.isfinite(flat)
    if not finite.all():
        slot = int(np.argwhere(~finite)[0][0])
        edge = int(es.var_slots.ravel()[slot])
        raise NonFiniteMessageError(iteration=t + 1, edge=edge)


def multiloss_gradient(pcm: ParityCheckMatrix, llrs: np.ndarray, targets: np.ndarray,
                       weights: WeightsSet, iterations: int | None = None):
    """Loss and exact reverse-mode gradient of the multiloss for a batch.

    Returns (loss, gradient) with the gradient shaped like the WeightsSet.
    Early stopping is disabled so the unrolled depth is fixed. Within-
    iteration intermediates are recomputed during the backward sweep from the
    stored inter-iteration messages, trading a second forward for memory.
    """
    es = edge_space(pcm)
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if llrs.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if llrs.shape != targets.shape:
        raise ValueError("llr and target batches must have matching shapes")
    if not weights.matches_graph(es):
        raise ValueError("weights were built for a different Tanner graph")
    ops = LayerOps(es, weights)
    T = weights.iterations if iterations is None else iterations
    B = llrs.shape[0]
    ll = np.ascontiguousarray(llrs.T)  # (V, B)
    targets_t = np.ascontiguousarray(targets.T)

    m_cv_inputs = [np.zeros((es.num_vars, es.dv, B))]
    z_list = []
    for t in range(T):
        li = weights.layer(t)
        _, m_vc_v = bp.var_to_check(es, ll, m_cv_inputs[t],
                                    ops.w_llr_v[li], ops.w_pair_vT[li])
        tr = bp.check_to_var(es, m_vc_v)
        _check_non_finite(es, tr, t)
        m_cv_inputs.append(tr["m_cv_v"])
        z_list.append(bp.marginal_llr(es, ll, tr["m_cv_v"],
                                      ops.w_out_llr[li], ops.w_out_edge_v[li]))

    o_raw = [bp.soft_output(z) for z in z_list]  # (V, B) each
    o_clip = [np.clip(o, EPS_OUT, 1.0 - EPS_OUT) for o in o_raw]
    loss = 0.0
    for o in o_clip:
        loss += -(targets_t * np.log(o) + (1.0 - targets_t) * np.log(1.0 - o)).sum()
    loss = float(loss / B)

    grad = WeightsSet.uniform(pcm, weights.code_id, weights.iterations,
                              tied=weights.tied, fill=0.0)
    grad_llr_v = [np.zeros((es.num_vars, es.dv)) for _ in range(weights.num_layers)]
    grad_pair_v = [np.zeros((es.num_vars, es.dv, es.dv)) for _ in range(weights.num_layers)]
    grad_out_edge_v = [np.zeros((es.num_vars, es.dv)) for _ in range(weights.num_layers)]
    d_m_cv_carry = np.zeros((es.num_vars, es.dv, B))
    for t in range(T - 1, -1, -1):
        li = weights.layer(t)
        m_cv_prev = m_cv_inputs[t]
        m_cv_t = m_cv_inputs[t + 1]
        m_vc_pre, m_vc_v = bp.var_to_check(es, ll, m_cv_prev,
                                           ops.w_llr_v[li], ops.w_pair_vT[li])
        tr = bp.check_to_var(es, m_vc_v)

        # loss -> z, all in (V, B)
        d_o_clip = -(targets_t / o_clip[t] - (1.0 - targets_t) / (1.0 - o_clip[t])) / B
        inside = (o_raw[t] > EPS_OUT) & (o_raw[t] < 1.0 - EPS_OUT)
        dz = d_o_clip * inside * (-o_raw[t] * (1.0 - o_raw[t]))

        # z -> marginalization weights and m_cv
        grad.out_llr[li] += (dz * ll).sum(axis=1)
        grad_out_edge_v[li] += np.matmul(m_cv_t, dz[:, :, None])[:, :, 0]
        d_m_cv_v = dz[:, None, :] * ops.w_out_edge_v[li].transpose(0, 2, 1) + d_m_cv_carry

        # m_cv -> tanh products (check-major; padding zeroed by the mask)
        d_m_cv_c = es.to_check_major(d_m_cv_v) * es.check_mask_f
        d_pre_cv = d_m_cv_c * (np.abs(tr["pre_cv"]) < CLIP)
        d_loo = d_pre_cv * 2.0 / (1.0 - tr["prod"] ** 2)
        d_loo *= np.abs(tr["loo"]) < 1.0 - ARTANH_EPS
        d_th = _loo_backward(es, tr["th"], tr["prefix"], tr["suffix"], d_loo)

        # tanh -> m_vc -> inputs (back to var-major)
        d_m_vc_c = d_th * (1.0 - tr["th"] ** 2) * 0.5
        d_m_vc_v = es.to_var_major(d_m_vc_c) * es.var_mask_f
        d_m_vc_pre = d_m_vc_v * (np.abs(m_vc_pre) < CLIP)
        grad_llr_v[li] += np.matmul(d_m_vc_pre, ll[:, :, None])[:, :, 0]
        grad_pair_v[li] += np.matmul(m_cv_prev, d_m_vc_pre.transpose(0, 2, 1))
        d_m_cv_carry = np.matmul(ops.w_pair_v[li], d_m_vc_pre)

    for li in range(weights.num_layers):
        grad.llr_edge[li] += es.gather_llr_weights(grad_llr_v[li])
        grad.pair[li] += es.gather_pairs(grad_pair_v[li])
        grad.out_edge[li] += es.gather_llr_weights(grad_out_edge_v[li])
    return loss, grad


def gradient(pcm: ParityCheckMatrix, batch, weights: WeightsSet) -> WeightsSet:
    """Reverse-mode gradient of the multiloss over a batch of TrainingSamples."""
    llrs, targets = stack_batch(batch)
    _, grad = multiloss_gradient(pcm, llrs, targets, weights)
    return grad


def dataset_fingerprint(llrs: np.ndarray, targets: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(llrs).tobytes())
    h.update(np.ascontiguousarray(targets).tobytes())
    return h.hexdigest()


@dataclass
class TrainResult:
    weights: WeightsSet
    epochs_run: int
    train_loss: list
    val_loss: list
    fingerprint: str


def train(code: CodeSpec, pcm: ParityCheckMatrix, dataset, cfg: TrainConfig,
          baseline: WeightsSet | None = None) -> TrainResult:
    """RMSProp training until the epoch budget or a validation plateau.

    from_scratch initializes every weight at 1.0 (the plain-BP point);
    finetune starts from the supplied baseline. Training stops once the best
    validation loss has not improved by plateau_min_improvement for
    plateau_epochs epochs, and the best-validation weights are returned.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    if cfg.mode == "finetune":
        if baseline is None:
            raise ValueError("finetune mode requires baseline weights")
        weights = baseline.copy()
    else:
        weights = WeightsSet.uniform(pcm, code.code_id, cfg.iterations, tied=cfg.tied)
    es = edge_space(pcm)
    if not weights.matches_graph(es):
        raise ValueError("baseline weights do not match the Tanner graph")

    llrs, targets = stack_batch(dataset)
    fingerprint = dataset_fingerprint(llrs, targets)
    n = llrs.shape[0]
    split_rng = make_rng(cfg.seed, stream=2**32)
    perm = split_rng.permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n))) if n > 1 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        train_idx, val_idx = perm, perm

    lr = cfg.resolved_learning_rate
    sq_avg = [np.zeros_like(a) for a in weights.arrays()]
    best = weights.copy()
    best_val = np.inf
    best_epoch = -1
    train_hist, val_hist = [], []
    epochs_run = 0
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.seed, stream=2**32 + 1 + epoch).permutation(train_idx)
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grad = multiloss_gradient(pcm, llrs[idx], targets[idx], weights)
            epoch_losses.append(loss)
            for wa, ga, sq in zip(weights.arrays(), grad.arrays(), sq_avg):
                sq *= cfg.rmsprop_decay
                sq += (1.0 - cfg.rmsprop_decay) * ga**2
                wa -= lr * ga / (np.sqrt(sq) + cfg.rmsprop_epsilon)
        val = _forward_loss(pcm, llrs[val_idx], targets[val_idx], weights)
        train_hist.append(float(np.mean(epoch_losses)))
        val_hist.append(val)
        epochs_run = epoch + 1
        if val < best_val - cfg.plateau_min_improvement:
            best_val = val
            best_epoch = epoch
            best = weights.copy()
        elif val < best_val:
            best_val = val
            best = weights.copy()
        if epoch - best_epoch >= cfg.plateau_epochs:
            break
    return TrainResult(weights=best, epochs_run=epochs_run,
                       train_loss=train_hist, val_loss=val_hist,
                       fingerprint=fingerprint)


def _forward_loss(pcm, llrs, targets, weights) -> float:
    soft = forward_soft(pcm, llrs, weights)
    return multiloss(soft, targets)


def save_checkpoint(result: TrainResult, cfg: TrainConfig, path) -> None:
    """Weights file plus a sidecar metadata document at <path>.meta.json."""
    bp.save_weights(result.weights, path)
    meta = {
        "config": {
            "snr_grid_db": list(cfg.snr_grid_db),
            "batch_per_snr": cfg.batch_per_snr,
            "mode": cfg.mode,
            "learning_rate": cfg.resolved_learning_rate,
            "epochs": cfg.epochs,
            "seed": cfg.seed,
            "iterations": cfg.iterations,
            "tied": cfg.tied,
            "rmsprop_decay": cfg.rmsprop_decay,
            "rmsprop_epsilon": cfg.rmsprop_epsilon,
            "val_fraction": cfg.val_fraction,
            "plateau_epochs": cfg.plateau_epochs,
            "plateau_min_improvement": cfg.plateau_min_improvement,
            "clip_range": list(cfg.clip_range),
        },
        "epoch": result.epochs_run,
        "train_loss": result.train_loss[-1] if result.train_loss else None,
        "val_loss": result.val_loss[-1] if result.val_loss else None,
        "dataset_fingerprint": result.fingerprint,
    }
    with open(f"{path}.meta.json", "w", encoding="ascii") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
