"""Error-region partitions: Hamming weight and Bernoulli-mixture EM.

EM runs entirely in log space with component parameters clamped to
[EPS_MU, 1 - EPS_MU]. The syndrome-guided variant models each component with
two Bernoulli vectors selected per coordinate by a label q_v: the majority
vote of unsatisfied vs satisfied checks touching v (ties label 0).

Zero-weight error patterns belong to no region; they are handled upstream by
the ensemble's valid-codeword bypass and are dropped from fitting and
dataset induction with a counter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import crossover_probability, make_rng
from .codes import ParityCheckMatrix, syndrome

EPS_MU = 1e-6

#: Components whose responsibility mass drops below this are re-drawn.
REINIT_MASS = 1e-8


class ZeroWeightError(ValueError):
    """Raised for weight-0 patterns; the caller must use the codeword bypass."""


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 200
    tol_per_sample: float = 1e-6  # stop when |delta LL| < tol_per_sample * K
    restarts: int = 5
    seed: int = 0
    init_low: float = 0.05  # errors are sparse; mu init near 0.5 stalls
    init_high: float = 0.3


@dataclass
class BernoulliMixture:
    variant: str  # "naive" or "syndrome_guided"
    alpha: int
    pi: np.ndarray  # (alpha,)
    mu: np.ndarray | None = None   # naive: (alpha, V)
    mu0: np.ndarray | None = None  # syndrome_guided: (alpha, V), label 0
    mu1: np.ndarray | None = None  # syndrome_guided: (alpha, V), label 1
    log_likelihood_trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in ("naive", "syndrome_guided"):
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def final_log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]


@dataclass
class PartitionModel:
    kind: str  # "hamming" or "em"
    alpha: int
    mixture: BernoulliMixture | None = None

    def __post_init__(self):
        if self.kind not in ("hamming", "em"):
            raise ValueError(f"unknown partition kind {self.kind!r}")
        if self.kind == "em" and self.mixture is None:
            raise ValueError("em partition requires a fitted mixture")

    def assign(self, error: np.ndarray, pcm: ParityCheckMatrix | None = None) -> int:
        """Region index in 1..alpha for a nonzero error pattern."""
        if self.kind == "hamming":
            return hamming_region(error, self.alpha)
        return em_region(self.mixture, error, pcm)

    def assign_batch(self, errors: np.ndarray, pcm: ParityCheckMatrix | None = None) -> np.ndarray:
        if self.kind == "hamming":
            weightss = np.asarray(errors).sum(axis=1)
            if (weightss == 0).any():
                raise ZeroWeightError("zero-weight pattern in batch")
            return np.minimum(weightss, self.alpha).astype(np.int64)
        ll = _component_log_likelihoods(self.mixture, np.atleast_2d(errors), pcm)
        return np.argmax(np.log(self.mixture.pi)[None] + ll, axis=1).astype(np.int64) + 1


def hamming_region(error: np.ndarray, alpha: int) -> int:
    """min(weight, alpha); weight-0 patterns are the caller's bypass case."""
    w = int(np.asarray(error).sum())
    if w == 0:
        raise ZeroWeightError("zero-weight error has no Hamming region; bypass instead")
    return min(w, alpha)


def syndrome_labels(pcm: ParityCheckMatrix, error: np.ndarray) -> np.ndarray:
    """Per-variable majority label: 1 if more touching checks are unsatisfied.

    Accepts one (V,) pattern or a (K, V) batch; ties map to 0.
    """
    err = np.atleast_2d(np.asarray(error, dtype=np.uint8))
    s = syndrome(pcm, err).astype(np.int64)  # (K, C)
    unsat = s @ pcm.matrix.astype(np.int64)  # per-variable count of unsatisfied checks
    degrees = pcm.matrix.sum(axis=0).astype(np.int64)
    q = (2 * unsat > degrees[None]).astype(np.uint8)
    return q[0] if np.asarray(error).ndim == 1 else q


def _component_log_likelihoods(mix: BernoulliMixture, errors: np.ndarray,
                               pcm: ParityCheckMatrix | None) -> np.ndarray:
    """(K, alpha) matrix of log P(e | component i)."""
    e = np.asarray(errors, dtype=np.float64)
    if mix.variant == "naive":
        lmu = np.log(mix.mu)
        l1mu = np.log1p(-mix.mu)
        # sum_v e*log(mu) + (1-e)*log(1-mu), with the constant (1-e) part folded
        return e @ (lmu - l1mu).T + l1mu.sum(axis=1)[None]
    if pcm is None:
        raise ValueError("syndrome_guided likelihoods need the parity-check matrix")
    q = syndrome_labels(pcm, errors.astype(np.uint8)).astype(np.float64)
    return _syndrome_log_likelihoods(mix.mu0, mix.mu1, e, q)


def _syndrome_log_likelihoods(mu0, mu1, e, q, eq=None) -> np.ndarray:
    # log P = sum_v e*log(mu_qv) + (1-e)*log(1-mu_qv), split by label value:
    # base over (1-e) terms plus e-dependent corrections, all as matmuls.
    l0, l1 = np.log(mu0), np.log(mu1)
    m0, m1 = np.log1p(-mu0), np.log1p(-mu1)
    if eq is None:
        eq = e * q
    return (
        m0.sum(axis=1)[None] + q @ (m1 - m0).T
        + e @ (l0 - m0).T
        + eq @ ((l1 - m1) - (l0 - m0)).T
    )


def _log_likelihood_and_resp(mix: BernoulliMixture, errors, q_labels, eq=None):
    if mix.variant == "naive":
        comp = _component_log_likelihoods(mix, errors, None)
    else:
        comp = _syndrome_log_likelihoods(mix.mu0, mix.mu1,
                                         errors.astype(np.float64), q_labels, eq)
    joint = comp
    joint += np.log(mix.pi)[None]
    norm = logsumexp(joint, axis=1)
    resp = np.exp(joint - norm[:, None])
    return float(norm.sum()), resp


def em_fit(samples: np.ndarray, alpha: int, variant: str, cfg: EmConfig,
           pcm: ParityCheckMatrix | None = None) -> BernoulliMixture:
    """Fit a Bernoulli mixture by EM, best of cfg.restarts by final likelihood.

    samples is a (K, V) binary array of nonzero error patterns. The
    syndrome-guided variant needs pcm to derive the per-sample labels once.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.uint8))
    K, V = samples.shape
    if K < alpha:
        raise ValueError(f"need at least alpha={alpha} samples, got {K}")
    if variant == "syndrome_guided" and pcm is None:
        raise ValueError("syndrome_guided fitting needs the parity-check matrix")

    e = samples.astype(np.float64)
    q = syndrome_labels(pcm, samples).astype(np.float64) if variant == "syndrome_guided" else None

    best = None
    for restart in range(cfg.restarts):
        rng = make_rng(cfg.seed, stream=restart)
        mix = _em_single_run(e, q, alpha, variant, cfg, rng)
        if best is None or mix.final_log_likelihood > best.final_log_likelihood:
            best = mix
    best.meta.update({"K": K, "seed": cfg.seed, "restarts": cfg.restarts})
    return best


def _init_mixture(alpha, V, variant, cfg, rng) -> BernoulliMixture:
    def draw():
        return np.clip(rng.uniform(cfg.init_low, cfg.init_high, size=(alpha, V)),
                       EPS_MU, 1.0 - EPS_MU)
    pi = np.full(alpha, 1.0 / alpha)
    if variant == "naive":
        return BernoulliMixture(variant=variant, alpha=alpha, pi=pi, mu=draw())
    return BernoulliMixture(variant=variant, alpha=alpha, pi=pi, mu0=draw(), mu1=draw())


def _em_single_run(e, q, alpha, variant, cfg, rng) -> BernoulliMixture:
    K, V = e.shape
    eq = e * q if q is not None else None
    mix = _init_mixture(alpha, V, variant, cfg, rng)
    trace = []
    prev_ll = -np.inf
    for _ in range(cfg.max_iterations):
        ll, resp = _log_likelihood_and_resp(mix, e, q, eq)
        trace.append(ll)
        mass = resp.sum(axis=0)  # (alpha,)

        weak = mass < REINIT_MASS
        if weak.any():
            # dead component: redraw its parameters rather than divide by ~0;
            # the trace restarts so the recorded run stays monotone
            fresh = _init_mixture(alpha, V, variant, cfg, rng)
            for i in np.flatnonzero(weak):
                if variant == "naive":
                    mix.mu[i] = fresh.mu[i]
                else:
                    mix.mu0[i] = fresh.mu0[i]
                    mix.mu1[i] = fresh.mu1[i]
                mix.pi[i] = 1.0 / alpha
            mix.pi /= mix.pi.sum()
            trace.clear()
            prev_ll = -np.inf
            continue

        if variant == "naive":
            mu = (resp.T @ e) / mass[:, None]
            mix.mu = np.clip(mu, EPS_MU, 1.0 - EPS_MU)
        else:
            num1 = resp.T @ eq
            den1 = resp.T @ q
            num0 = resp.T @ e - num1
            den0 = mass[:, None] - den1
            mu0 = np.where(den0 > 0, num0 / np.where(den0 > 0, den0, 1.0), mix.mu0)
            mu1 = np.where(den1 > 0, num1 / np.where(den1 > 0, den1, 1.0), mix.mu1)
            mix.mu0 = np.clip(mu0, EPS_MU, 1.0 - EPS_MU)
            mix.mu1 = np.clip(mu1, EPS_MU, 1.0 - EPS_MU)
        mix.pi = mass / K

        if abs(ll - prev_ll) < cfg.tol_per_sample * K:
            break
        prev_ll = ll
    final_ll, _ = _log_likelihood_and_resp(mix, e, q, eq)
    trace.append(final_ll)
    mix.log_likelihood_trace = trace
    return mix


def responsibilities(mix: BernoulliMixture, errors: np.ndarray,
                     pcm: ParityCheckMatrix | None = None) -> np.ndarray:
    """(K, alpha) posterior over components; rows sum to 1."""
    errors = np.atleast_2d(np.asarray(errors, dtype=np.uint8))
    q = syndrome_labels(pcm, errors).astype(np.float64) if mix.variant == "syndrome_guided" else None
    _, resp = _log_likelihood_and_resp(mix, errors.astype(np.float64), q)
    return resp


def em_region(mix: BernoulliMixture, error: np.ndarray,
              pcm: ParityCheckMatrix | None = None) -> int:
    """argmax_i log pi_i + log P(e | i), ties to the lowest index; 1-based."""
    comp = _component_log_likelihoods(mix, np.atleast_2d(error), pcm)
    return int(np.argmax(np.log(mix.pi) + comp[0])) + 1


def induce_datasets(samples, model: PartitionModel,
                    pcm: ParityCheckMatrix | None = None):
    """Route TrainingSamples into per-region datasets by their true error.

    Returns (list of alpha sample lists, dropped_zero_weight_count).
    Regions that end up empty are reported by the caller; a decoder for
    them cannot train.
    """
    buckets = [[] for _ in range(model.alpha)]
    errors = np.stack([s.true_error for s in samples])
    weights = errors.sum(axis=1)
    nonzero = np.flatnonzero(weights > 0)
    dropped = len(samples) - nonzero.size
    if nonzero.size:
        regions = model.assign_batch(errors[nonzero], pcm)
        for i, region in zip(nonzero, regions):
            buckets[region - 1].append(samples[i])
    return buckets, dropped


def prop1_experiment(sigmas, count: int, block_length: int,
                     cfg: EmConfig | None = None) -> dict:
    """Fit naive EM to i.i.d. BSC errors from one channel per component.

    Draws count/alpha patterns per channel with per-bit flip probability
    Q(1/sigma), fits a naive mixture, and reports the deviation of each
    recovered center from the matching flat crossover vector (components
    matched to channels by sorted mean, since EM is label-symmetric).
    """
    cfg = cfg or EmConfig()
    sigmas = list(sigmas)
    alpha = len(sigmas)
    per = count // alpha
    crossovers = np.array([crossover_probability(s) for s in sigmas])
    rng = make_rng(cfg.seed, stream=10**6)
    blocks = [rng.random((per, block_length)) < p for p in crossovers]
    patterns = np.concatenate(blocks).astype(np.uint8)
    mix = em_fit(patterns, alpha, "naive", cfg)

    order = np.argsort(mix.mu.mean(axis=1))
    truth_order = np.argsort(crossovers)
    mu_dev = np.zeros(alpha)
    pi_recovered = np.zeros(alpha)
    for rank in range(alpha):
        comp = order[rank]
        chan = truth_order[rank]
        mu_dev[rank] = np.abs(mix.mu[comp] - crossovers[chan]).max()
        pi_recovered[rank] = mix.pi[comp]
    return {
        "sigmas": [float(s) for s in sigmas],
        "crossovers": sorted(float(c) for c in crossovers),
        "count_per_channel": per,
        "block_length": block_length,
        "mu_max_deviation": mu_dev.tolist(),
        "pi_recovered": pi_recovered.tolist(),
        "pi_deviation": np.abs(pi_recovered - 1.0 / alpha).max().item(),
        "final_log_likelihood": mix.final_log_likelihood,
    }


def _mixture_doc(mix: BernoulliMixture) -> dict:
    doc = {
        "variant": mix.variant,
        "alpha": mix.alpha,
        "pi": mix.pi.tolist(),
        "final_log_likelihood": mix.final_log_likelihood,
        "meta": mix.meta,
    }
    if mix.variant == "naive":
        doc["mu"] = mix.mu.tolist()
    else:
        doc["mu0"] = mix.mu0.tolist()
        doc["mu1"] = mix.mu1.tolist()
    return doc


def _mixture_from_doc(doc: dict) -> BernoulliMixture:
    return BernoulliMixture(
        variant=doc["variant"],
        alpha=int(doc["alpha"]),
        pi=np.array(doc["pi"], dtype=np.float64),
        mu=np.array(doc["mu"], dtype=np.float64) if "mu" in doc else None,
        mu0=np.array(doc["mu0"], dtype=np.float64) if "mu0" in doc else None,
        mu1=np.array(doc["mu1"], dtype=np.float64) if "mu1" in doc else None,
        log_likelihood_trace=[doc["final_log_likelihood"]],
        meta=doc.get("meta", {}),
    )


def save_mixture(mix: BernoulliMixture, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(_mixture_doc(mix), fh, sort_keys=True)
        fh.write("\n")


def load_mixture(path) -> BernoulliMixture:
    with open(path, "r", encoding="ascii") as fh:
        return _mixture_from_doc(json.load(fh))


def save_partition(model: PartitionModel, path) -> None:
    doc = {"kind": model.kind, "alpha": model.alpha}
    if model.kind == "em":
        doc["mixture"] = _mixture_doc(model.mixture)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_partition(path) -> PartitionModel:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    mixture = _mixture_from_doc(doc["mixture"]) if doc["kind"] == "em" else None
    return PartitionModel(kind=doc["kind"], alpha=int(doc["alpha"]), mixture=mixture)
