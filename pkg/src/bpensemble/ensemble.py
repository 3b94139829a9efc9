"""Gating, expert decoding, and combining: the full ensemble decoder.

Decode pipeline per word: if the hard decision is already a codeword the
word bypasses the ensemble entirely. Otherwise the gating function picks the
active experts; each runs the weighted decoder with the syndrome stopping
criterion; the combiner keeps the valid candidates when any exist and
returns the one minimizing the correlation score c . llr (ties break to the
lowest expert index).

Single-choice gating routes through the hard-decision decoder: its estimated
error pattern selects exactly one region's expert. When the HDD fails, the
word falls back to all-decoders gating (a safe superset; counted separately
in diagnostics so the fallback rate stays observable).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .bp import WeightsSet, load_weights, save_weights, wbp_decode_batch
from .channel import hard_decision
from .codes import CodeSpec, KNOWN_CODES, ParityCheckMatrix, syndrome
from .hdd import GfField, hdd_decode
from .partition import PartitionModel, load_partition, save_partition

GATING_MODES = ("single_choice", "all_decoders", "random_choice")


@dataclass(frozen=True)
class GatingDecision:
    active: np.ndarray  # (alpha,) uint8
    source: str  # bypass | hdd_region | hdd_failure_fallback | all | random
    region: int | None = None  # 1-based, hdd_region only

    def __post_init__(self):
        if self.source != "bypass" and not self.active.any():
            raise ValueError("non-bypass gating must activate at least one decoder")


@dataclass
class EnsembleModel:
    code: CodeSpec
    pcm: ParityCheckMatrix
    experts: list  # alpha WeightsSets sharing the code and iteration count
    partition: PartitionModel
    gating_mode: str
    gf: GfField

    def __post_init__(self):
        if self.gating_mode not in GATING_MODES:
            raise ValueError(f"unknown gating mode {self.gating_mode!r}")
        if len(self.experts) != self.partition.alpha:
            raise ValueError(
                f"{len(self.experts)} experts for alpha={self.partition.alpha} partition")
        ids = {w.code_id for w in self.experts}
        if len(ids) != 1:
            raise ValueError(f"experts disagree on code_id: {sorted(ids)}")

    @property
    def alpha(self) -> int:
        return self.partition.alpha


def gate(model: EnsembleModel, llr: np.ndarray,
         rng: np.random.Generator | None = None) -> GatingDecision:
    """Choose the active experts for one word (the bypass case is handled
    by decode_word before gating, and again here for totality)."""
    alpha = model.alpha
    y_hd = hard_decision(llr)
    if not syndrome(model.pcm, y_hd).any():
        return GatingDecision(active=np.zeros(alpha, dtype=np.uint8), source="bypass")
    if model.gating_mode == "all_decoders":
        return GatingDecision(active=np.ones(alpha, dtype=np.uint8), source="all")
    if model.gating_mode == "random_choice":
        if rng is None:
            raise ValueError("random_choice gating needs a seeded stream")
        active = np.zeros(alpha, dtype=np.uint8)
        active[int(rng.integers(alpha))] = 1
        return GatingDecision(active=active, source="random")
    # single_choice
    result = hdd_decode(model.code, model.gf, y_hd)
    if not result.corrected:
        return GatingDecision(active=np.ones(alpha, dtype=np.uint8),
                              source="hdd_failure_fallback")
    if not result.estimated_error.any():
        return GatingDecision(active=np.zeros(alpha, dtype=np.uint8), source="bypass")
    region = model.partition.assign(result.estimated_error, model.pcm)
    active = np.zeros(alpha, dtype=np.uint8)
    active[region - 1] = 1
    return GatingDecision(active=active, source="hdd_region", region=region)


def combine(candidates, llr: np.ndarray):
    """Pick from (codeword, valid) candidates by minimum correlation score.

    Valid candidates win over invalid ones whenever any exist; among the
    considered set the argmin of c . llr is returned, ties resolved to the
    lowest candidate index. Returns (codeword, index into candidates).
    """
    if not candidates:
        raise ValueError("combine needs at least one candidate")
    valid_ids = [i for i, (_, ok) in enumerate(candidates) if ok]
    pool = valid_ids if valid_ids else list(range(len(candidates)))
    scores = [float(candidates[i][0] @ llr) for i in pool]
    winner = pool[int(np.argmin(scores))]
    return candidates[winner][0], winner


def decode_word(model: EnsembleModel, llr: np.ndarray,
                rng: np.random.Generator | None = None):
    """Full ensemble decode of one LLR word; returns (codeword, diagnostics)."""
    llr = np.asarray(llr, dtype=np.float64)
    decision = gate(model, llr, rng)
    diag = {"source": decision.source, "active": decision.active.tolist(),
            "chosen_expert": None, "converged": [], "iterations": []}
    if decision.source == "bypass":
        return hard_decision(llr), diag
    candidates = []
    indices = np.flatnonzero(decision.active)
    for i in indices:
        out, conv, used, _ = wbp_decode_batch(model.pcm, llr[None], model.experts[i])
        candidates.append((out[0], bool(conv[0])))
        diag["converged"].append(bool(conv[0]))
        diag["iterations"].append(int(used[0]))
    word, winner = combine(candidates, llr)
    diag["chosen_expert"] = int(indices[winner]) + 1
    return word, diag


def decode_batch(model: EnsembleModel, llrs: np.ndarray,
                 rng: np.random.Generator | None = None):
    """Vectorized ensemble decode of a (B, V) batch.

    Returns (codewords, diagnostics) where diagnostics carries per-word
    gating sources, per-expert usage counts, and mean BP iterations over
    the words that ran BP.
    """
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    B = llrs.shape[0]
    alpha = model.alpha
    out = np.zeros((B, model.pcm.cols), dtype=np.uint8)

    y_hd = hard_decision(llrs)
    bypass = ~(syndrome(model.pcm, y_hd).any(axis=1))
    out[bypass] = y_hd[bypass]
    need = np.flatnonzero(~bypass)

    sources = np.full(B, "bypass", dtype=object)
    active = np.zeros((B, alpha), dtype=np.uint8)
    if need.size:
        if model.gating_mode == "all_decoders":
            active[need] = 1
            sources[need] = "all"
        elif model.gating_mode == "random_choice":
            if rng is None:
                raise ValueError("random_choice gating needs a seeded stream")
            picks = rng.integers(alpha, size=need.size)
            active[need, picks] = 1
            sources[need] = "random"
        else:
            regions = np.zeros(need.size, dtype=np.int64)
            for j, i in enumerate(need):
                result = hdd_decode(model.code, model.gf, y_hd[i])
                if result.corrected and result.estimated_error.any():
                    regions[j] = model.partition.assign(result.estimated_error, model.pcm)
            fallback = regions == 0
            routed = ~fallback
            active[need[routed], regions[routed] - 1] = 1
            active[need[fallback]] = 1
            sources[need[routed]] = "hdd_region"
            sources[need[fallback]] = "hdd_failure_fallback"

    iteration_counts = []
    expert_usage = np.zeros(alpha, dtype=np.int64)
    candidate_words = {}
    candidate_valid = {}
    for i in range(alpha):
        rows = np.flatnonzero(active[:, i] == 1)
        if rows.size == 0:
            continue
        expert_usage[i] = rows.size
        words, conv, used, _ = wbp_decode_batch(model.pcm, llrs[rows], model.experts[i])
        candidate_words[i] = (rows, words)
        candidate_valid[i] = (rows, conv)
        iteration_counts.append(used)

    # combiner over experts, vectorized: score = c . llr, invalid candidates
    # only considered for words with no valid candidate
    scores = np.full((B, alpha), np.inf)
    valid = np.zeros((B, alpha), dtype=bool)
    words_by_expert = np.zeros((alpha, B, model.pcm.cols), dtype=np.uint8)
    for i in range(alpha):
        if i not in candidate_words:
            continue
        rows, words = candidate_words[i]
        _, conv = candidate_valid[i]
        words_by_expert[i, rows] = words
        scores[rows, i] = (words * llrs[rows]).sum(axis=1)
        valid[rows, i] = conv
    ran = np.flatnonzero(active.any(axis=1))
    if ran.size:
        has_valid = valid[ran].any(axis=1)
        pick_scores = scores[ran].copy()
        pick_scores[has_valid[:, None] & ~valid[ran]] = np.inf
        winner = np.argmin(pick_scores, axis=1)
        out[ran] = words_by_expert[winner, ran]

    diag = {
        "sources": sources,
        "expert_usage": expert_usage,
        "bp_iterations": np.concatenate(iteration_counts) if iteration_counts else np.zeros(0),
        "active": active,
    }
    return out, diag


@dataclass
class EnsembleManifest:
    code_id: str
    alpha: int
    gating_mode: str
    partition_path: str
    expert_paths: list
    iterations: int
    primitive_poly: int
    t: int
    gf_order_exponent: int


def save_manifest(model: EnsembleModel, directory, gating_mode: str | None = None,
                  name: str = "manifest.json") -> str:
    """Write the ensemble manifest plus its partition and expert files."""
    os.makedirs(directory, exist_ok=True)
    partition_file = "partition.json"
    save_partition(model.partition, os.path.join(directory, partition_file))
    expert_files = []
    for i, w in enumerate(model.experts):
        fname = f"expert_{i + 1}.json"
        save_weights(w, os.path.join(directory, fname))
        expert_files.append(fname)
    doc = {
        "code_id": model.code.code_id,
        "alpha": model.alpha,
        "gating_mode": gating_mode or model.gating_mode,
        "partition": partition_file,
        "experts": expert_files,
        "iterations": model.experts[0].iterations,
        "hdd": {
            "primitive_poly": model.gf.primitive_poly,
            "t": model.code.t,
            "gf_order_exponent": model.code.gf_order_exponent,
        },
    }
    path = os.path.join(directory, name)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def load_manifest(path, pcm: ParityCheckMatrix,
                  gating_mode: str | None = None) -> EnsembleModel:
    """Rebuild an EnsembleModel from a manifest; paths are manifest-relative."""
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    code = KNOWN_CODES[doc["code_id"]]
    if code.t != doc["hdd"]["t"] or code.gf_order_exponent != doc["hdd"]["gf_order_exponent"]:
        raise ValueError("manifest HDD parameters disagree with the known code")
    partition = load_partition(os.path.join(base, doc["partition"]))
    experts = [load_weights(os.path.join(base, p)) for p in doc["experts"]]
    gf = GfField(doc["hdd"]["gf_order_exponent"], doc["hdd"]["primitive_poly"])
    return EnsembleModel(
        code=code,
        pcm=pcm,
        experts=experts,
        partition=partition,
        gating_mode=gating_mode or doc["gating_mode"],
        gf=gf,
    )
