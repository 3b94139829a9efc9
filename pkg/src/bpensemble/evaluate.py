"""Monte Carlo FER/BER sweeps with error-count stopping and curve comparison.

Zero-codeword evaluation: every frame transmits the all-zero codeword
(justified by decoder symmetry and spot-checked in tests against random
codewords). Frames are simulated in fixed-size shards, one Philox stream
per (SNR point, shard index); shards merge in index order, so results are
byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ensemble as ens
from .bp import WeightsSet, bp_decode_batch, wbp_decode_batch
from .channel import (RNG_IDENTITY, SNR_CONVENTION, ChannelConfig, make_rng,
                      modulate_bpsk, transmit)
from .codes import CodeSpec, ParityCheckMatrix

WILSON_Z = 1.959963984540054  # two-sided 95%

#: Stream ids are snr_index * SHARD_STRIDE + shard_index.
SHARD_STRIDE = 2**32


def wilson_interval(successes: int, trials: int):
    """Wilson 95% score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    z2 = WILSON_Z**2
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = WILSON_Z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials**2)) / denom
    return max(0.0, (center - half)), min(1.0, (center + half))


@dataclass(frozen=True)
class EvalConfig:
    snr_points_db: tuple
    min_frame_errors: int = 100
    max_frames: int = 10_000_000
    seed: int = 0
    shard_frames: int = 2000
    workers: int = 1

    def __post_init__(self):
        if self.min_frame_errors < 1:
            raise ValueError("min_frame_errors must be >= 1")
        if not self.snr_points_db:
            raise ValueError("snr_points_db must be non-empty")


@dataclass
class FerRecord:
    snr_db: float
    frames: int
    frame_errors: int
    bit_errors: int
    fer: float
    ber: float
    fer_lo: float
    fer_hi: float
    mean_iterations: float
    gating_bypass: int
    gating_hdd: int
    gating_fallback: int
    expert_usage: list
    low_confidence: bool = False

    @classmethod
    def from_counts(cls, snr_db, frames, frame_errors, bit_errors, n_bits,
                    iteration_total, gating_bypass, gating_hdd, gating_fallback,
                    expert_usage, low_confidence):
        lo, hi = wilson_interval(frame_errors, frames)
        return cls(
            snr_db=float(snr_db), frames=frames, frame_errors=frame_errors,
            bit_errors=bit_errors,
            fer=frame_errors / frames if frames else 0.0,
            ber=bit_errors / (frames * n_bits) if frames else 0.0,
            fer_lo=lo, fer_hi=hi,
            mean_iterations=iteration_total / frames if frames else 0.0,
            gating_bypass=gating_bypass, gating_hdd=gating_hdd,
            gating_fallback=gating_fallback,
            expert_usage=list(expert_usage), low_confidence=low_confidence,
        )


class PlainBpBinding:
    """Unweighted BP, T iterations; counts as a single always-active expert."""

    kind = "plain_bp"

    def __init__(self, code: CodeSpec, pcm: ParityCheckMatrix, iterations: int = 5):
        self.code = code
        self.pcm = pcm
        self.iterations = iterations
        self.alpha = 1

    def decode(self, llrs, rng):
        words, _, used, _ = bp_decode_batch(self.pcm, llrs, self.iterations)
        return words, {"iteration_total": int(used.sum()), "bypass": 0, "hdd": 0,
                       "fallback": 0, "expert_usage": [llrs.shape[0]]}

    def describe(self):
        return {"kind": self.kind, "iterations": self.iterations}


class WeightsBinding:
    """A single weighted decoder."""

    kind = "weights"

    def __init__(self, code: CodeSpec, pcm: ParityCheckMatrix, weights: WeightsSet):
        self.code = code
        self.pcm = pcm
        self.weights = weights
        self.alpha = 1

    def decode(self, llrs, rng):
        words, _, used, _ = wbp_decode_batch(self.pcm, llrs, self.weights)
        return words, {"iteration_total": int(used.sum()), "bypass": 0, "hdd": 0,
                       "fallback": 0, "expert_usage": [llrs.shape[0]]}

    def describe(self):
        return {"kind": self.kind, "iterations": self.weights.iterations,
                "code_id": self.weights.code_id}


class EnsembleBinding:
    """The gated ensemble with its configured gating mode."""

    kind = "ensemble"

    def __init__(self, model: ens.EnsembleModel):
        self.model = model
        self.code = model.code
        self.pcm = model.pcm
        self.alpha = model.alpha

    def decode(self, llrs, rng):
        words, diag = ens.decode_batch(self.model, llrs, rng)
        sources = diag["sources"]
        return words, {
            "iteration_total": int(diag["bp_iterations"].sum()),
            "bypass": int((sources == "bypass").sum()),
            "hdd": int((sources == "hdd_region").sum()),
            "fallback": int((sources == "hdd_failure_fallback").sum()),
            "expert_usage": diag["expert_usage"].tolist(),
        }

    def describe(self):
        return {"kind": self.kind, "gating_mode": self.model.gating_mode,
                "alpha": self.alpha, "code_id": self.code.code_id}


def run_sweep(cfg: EvalConfig, binding) -> list:
    """Simulate each SNR point until min_frame_errors or the frame cap.

    Shards are merged strictly in index order; runs with different worker
    counts therefore consume identical shard sequences and produce identical
    records. Points that hit the cap first are flagged low_confidence.
    """
    records = []
    x = modulate_bpsk(np.zeros(binding.code.n, dtype=np.uint8))
    for snr_idx, snr_db in enumerate(cfg.snr_points_db):
        ch = ChannelConfig.from_snr(snr_db, binding.code.rate)

        def shard_frames_at(s):
            start = s * cfg.shard_frames
            return max(0, min(cfg.shard_frames, cfg.max_frames - start))

        def run_shard(s):
            nframes = shard_frames_at(s)
            rng = make_rng(cfg.seed, stream=snr_idx * SHARD_STRIDE + s)
            llrs = transmit(np.tile(x, (nframes, 1)), ch, rng)
            words, diag = binding.decode(llrs, rng)
            errors = words.any(axis=1)
            return {
                "frames": nframes,
                "frame_errors": int(errors.sum()),
                "bit_errors": int(words.sum()),
                **diag,
            }

        totals = {"frames": 0, "frame_errors": 0, "bit_errors": 0,
                  "iteration_total": 0, "bypass": 0, "hdd": 0, "fallback": 0}
        usage = np.zeros(binding.alpha, dtype=np.int64)
        workers = max(1, cfg.workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pending = deque()
            next_shard = 0
            while True:
                while (len(pending) < workers and shard_frames_at(next_shard) > 0):
                    pending.append(pool.submit(run_shard, next_shard))
                    next_shard += 1
                if not pending:
                    break
                res = pending.popleft().result()
                for key in totals:
                    totals[key] += res[key]
                usage += np.asarray(res["expert_usage"], dtype=np.int64)
                if (totals["frame_errors"] >= cfg.min_frame_errors
                        or totals["frames"] >= cfg.max_frames):
                    for f in pending:
                        f.cancel()
                    break
        records.append(FerRecord.from_counts(
            snr_db=snr_db, frames=totals["frames"],
            frame_errors=totals["frame_errors"], bit_errors=totals["bit_errors"],
            n_bits=binding.code.n, iteration_total=totals["iteration_total"],
            gating_bypass=totals["bypass"], gating_hdd=totals["hdd"],
            gating_fallback=totals["fallback"], expert_usage=usage.tolist(),
            low_confidence=totals["frame_errors"] < cfg.min_frame_errors,
        ))
    return records


def config_echo(cfg: EvalConfig, binding) -> dict:
    """Everything needed to reinterpret a result file."""
    return {
        "snr_points_db": [float(s) for s in cfg.snr_points_db],
        "sigma_per_point": [ChannelConfig.from_snr(s, binding.code.rate).sigma
                            for s in cfg.snr_points_db],
        "snr_convention": SNR_CONVENTION,
        "rng": RNG_IDENTITY,
        "seed": cfg.seed,
        "min_frame_errors": cfg.min_frame_errors,
        "max_frames": cfg.max_frames,
        "shard_frames": cfg.shard_frames,
        "code_id": binding.code.code_id,
        "code_rate": binding.code.rate,
        "decoder": binding.describe(),
    }


def _csv_header(alpha: int):
    return (["snr_db", "frames", "frame_errors", "bit_errors", "fer", "ber",
             "fer_lo", "fer_hi", "mean_iterations", "gating_bypass",
             "gating_hdd", "gating_fallback"]
            + [f"expert_usage_{i + 1}" for i in range(alpha)])


def export(records: list, path, fmt: str, config: dict | None = None) -> None:
    """Write records as CSV (fixed column set) or JSON (with config echo)."""
    if fmt == "csv":
        alpha = len(records[0].expert_usage) if records else 0
        with open(path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_csv_header(alpha))
            for r in records:
                writer.writerow([repr(r.snr_db), r.frames, r.frame_errors,
                                 r.bit_errors, repr(r.fer), repr(r.ber),
                                 repr(r.fer_lo), repr(r.fer_hi),
                                 repr(r.mean_iterations), r.gating_bypass,
                                 r.gating_hdd, r.gating_fallback]
                                + list(r.expert_usage))
    elif fmt == "json":
        doc = {
            "records": [_record_doc(r) for r in records],
            "config": config or {},
        }
        with open(path, "w", encoding="ascii") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _record_doc(r: FerRecord) -> dict:
    doc = {k: getattr(r, k) for k in (
        "snr_db", "frames", "frame_errors", "bit_errors", "fer", "ber",
        "fer_lo", "fer_hi", "mean_iterations", "gating_bypass", "gating_hdd",
        "gating_fallback", "low_confidence")}
    doc["expert_usage"] = list(r.expert_usage)
    return doc


def read_records(path, fmt: str) -> list:
    if fmt == "json":
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
        return [FerRecord(**rec) for rec in doc["records"]]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    records = []
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        usage_cols = [i for i, name in enumerate(header) if name.startswith("expert_usage_")]
        for row in reader:
            records.append(FerRecord(
                snr_db=float(row[0]), frames=int(row[1]), frame_errors=int(row[2]),
                bit_errors=int(row[3]), fer=float(row[4]), ber=float(row[5]),
                fer_lo=float(row[6]), fer_hi=float(row[7]),
                mean_iterations=float(row[8]), gating_bypass=int(row[9]),
                gating_hdd=int(row[10]), gating_fallback=int(row[11]),
                expert_usage=[int(row[i]) for i in usage_cols],
                low_confidence=False,
            ))
    return records


def compare_curves(records_a: list, records_b: list) -> dict:
    """Per-SNR FER ratios plus horizontal dB gains at matched FER levels.

    Requires the two sweeps to share their SNR grid. The gain at a FER level
    taken from curve a is snr_a - snr_b(level) with snr_b interpolated
    log-linearly (log10 FER vs dB); positive gain means curve b reaches that
    FER at a lower SNR. Levels outside curve b's FER range are undefined.
    """
    grid_a = [r.snr_db for r in records_a]
    grid_b = [r.snr_db for r in records_b]
    if grid_a != grid_b:
        raise ValueError(f"SNR grids differ: {grid_a} vs {grid_b}")
    points = []
    for ra, rb in zip(records_a, records_b):
        ratio = ra.fer / rb.fer if rb.fer > 0 else math.inf
        lo = ra.fer_lo / rb.fer_hi if rb.fer_hi > 0 else math.inf
        hi = ra.fer_hi / rb.fer_lo if rb.fer_lo > 0 else math.inf
        points.append({
            "snr_db": ra.snr_db, "fer_a": ra.fer, "fer_b": rb.fer,
            "ratio_a_over_b": ratio, "ratio_lo": lo, "ratio_hi": hi,
        })
    gains = []
    for ra in records_a:
        gain = None
        if ra.fer > 0:
            snr_b = _invert_curve(records_b, ra.fer)
            if snr_b is not None:
                gain = ra.snr_db - snr_b
        gains.append({"fer_level": ra.fer, "snr_a": ra.snr_db,
                      "gain_db_b_over_a": gain})
    return {"points": points, "gains": gains}


def _invert_curve(records: list, fer_level: float):
    """SNR where the curve crosses fer_level, by log-linear interpolation."""
    pts = [(r.snr_db, r.fer) for r in records if r.fer > 0]
    if len(pts) < 2:
        return None
    pts.sort()
    logs = [(snr, math.log10(f)) for snr, f in pts]
    target = math.log10(fer_level)
    for (s0, l0), (s1, l1) in zip(logs, logs[1:]):
        lo, hi = min(l0, l1), max(l0, l1)
        if lo <= target <= hi:
            if l1 == l0:
                return s0
            return s0 + (target - l0) * (s1 - s0) / (l1 - l0)
    return None
