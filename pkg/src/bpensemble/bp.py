"""Unrolled weighted belief propagation over the Tanner graph.

Message passing runs in the LLR domain with messages clipped to
[-CLIP, CLIP]. Weights multiply the channel LLR per edge, each incoming
message per ordered (incoming, outgoing) edge pair at a variable, and the
marginalization inputs; check-to-variable updates are unweighted. Uniform
weights of 1.0 reproduce plain sum-product BP on the same arithmetic path.

Internally messages live in padded per-node layouts: variable-major
(V, max var degree, batch) for the weighted sums, check-major
(C, max check degree, batch) for the leave-one-out tanh products, with
precomputed index maps between the two. The batch-last layout turns the
pair-weighted sums into per-variable (degree x degree) @ (degree x batch)
matmuls. Weight files keep the flat canonical edge/pair ordering
regardless of layout.

Sign conventions live in one place, the marginalization: the per-iteration
soft output is o_v = sigmoid(-z_v) with z_v the weighted posterior LLR, so
o_v estimates P(c_v = 1) and the hard decision is c_v = 1 iff z_v <= 0
(the same tie rule as channel.hard_decision).
"""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass

import numpy as np

from .codes import ParityCheckMatrix, syndrome

#: LLR-domain message saturation bound.
CLIP = 10.0

#: tanh products are clamped to +/-(1 - ARTANH_EPS) before artanh.
ARTANH_EPS = 1e-12


class EdgeSpace:
    """Precomputed index plumbing for batched message passing on one matrix.

    Canonical edge order: edges sorted by (check, var), matching
    ParityCheckMatrix.edges. Canonical pair order: for each variable v in
    ascending order, for each outgoing edge e = (c, v) in edge order, each
    incoming edge e' = (c', v) with c' != c in edge order; pairs are
    (incoming-edge-index, outgoing-edge-index).
    """

    def __init__(self, pcm: ParityCheckMatrix):
        self.pcm = pcm
        self.num_checks = pcm.rows
        self.num_vars = pcm.cols
        self.e_check = pcm.edges[:, 0].astype(np.int64)
        self.e_var = pcm.edges[:, 1].astype(np.int64)
        self.num_edges = len(self.e_check)

        # padded layouts; slot lists follow canonical edge order
        self.check_slots, self.check_mask = _padded_slots(self.e_check, self.num_checks)
        self.var_slots, self.var_mask = _padded_slots(self.e_var, self.num_vars)
        # masks shaped for the batch-last layouts (N, D, 1)
        self.check_mask_f = self.check_mask.astype(np.float64)[:, :, None]
        self.check_pad_f = 1.0 - self.check_mask_f  # adds exact 1.0 at padding
        self.var_mask_f = self.var_mask.astype(np.float64)[:, :, None]
        self.dc = self.check_slots.shape[1]
        self.dv = self.var_slots.shape[1]

        # edge -> flat padded position in each layout
        edge_to_check = np.zeros(self.num_edges, dtype=np.int64)
        edge_to_check[self.check_slots[self.check_mask]] = np.flatnonzero(self.check_mask.ravel())
        edge_to_var = np.zeros(self.num_edges, dtype=np.int64)
        edge_to_var[self.var_slots[self.var_mask]] = np.flatnonzero(self.var_mask.ravel())
        self.edge_to_check = edge_to_check
        self.edge_to_var = edge_to_var
        # cross maps between flat layouts; padded slots point at 0 and must be
        # masked or overwritten by the caller
        self.check_from_var = np.zeros(self.num_checks * self.dc, dtype=np.int64)
        self.check_from_var[self.check_mask.ravel()] = edge_to_var[self.check_slots[self.check_mask]]
        self.var_from_check = np.zeros(self.num_vars * self.dv, dtype=np.int64)
        self.var_from_check[self.var_mask.ravel()] = edge_to_check[self.var_slots[self.var_mask]]

        # ordered (incoming, outgoing) pairs sharing a variable, canonical order
        slot_of_edge = np.zeros(self.num_edges, dtype=np.int64)
        for v in range(self.num_vars):
            for j, e in enumerate(self.var_slots[v][self.var_mask[v]]):
                slot_of_edge[e] = j
        pair_in, pair_out = [], []
        for v in range(self.num_vars):
            edges_v = self.var_slots[v][self.var_mask[v]]
            for e_out in edges_v:
                for e_in in edges_v:
                    if e_in != e_out:
                        pair_in.append(e_in)
                        pair_out.append(e_out)
        self.pair_in = np.array(pair_in, dtype=np.int64)
        self.pair_out = np.array(pair_out, dtype=np.int64)
        self.num_pairs = len(self.pair_in)
        self.pair_v = self.e_var[self.pair_out]
        self.pair_i = slot_of_edge[self.pair_in]
        self.pair_j = slot_of_edge[self.pair_out]

    # flat-weight -> padded-layout scatters (and their inverse gathers)

    def llr_weights_var(self, w_edge: np.ndarray) -> np.ndarray:
        out = np.zeros((self.num_vars, self.dv))
        out[self.var_mask] = w_edge[self.var_slots[self.var_mask]]
        return out

    def gather_llr_weights(self, grad_var: np.ndarray) -> np.ndarray:
        out = np.zeros(self.num_edges)
        out[self.var_slots[self.var_mask]] = grad_var[self.var_mask]
        return out

    def pair_tensor(self, w_pair: np.ndarray) -> np.ndarray:
        out = np.zeros((self.num_vars, self.dv, self.dv))
        out[self.pair_v, self.pair_i, self.pair_j] = w_pair
        return out

    def gather_pairs(self, grad_tensor: np.ndarray) -> np.ndarray:
        return grad_tensor[self.pair_v, self.pair_i, self.pair_j]

    def to_check_major(self, var_major: np.ndarray) -> np.ndarray:
        """(V, dv, B) -> (C, dc, B); padded slots carry garbage, mask after."""
        batch = var_major.shape[2]
        out = np.take(var_major.reshape(-1, batch), self.check_from_var, axis=0)
        return out.reshape(self.num_checks, self.dc, batch)

    def to_var_major(self, check_major: np.ndarray) -> np.ndarray:
        """(C, dc, B) -> (V, dv, B); padded slots carry garbage, mask after."""
        batch = check_major.shape[2]
        out = np.take(check_major.reshape(-1, batch), self.var_from_check, axis=0)
        return out.reshape(self.num_vars, self.dv, batch)


def _padded_slots(keys: np.ndarray, nkeys: int):
    counts = np.bincount(keys, minlength=nkeys)
    width = int(counts.max()) if len(keys) else 0
    slots = np.zeros((nkeys, width), dtype=np.int64)
    mask = np.zeros((nkeys, width), dtype=bool)
    pos = np.zeros(nkeys, dtype=np.int64)
    for e, k in enumerate(keys):
        slots[k, pos[k]] = e
        mask[k, pos[k]] = True
        pos[k] += 1
    return slots, mask


_SPACES: "weakref.WeakKeyDictionary[ParityCheckMatrix, EdgeSpace]" = weakref.WeakKeyDictionary()


def edge_space(pcm: ParityCheckMatrix) -> EdgeSpace:
    es = _SPACES.get(pcm)
    if es is None:
        es = EdgeSpace(pcm)
        _SPACES[pcm] = es
    return es


@dataclass
class WeightsSet:
    """All trainable parameters of one unrolled decoder.

    Arrays are stored per layer in the canonical flat orders; tied=True
    shares one layer across all iterations, otherwise there is one layer per
    iteration.
    """

    code_id: str
    iterations: int
    tied: bool
    llr_edge: list  # per layer, shape (E,)
    pair: list      # per layer, shape (P,)
    out_llr: list   # per layer, shape (V,)
    out_edge: list  # per layer, shape (E,)
    edge_order: np.ndarray  # (E, 2) (check, var)
    pair_index: np.ndarray  # (P, 2) (incoming-edge-index, outgoing-edge-index)

    @property
    def num_layers(self) -> int:
        return 1 if self.tied else self.iterations

    def layer(self, t: int) -> int:
        return 0 if self.tied else t

    @classmethod
    def uniform(cls, pcm: ParityCheckMatrix, code_id: str, iterations: int, tied: bool = False,
                fill: float = 1.0) -> "WeightsSet":
        es = edge_space(pcm)
        layers = 1 if tied else iterations
        return cls(
            code_id=code_id,
            iterations=iterations,
            tied=tied,
            llr_edge=[np.full(es.num_edges, fill) for _ in range(layers)],
            pair=[np.full(es.num_pairs, fill) for _ in range(layers)],
            out_llr=[np.full(es.num_vars, fill) for _ in range(layers)],
            out_edge=[np.full(es.num_edges, fill) for _ in range(layers)],
            edge_order=np.stack([es.e_check, es.e_var], axis=1),
            pair_index=np.stack([es.pair_in, es.pair_out], axis=1),
        )

    def copy(self) -> "WeightsSet":
        return WeightsSet(
            code_id=self.code_id,
            iterations=self.iterations,
            tied=self.tied,
            llr_edge=[a.copy() for a in self.llr_edge],
            pair=[a.copy() for a in self.pair],
            out_llr=[a.copy() for a in self.out_llr],
            out_edge=[a.copy() for a in self.out_edge],
            edge_order=self.edge_order,
            pair_index=self.pair_index,
        )

    def arrays(self):
        """All weight arrays in documented order: per layer, llr_edge, pair, out_llr, out_edge."""
        out = []
        for i in range(self.num_layers):
            out.extend([self.llr_edge[i], self.pair[i], self.out_llr[i], self.out_edge[i]])
        return out

    def pack(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unpack_from(self, vec: np.ndarray) -> None:
        pos = 0
        for a in self.arrays():
            a[...] = vec[pos:pos + a.size]
            pos += a.size
        if pos != vec.size:
            raise ValueError(f"vector length {vec.size} does not match parameter count {pos}")

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def matches_graph(self, es: EdgeSpace) -> bool:
        return (
            len(self.edge_order) == es.num_edges
            and np.array_equal(self.edge_order[:, 0], es.e_check)
            and np.array_equal(self.edge_order[:, 1], es.e_var)
        )


class LayerOps:
    """Per-layer weights scattered into the padded layouts, built once.

    Pair tensors are stored transposed, (V, out-slot, in-slot), so the
    variable update is a direct matmul against (V, in-slot, batch) messages.
    """

    def __init__(self, es: EdgeSpace, weights: WeightsSet):
        self.es = es
        self.w_llr_v = [es.llr_weights_var(a)[:, :, None] for a in weights.llr_edge]
        self.w_pair_v = [es.pair_tensor(a) for a in weights.pair]
        self.w_pair_vT = [np.ascontiguousarray(w.transpose(0, 2, 1)) for w in self.w_pair_v]
        self.w_out_llr = [a[:, None] for a in weights.out_llr]
        self.w_out_edge_v = [es.llr_weights_var(a)[:, None, :] for a in weights.out_edge]


@dataclass
class DecodeResult:
    codeword: np.ndarray
    iterations_used: int
    converged: bool
    soft_outputs: np.ndarray | None = None  # (T, V), retained when requested


def var_to_check(es: EdgeSpace, llrs_vb, m_cv_v, w_llr_v, w_pair_vT):
    """Weighted variable update in var-major layout; returns pre-clip and clipped.

    llrs_vb is (V, B), m_cv_v is (V, dv, B), weights come from LayerOps.
    """
    pre = w_llr_v * llrs_vb[:, None, :] + np.matmul(w_pair_vT, m_cv_v)
    return pre, np.clip(pre, -CLIP, CLIP)


def check_to_var(es: EdgeSpace, m_vc_v):
    """Unweighted check update: 2*artanh(leave-one-out tanh products).

    Returns intermediates needed by reverse mode: padded tanh values,
    exclusive prefix/suffix products, raw and clamped products, the
    pre-clip message, and the clipped message in var-major layout.
    """
    m_vc_c = es.to_check_major(m_vc_v)
    th = np.tanh(m_vc_c * 0.5) * es.check_mask_f + es.check_pad_f
    prefix = np.ones_like(th)
    suffix = np.ones_like(th)
    np.cumprod(th[:, :-1], axis=1, out=prefix[:, 1:])
    np.cumprod(th[:, :0:-1], axis=1, out=suffix[:, -2::-1])
    loo = prefix * suffix
    prod = np.clip(loo, -(1.0 - ARTANH_EPS), 1.0 - ARTANH_EPS)
    pre_cv = 2.0 * np.arctanh(prod)
    m_cv_c = np.clip(pre_cv, -CLIP, CLIP)
    m_cv_v = es.to_var_major(m_cv_c) * es.var_mask_f
    return {"m_vc_c": m_vc_c, "th": th, "prefix": prefix, "suffix": suffix,
            "loo": loo, "prod": prod, "pre_cv": pre_cv, "m_cv_v": m_cv_v}


def marginal_llr(es: EdgeSpace, llrs_vb, m_cv_v, w_out_llr, w_out_edge_v):
    """Posterior LLR (V, B): w_out_llr*llr_v + sum of out-weighted messages."""
    return w_out_llr * llrs_vb + np.matmul(w_out_edge_v, m_cv_v)[:, 0, :]


def soft_output(z: np.ndarray) -> np.ndarray:
    """Per-bit estimate of P(c_v = 1) from the posterior LLR."""
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(z))


def wbp_decode_batch(
    pcm: ParityCheckMatrix,
    llrs: np.ndarray,
    weights: WeightsSet,
    iterations: int | None = None,
    early_stop: bool = True,
    record_soft: bool = False,
):
    """Decode a (B, V) batch of LLR words.

    Returns (codewords (B, V) uint8, converged (B,) bool, iterations_used (B,)
    int, soft (B, T, V) or None). The syndrome stopping criterion runs after
    every iteration when early_stop is set; record_soft requires a fixed-depth
    run and therefore early_stop=False.
    """
    es = edge_space(pcm)
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    if llrs.shape[1] != es.num_vars:
        raise ValueError(f"LLR length {llrs.shape[1]} != {es.num_vars} variables")
    if not np.isfinite(llrs).all():
        raise ValueError("LLR values must be finite")
    if not weights.matches_graph(es):
        raise ValueError("weights were built for a different Tanner graph")
    if not weights.all_finite():
        raise ValueError("weights contain non-finite entries")
    T = weights.iterations if iterations is None else iterations
    if T < 1:
        raise ValueError(f"iteration count must be >= 1, got {T}")
    if not weights.tied and T > weights.iterations:
        raise ValueError(f"requested {T} iterations but weights hold {weights.iterations}")
    if record_soft and early_stop:
        raise ValueError("record_soft requires early_stop=False (fixed-depth run)")

    ops = LayerOps(es, weights)
    B = llrs.shape[0]
    out = np.zeros((B, es.num_vars), dtype=np.uint8)
    converged = np.zeros(B, dtype=bool)
    iterations_used = np.zeros(B, dtype=np.int64)
    soft = np.zeros((B, T, es.num_vars)) if record_soft else None

    active = np.arange(B)
    ll = np.ascontiguousarray(llrs.T)  # (V, B)
    m_cv_v = np.zeros((es.num_vars, es.dv, B))
    for t in range(T):
        li = weights.layer(t)
        _, m_vc_v = var_to_check(es, ll, m_cv_v, ops.w_llr_v[li], ops.w_pair_vT[li])
        m_cv_v = check_to_var(es, m_vc_v)["m_cv_v"]
        z = marginal_llr(es, ll, m_cv_v, ops.w_out_llr[li], ops.w_out_edge_v[li])
        hard = (z.T <= 0).astype(np.uint8)
        out[active] = hard
        iterations_used[active] = t + 1
        if record_soft:
            soft[active, t] = soft_output(z.T)
        if early_stop:
            ok = ~(syndrome(pcm, hard).any(axis=1))
            if ok.any():
                converged[active[ok]] = True
                keep = ~ok
                active = active[keep]
                if active.size == 0:
                    break
                m_cv_v = np.ascontiguousarray(m_cv_v[:, :, keep])
                ll = np.ascontiguousarray(ll[:, keep])
    if not early_stop:
        converged = ~(syndrome(pcm, out).any(axis=1))
    return out, converged, iterations_used, soft


def wbp_decode(
    pcm: ParityCheckMatrix,
    llr: np.ndarray,
    weights: WeightsSet,
    iterations: int | None = None,
    early_stop: bool = True,
    record_soft: bool = False,
) -> DecodeResult:
    """Decode a single LLR word with the weighted decoder."""
    llr = np.asarray(llr, dtype=np.float64)
    if llr.ndim != 1:
        raise ValueError("wbp_decode takes a single (V,) word; use wbp_decode_batch for batches")
    out, conv, used, soft = wbp_decode_batch(
        pcm, llr[None], weights, iterations=iterations,
        early_stop=early_stop, record_soft=record_soft,
    )
    return DecodeResult(
        codeword=out[0],
        iterations_used=int(used[0]),
        converged=bool(conv[0]),
        soft_outputs=None if soft is None else soft[0],
    )


def bp_decode(pcm: ParityCheckMatrix, llr: np.ndarray, iterations: int,
              early_stop: bool = True) -> DecodeResult:
    """Plain sum-product BP: the weighted decoder with every weight at 1.0."""
    w = WeightsSet.uniform(pcm, code_id="", iterations=iterations)
    return wbp_decode(pcm, llr, w, iterations=iterations, early_stop=early_stop)


def bp_decode_batch(pcm: ParityCheckMatrix, llrs: np.ndarray, iterations: int,
                    early_stop: bool = True):
    w = WeightsSet.uniform(pcm, code_id="", iterations=iterations)
    return wbp_decode_batch(pcm, llrs, w, iterations=iterations, early_stop=early_stop)


def save_weights(weights: WeightsSet, path) -> None:
    doc = {
        "code_id": weights.code_id,
        "T": weights.iterations,
        "tied": weights.tied,
        "edge_order": weights.edge_order.tolist(),
        "pair_index": weights.pair_index.tolist(),
        "llr_edge_weights": [a.tolist() for a in weights.llr_edge],
        "pair_weights": [a.tolist() for a in weights.pair],
        "out_llr_weights": [a.tolist() for a in weights.out_llr],
        "out_edge_weights": [a.tolist() for a in weights.out_edge],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_weights(path) -> WeightsSet:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    w = WeightsSet(
        code_id=doc["code_id"],
        iterations=int(doc["T"]),
        tied=bool(doc["tied"]),
        llr_edge=[np.array(a, dtype=np.float64) for a in doc["llr_edge_weights"]],
        pair=[np.array(a, dtype=np.float64) for a in doc["pair_weights"]],
        out_llr=[np.array(a, dtype=np.float64) for a in doc["out_llr_weights"]],
        out_edge=[np.array(a, dtype=np.float64) for a in doc["out_edge_weights"]],
        edge_order=np.array(doc["edge_order"], dtype=np.int64),
        pair_index=np.array(doc["pair_index"], dtype=np.int64),
    )
    if len(w.llr_edge) != w.num_layers:
        raise ValueError(f"weights file holds {len(w.llr_edge)} layers, expected {w.num_layers}")
    if not w.all_finite():
        raise ValueError("weights file contains non-finite entries")
    return w
