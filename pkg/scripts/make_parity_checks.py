#!/usr/bin/env python3
"""Regenerate the parity-check matrices shipped in src/bpensemble/data/.

For each supported BCH code this derives the generator polynomial over
GF(2^m), enumerates the dual code exhaustively, and greedily picks n-k
linearly independent dual codewords preferring (low weight, few 4-cycles,
balanced column degrees). The result is a cycle-reduced parity-check matrix
of the exact same code, checked here against the cyclic definition before
writing. The procedure is fully deterministic.

Run from the repository root:  python scripts/make_parity_checks.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bpensemble.codes import ParityCheckMatrix, save_alist  # noqa: E402
from bpensemble.hdd import PRIMITIVE_POLYS, GfField  # noqa: E402

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "bpensemble", "data")

CODES = [
    # (filename, m, designed-error exponents -> g = lcm of their min polys, t)
    ("bch_63_36.alist", 6, [1, 3, 5, 7, 9], 5),
    ("bch_63_45.alist", 6, [1, 3, 5], 3),
    ("hamming_7_4.alist", 3, [1], 1),
]


def min_poly(field: GfField, exponent: int):
    """Minimal polynomial (binary, low-to-high coefficients) of alpha^exponent."""
    n = field.order
    coset = set()
    e = exponent % n
    while e not in coset:
        coset.add(e)
        e = (2 * e) % n
    poly = [1]
    for e in sorted(coset):
        root = field.alpha_pow(e)
        nxt = [0] * (len(poly) + 1)
        for deg, c in enumerate(poly):
            nxt[deg + 1] ^= c
            nxt[deg] ^= field.mul(c, root)
        poly = nxt
    assert all(c in (0, 1) for c in poly)
    return poly


def poly_mul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        if ca:
            for j, cb in enumerate(b):
                out[i + j] ^= cb
    return out


def poly_divmod(num, den):
    num = list(num)
    dd = len(den) - 1
    quo = [0] * (len(num) - dd)
    for i in range(len(num) - 1, dd - 1, -1):
        if num[i]:
            quo[i - dd] = 1
            for j, c in enumerate(den):
                num[i - dd + j] ^= c
    return quo, num[:dd]


def bits_of(word: int, n: int) -> np.ndarray:
    return np.array([(word >> i) & 1 for i in range(n)], dtype=np.uint8)


def enumerate_dual(gen_word: int, dim: int, n: int, max_weight: int):
    """All nonzero dual codewords of weight <= max_weight, weight-sorted."""
    basis = np.array([(gen_word << i) for i in range(dim)], dtype=np.uint64)
    lo_bits = dim // 2
    hi_bits = dim - lo_bits
    lo = np.zeros(1 << lo_bits, dtype=np.uint64)
    for i in range(lo_bits):
        step = 1 << i
        lo[step:2 * step] = lo[:step] ^ basis[i]
    hi = np.zeros(1 << hi_bits, dtype=np.uint64)
    for i in range(hi_bits):
        step = 1 << i
        hi[step:2 * step] = hi[:step] ^ basis[lo_bits + i]
    found = {}
    for hval in hi:
        words = lo ^ hval
        weights = np.bitwise_count(words)
        mask = (weights <= max_weight) & (words != 0)
        for word, weight in zip(words[mask], weights[mask]):
            found.setdefault(int(weight), set()).add(int(word))
    ordered = []
    for weight in sorted(found):
        ordered.extend(sorted(found[weight]))
    return ordered


class Gf2Span:
    def __init__(self):
        self.pivots = {}

    def reduce(self, word: int) -> int:
        for bit in sorted(self.pivots, reverse=True):
            if (word >> bit) & 1:
                word ^= self.pivots[bit]
        return word

    def add(self, word: int) -> bool:
        reduced = self.reduce(word)
        if reduced == 0:
            return False
        self.pivots[reduced.bit_length() - 1] = reduced
        return True


def select_rows(candidates, nk: int, n: int) -> np.ndarray:
    """Greedy pick of nk independent rows by (weight, 4-cycles, column balance)."""
    vecs = [bits_of(w, n) for w in candidates]
    weights = [int(v.sum()) for v in vecs]
    chosen = []
    span = Gf2Span()
    H = np.zeros((0, n), dtype=np.int64)
    for _ in range(nk):
        best_cost, best_idx = None, None
        for i, (word, vec) in enumerate(zip(candidates, vecs)):
            if i in chosen or span.reduce(word) == 0:
                continue
            if H.shape[0]:
                overlap = H @ vec.astype(np.int64)
                cycles = int((overlap * (overlap - 1) // 2).sum())
                coldeg = H.sum(axis=0) + vec
                balance = float(((coldeg - coldeg.mean()) ** 2).sum())
            else:
                cycles, balance = 0, 0.0
            cost = (weights[i], cycles, balance, i)
            if best_cost is None or cost < best_cost:
                best_cost, best_idx = cost, i
        if best_idx is None:
            raise RuntimeError("candidate pool does not span the dual code")
        chosen.append(best_idx)
        span.add(candidates[best_idx])
        H = np.vstack([H, vecs[best_idx][None].astype(np.int64)])
    return H.astype(np.uint8)


def count_4cycles(H: np.ndarray) -> int:
    overlap = H.astype(np.int64) @ H.astype(np.int64).T
    total = 0
    for i in range(H.shape[0]):
        for j in range(i + 1, H.shape[0]):
            total += int(overlap[i, j] * (overlap[i, j] - 1) // 2)
    return total


def verify(H: np.ndarray, field: GfField, gen_poly, exponents, t, n, k):
    """H must describe exactly the cyclic code: rows dual, null space = code."""
    gen = bits_of(sum(c << i for i, c in enumerate(gen_poly)), n)
    code_basis = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        code_basis[i] = np.roll(gen, i) if i + len(gen_poly) <= n else None
        assert i + len(gen_poly) - 1 < n
        code_basis[i] = 0
        code_basis[i, i:i + len(gen_poly)] = gen_poly
    assert not ((code_basis @ H.T.astype(np.uint8)) & 1).any(), "rows not in the dual"
    span = Gf2Span()
    rank = sum(span.add(int(sum(int(b) << i for i, b in enumerate(row)))) for row in H)
    assert rank == n - k, f"rank {rank} != {n - k}"
    # canonical BCH roots on a few random codewords
    rng = np.random.default_rng(7)
    for _ in range(20):
        coeffs = rng.integers(0, 2, size=k).astype(np.uint8)
        word = (coeffs @ code_basis) & 1
        positions = np.flatnonzero(word)
        for j in range(1, 2 * t + 1):
            acc = 0
            for p in positions:
                acc ^= field.alpha_pow(j * int(p))
            assert acc == 0, f"codeword not annihilated at alpha^{j}"


def build(filename, m, exponents, t):
    field = GfField(m, PRIMITIVE_POLYS[m])
    n = field.order
    gen_poly = [1]
    for e in exponents:
        gen_poly = poly_mul(gen_poly, min_poly(field, e))
    k = n - (len(gen_poly) - 1)
    xn1 = [1] + [0] * (n - 1) + [1]
    h_poly, rem = poly_divmod(xn1, gen_poly)
    assert not any(rem), "g(x) must divide x^n - 1"
    # dual code = cyclic code generated by the reversal of h(x), dimension n-k
    gperp = h_poly[::-1]
    gperp_word = sum(c << i for i, c in enumerate(gperp))

    weight_cap = int(sum(gperp))  # the generator itself is always available
    pool = enumerate_dual(gperp_word, n - k, n, weight_cap)
    # cap the pool so the greedy selection stays fast; it is weight-sorted
    H = select_rows(pool[:4000], n - k, n)
    verify(H, field, gen_poly, exponents, t, n, k)

    pcm = ParityCheckMatrix(H)
    path = os.path.join(OUT_DIR, filename)
    save_alist(pcm, path)
    print(f"{filename}: {n - k}x{n}, {pcm.num_edges} edges, "
          f"row weights {sorted(set(int(w) for w in H.sum(axis=1)))}, "
          f"{count_4cycles(H)} 4-cycles")


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    for filename, m, exponents, t in CODES:
        build(filename, m, exponents, t)


if __name__ == "__main__":
    main()
