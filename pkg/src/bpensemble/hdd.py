"""Bounded-distance hard-decision decoding of primitive narrow-sense BCH codes.

Pipeline: GF(2^m) power-sum syndromes -> Berlekamp-Massey error locator ->
Chien search -> bit flips -> syndrome re-verification. Miscorrection beyond
the radius t is inherent to bounded-distance decoding; the re-verification
gate guarantees a "corrected" result is always a codeword of the cyclic code.

Position labeling: bit i of a word is the coefficient of x^i, so an error at
position p contributes alpha^(j*p) to syndrome S_j. The primitive polynomial
is recorded in outputs since it fixes this labeling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import CodeSpec

#: Default primitive polynomials, bit i = coefficient of x^i.
PRIMITIVE_POLYS = {
    3: 0b1011,     # x^3 + x + 1
    6: 0b1000011,  # x^6 + x + 1
}


class GfField:
    """GF(2^m) arithmetic via log/antilog tables over a primitive polynomial."""

    def __init__(self, m: int, primitive_poly: int | None = None):
        if primitive_poly is None:
            primitive_poly = PRIMITIVE_POLYS[m]
        self.m = m
        self.primitive_poly = primitive_poly
        self.order = (1 << m) - 1
        self.antilog = np.zeros(self.order, dtype=np.int64)
        self.log = np.zeros(self.order + 1, dtype=np.int64)
        x = 1
        for i in range(self.order):
            self.antilog[i] = x
            self.log[x] = i
            x <<= 1
            if x & (1 << m):
                x ^= primitive_poly
        if x != 1:
            raise ValueError(f"polynomial {primitive_poly:#b} is not primitive for m={m}")
        self.antilog.setflags(write=False)
        self.log.setflags(write=False)

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.antilog[(self.log[a] + self.log[b]) % self.order])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse in GF(2^m)")
        return int(self.antilog[(self.order - self.log[a]) % self.order])

    def alpha_pow(self, e: int) -> int:
        return int(self.antilog[e % self.order])


@dataclass
class HddResult:
    status: str  # "corrected" or "failure"
    codeword: np.ndarray | None = None
    estimated_error: np.ndarray | None = None

    @property
    def corrected(self) -> bool:
        return self.status == "corrected"


def gf_syndromes(field: GfField, word: np.ndarray, t: int) -> list:
    """Power-sum syndromes S_j = r(alpha^j) for j = 1..2t, narrow-sense."""
    word = np.asarray(word)
    if word.shape[0] != field.order:
        raise ValueError(f"word length {word.shape[0]} != field order {field.order}")
    positions = np.flatnonzero(word)
    syns = []
    for j in range(1, 2 * t + 1):
        if positions.size == 0:
            syns.append(0)
            continue
        powers = field.antilog[(j * positions) % field.order]
        syns.append(int(np.bitwise_xor.reduce(powers)))
    return syns


def berlekamp_massey(field: GfField, syndromes: list) -> np.ndarray:
    """Minimal LFSR polynomial annihilating the syndrome sequence.

    Returns coefficients lambda_0..lambda_L (lambda_0 = 1) as an int array.
    The caller decides whether deg > t means decode failure.
    """
    n = len(syndromes)
    lam = [1] + [0] * n  # current connection polynomial
    prev = [1] + [0] * n  # copy from before the last length change
    L = 0
    shift = 1  # x-power applied to prev at the next discrepancy fix
    prev_disc = 1
    for r in range(n):
        disc = syndromes[r]
        for i in range(1, L + 1):
            disc ^= field.mul(lam[i], syndromes[r - i])
        if disc == 0:
            shift += 1
            continue
        scale = field.mul(disc, field.inv(prev_disc))
        candidate = lam[:]
        for i in range(0, n + 1 - shift):
            if prev[i]:
                candidate[i + shift] ^= field.mul(scale, prev[i])
        if 2 * L <= r:
            prev = lam
            prev_disc = disc
            L = r + 1 - L
            shift = 1
        else:
            shift += 1
        lam = candidate
    deg = max((i for i, c in enumerate(lam) if c), default=0)
    return np.array(lam[: deg + 1], dtype=np.int64)


def chien_search(field: GfField, locator: np.ndarray) -> np.ndarray:
    """Error positions p with locator(alpha^-p) = 0, over all field positions."""
    deg = len(locator) - 1
    if deg == 0:
        return np.zeros(0, dtype=np.int64)
    n = field.order
    positions = []
    # evaluate at x = alpha^i for i = 0..n-1; root alpha^i marks position -i mod n
    coeff_logs = [(int(c), int(field.log[c]) if c else 0) for c in locator]
    for i in range(n):
        acc = 0
        for d, (c, clog) in enumerate(coeff_logs):
            if c:
                acc ^= field.antilog[(clog + d * i) % n]
        if acc == 0:
            positions.append((-i) % n)
    return np.array(sorted(positions), dtype=np.int64)


def hdd_decode(code: CodeSpec, field: GfField, y_hd: np.ndarray) -> HddResult:
    """Bounded-distance decode of a hard-decision word.

    Success requires the located error count to match the locator degree,
    be within the radius t, and the corrected word's syndromes to vanish.
    """
    y_hd = np.asarray(y_hd, dtype=np.uint8)
    if y_hd.shape[0] != code.n:
        raise ValueError(f"word length {y_hd.shape[0]} != code length {code.n}")
    syns = gf_syndromes(field, y_hd, code.t)
    if not any(syns):
        return HddResult(status="corrected", codeword=y_hd.copy(),
                         estimated_error=np.zeros(code.n, dtype=np.uint8))
    locator = berlekamp_massey(field, syns)
    deg = len(locator) - 1
    if deg > code.t:
        return HddResult(status="failure")
    positions = chien_search(field, locator)
    if len(positions) != deg:
        return HddResult(status="failure")
    corrected = y_hd.copy()
    corrected[positions] ^= 1
    if any(gf_syndromes(field, corrected, code.t)):
        return HddResult(status="failure")
    error = np.zeros(code.n, dtype=np.uint8)
    error[positions] = 1
    return HddResult(status="corrected", codeword=corrected, estimated_error=error)
