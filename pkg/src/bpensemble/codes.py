"""Linear block code structures: parity-check matrices, Tanner graphs, syndromes.

Matrices are ingested from alist or dense text files, never synthesized at
runtime. All structures are immutable after load and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AlistParseError(ValueError):
    """Malformed alist or dense matrix file; message names the offending line."""


@dataclass(frozen=True)
class CodeSpec:
    """Parameters of a supported code.

    t is the bounded-distance correction radius of the hard-decision decoder,
    gf_order_exponent the m with n = 2^m - 1 for the primitive BCH view.
    """

    n: int
    k: int
    t: int
    gf_order_exponent: int
    code_id: str

    def __post_init__(self):
        if not (0 < self.k < self.n):
            raise ValueError(f"need 0 < k < n, got k={self.k}, n={self.n}")
        if self.t < 1:
            raise ValueError(f"t must be >= 1, got {self.t}")

    @property
    def rate(self) -> float:
        return self.k / self.n


#: Codes this toolkit knows how to hard-decision decode. The parity-check
#: matrices live in data/ and are loaded separately; t and m are validated by
#: the HDD self-test, not assumed.
KNOWN_CODES = {
    "CR-BCH(63,36)": CodeSpec(n=63, k=36, t=5, gf_order_exponent=6, code_id="CR-BCH(63,36)"),
    "CR-BCH(63,45)": CodeSpec(n=63, k=45, t=3, gf_order_exponent=6, code_id="CR-BCH(63,45)"),
    "Hamming(7,4)": CodeSpec(n=7, k=4, t=1, gf_order_exponent=3, code_id="Hamming(7,4)"),
}


class ParityCheckMatrix:
    """Binary parity-check matrix with its Tanner graph adjacency.

    Attributes:
        rows, cols: check and variable counts.
        matrix: dense (rows, cols) uint8 array, read-only.
        var_neighbors: per-variable array of check indices.
        check_neighbors: per-check array of variable indices.
        edges: (E, 2) array of (check, var) pairs, sorted by (check, var).
    """

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise ValueError("parity-check matrix must be 2-D")
        if not np.isin(matrix, (0, 1)).all():
            raise ValueError("parity-check matrix entries must be 0 or 1")
        matrix = matrix.astype(np.uint8)
        if matrix.shape[0] == 0 or matrix.shape[1] == 0:
            raise ValueError("parity-check matrix must be non-empty")
        if (matrix.sum(axis=1) == 0).any():
            raise ValueError("parity-check matrix has an all-zero row")
        if (matrix.sum(axis=0) == 0).any():
            raise ValueError("parity-check matrix has an all-zero column")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.rows, self.cols = matrix.shape
        self.check_neighbors = [np.flatnonzero(matrix[c]) for c in range(self.rows)]
        self.var_neighbors = [np.flatnonzero(matrix[:, v]) for v in range(self.cols)]
        checks, vars_ = np.nonzero(matrix)
        self.edges = np.stack([checks, vars_], axis=1)
        self.edges.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def __repr__(self):
        return f"ParityCheckMatrix({self.rows}x{self.cols}, {self.num_edges} edges)"


def _int_fields(line: str, lineno: int):
    try:
        return [int(tok) for tok in line.split()]
    except ValueError as exc:
        raise AlistParseError(f"line {lineno}: non-integer token ({exc})") from None


def load_alist(path) -> ParityCheckMatrix:
    """Parse an alist file into a ParityCheckMatrix.

    Format: "cols rows" header, max degrees, per-column degree list,
    per-row degree list, then per-column and per-row 1-based neighbor
    lists (zero padding permitted). Column and row adjacency are
    cross-checked against each other.
    """
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln) for i, ln in enumerate(raw) if ln.strip()]
    if len(lines) < 4:
        raise AlistParseError(f"line {len(raw)}: truncated alist (need at least 4 lines)")

    lineno, header = lines[0]
    fields = _int_fields(header, lineno)
    if len(fields) != 2:
        raise AlistParseError(f"line {lineno}: header must be 'cols rows'")
    cols, rows = fields
    if cols <= 0 or rows <= 0:
        raise AlistParseError(f"line {lineno}: non-positive dimensions {cols}x{rows}")

    lineno, degline = lines[1]
    maxdegs = _int_fields(degline, lineno)
    if len(maxdegs) != 2:
        raise AlistParseError(f"line {lineno}: expected 'max_col_degree max_row_degree'")

    lineno, coldegline = lines[2]
    col_degrees = _int_fields(coldegline, lineno)
    if len(col_degrees) != cols:
        raise AlistParseError(f"line {lineno}: expected {cols} column degrees, got {len(col_degrees)}")
    lineno, rowdegline = lines[3]
    row_degrees = _int_fields(rowdegline, lineno)
    if len(row_degrees) != rows:
        raise AlistParseError(f"line {lineno}: expected {rows} row degrees, got {len(row_degrees)}")

    if len(lines) < 4 + cols + rows:
        raise AlistParseError(f"line {lines[-1][0]}: truncated alist (need {4 + cols + rows} data lines)")

    matrix = np.zeros((rows, cols), dtype=np.uint8)
    for v in range(cols):
        lineno, ln = lines[4 + v]
        entries = [e for e in _int_fields(ln, lineno) if e != 0]
        if len(entries) != col_degrees[v]:
            raise AlistParseError(
                f"line {lineno}: column {v + 1} lists {len(entries)} checks, degree says {col_degrees[v]}"
            )
        for c in entries:
            if not (1 <= c <= rows):
                raise AlistParseError(f"line {lineno}: check index {c} out of range 1..{rows}")
            matrix[c - 1, v] = 1

    for c in range(rows):
        lineno, ln = lines[4 + cols + c]
        entries = [e for e in _int_fields(ln, lineno) if e != 0]
        if len(entries) != row_degrees[c]:
            raise AlistParseError(
                f"line {lineno}: row {c + 1} lists {len(entries)} variables, degree says {row_degrees[c]}"
            )
        for v in entries:
            if not (1 <= v <= cols):
                raise AlistParseError(f"line {lineno}: variable index {v} out of range 1..{cols}")
            if matrix[c, v - 1] != 1:
                raise AlistParseError(
                    f"line {lineno}: row list has edge ({c + 1},{v}) missing from column lists"
                )
        if int(matrix[c].sum()) != len(entries):
            raise AlistParseError(
                f"line {lineno}: row {c + 1} adjacency disagrees with column lists"
            )

    return ParityCheckMatrix(matrix)


def save_alist(pcm: ParityCheckMatrix, path) -> None:
    """Serialize to alist text; load_alist(save_alist(H)) reproduces H exactly."""
    m = pcm.matrix
    col_deg = m.sum(axis=0)
    row_deg = m.sum(axis=1)
    out = [
        f"{pcm.cols} {pcm.rows}",
        f"{int(col_deg.max())} {int(row_deg.max())}",
        " ".join(str(int(d)) for d in col_deg),
        " ".join(str(int(d)) for d in row_deg),
    ]
    for v in range(pcm.cols):
        out.append(" ".join(str(int(c) + 1) for c in pcm.var_neighbors[v]))
    for c in range(pcm.rows):
        out.append(" ".join(str(int(v) + 1) for v in pcm.check_neighbors[c]))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(out) + "\n")


def load_dense(path) -> ParityCheckMatrix:
    """Parse the dense text format: first line 'rows cols', then 0/1 rows."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln) for i, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise AlistParseError("line 1: empty file")
    lineno, header = lines[0]
    fields = _int_fields(header, lineno)
    if len(fields) != 2:
        raise AlistParseError(f"line {lineno}: header must be 'rows cols'")
    rows, cols = fields
    if len(lines) - 1 != rows:
        raise AlistParseError(f"line {lines[-1][0]}: expected {rows} matrix rows, got {len(lines) - 1}")
    matrix = np.zeros((rows, cols), dtype=np.uint8)
    for r in range(rows):
        lineno, ln = lines[1 + r]
        vals = _int_fields(ln, lineno)
        if len(vals) != cols:
            raise AlistParseError(f"line {lineno}: expected {cols} entries, got {len(vals)}")
        if any(x not in (0, 1) for x in vals):
            raise AlistParseError(f"line {lineno}: entries must be 0 or 1")
        matrix[r] = vals
    return ParityCheckMatrix(matrix)


def save_dense(pcm: ParityCheckMatrix, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{pcm.rows} {pcm.cols}\n")
        for r in range(pcm.rows):
            fh.write(" ".join(str(int(x)) for x in pcm.matrix[r]) + "\n")


def syndrome(pcm: ParityCheckMatrix, word: np.ndarray) -> np.ndarray:
    """s = H @ word over GF(2); accepts a (V,) word or a (B, V) batch."""
    word = np.asarray(word)
    if word.shape[-1] != pcm.cols:
        raise ValueError(f"word length {word.shape[-1]} != {pcm.cols} columns")
    return (word.astype(np.uint8) @ pcm.matrix.T) & 1


def is_codeword(pcm: ParityCheckMatrix, word: np.ndarray) -> bool:
    """True iff the syndrome of word is all-zero."""
    return not syndrome(pcm, word).any()


def generator_matrix(pcm: ParityCheckMatrix) -> np.ndarray:
    """Derive a (k, n) generator over GF(2) by Gaussian elimination on H.

    Test-side encoding only; the decode path never uses it.
    """
    h = pcm.matrix.astype(np.uint8).copy()
    rows, cols = h.shape
    pivots = []
    r = 0
    for c in range(cols):
        pivot = None
        for rr in range(r, rows):
            if h[rr, c]:
                pivot = rr
                break
        if pivot is None:
            continue
        h[[r, pivot]] = h[[pivot, r]]
        mask = h[:, c].copy().astype(bool)
        mask[r] = False
        h[mask] ^= h[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    rank = r
    free = [c for c in range(cols) if c not in pivots]
    k = cols - rank
    gen = np.zeros((k, cols), dtype=np.uint8)
    for i, fc in enumerate(free):
        gen[i, fc] = 1
        for rr, pc in enumerate(pivots):
            if h[rr, fc]:
                gen[i, pc] = 1
    assert not ((gen @ pcm.matrix.T.astype(np.uint8)) & 1).any()
    return gen
