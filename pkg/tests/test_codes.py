import numpy as np
import pytest

from bpensemble.codes import (AlistParseError, CodeSpec, ParityCheckMatrix,
                              generator_matrix, is_codeword, load_alist,
                              load_dense, save_alist, save_dense, syndrome)

from conftest import alist_path


def test_load_bch_63_36(bch_63_36):
    code, pcm = bch_63_36
    assert pcm.cols == 63
    assert pcm.rows == 27
    assert code.rate == pytest.approx(36 / 63)


def test_load_hamming_shape(hamming_7_4):
    _, pcm = hamming_7_4
    assert (pcm.rows, pcm.cols) == (3, 7)
    assert pcm.num_edges == 12


def test_adjacency_matches_matrix(bch_63_36):
    _, pcm = bch_63_36
    for c in range(pcm.rows):
        assert np.array_equal(pcm.check_neighbors[c], np.flatnonzero(pcm.matrix[c]))
    for v in range(pcm.cols):
        assert np.array_equal(pcm.var_neighbors[v], np.flatnonzero(pcm.matrix[:, v]))
    assert len(pcm.edges) == pcm.matrix.sum()


def test_alist_roundtrip(tmp_path, bch_63_36):
    _, pcm = bch_63_36
    path = tmp_path / "roundtrip.alist"
    save_alist(pcm, path)
    again = load_alist(path)
    assert np.array_equal(pcm.matrix, again.matrix)


def test_dense_roundtrip(tmp_path, hamming_7_4):
    _, pcm = hamming_7_4
    path = tmp_path / "h.txt"
    save_dense(pcm, path)
    again = load_dense(path)
    assert np.array_equal(pcm.matrix, again.matrix)


def test_alist_inconsistent_row_column_lists(tmp_path):
    # column lists describe edges (1,1),(2,2); row lists claim (1,2),(2,1)
    bad = "2 2\n1 1\n1 1\n1 1\n1\n2\n2\n1\n"
    path = tmp_path / "bad.alist"
    path.write_text(bad)
    with pytest.raises(AlistParseError) as err:
        load_alist(path)
    assert "line" in str(err.value)


def test_alist_malformed_header(tmp_path):
    path = tmp_path / "bad.alist"
    path.write_text("7\n3 4\n")
    with pytest.raises(AlistParseError):
        load_alist(path)


def test_alist_index_out_of_range(tmp_path):
    bad = "2 1\n1 2\n1 1\n2\n1\n5\n1 2\n"
    path = tmp_path / "bad.alist"
    path.write_text(bad)
    with pytest.raises(AlistParseError):
        load_alist(path)


def test_rejects_zero_column():
    with pytest.raises(ValueError):
        ParityCheckMatrix(np.array([[1, 0], [1, 0]]))
    with pytest.raises(ValueError):
        ParityCheckMatrix(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ValueError):
        ParityCheckMatrix(np.array([[0, 2], [1, 1]]))


def test_syndrome_zero_vector(bch_63_36):
    _, pcm = bch_63_36
    assert not syndrome(pcm, np.zeros(63, dtype=np.uint8)).any()


def test_syndrome_single_bit_is_column(hamming_7_4):
    _, pcm = hamming_7_4
    for v in range(pcm.cols):
        word = np.zeros(pcm.cols, dtype=np.uint8)
        word[v] = 1
        assert np.array_equal(syndrome(pcm, word), pcm.matrix[:, v])


def test_syndrome_length_mismatch(hamming_7_4):
    _, pcm = hamming_7_4
    with pytest.raises(ValueError):
        syndrome(pcm, np.zeros(8, dtype=np.uint8))


def test_is_codeword_on_generator_combinations(bch_63_36, rng):
    _, pcm = bch_63_36
    gen = generator_matrix(pcm)
    assert gen.shape == (36, 63)
    for _ in range(50):
        coeffs = rng.integers(0, 2, size=gen.shape[0]).astype(np.uint8)
        word = (coeffs @ gen) & 1
        assert is_codeword(pcm, word)
    weight1 = np.zeros(63, dtype=np.uint8)
    weight1[17] = 1
    assert not is_codeword(pcm, weight1)


def test_syndrome_matches_adjacency_oracle(bch_63_36, rng):
    """Dense-matmul syndrome vs an adjacency-list XOR oracle on 10^4 words."""
    _, pcm = bch_63_36
    words = rng.integers(0, 2, size=(10_000, 63)).astype(np.uint8)
    fast = syndrome(pcm, words)
    for c in range(pcm.rows):
        parity = words[:, pcm.check_neighbors[c]].sum(axis=1) & 1
        assert np.array_equal(fast[:, c], parity.astype(np.uint8))


def test_codespec_invariants():
    with pytest.raises(ValueError):
        CodeSpec(n=63, k=63, t=3, gf_order_exponent=6, code_id="x")
    with pytest.raises(ValueError):
        CodeSpec(n=63, k=36, t=0, gf_order_exponent=6, code_id="x")
    spec = CodeSpec(n=63, k=45, t=3, gf_order_exponent=6, code_id="x")
    assert spec.rate == pytest.approx(45 / 63)


def test_known_codes_load(bch_63_45):
    code, pcm = bch_63_45
    assert (pcm.rows, pcm.cols) == (18, 63)
    assert code.t == 3
