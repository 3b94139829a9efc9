import numpy as np
import pytest

from bpensemble.codes import is_codeword
from bpensemble.hdd import (GfField, berlekamp_massey, chien_search,
                            gf_syndromes, hdd_decode)


@pytest.fixture(scope="module")
def gf64():
    return GfField(6)


def random_pattern(rng, n, weight):
    p = np.zeros(n, dtype=np.uint8)
    p[rng.choice(n, size=weight, replace=False)] = 1
    return p


def test_field_tables(gf64):
    assert gf64.order == 63
    for a in range(1, 64):
        assert gf64.antilog[gf64.log[a]] == a
        assert gf64.mul(a, gf64.inv(a)) == 1
    assert gf64.alpha_pow(63) == 1


def test_non_primitive_poly_rejected():
    with pytest.raises(ValueError):
        GfField(6, primitive_poly=0b1001001)  # x^6 + x^3 + 1 has order 9


def test_syndromes_of_codeword_vanish(bch_63_36, gf64, rng):
    code, pcm = bch_63_36
    from bpensemble.codes import generator_matrix
    gen = generator_matrix(pcm)
    for _ in range(20):
        word = (rng.integers(0, 2, size=gen.shape[0]).astype(np.uint8) @ gen) & 1
        assert not any(gf_syndromes(gf64, word, code.t))


def test_syndromes_of_single_error(gf64, bch_63_36):
    code, _ = bch_63_36
    for p in (0, 17, 62):
        e = np.zeros(63, dtype=np.uint8)
        e[p] = 1
        syns = gf_syndromes(gf64, e, code.t)
        for j, s in enumerate(syns, start=1):
            assert s == gf64.alpha_pow(j * p)


def test_frobenius_identity(gf64, rng, bch_63_36):
    code, _ = bch_63_36
    for _ in range(200):
        e = random_pattern(rng, 63, int(rng.integers(1, 8)))
        syns = gf_syndromes(gf64, e, code.t)
        for j in range(1, code.t + 1):
            assert syns[2 * j - 1] == gf64.mul(syns[j - 1], syns[j - 1])


def test_bm_zero_syndromes(gf64):
    lam = berlekamp_massey(gf64, [0] * 10)
    assert np.array_equal(lam, [1])


def test_bm_single_error_closed_form(gf64, bch_63_36):
    code, _ = bch_63_36
    for p in (3, 40, 62):
        e = np.zeros(63, dtype=np.uint8)
        e[p] = 1
        lam = berlekamp_massey(gf64, gf_syndromes(gf64, e, code.t))
        assert len(lam) == 2
        assert lam[0] == 1
        assert lam[1] == gf64.alpha_pow(p)


def test_bm_chien_roots_recover_planted_positions(gf64, bch_63_36, rng):
    code, _ = bch_63_36
    for _ in range(500):
        weight = int(rng.integers(1, code.t + 1))
        e = random_pattern(rng, 63, weight)
        lam = berlekamp_massey(gf64, gf_syndromes(gf64, e, code.t))
        positions = chien_search(gf64, lam)
        assert np.array_equal(positions, np.flatnonzero(e))


def test_hdd_identity_on_codeword(bch_63_36, gf64):
    code, _ = bch_63_36
    res = hdd_decode(code, gf64, np.zeros(63, dtype=np.uint8))
    assert res.corrected
    assert not res.estimated_error.any()


def test_hdd_corrects_weight_t(bch_63_36, gf64, rng):
    code, pcm = bch_63_36
    for _ in range(300):
        e = random_pattern(rng, 63, code.t)
        res = hdd_decode(code, gf64, e)
        assert res.corrected
        assert np.array_equal(res.estimated_error, e)
        assert not res.codeword.any()


def test_hdd_weight_t_plus_one_never_invalid(bch_63_36, gf64, rng):
    """Beyond the radius: failures and miscorrections, never a non-codeword."""
    code, pcm = bch_63_36
    statuses = set()
    for _ in range(500):
        e = random_pattern(rng, 63, code.t + 1)
        res = hdd_decode(code, gf64, e)
        statuses.add(res.status)
        if res.corrected:
            assert not any(gf_syndromes(gf64, res.codeword, code.t))
            assert is_codeword(pcm, res.codeword)
            assert np.array_equal(res.estimated_error, e ^ res.codeword)
    assert "failure" in statuses


def test_hdd_estimated_error_identity(bch_63_36, gf64, rng):
    code, _ = bch_63_36
    for _ in range(200):
        y = random_pattern(rng, 63, int(rng.integers(1, code.t + 1)))
        res = hdd_decode(code, gf64, y)
        if res.corrected:
            assert np.array_equal(res.estimated_error, y ^ res.codeword)


def test_hdd_on_63_45(bch_63_45, rng):
    code, pcm = bch_63_45
    gf = GfField(code.gf_order_exponent)
    assert code.t == 3
    for weight in range(1, code.t + 1):
        for _ in range(100):
            e = random_pattern(rng, 63, weight)
            res = hdd_decode(code, gf, e)
            assert res.corrected and np.array_equal(res.estimated_error, e)


def test_hdd_on_hamming(hamming_7_4, rng):
    code, pcm = hamming_7_4
    gf = GfField(code.gf_order_exponent)
    for v in range(7):
        e = np.zeros(7, dtype=np.uint8)
        e[v] = 1
        res = hdd_decode(code, gf, e)
        assert res.corrected and np.array_equal(res.estimated_error, e)


def test_hdd_length_mismatch(bch_63_36, gf64):
    code, _ = bch_63_36
    with pytest.raises(ValueError):
        hdd_decode(code, gf64, np.zeros(64, dtype=np.uint8))
