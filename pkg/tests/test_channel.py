import math

import mpmath
import numpy as np
import pytest

from bpensemble.channel import (ChannelConfig, crossover_probability,
                                hard_decision, make_rng, modulate_bpsk,
                                q_function, snr_db_to_sigma, transmit)


def test_modulate_mapping():
    assert np.array_equal(modulate_bpsk(np.zeros(5)), np.ones(5))
    assert np.array_equal(modulate_bpsk(np.ones(4)), -np.ones(4))
    assert np.array_equal(modulate_bpsk(np.array([0, 1, 0])), np.array([1.0, -1.0, 1.0]))


def test_channel_config_consistency():
    cfg = ChannelConfig.from_snr(4.0, 36 / 63)
    assert cfg.sigma == pytest.approx(1 / math.sqrt(2 * (36 / 63) * 10**0.4))
    with pytest.raises(ValueError):
        ChannelConfig(snr_db=4.0, sigma=0.9, rate=36 / 63)
    with pytest.raises(ValueError):
        ChannelConfig(snr_db=4.0, sigma=-1.0, rate=36 / 63)


def test_transmit_noiseless_sign():
    cfg = ChannelConfig.from_snr(2.0, 0.5)
    x = modulate_bpsk(np.array([0, 1, 1, 0, 1]))
    llr = transmit(x, cfg, make_rng(0), noiseless=True)
    assert np.array_equal(np.sign(llr), np.sign(x))


def test_transmit_deterministic():
    cfg = ChannelConfig.from_snr(3.0, 0.5)
    x = np.ones(63)
    a = transmit(x, cfg, make_rng(42))
    b = transmit(x, cfg, make_rng(42))
    assert np.array_equal(a, b)
    c = transmit(x, cfg, make_rng(42, stream=1))
    assert not np.array_equal(a, c)


def test_transmit_mean():
    # E[llr] = 2x/sigma^2; with x = 1, sigma = 1 the mean is 2, sd per draw is 2
    cfg = ChannelConfig(snr_db=0.0, sigma=1.0, rate=0.5)
    llr = transmit(np.ones(100_000), cfg, make_rng(7))
    se = 2.0 / math.sqrt(llr.size)
    assert abs(llr.mean() - 2.0) < 3 * se


def test_hard_decision_rule():
    assert np.array_equal(hard_decision(np.array([3.2, -0.1])), np.array([0, 1]))
    assert np.array_equal(hard_decision(np.array([1.0, 2.0, 0.5])), np.zeros(3))
    assert hard_decision(np.array([0.0]))[0] == 1


def test_q_function_values():
    assert q_function(0.0) == pytest.approx(0.5, abs=1e-15)
    assert q_function(1.0) == pytest.approx(0.158655, abs=1e-6)
    xs = np.linspace(-6, 6, 25)
    assert np.allclose(q_function(-xs), 1.0 - q_function(xs), atol=1e-14)


def test_q_function_against_mpmath():
    mpmath.mp.dps = 40
    for x in np.linspace(-8, 8, 33):
        exact = float(0.5 * mpmath.erfc(x / mpmath.sqrt(2)))
        got = float(q_function(x))
        assert abs(got - exact) <= 1e-12 * max(abs(exact), 1e-300)


def test_crossover_matches_flip_rate():
    # BSC view: hard-decision flip probability of BPSK+AWGN is Q(1/sigma)
    sigma = 0.6
    cfg = ChannelConfig(snr_db=snr_to_db(sigma, 0.5), sigma=sigma, rate=0.5)
    n = 1_000_000
    llr = transmit(np.ones(n), cfg, make_rng(11))
    flips = int((hard_decision(llr) == 1).sum())
    p = crossover_probability(sigma)
    se = math.sqrt(p * (1 - p) * n)
    assert abs(flips - n * p) < 3 * se


def snr_to_db(sigma, rate):
    return 10 * math.log10(1.0 / (2 * rate * sigma**2))


def test_sigma_conversion_roundtrip():
    for snr in (1.0, 4.0, 7.0):
        sigma = snr_db_to_sigma(snr, 36 / 63)
        assert snr_to_db(sigma, 36 / 63) == pytest.approx(snr)
