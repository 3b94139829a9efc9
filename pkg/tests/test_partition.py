import numpy as np
import pytest

from bpensemble.channel import crossover_probability, make_rng
from bpensemble.codes import ParityCheckMatrix
from bpensemble.partition import (BernoulliMixture, EmConfig, PartitionModel,
                                  ZeroWeightError, em_fit, em_region,
                                  hamming_region, induce_datasets,
                                  load_mixture, load_partition,
                                  prop1_experiment, responsibilities,
                                  save_mixture, save_partition,
                                  syndrome_labels)
from bpensemble.training import TrainConfig, generate_dataset


def test_hamming_region_rules():
    e = np.zeros(63, dtype=np.uint8)
    e[[3, 9]] = 1
    assert hamming_region(e, 3) == 2
    e7 = np.zeros(63, dtype=np.uint8)
    e7[:7] = 1
    assert hamming_region(e7, 3) == 3
    e1 = np.zeros(63, dtype=np.uint8)
    e1[5] = 1
    assert hamming_region(e1, 3) == 1
    with pytest.raises(ZeroWeightError):
        hamming_region(np.zeros(63, dtype=np.uint8), 3)


def test_syndrome_labels_majority():
    # variable 0 sits on three checks; flipping it alone unsatisfies all three
    h = ParityCheckMatrix(np.array([
        [1, 1, 0, 0],
        [1, 0, 1, 0],
        [1, 0, 0, 1],
    ], dtype=np.uint8))
    e = np.array([1, 0, 0, 0], dtype=np.uint8)
    q = syndrome_labels(h, e)
    assert q[0] == 1  # 3 of 3 unsatisfied
    assert q[1] == 1 and q[2] == 1 and q[3] == 1  # degree-1, their check unsat
    assert not syndrome_labels(h, np.zeros(4, dtype=np.uint8)).any()


def test_syndrome_labels_tie_is_zero():
    # variable 0 on two checks; e = (1,1,0) satisfies check 0, unsatisfies check 1
    h = ParityCheckMatrix(np.array([
        [1, 1, 0],
        [1, 0, 1],
    ], dtype=np.uint8))
    e = np.array([1, 1, 0], dtype=np.uint8)
    s = (h.matrix @ e) % 2
    assert s.tolist() == [0, 1]
    q = syndrome_labels(h, e)
    assert q[0] == 0  # 1 unsat vs 1 sat: tie maps to 0


def test_em_single_component_closed_form(rng):
    samples = (rng.random((500, 20)) < 0.15).astype(np.uint8)
    mix = em_fit(samples, 1, "naive", EmConfig(seed=0, restarts=1, max_iterations=5))
    resp = responsibilities(mix, samples)
    assert np.allclose(resp, 1.0)
    assert np.allclose(mix.mu[0], samples.mean(axis=0), atol=1e-12)
    assert mix.pi[0] == pytest.approx(1.0)


def test_em_recovers_planted_mixture(rng):
    k = 20_000
    a = (rng.random((k // 2, 63)) < 0.02).astype(np.uint8)
    b = (rng.random((k // 2, 63)) < 0.30).astype(np.uint8)
    mix = em_fit(np.concatenate([a, b]), 2, "naive", EmConfig(seed=1))
    order = np.argsort(mix.mu.mean(axis=1))
    assert np.abs(mix.mu[order[0]] - 0.02).max() < 0.03
    assert np.abs(mix.mu[order[1]] - 0.30).max() < 0.03
    assert np.abs(mix.pi - 0.5).max() < 0.02


def test_em_trace_monotone_and_bounds(bch_63_36):
    code, pcm = bch_63_36
    cfg = TrainConfig(snr_grid_db=(4.0, 5.0, 6.0, 7.0), seed=4)
    ds = generate_dataset(code, pcm, cfg, 20_000)
    errors = np.stack([s.true_error for s in ds])
    errors = errors[errors.sum(axis=1) > 0]
    for variant in ("naive", "syndrome_guided"):
        mix = em_fit(errors, 3, variant, EmConfig(seed=2, restarts=2), pcm)
        trace = np.array(mix.log_likelihood_trace)
        assert (np.diff(trace) > -1e-9 * len(errors)).all()
        mus = [mix.mu] if variant == "naive" else [mix.mu0, mix.mu1]
        for mu in mus:
            assert mu.min() >= 1e-6 and mu.max() <= 1 - 1e-6
        assert mix.pi.sum() == pytest.approx(1.0, abs=1e-12)
        resp = responsibilities(mix, errors, pcm)
        assert np.allclose(resp.sum(axis=1), 1.0, atol=1e-12)
        assert resp.min() >= 0


def test_syndrome_m_step_equals_brute_force(bch_63_36, rng):
    """One syndrome-guided M-step against the definition, 20 samples, 1e-12."""
    code, pcm = bch_63_36
    errors = (rng.random((20, 63)) < 0.1).astype(np.uint8)
    errors[errors.sum(axis=1) == 0, 0] = 1
    labels = syndrome_labels(pcm, errors)
    init = BernoulliMixture(
        variant="syndrome_guided", alpha=2, pi=np.array([0.5, 0.5]),
        mu0=np.full((2, 63), 0.12), mu1=np.full((2, 63), 0.3),
        log_likelihood_trace=[0.0])
    init.mu0[1] = 0.05
    resp = responsibilities(init, errors, pcm)

    # fitted: exactly one EM iteration from the same deterministic start
    cfg = EmConfig(seed=0, restarts=1, max_iterations=1,
                   init_low=0.12, init_high=0.12)
    fitted = em_fit(errors, 2, "syndrome_guided", cfg, pcm)

    flat_init = BernoulliMixture(
        variant="syndrome_guided", alpha=2, pi=np.array([0.5, 0.5]),
        mu0=np.full((2, 63), 0.12), mu1=np.full((2, 63), 0.12),
        log_likelihood_trace=[0.0])
    resp_flat = responsibilities(flat_init, errors, pcm)
    expected_mu = {0: np.full((2, 63), 0.12), 1: np.full((2, 63), 0.12)}
    for i in range(2):
        for v in range(63):
            for b in (0, 1):
                num = sum(resp_flat[k, i] * errors[k, v]
                          for k in range(20) if labels[k, v] == b)
                den = sum(resp_flat[k, i]
                          for k in range(20) if labels[k, v] == b)
                if den > 0:
                    expected_mu[b][i, v] = num / den
    expected_pi = resp_flat.sum(axis=0) / 20
    assert np.abs(fitted.mu0 - np.clip(expected_mu[0], 1e-6, 1 - 1e-6)).max() < 1e-12
    assert np.abs(fitted.mu1 - np.clip(expected_mu[1], 1e-6, 1 - 1e-6)).max() < 1e-12
    assert np.abs(fitted.pi - expected_pi).max() < 1e-12


def test_m_step_uniform_resp_all_q_zero_gives_column_means(rng):
    """With one all-ones check, even-weight errors have q = 0 everywhere, and a
    flat init makes responsibilities uniform: mu0 after one step = column means."""
    pcm = ParityCheckMatrix(np.ones((1, 10), dtype=np.uint8))
    errors = np.zeros((30, 10), dtype=np.uint8)
    for i in range(30):
        errors[i, rng.choice(10, size=2, replace=False)] = 1
    assert not syndrome_labels(pcm, errors).any()
    cfg = EmConfig(seed=0, restarts=1, max_iterations=1,
                   init_low=0.2, init_high=0.2)
    mix = em_fit(errors, 2, "syndrome_guided", cfg, pcm)
    means = errors.mean(axis=0)
    assert np.abs(mix.mu0 - means[None]).max() < 1e-12
    assert np.abs(mix.mu1 - 0.2).max() < 1e-12  # no q=1 cells: kept at init


def test_em_region_rules(bch_63_36, rng):
    mix = BernoulliMixture(
        variant="naive", alpha=2, pi=np.array([0.6, 0.4]),
        mu=np.vstack([np.full(63, 0.02), np.full(63, 0.4)]),
        log_likelihood_trace=[0.0])
    sparse = np.zeros(63, dtype=np.uint8)
    sparse[11] = 1
    assert em_region(mix, sparse) == 1
    dense = (rng.random(63) < 0.4).astype(np.uint8)
    assert em_region(mix, dense) == 2
    single = BernoulliMixture(variant="naive", alpha=1, pi=np.array([1.0]),
                              mu=np.full((1, 63), 0.1),
                              log_likelihood_trace=[0.0])
    assert em_region(single, dense) == 1
    rescaled = BernoulliMixture(
        variant="naive", alpha=2, pi=np.array([0.6, 0.4]) * 5 / 5,
        mu=mix.mu, log_likelihood_trace=[0.0])
    for _ in range(20):
        e = (rng.random(63) < 0.15).astype(np.uint8)
        if e.any():
            assert em_region(mix, e) == em_region(rescaled, e)


def test_em_region_hard_rounding_of_center(rng):
    mu1 = np.where(rng.random(30) < 0.3, 0.9, 0.05)
    mu2 = np.where(rng.random(30) < 0.3, 0.9, 0.05)
    mix = BernoulliMixture(variant="naive", alpha=2, pi=np.array([0.5, 0.5]),
                           mu=np.vstack([mu1, mu2]), log_likelihood_trace=[0.0])
    rounded = (mu1 > 0.5).astype(np.uint8)
    assert em_region(mix, rounded) == 1


def test_induce_datasets_partition(bch_63_36):
    code, pcm = bch_63_36
    cfg = TrainConfig(snr_grid_db=(4.0, 5.0, 6.0, 7.0), seed=6)
    ds = generate_dataset(code, pcm, cfg, 20_000)
    model = PartitionModel(kind="hamming", alpha=3)
    buckets, dropped = induce_datasets(ds, model, pcm)
    assert sum(len(b) for b in buckets) == len(ds) - dropped
    ids = {id(s) for b in buckets for s in b}
    assert len(ids) == sum(len(b) for b in buckets), "sample routed twice"
    for region, bucket in enumerate(buckets, start=1):
        for s in bucket[:50]:
            w = int(s.true_error.sum())
            assert min(w, 3) == region
    assert len(buckets[0]) > len(buckets[1])
    assert len(buckets[0]) > len(buckets[2])


def test_prop1_on_separated_channels():
    """EM machinery check on channels far enough apart to be identifiable."""
    report = prop1_experiment([1.2, 0.6, 0.42], 30_000, 63,
                              EmConfig(seed=5, restarts=3))
    crossovers = [crossover_probability(s) for s in (1.2, 0.6, 0.42)]
    assert sorted(report["crossovers"]) == sorted(pytest.approx(c) for c in crossovers)
    assert max(report["mu_max_deviation"]) < 0.03
    assert report["pi_deviation"] < 0.05


def test_mixture_roundtrip(tmp_path, rng):
    k = 500
    samples = (rng.random((k, 20)) < 0.2).astype(np.uint8)
    mix = em_fit(samples, 2, "naive", EmConfig(seed=3, restarts=1))
    mix.meta["code_id"] = "test"
    path = tmp_path / "mix.json"
    save_mixture(mix, path)
    again = load_mixture(path)
    assert again.variant == "naive"
    assert np.array_equal(again.mu, mix.mu)
    assert np.array_equal(again.pi, mix.pi)
    assert again.meta["code_id"] == "test"
    assert again.final_log_likelihood == mix.final_log_likelihood


def test_partition_roundtrip(tmp_path, bch_63_36, rng):
    _, pcm = bch_63_36
    errors = (rng.random((400, 63)) < 0.05).astype(np.uint8)
    errors[errors.sum(axis=1) == 0, 0] = 1
    mix = em_fit(errors, 2, "syndrome_guided", EmConfig(seed=1, restarts=1), pcm)
    model = PartitionModel(kind="em", alpha=2, mixture=mix)
    path = tmp_path / "part.json"
    save_partition(model, path)
    again = load_partition(path)
    assert again.kind == "em"
    assert np.array_equal(again.mixture.mu0, mix.mu0)
    regions = again.assign_batch(errors[:20], pcm)
    expected = model.assign_batch(errors[:20], pcm)
    assert np.array_equal(regions, expected)

    ham = PartitionModel(kind="hamming", alpha=3)
    path2 = tmp_path / "ham.json"
    save_partition(ham, path2)
    assert load_partition(path2).kind == "hamming"
