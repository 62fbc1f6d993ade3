import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conftest import series_of
from volume_intervals.errors import DivergentMleError, EmptyIntervalSeriesError, NoFeasibleCandidateError, StatisticsError
from volume_intervals.synth import GeneratorSpec, gen, pareto_from_uniform
from volume_intervals.tailfit import (DEFAULT_KS_TOLERANCE, PowerLawFit, candidate_table, fit_curve, fit_tail,
                                      fit_tail_fixed, ks_distance, mle_delta, pooled_scaled_sample)


def pareto_sample(seed, n=10_000, delta=2.5, x_min=1.0):
    return gen(GeneratorSpec(kind="pareto", length=n, delta=delta, x_min=x_min, seed=seed))


def test_mle_of_known_sample():
    x = np.array([1.0, np.e, np.e ** 2])
    delta, se = mle_delta(x, 1.0)
    assert delta == pytest.approx(2.0)
    assert se == pytest.approx(1 / np.sqrt(3))


def test_mle_ignores_body():
    x = np.array([0.2, 0.5, 1.0, np.e, np.e ** 2])
    assert mle_delta(x, 1.0)[0] == pytest.approx(2.0)


def test_mle_diverges_on_point_mass():
    with pytest.raises(DivergentMleError):
        mle_delta(np.full(10, 2.0), 2.0)


def test_ks_of_calibrated_quantiles():
    n = 20
    u = (np.arange(1, n + 1) - 0.5) / n
    x = pareto_from_uniform(u, 3.0, 1.0)
    assert ks_distance(x, 1.0, 3.0) == pytest.approx(1 / (2 * n))


@pytest.mark.slow
def test_pareto_recovery():
    with ThreadPoolExecutor(max_workers=os.cpu_count()) as pool:
        fits = list(pool.map(lambda seed: fit_tail(pareto_sample(seed), 0.5), range(200)))
    assert sum(f.x_min <= 1.2 for f in fits) >= 190
    assert sum(abs(f.delta - 2.5) <= 3 * f.delta_se for f in fits) >= 190
    assert all(f.n_tail >= 50 for f in fits)


@pytest.mark.slow
def test_exponent_bias_below_half_standard_error():
    n = 1000
    deltas = [mle_delta(pareto_sample(seed, n=n), 1.0)[0] for seed in range(200)]
    assert abs(np.mean(deltas) - 2.5) < 0.5 * 1.5 / np.sqrt(n)


@pytest.mark.slow
def test_refit_on_regenerated_data_does_not_raise_ks():
    fit = fit_tail(pareto_sample(11), 0.5)
    generator = np.random.default_rng(12)
    refits = [fit_tail_fixed(pareto_from_uniform(generator.random(fit.n_tail), fit.delta, fit.x_min), fit.x_min)
              for _ in range(100)]
    assert np.median([r.ks for r in refits]) <= fit.ks + 0.005


def test_fit_is_scale_equivariant():
    x = pareto_sample(1, n=3000)
    a = fit_tail(x, 0.1)
    b = fit_tail(4.0 * x, 0.4)
    assert b.x_min == pytest.approx(4.0 * a.x_min, rel=1e-12)
    assert b.delta == pytest.approx(a.delta, rel=1e-9)
    assert b.ks == pytest.approx(a.ks, rel=1e-9)


def test_fit_parallel_matches_serial():
    x = pareto_sample(2, n=2000)
    serial = fit_tail(x, 0.1)
    parallel = fit_tail(x, 0.1, workers=2)
    assert serial == parallel


@pytest.mark.slow
def test_spliced_sample_finds_splice_point():
    def splice_fit(seed):
        x = gen(GeneratorSpec(kind="spliced", length=5000, delta=2.5, x_min=3.0, tail_fraction=0.3, seed=seed))
        return fit_tail(x, 0.1).x_min

    with ThreadPoolExecutor(max_workers=os.cpu_count()) as pool:
        x_mins = np.array(list(pool.map(splice_fit, range(100))))
    assert np.count_nonzero((x_mins >= 2.4) & (x_mins <= 3.8)) >= 95


def test_zero_tolerance_takes_plain_minimum():
    x = pareto_sample(4, n=500)
    table = candidate_table(x, 0.1)
    fit = fit_tail(x, 0.1, ks_tolerance=0.0)
    best_ks = min(ks for _, _, ks in table)
    assert fit.ks == pytest.approx(best_ks)
    assert fit.x_min == min(x_min for x_min, _, ks in table if ks == best_ks)


def test_smallest_candidate_within_tolerance_band():
    x = pareto_sample(4, n=500)
    table = candidate_table(x, 0.1)
    best_ks = min(ks for _, _, ks in table)
    inside = [x_min for x_min, _, ks in table
              if ks <= best_ks + DEFAULT_KS_TOLERANCE / np.sqrt(np.count_nonzero(x >= x_min))]
    fit = fit_tail(x, 0.1)
    assert fit.x_min == min(inside)
    assert fit.x_min <= fit_tail(x, 0.1, ks_tolerance=0.0).x_min
    with pytest.raises(ValueError):
        fit_tail(x, 0.1, ks_tolerance=-1.0)


def test_no_feasible_candidate():
    with pytest.raises(NoFeasibleCandidateError):
        fit_tail(pareto_sample(5, n=40), 0.1)
    with pytest.raises(NoFeasibleCandidateError):
        fit_tail(pareto_sample(5, n=1000), 1e6)


def test_fit_amplitudes():
    x = pareto_sample(6, n=5000)
    fit = fit_tail_fixed(x, 1.0)
    assert fit.n_tail == fit.n_total == 5000
    assert fit.c == pytest.approx(fit.c_pareto)
    assert fit.c_pareto == pytest.approx(fit.delta - 1)
    mixed = np.concatenate([x, np.full(5000, 0.5)])
    half = fit_tail_fixed(mixed, 1.0)
    assert half.p_tail == pytest.approx(0.5)
    assert half.c == pytest.approx(0.5 * half.c_pareto)
    assert fit_curve(fit, np.array([1.0]))[0] == pytest.approx(fit.c)


def test_fit_invariants():
    with pytest.raises(StatisticsError):
        PowerLawFit(x_min=1.0, delta=0.9, delta_se=0.1, c=1.0, c_pareto=1.0, ks=0.1, n_tail=10, n_total=10)


def test_pooled_sample_concatenates_scaled_intervals():
    v = np.abs(np.random.default_rng(7).standard_normal(100_000))
    pooled = pooled_scaled_sample(series_of(v), [1.0, 2.0])
    n1 = np.count_nonzero(v > 1.0) - 1
    n2 = np.count_nonzero(v > 2.0) - 1
    assert pooled.size == n1 + n2
    assert pooled[:n1].mean() == pytest.approx(1.0)
    assert pooled[n1:].mean() == pytest.approx(1.0)


def test_pooled_sample_names_failing_threshold():
    v = np.abs(np.random.default_rng(8).standard_normal(1000))
    with pytest.raises(EmptyIntervalSeriesError) as info:
        pooled_scaled_sample(series_of(v), [1.0, 50.0])
    assert info.value.q == 50.0
