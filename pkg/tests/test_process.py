import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sbfp.errors import AllTruncated, NoExitWithinCap
from sbfp.process import (Deterministic, DriftSchedule, Exponential, ObservationModel,
                          ProcessParams, SbfpPath, Shape, ThresholdMode, detect_exit,
                          mc_estimate, replication_rng, sample_interarrival, simulate_exits,
                          simulate_path, simulate_series)

UNIT = ObservationModel(Deterministic(1.0))
EXP1 = ObservationModel(Exponential(1.0))


# -- domain types -------------------------------------------------------------

def test_schedule_extension_rules():
    hold = DriftSchedule((1.0, 2.0, 3.0))
    cyc = DriftSchedule((1.0, 2.0, 3.0), "cycle")
    assert [hold.at(k) for k in range(1, 7)] == [1, 2, 3, 3, 3, 3]
    assert [cyc.at(k) for k in range(1, 7)] == [1, 2, 3, 1, 2, 3]


@pytest.mark.parametrize("bad", [(), (1.0, math.nan), (math.inf,)])
def test_schedule_rejects_bad_values(bad):
    with pytest.raises(ValueError):
        DriftSchedule(bad)


@pytest.mark.parametrize("kwargs", [dict(sigma=-1.0), dict(sigma=math.inf)])
def test_params_reject_bad_sigma(kwargs):
    with pytest.raises(ValueError):
        ProcessParams(a0=0.0, drift=DriftSchedule.constant(0.0), **kwargs)


def test_observation_model_validation():
    with pytest.raises(ValueError):
        Exponential(0.0)
    with pytest.raises(ValueError):
        Deterministic(-1.0)
    obs = ObservationModel(Exponential(2.0), Exponential(0.5))
    assert obs.delta_mean == 2.0 and obs.delta0_mean == 0.5 and obs.memoryless
    assert ObservationModel(Deterministic(1.0)).delta0_mean == 0.0


# -- sample_interarrival ------------------------------------------------------

def test_deterministic_interarrival_is_constant():
    assert sample_interarrival(Deterministic(1.0), replication_rng(0, 0)) == 1.0


def test_exponential_interarrival_mean():
    rng = replication_rng(7, 0)
    n = 10**6
    draws = np.array([sample_interarrival(Exponential(1.0), rng) for _ in range(n)])
    assert draws.min() > 0
    assert abs(draws.mean() - 1.0) <= 3.0 / math.sqrt(n)


def test_exponential_interarrival_repeatable():
    a = replication_rng(3, 0)
    b = replication_rng(3, 0)
    seq_a = [sample_interarrival(Exponential(2.0), a) for _ in range(3)]
    seq_b = [sample_interarrival(Exponential(2.0), b) for _ in range(3)]
    assert seq_a == seq_b and len(set(seq_a)) == 3


# -- simulate_path ------------------------------------------------------------

def test_deterministic_zero_sigma_path():
    params = ProcessParams(0.0, 0.0, DriftSchedule((1.0, 1.0, -1.0)))
    path, ex = simulate_path(params, UNIT)
    assert path.a.tolist() == [0.0, 1.0, 2.0, 1.0]
    assert path.tau.tolist() == [0.0, 1.0, 2.0, 3.0]
    assert (ex.nu, ex.tau_exit, ex.a_prev, ex.tau_prev, ex.a_exit) == (3, 3.0, 2.0, 2.0, 1.0)
    assert ex.condition_held


def test_no_exit_within_cap():
    params = ProcessParams(0.0, 0.0, DriftSchedule.constant(1.0))
    with pytest.raises(NoExitWithinCap) as info:
        simulate_path(params, UNIT, max_steps=100)
    assert info.value.path.truncated and len(info.value.path) == 101


def test_convex_mirror_and_initial_delay():
    params = ProcessParams(0.0, 5.0, DriftSchedule((-1.0, -2.0, 0.5)), shape="convex")
    obs = ObservationModel(Deterministic(0.5), Exponential(1.0))
    path, ex = simulate_path(params, obs, seed=4)
    assert path.tau[0] > 0
    assert ex.nu == 3
    assert path.a[1:].tolist() == [4.5, 3.5, 3.75]


def test_increment_variance_unit_spacing():
    n = 10**5
    path = simulate_series(ProcessParams(1.0, 0.0, DriftSchedule.constant(0.0)), UNIT, n, seed=11)
    var = path.w_inc[1:].var(ddof=1)
    # SE of a normal sample variance is sigma^2 sqrt(2/(n-1))
    assert abs(var - 1.0) <= 3.0 * math.sqrt(2.0 / (n - 1))


@pytest.mark.parametrize("sigma,step,w", [(0.5, 2.0, 0.3), (1.5, 0.25, -1.0)])
def test_increment_moments(sigma, step, w):
    n = 10**5
    params = ProcessParams(sigma, 0.0, DriftSchedule((w, 2 * w), "cycle"))
    path = simulate_series(params, ObservationModel(Deterministic(step)), n, seed=3)
    resid = path.w_inc[1:] - path.w_slope[1:] * step
    var = sigma**2 * step
    assert abs(resid.mean()) <= 3.0 * math.sqrt(var / n)
    assert abs(resid.var(ddof=1) - var) <= 3.0 * var * math.sqrt(2.0 / (n - 1))


# -- detect_exit --------------------------------------------------------------

def test_detect_exit_concave():
    assert detect_exit(SbfpPath.from_increments([0.5, 0.2, -0.1])).nu == 3


def test_detect_exit_convex():
    assert detect_exit(SbfpPath.from_increments([-0.5, -0.2, 0.1]), Shape.CONVEX).nu == 3


def test_detect_exit_paper_literal():
    path = SbfpPath.from_increments([1.5, 0.8, 2.0], slopes=1.0)
    ex = detect_exit(path, threshold_mode=ThresholdMode.PAPER_LITERAL)
    assert ex.nu == 2
    assert detect_exit(path) is None  # all increments positive


def test_detect_exit_not_yet_and_ties():
    assert detect_exit(SbfpPath.from_increments([0.3, 0.1])) is None
    # an increment exactly on the threshold is not a crossing
    ex = detect_exit(SbfpPath.from_increments([0.3, 0.0, -0.1]))
    assert ex.nu == 3 and not ex.condition_held
    path = SbfpPath.from_increments([1.5, 1.0, 0.2], slopes=1.0)
    assert detect_exit(path, threshold_mode="paper").nu == 3


# -- mc_estimate --------------------------------------------------------------

def test_mc_zero_drift_geometric_mean():
    params = ProcessParams(1.0, 0.0, DriftSchedule.constant(0.0))
    s = mc_estimate(params, EXP1, reps=10**5, seed=5)
    assert abs(s.nu.mean - 2.0) <= 3.0 * s.nu.se


def test_mc_phi_at_origin_is_exit_fraction():
    params = ProcessParams(0.3, 0.0, DriftSchedule.constant(0.5))
    s = mc_estimate(params, EXP1, reps=500, seed=2, max_steps=3)
    assert s.truncation_rate > 0
    assert s.phi.mean == pytest.approx(s.exits / s.reps, abs=1e-15)
    assert 0.0 <= s.phi.mean <= 1.0


def test_mc_deterministic_path_zero_se():
    params = ProcessParams(0.0, 0.0, DriftSchedule((1.0, 1.0, -1.0)))
    s = mc_estimate(params, UNIT, reps=100)
    assert s.tau_exit.mean == 3.0 and s.tau_exit.se == 0.0
    assert s.nu_from_tau.mean == 3.0


def test_mc_all_truncated():
    params = ProcessParams(0.0, 0.0, DriftSchedule.constant(1.0))
    with pytest.raises(AllTruncated):
        mc_estimate(params, UNIT, reps=10, max_steps=5)


def test_mc_rejects_negative_point():
    with pytest.raises(ValueError):
        mc_estimate(ProcessParams(1.0, 0.0, DriftSchedule.constant(0.0)), EXP1, u=-1.0, reps=2)


def test_parallel_determinism():
    params = ProcessParams(0.7, 1.0, DriftSchedule((0.5, 1.0, -0.2), "cycle"))
    obs = ObservationModel(Exponential(1.3), Exponential(0.4))
    ref = mc_estimate(params, obs, u=0.2, theta=0.1, reps=3000, seed=9, workers=1)
    for workers in (2, 3, 5):
        assert mc_estimate(params, obs, u=0.2, theta=0.1, reps=3000, seed=9,
                           workers=workers) == ref


# -- properties ---------------------------------------------------------------

drifts = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=6)
laws = st.one_of(st.floats(0.05, 3).map(Exponential), st.floats(0.05, 3).map(Deterministic))


@settings(max_examples=60, deadline=None)
@given(sigma=st.floats(0, 2), a0=st.floats(-10, 10), drift=drifts, law=laws,
       delay=st.one_of(st.none(), st.floats(0.05, 2).map(Exponential)),
       shape=st.sampled_from(list(Shape)), mode=st.sampled_from(list(ThresholdMode)),
       seed=st.integers(0, 2**32))
def test_path_invariants(sigma, a0, drift, law, delay, shape, mode, seed):
    params = ProcessParams(sigma, a0, DriftSchedule(tuple(drift)), shape, mode)
    try:
        path, ex = simulate_path(params, ObservationModel(law, delay), seed, max_steps=200)
    except NoExitWithinCap as err:
        path, ex = err.path, None
    # monotone clock
    assert path.tau[0] >= 0 and np.all(np.diff(path.tau) > 0)
    # bookkeeping: increments reproduce positions
    assert np.allclose(np.diff(path.a), path.w_inc[1:], rtol=0, atol=1e-12 * (1 + abs(path.a).max()))
    if ex is None:
        assert detect_exit(path, shape, mode) is None
        return
    assert ex.nu >= 1 and ex.tau_prev < ex.tau_exit
    assert len(path) == ex.nu + 1
    # exit minimality
    for j in range(1, ex.nu):
        assert detect_exit(path.prefix(j), shape, mode) is None
    assert detect_exit(path, shape, mode).nu == ex.nu


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), reps=st.integers(1, 40), workers=st.integers(2, 4))
def test_substreams_independent_of_chunking(seed, reps, workers):
    params = ProcessParams(1.0, 0.0, DriftSchedule.constant(0.1))
    whole = simulate_exits(params, EXP1, reps, seed)
    # replication i only depends on (seed, i)
    i = reps - 1
    _, ex = simulate_path(params, EXP1, seed=seed, stream=i)
    assert whole.tau_exit[i] == ex.tau_exit and whole.a_prev[i] == ex.a_prev


def test_zero_drift_chi_square():
    params = ProcessParams(1.0, 0.0, DriftSchedule.constant(0.0))
    nu = simulate_exits(params, EXP1, 10**5, seed=2024).nu
    observed = np.array([np.sum(nu == k) for k in range(1, 10)] + [np.sum(nu >= 10)])
    probs = np.array([0.5**k for k in range(1, 10)] + [0.5**9])
    _, pval = stats.chisquare(observed, probs * len(nu))
    assert pval > 1e-3
