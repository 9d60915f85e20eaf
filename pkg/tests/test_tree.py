import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from localbp.errors import DepthTooLarge, ValidationError
from localbp.model import derived_constants, validate_params
from localbp.tree import (EXACT, NOISY, boundary_gap, boundary_gap_samples,
                          build_forest, estimate_tree_metrics, recurse_llr,
                          recurse_magnetization, sample_gw_forest, sample_gw_tree,
                          sample_llr_population, tree_to_edges)

P_DEFAULT = validate_params(0, 15, 5, 0.2)
DC_DEFAULT = derived_constants(P_DEFAULT)


def naive_coupling(x, beta):
    # reference transfer function for hand-computed values
    return math.atanh(math.tanh(beta) * math.tanh(x))


def test_depth_zero_tree_is_root_only():
    f = sample_gw_tree(P_DEFAULT, 0, 3)
    assert f.n_nodes == 1 and f.depth_limit == 0
    assert f.child_start[0] == f.child_end[0]


def test_children_count_mean():
    f = sample_gw_forest(P_DEFAULT, 1, 10_000, 5)
    counts = (f.child_end - f.child_start)[:f.n_trees].astype(float)
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - 10.0) <= 3 * se


def test_child_label_split():
    f = sample_gw_forest(P_DEFAULT, 1, 10_000, 6)
    parents = f.parents()
    child = np.arange(f.n_trees, f.n_nodes)
    same = (f.tau[child] == f.tau[parents[child]]).astype(float)
    se = same.std(ddof=1) / math.sqrt(same.size)
    assert abs(same.mean() - 15 / 20) <= 3 * se


def test_sampling_deterministic():
    f1 = sample_gw_forest(P_DEFAULT, 3, 50, 8)
    f2 = sample_gw_forest(P_DEFAULT, 3, 50, 8)
    np.testing.assert_array_equal(f1.tau, f2.tau)
    np.testing.assert_array_equal(f1.tau_tilde, f2.tau_tilde)
    np.testing.assert_array_equal(f1.child_start, f2.child_start)


def test_depth_budget_enforced():
    with pytest.raises(DepthTooLarge):
        sample_gw_tree(validate_params(0, 990, 900, 0.3), 3, 1)


def test_forest_structure_helpers():
    f = sample_gw_forest(P_DEFAULT, 3, 40, 12)
    parents = f.parents()
    depths = f.depths()
    ids = f.tree_ids()
    assert np.all(parents[:40] == -1) and np.all(parents[40:] >= 0)
    np.testing.assert_array_equal(depths[parents[40:]], depths[40:] - 1)
    np.testing.assert_array_equal(ids[:40], np.arange(40))
    np.testing.assert_array_equal(ids[parents[40:]], ids[40:])
    edges = tree_to_edges(sample_gw_tree(P_DEFAULT, 3, 1))
    assert edges.shape[1] == 2


def test_llr_depth_zero_exact_boundary():
    f = sample_gw_tree(P_DEFAULT, 0, 21)
    vals = recurse_llr(f, DC_DEFAULT, EXACT)
    assert vals[0] == math.inf * f.tau[0]


def test_llr_single_child_exact():
    # one child with true label +: root gets its field plus the saturated
    # transfer value
    f = build_forest(parents=[-1, 0], tau=[1, 1], tau_tilde=[-1, 1])
    vals = recurse_llr(f, DC_DEFAULT, EXACT)
    expect = DC_DEFAULT.gamma * (-1) + DC_DEFAULT.beta
    assert vals[0] == pytest.approx(expect, abs=1e-14)


def test_llr_single_child_noisy_hand_value():
    g, b = DC_DEFAULT.gamma, DC_DEFAULT.beta
    for tr, tc in [(1, 1), (1, -1), (-1, 1), (-1, -1)]:
        f = build_forest(parents=[-1, 0], tau=[1, 1], tau_tilde=[tr, tc])
        vals = recurse_llr(f, DC_DEFAULT, NOISY)
        assert vals[0] == pytest.approx(g * tr + naive_coupling(g * tc, b), abs=1e-12)


def test_magnetization_leaf_is_tanh_field():
    f = build_forest(parents=[-1], tau=[1], tau_tilde=[-1], depth_limit=2)
    y = recurse_magnetization(f, DC_DEFAULT, NOISY)
    assert y[0] == pytest.approx(math.tanh(-DC_DEFAULT.gamma), abs=1e-15)


def test_magnetization_matches_llr_both_modes():
    for seed in range(5):
        f = sample_gw_forest(P_DEFAULT, 4, 30, 100 + seed)
        for mode in (EXACT, NOISY):
            llr = recurse_llr(f, DC_DEFAULT, mode)
            mag = recurse_magnetization(f, DC_DEFAULT, mode)
            finite = np.isfinite(llr)
            np.testing.assert_allclose(np.tanh(llr[finite]), mag[finite], atol=1e-9)
            assert np.all(np.abs(mag) <= 1.0)


def test_magnetization_beta_zero_ignores_tree():
    p = validate_params(0, 6, 6, 0.2)
    dc = derived_constants(p)
    f = sample_gw_forest(p, 3, 200, 9)
    y = recurse_magnetization(f, dc, NOISY)[:200]
    expect = math.tanh(dc.gamma) * f.tau_tilde[:200]
    np.testing.assert_allclose(y, expect, atol=1e-14)


def test_alpha_zero_noisy_recursion():
    p = validate_params(0, 8, 2, 0.0)
    dc = derived_constants(p)
    f = sample_gw_forest(p, 3, 100, 13)
    vals = recurse_llr(f, dc, NOISY)
    mags = recurse_magnetization(f, dc, NOISY)
    np.testing.assert_array_equal(np.sign(vals), f.tau_tilde)
    np.testing.assert_array_equal(mags, f.tau_tilde.astype(float))


def test_metrics_symmetric_rates_reduce_to_side_info():
    p = validate_params(0, 7, 7, 0.3)
    tm = estimate_tree_metrics(p, 3, 4000, 17)
    assert tm.q_star_hat == pytest.approx(0.7, abs=max(3 * tm.q_star_se, 1e-12))


def test_metrics_depth_zero():
    tm = estimate_tree_metrics(P_DEFAULT, 0, 500, 3)
    assert tm.q_star_hat == pytest.approx(0.8, abs=1e-12)
    assert tm.p_star_hat == 1.0


def test_metrics_orderings():
    tm = estimate_tree_metrics(P_DEFAULT, 3, 4000, 23)
    assert tm.q_star_hat >= 1 - 0.2 - 3 * tm.q_star_se
    assert tm.p_star_hat >= tm.q_star_hat - 3 * tm.p_star_se
    assert 0 <= tm.gap_hat <= 2


def test_boundary_gap_level_one():
    p = validate_params(0, 2.5, 1.5, 0.2)
    bg = boundary_gap(p, 3, 20_000, 29)
    expect = 2 * 0.5 * math.log(2.5 / 1.5) * 2.0
    assert abs(bg.estimates[0] - expect) <= 3 * bg.std_errors[0]


def test_boundary_gap_zero_when_beta_zero():
    p = validate_params(0, 4, 4, 0.2)
    bg = boundary_gap(p, 3, 300, 31)
    np.testing.assert_array_equal(bg.estimates, np.zeros(3))


def test_boundary_gap_contraction_ratio():
    p = validate_params(0, 2.5, 1.5, 0.2)
    samples = boundary_gap_samples(p, 4, 20_000, 37)
    means = samples.mean(axis=0)
    rate = math.tanh(0.5 * math.log(2.5 / 1.5)) * 2.0
    for s in range(3):
        num, den = samples[:, s + 1], samples[:, s]
        ratio = num.mean() / den.mean()
        se = _ratio_se(num, den)
        assert ratio <= rate + 3 * se


def _ratio_se(num, den):
    # delta-method standard error for mean(num)/mean(den) on paired samples
    n = num.size
    mn, md = num.mean(), den.mean()
    vn, vd = num.var(ddof=1), den.var(ddof=1)
    cov = np.cov(num, den, ddof=1)[0, 1]
    var = (vn / md**2 - 2 * mn * cov / md**3 + mn**2 * vd / md**4) / n
    return math.sqrt(max(var, 0.0))


def test_single_flip_monotonicity_small():
    deltas = _single_flip_deltas(validate_params(0, 15, 5, 0.2), trials=200, seed=41)
    assert np.min(deltas) >= -1e-12
    deltas = _single_flip_deltas(validate_params(0, 5, 15, 0.2), trials=200, seed=43)
    assert np.max(deltas) <= 1e-12


def _single_flip_deltas(p, trials, seed):
    dc = derived_constants(p)
    f = sample_gw_forest(p, 3, trials, seed)
    lo = f.level_offsets
    b0, b1 = int(lo[3]), int(lo[4])
    rng = np.random.default_rng(seed + 1)
    base = rng.choice(np.array([-1.0, 1.0]), size=b1 - b0)
    ids = f.tree_ids()[b0:b1]
    # one uniformly chosen boundary node per tree that has any
    flip_slot = np.full(trials, -1)
    order = rng.permutation(b1 - b0)
    for j in order:
        flip_slot[ids[j]] = j
    has = flip_slot >= 0
    low = base.copy()
    low[flip_slot[has]] = -1.0
    high = base.copy()
    high[flip_slot[has]] = 1.0
    v_low = recurse_llr(f, dc, EXACT, boundary_override=low)[:trials]
    v_high = recurse_llr(f, dc, EXACT, boundary_override=high)[:trials]
    return (v_high - v_low)[has]


def test_extremal_boundaries_bracket_random_ones():
    p = validate_params(0, 15, 5, 0.2)
    dc = derived_constants(p)
    f = sample_gw_forest(p, 3, 500, 47)
    lo = f.level_offsets
    nb = int(lo[4]) - int(lo[3])
    rng = np.random.default_rng(5)
    xi = rng.choice(np.array([-1.0, 1.0]), size=nb)
    v_plus = recurse_llr(f, dc, EXACT, boundary_override=1.0)[:500]
    v_minus = recurse_llr(f, dc, EXACT, boundary_override=-1.0)[:500]
    v_xi = recurse_llr(f, dc, EXACT, boundary_override=xi)[:500]
    assert np.all(v_plus >= v_xi - 1e-12)
    assert np.all(v_xi >= v_minus - 1e-12)


def test_noisy_llr_sign_symmetry():
    # distribution of the root LLR given a - root mirrors its negation given +
    p = validate_params(0, 4, 2, 0.3)
    dc = derived_constants(p)
    f = sample_gw_forest(p, 3, 20_000, 1010)
    vals = recurse_llr(f, dc, NOISY)[:20_000]
    tau = f.tau[:20_000]
    a = vals[tau == -1]
    b = -vals[tau == 1]
    stat = ks_2samp(a, b).statistic
    crit = 1.6276 * math.sqrt((a.size + b.size) / (a.size * b.size))
    assert stat < crit


def test_population_sampler_matches_exact_trees():
    p = validate_params(0, 8, 2, 0.25)
    tm = estimate_tree_metrics(p, 3, 30_000, 57)
    pop = sample_llr_population(p, 3, 30_000, 59)[3]
    q_pop = 0.5 * np.mean(np.abs(np.tanh(pop.noisy))) + 0.5
    p_pop = 0.5 * np.mean(np.abs(np.tanh(pop.exact))) + 0.5
    # pool reuse correlates samples, so allow a generous multiple of the SE
    assert abs(q_pop - tm.q_star_hat) <= 6 * tm.q_star_se
    assert abs(p_pop - tm.p_star_hat) <= 6 * tm.p_star_se


def test_population_gap_contraction_high_snr():
    # (a-b)^2 = 1600 >> a+b: the exact/noisy gap shrinks with depth
    p = validate_params(0, 50, 10, 0.3)
    levels = sample_llr_population(p, 5, 20_000, 61)
    gaps, ses = [], []
    for lv in levels[1:]:
        g = np.abs(np.tanh(lv.exact) - np.tanh(lv.noisy))
        gaps.append(g.mean())
        ses.append(g.std(ddof=1) / math.sqrt(g.size))
    for s in range(4):
        assert gaps[s + 1] <= gaps[s] + 3 * (ses[s] + ses[s + 1])


def test_recursion_input_validation():
    f = sample_gw_tree(P_DEFAULT, 2, 1)
    with pytest.raises(ValidationError):
        recurse_llr(f, DC_DEFAULT, "bogus")
    with pytest.raises(ValidationError):
        recurse_llr(f, DC_DEFAULT, NOISY, boundary_override=1.0)
    with pytest.raises(ValidationError):
        recurse_llr(f, DC_DEFAULT, EXACT, depth=5)
