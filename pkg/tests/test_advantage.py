"""Advantage functional, sensitivity, and closed-form bound evaluators."""

import math

import pytest

from noisynet import advantage as adv
from noisynet.engine import Channel, exact_channel, execute, input_order
from noisynet.exprs import And, Maj, OwnInput, Xor
from noisynet.protocol import star_xor
from noisynet.rng import RngStream


def chan(rows):
    return Channel(rows=rows)


def parity(x):
    return adv.parity_sign(x)


# -- distributions -----------------------------------------------------------


def test_uniform_distribution():
    mu = adv.uniform_distribution(3)
    assert len(mu) == 8 and abs(sum(mu.values()) - 1.0) < 1e-12


def test_mu_star():
    mu = adv.mu_star(4)
    assert mu[(0, 0, 0, 0)] == 0.5
    assert mu[(1, 0, 0, 0)] == 1 / 8
    assert abs(sum(mu.values()) - 1.0) < 1e-12
    with pytest.raises(ValueError):
        adv.mu_star(0)


def test_validate_distribution():
    with pytest.raises(ValueError):
        adv.validate_distribution({(0,): 0.7, (1,): 0.7})
    with pytest.raises(ValueError):
        adv.validate_distribution({(0,): 1.5, (1,): -0.5})


def test_product_distribution():
    mu = adv.product_distribution(
        [{(0,): 0.5, (1,): 0.5}, {(0,): 0.25, (1,): 0.75}]
    )
    assert abs(mu[(1, 1)] - 0.375) < 1e-12
    assert abs(sum(mu.values()) - 1.0) < 1e-12


# -- advantage ---------------------------------------------------------------


def test_exact_matches_bruteforce_on_protocol_channel():
    p = star_xor(2, reps=1, eps=0.1)
    ch = exact_channel(p)
    mu = adv.uniform_distribution(2)
    exact = adv.advantage_exact(ch, parity, mu)
    brute = adv.advantage_bruteforce(ch, parity, mu)
    assert abs(exact.value - brute) <= 1e-12
    assert abs(exact.value - 0.64) <= 1e-12  # (1-2*0.1)^2


def test_exact_matches_bruteforce_on_synthetic_channel():
    rows = {
        (0,): {"a": 0.7, "b": 0.2, "c": 0.1},
        (1,): {"a": 0.3, "b": 0.3, "c": 0.4},
    }
    mu = {(0,): 0.6, (1,): 0.4}
    exact = adv.advantage_exact(chan(rows), parity, mu)
    assert abs(exact.value - adv.advantage_bruteforce(chan(rows), parity, mu)) <= 1e-12


def test_achieving_weighting_attains_value():
    p = star_xor(2, reps=2, eps=0.2)
    ch = exact_channel(p)
    mu = adv.uniform_distribution(2)
    est = adv.advantage_exact(ch, parity, mu)
    res = adv.advantage_upper_bound_check(est.weighting, ch, parity, mu)
    assert res["ok"]
    assert abs(res["lhs"] - est.value) <= 1e-12


def test_postprocessing_never_increases_advantage():
    rows = {
        (0,): {0: 0.5, 1: 0.3, 2: 0.2},
        (1,): {0: 0.1, 1: 0.6, 2: 0.3},
    }
    mu = {(0,): 0.5, (1,): 0.5}
    full = adv.advantage_exact(chan(rows), parity, mu).value
    merged_rows = {
        x: {0: r[0] + r[2], 1: r[1]} for x, r in rows.items()
    }
    merged = adv.advantage_exact(chan(merged_rows), parity, mu).value
    assert merged <= full + 1e-12


def test_perfect_and_useless_channels():
    perfect = chan({(0,): {0: 1.0}, (1,): {1: 1.0}})
    useless = chan({(0,): {0: 0.5, 1: 0.5}, (1,): {0: 0.5, 1: 0.5}})
    mu = {(0,): 0.5, (1,): 0.5}
    assert abs(adv.advantage_exact(perfect, parity, mu).value - 1.0) <= 1e-12
    assert abs(adv.advantage_exact(useless, parity, mu).value) <= 1e-12


def test_advantage_mc_close_to_exact():
    p = star_xor(2, reps=1, eps=0.1)
    mu = adv.uniform_distribution(2)
    order = input_order(p)

    def evaluator(x_key, rng):
        return execute(p, dict(zip(order, x_key)), rng).output

    est = adv.advantage_mc(evaluator, parity, mu, trials=20000, rng=RngStream(3))
    assert est.method == "monte-carlo"
    assert abs(est.value - 0.64) < 0.03
    lo, hi = est.ci
    assert lo <= est.value <= hi


def test_bruteforce_outcome_cap():
    rows = {(0,): {c: 1.0 / 17 for c in range(17)}}
    with pytest.raises(ValueError):
        adv.advantage_bruteforce(chan(rows), parity, {(0,): 1.0})


# -- sensitivity -------------------------------------------------------------


def test_sensitivity_parity_is_n():
    for n in (1, 2, 4):
        f = Xor(tuple(OwnInput(i) for i in range(n))) if n > 1 else OwnInput(0)
        assert adv.sensitivity(f, n) == n


def test_sensitivity_majority_three_is_two():
    f = Maj((OwnInput(0), OwnInput(1), OwnInput(2)))
    assert adv.sensitivity(f, 3) == 2


def test_sensitivity_of_callable_and_constant():
    assert adv.sensitivity(lambda x: sum(x) % 2, 5) == 5
    assert adv.sensitivity(lambda x: 0, 4) == 0
    assert adv.sensitivity(And((OwnInput(0), OwnInput(1))), 2) == 2


def test_truth_table_expr_matches_callable():
    f_expr = Maj((OwnInput(0), OwnInput(1), OwnInput(2)))

    def f_call(x):
        return 1 if sum(x) > 1.5 else 0

    assert list(adv.truth_table(f_expr, 3)) == list(adv.truth_table(f_call, 3))


# -- closed-form bounds ------------------------------------------------------


def test_gks_depth_bound_example():
    # eps = 1/4, delta = 1/64: (1/16) * log2(16) / (50 * log2(4)^2) = 1/800
    got = adv.gks_depth_bound(0.25, 1 / 64, s=1.0)
    assert abs(got - 0.00125) <= 1e-15
    assert abs(adv.gks_depth_bound(0.25, 1 / 64, s=10.0) - 0.0125) <= 1e-12


def test_gks_depth_bound_ranges():
    with pytest.raises(ValueError):
        adv.gks_depth_bound(0.5, 0.01, 1.0)
    with pytest.raises(ValueError):
        adv.gks_depth_bound(0.1, 1 / 16, 1.0)


def test_alpha_bound_floor_and_monotonicity():
    assert adv.alpha_bound(10, 0.0, 0.1, c=1.0) == 7 / 8
    vals = [adv.alpha_bound(10, D, 0.1, c=1.0) for D in (0, 0.01, 0.02, 0.05, 0.1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert 7 / 8 < vals[-1] < 1.0
    assert adv.alpha_bound(10, 1e9, 0.1, c=1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        adv.alpha_bound(0, 1.0, 0.1, c=1.0)


def test_min_transmission_ratio_monotone_in_n():
    vals = [
        adv.min_transmission_ratio(2.0 ** (2**m), 0.1) for m in range(3, 7)
    ]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_min_transmission_ratio_grid_scan_oracle():
    """Binary search agrees with a left-to-right scan of the same grid."""
    ratio, s_min = 2 ** (1 / 16), 1 / 256
    for N in (1e4, 1e9, 1e18):
        rhs = math.log2(math.log2(N))
        i = 0
        while adv._min_s_lhs_log2(s_min * ratio**i, 0.1, 72.0) < rhs:
            i += 1
        assert adv.min_transmission_ratio(N, 0.1) == s_min * ratio**i


def test_min_transmission_ratio_errors():
    with pytest.raises(ValueError):
        adv.min_transmission_ratio(1.0, 0.1)
    with pytest.raises(ValueError):
        adv.min_transmission_ratio(100.0, 0.6)
    with pytest.raises(ValueError):
        # an absurd requirement exceeds the grid maximum
        adv.min_transmission_ratio(1e10, 0.1, c_prime=1e-9, c_pp=1e300)
