"""Exact and sampled protocol execution against closed-form oracles."""

import math

import pytest
from scipy.stats import binom

from noisynet import engine
from noisynet.engine import (
    error_probability,
    exact_channel,
    execute,
    parity_of_inputs,
    sampled_channel,
)
from noisynet.planar import Decomposition
from noisynet.protocol import repetition_majority_parity, star_xor
from noisynet.rng import RngStream


def majority_error(r, eps, bit):
    """Exact per-bit decode error of an r-fold repetition with strict
    majority (ties decode to 0)."""
    if bit == 0:
        # decoded 1 iff more than r/2 copies flipped
        return float(binom.sf(math.floor(r / 2), r, eps))
    # decoded 0 iff at least half the copies flipped (ties hurt 1-inputs)
    return float(binom.sf(math.ceil(r / 2) - 1, r, eps))


def test_star_xor_two_leaves_error():
    eps = 0.1
    p = star_xor(2, reps=1, eps=eps)
    est = error_probability(p, parity_of_inputs, method="exact")
    assert abs(est.value - 2 * eps * (1 - eps)) <= 1e-12
    for key, err in est.per_input.items():
        assert abs(err - 2 * eps * (1 - eps)) <= 1e-12


def test_star_xor_single_leaf_error_is_eps():
    p = star_xor(1, reps=1, eps=0.2)
    est = error_probability(p, parity_of_inputs, method="exact")
    assert abs(est.value - 0.2) <= 1e-12


@pytest.mark.parametrize("r", [3, 4, 5])
def test_repetition_majority_error(r):
    eps = 0.2
    p = star_xor(1, reps=r, eps=eps)
    est = error_probability(p, parity_of_inputs, method="exact")
    assert abs(est.per_input[(0,)] - majority_error(r, eps, 0)) <= 1e-12
    assert abs(est.per_input[(1,)] - majority_error(r, eps, 1)) <= 1e-12
    assert abs(est.value - max(majority_error(r, eps, b) for b in (0, 1))) <= 1e-12


def test_repetition_majority_parity_builder():
    dec = Decomposition(
        n=1,
        k=2,
        d=3,
        D=3,
        input_blocks=[[0], [1]],
        aux_blocks=[[2], [2]],
        aux0=[],
    )
    r, eps = 3, 0.1
    p = repetition_majority_parity(None, dec, r, eps=eps)
    assert p.T == 2 * r + 1
    est = error_probability(p, parity_of_inputs, method="exact")
    q = majority_error(r, eps, 0)  # odd r: symmetric in the bit
    assert abs(est.value - 2 * q * (1 - q)) <= 1e-12


def test_monte_carlo_within_3_sigma():
    eps, trials = 0.1, 100_000
    p = star_xor(2, reps=1, eps=eps)
    truth = 2 * eps * (1 - eps)
    est = error_probability(
        p, parity_of_inputs, method="mc", trials=trials, rng=RngStream(17)
    )
    assert est.method == "mc" and est.trials == trials
    for key, (err, (lo, hi)) in est.per_input.items():
        assert lo - 1e-12 <= truth <= hi + 1e-12
    assert est.value >= truth - 1e-12  # reported upper confidence bound


def test_exact_channel_rows_are_distributions():
    p = star_xor(2, reps=2, eps=0.15)
    for outcome in ("output", "transcript"):
        ch = exact_channel(p, outcome=outcome)
        assert len(ch.rows) == 4
        for row in ch.rows.values():
            assert abs(sum(row.values()) - 1.0) <= 1e-12
            assert all(v >= 0 for v in row.values())


def test_sampled_channel_close_to_exact():
    p = star_xor(2, reps=1, eps=0.1)
    exact = exact_channel(p, outcome="output")
    mc = sampled_channel(
        p, engine.all_input_assignments(p), 40_000, RngStream(23), outcome="output"
    )
    for key, row in exact.rows.items():
        for c, pr in row.items():
            assert abs(mc.rows[key].get(c, 0.0) - pr) < 0.02


def test_execute_trace_is_deterministic():
    p = star_xor(2, reps=2, eps=0.3)
    t1 = execute(p, {0: 1, 1: 0}, RngStream(5, ("trace",)))
    t2 = execute(p, {0: 1, 1: 0}, RngStream(5, ("trace",)))
    assert t1.output == t2.output
    assert [r.sent for r in t1.records] == [r.sent for r in t2.records]


def test_error_probability_mc_needs_rng():
    p = star_xor(1, reps=1, eps=0.1)
    with pytest.raises(ValueError):
        error_probability(p, parity_of_inputs, method="mc")
    with pytest.raises(ValueError):
        error_probability(p, parity_of_inputs, method="bogus")
