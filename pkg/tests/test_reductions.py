"""The protocol transformation chain and its exactness guarantees."""

import pytest

from noisynet import advantage as adv
from noisynet import engine, random_instances as ri, reductions, trees
from noisynet.exprs import OwnInput, Received, Xor
from noisynet.protocol import (
    NOISY_COPY,
    SEMI_NOISY,
    AuxRole,
    InputRole,
    Protocol,
    Transmission,
    star_adjacency,
    star_xor,
)
from noisynet.rng import RngStream


def parity(x):
    return adv.parity_sign(x)


# -- semi-noisy --------------------------------------------------------------


def test_semi_noisy_star_fidelity_and_counts():
    p = star_xor(2, reps=1, eps=0.1)
    p1, report = reductions.to_semi_noisy(p)
    assert p1.klass == SEMI_NOISY
    # every input transmission becomes 3, auxiliary ones stay single
    assert p1.T == report["t_aux"] + 3 * report["t_input"]
    assert report["t_aux"] == 1 and report["t_input"] == 2
    tv = reductions.check_simulation_fidelity(p, p1, report)
    assert tv <= 1e-12


def test_semi_noisy_preserves_output_law():
    p = star_xor(2, reps=2, eps=0.2)
    p1, _ = reductions.to_semi_noisy(p)
    ch0 = engine.exact_channel(p)
    ch1 = engine.exact_channel(p1)
    for key, row in ch0.rows.items():
        row1 = ch1.rows[key]
        tv = 0.5 * sum(
            abs(row.get(c, 0.0) - row1.get(c, 0.0)) for c in set(row) | set(row1)
        )
        assert tv <= 1e-12


def test_semi_noisy_structure():
    p = star_xor(2, reps=1, eps=0.1)
    p1, report = reductions.to_semi_noisy(p)
    inputs = set(p1.input_nodes())
    assert inputs == set(report["prime_of"].values())
    for tr in p1.schedule:
        if tr.sender in inputs:
            assert tr.expr == OwnInput(0) and tr.noisy
        else:
            assert not tr.noisy


def test_semi_noisy_rejects_input_output_node():
    adjacency = {0: {1}, 1: {0}}
    roles = {0: InputRole(1), 1: InputRole(1)}
    schedule = [Transmission(0, OwnInput(0))]
    p = Protocol(
        n_nodes=2,
        adjacency=adjacency,
        roles=roles,
        schedule=schedule,
        output_node=0,
        output_expr=OwnInput(0),
        eps=0.1,
    )
    with pytest.raises(ValueError):
        reductions.to_semi_noisy(p)


# -- noisy-copy --------------------------------------------------------------


def test_noisy_copy_structure_and_counts():
    p = star_xor(2, reps=2, eps=0.1)
    p1, _ = reductions.to_semi_noisy(p)
    d = 2
    mu = adv.uniform_distribution(2)
    p2, report = reductions.to_noisy_copy(p1, d, f=parity, mu=mu)
    assert p2.klass == NOISY_COPY
    counts = p2.tx_counts()
    for v in p2.input_nodes():
        assert counts[v] == 1
    for t in report["broadcast_of"].values():
        assert p2.schedule[t].eps == pytest.approx(0.1**d)
    assert report["eps_d"] == pytest.approx(0.01)
    assert p2.is_deterministic()  # randomness was fixed


def test_noisy_copy_advantage_never_drops():
    rng = RngStream(13)
    for i in range(10):
        p = ri.random_tiny_protocol(rng, i)
        d = ri.max_input_sends(p)
        mu = adv.uniform_distribution(len(p.input_nodes()))
        p1, _ = reductions.to_semi_noisy(p)
        p2, _ = reductions.to_noisy_copy(p1, d, f=parity, mu=mu)
        a1 = reductions.stage_advantage(p1, parity, mu)
        a2 = reductions.stage_advantage(p2, parity, mu)
        assert a2 >= a1 - 1e-9, (i, a1, a2)


def test_noisy_copy_rejects_excess_sends():
    p = star_xor(1, reps=3, eps=0.1)
    p1, _ = reductions.to_semi_noisy(p)
    with pytest.raises(ValueError):
        reductions.to_noisy_copy(p1, 2, f=parity, mu=adv.uniform_distribution(1))


# -- fix_randomness ----------------------------------------------------------


def test_fix_randomness_identity_when_deterministic():
    p = star_xor(2, reps=1, eps=0.1)
    fixed, report = reductions.fix_randomness(
        p, parity, adv.uniform_distribution(2)
    )
    assert report["identity"] is True
    assert fixed is p


def test_fix_randomness_averaging_property():
    """The best fixing is at least as good as the randomized protocol."""
    rng = RngStream(29)
    found = 0
    for i in range(20):
        p = ri.random_tiny_protocol(rng, i)
        p1, _ = reductions.to_semi_noisy(p)
        mu = adv.uniform_distribution(len(p1.input_nodes()))
        d = ri.max_input_sends(p)
        p2, report = reductions.to_noisy_copy(p1, d, f=parity, mu=mu, fix=False)
        if p2.is_deterministic():
            continue
        found += 1
        fixed, rep = reductions.fix_randomness(p2, parity, mu)
        assert rep["advantage"] >= rep["advantage_randomized"] - 1e-12
        # the reported advantage is the exact advantage of the fixed protocol
        got = reductions.stage_advantage(fixed, parity, mu)
        assert abs(got - rep["advantage"]) <= 1e-9
    assert found >= 3


# -- transcript tree ---------------------------------------------------------


def chain_to_tree(p, d):
    mu = adv.uniform_distribution(len(p.input_nodes()))
    p1, _ = reductions.to_semi_noisy(p)
    p2, _ = reductions.to_noisy_copy(p1, d, f=parity, mu=mu)
    art = reductions.to_xnd_tree(p2)
    return p2, art, mu


def test_xnd_tree_leaf_law_matches_protocol():
    rng = RngStream(37)
    for i in range(10):
        p = ri.random_tiny_protocol(rng, i)
        p2, art, _mu = chain_to_tree(p, ri.max_input_sends(p))
        tv = reductions.check_leaf_law(p2, art)
        assert tv <= 1e-12, (i, tv)


def test_xnd_tree_advantage_at_least_protocol():
    rng = RngStream(43)
    for i in range(10):
        p = ri.random_tiny_protocol(rng, i)
        p2, art, mu = chain_to_tree(p, ri.max_input_sends(p))
        a2 = reductions.stage_advantage(p2, parity, mu)
        at, _w = trees.tree_advantage(art.root, art.spaces)
        assert at >= a2 - 1e-9, (i, a2, at)


def test_xnd_tree_depth_one_single_transmission():
    """A semi-noisy single relay of one input bit: depth-1 tree with the
    protocol's exact advantage 1 - 2 eps."""
    adjacency = star_adjacency(1)
    roles = {0: InputRole(1), 1: AuxRole(0)}
    eps = 0.2
    schedule = [
        Transmission(0, OwnInput(0)),
        Transmission(1, Received(0), noisy=False),
    ]
    p1 = Protocol(
        n_nodes=2,
        adjacency=adjacency,
        roles=roles,
        schedule=schedule,
        output_node=1,
        output_expr=Received(0),
        eps=eps,
        klass=SEMI_NOISY,
    )
    mu = adv.uniform_distribution(1)
    p2, _ = reductions.to_noisy_copy(p1, 1, f=parity, mu=mu)
    art = reductions.to_xnd_tree(p2)
    assert trees.depth(art.root) == 1
    a_p = reductions.stage_advantage(p1, parity, mu)
    a_t, _w = trees.tree_advantage(art.root, art.spaces)
    assert abs(a_p - (1 - 2 * eps)) <= 1e-12
    assert abs(a_t - a_p) <= 1e-12


# -- full chain --------------------------------------------------------------


def test_chain_monotone_on_sample():
    rng = RngStream(53)
    for i in range(30):
        p = ri.random_tiny_protocol(rng, i)
        d = ri.max_input_sends(p)
        _ro, _art, report = reductions.protocol_to_read_once(p, d)
        assert report["monotone"], (i, report["advantages"])


def test_chain_reports_certificates():
    rng = RngStream(59)
    p = ri.random_tiny_protocol(rng, 4)
    d = ri.max_input_sends(p)
    ro, art, report = reductions.protocol_to_read_once(p, d, D=float(p.T))
    assert trees.is_read_once(ro)
    for cert in report["query_certificates"]:
        assert 0.0 <= cert["alpha"] <= 1.0 + 1e-12
        assert cert["bound_at_levels"] >= 7 / 8
        assert cert["bound_at_3D"] >= 7 / 8


def test_chain_rejects_mismatched_output():
    p = star_xor(2, reps=1, eps=0.1)
    bad = p.with_(output_expr=Xor((Received(0), Received(1), Received(2))))
    with pytest.raises(ValueError):
        reductions.protocol_to_read_once(bad, 1)
