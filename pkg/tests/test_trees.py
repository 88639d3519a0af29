"""Decision trees: hierarchy predicates, leaf functionals, and the
rearrangement algorithms with their certified postconditions."""

import itertools

import numpy as np
import pytest

from noisynet import random_instances as ri
from noisynet import trees
from noisynet.errors import TreeCapExceeded
from noisynet.rng import RngStream
from noisynet.trees import (
    _LEAF,
    BlockSpace,
    Node,
    alternations,
    bitstring_space,
    collapse_to_read_once,
    count_paths,
    depth,
    evaluate,
    expand_superqueries,
    functions_covered,
    is_oblivious,
    is_ordered,
    is_read_once,
    law_total_variation,
    leaf_correlations,
    leaf_law,
    level_blocks,
    merge_superqueries,
    move_to_root,
    query_multiset,
    readonce_advantage,
    reorder,
    single_query_advantage,
    tree_advantage,
    tree_from_json,
    tree_to_json,
    trees_equal,
    uniform_bit_space,
)


def bit_tree(levels):
    """Deterministic binary tree over bit blocks: branch = identity."""
    t = _LEAF
    for b in reversed(levels):
        t = Node(b, (0, 1), (t, t))
    return t


def exhaustive_advantage(t, spaces):
    """Brute-force oracle: enumerate all assignments, group by leaf."""
    corr = {}
    for combo in itertools.product(*[range(sp.size) for sp in spaces]):
        p = 1.0
        f = 1.0
        for j, s in enumerate(combo):
            p *= spaces[j].probs[s]
            f *= spaces[j].h[s]
        path = evaluate(t, list(combo))
        corr[path] = corr.get(path, 0.0) + p * f
    return sum(abs(v) for v in corr.values())


# -- block spaces ------------------------------------------------------------


def test_block_space_validation():
    with pytest.raises(ValueError):
        BlockSpace((0, 1), (0.6, 0.6), (1, -1))
    with pytest.raises(ValueError):
        BlockSpace((0, 1), (0.5, 0.5), (1, 2))
    with pytest.raises(ValueError):
        BlockSpace((0, 1), (0.5,), (1, -1))


def test_bitstring_space():
    sp = bitstring_space(
        2,
        {(0, 0): 0.25, (0, 1): 0.25, (1, 0): 0.25, (1, 1): 0.25},
        lambda v: -1 if sum(v) % 2 else 1,
    )
    assert sp.size == 4 and sp.h == (1, -1, -1, 1)


# -- hierarchy predicates ----------------------------------------------------


def test_level_blocks_and_depth():
    t = bit_tree([0, 1, 0])
    assert level_blocks(t) == [0, 1, 0]
    assert depth(t) == 3
    assert is_oblivious(t)
    assert not is_ordered(t)


def test_alternation_examples():
    assert alternations(bit_tree([0, 1, 0])) == {3}
    assert alternations(bit_tree([0, 1, 2, 0, 1])) == {4, 5}
    assert alternations(bit_tree([0, 0, 1, 1])) == set()
    assert alternations(bit_tree([0, 1, 1, 0])) == {4}


def test_ordered_and_read_once():
    assert is_ordered(bit_tree([0, 0, 1, 1, 2]))
    assert not is_ordered(bit_tree([0, 1, 0]))
    assert is_read_once(bit_tree([2, 0, 1]))
    assert not is_read_once(bit_tree([0, 0, 1]))


def test_non_oblivious_rejected():
    left = Node(1, (0, 1), (_LEAF, _LEAF))
    right = Node(0, (0, 1), (_LEAF, _LEAF))
    t = Node(0, (0, 1), (left, right))
    assert not is_oblivious(t)
    with pytest.raises(ValueError):
        level_blocks(t)


def test_count_paths_cap():
    t = bit_tree([0] * 17)
    with pytest.raises(TreeCapExceeded):
        count_paths(t)


def test_evaluate_walks_branches():
    t = Node(0, (0, 1), (Node(1, (1, 0), (_LEAF, _LEAF)),) * 2)
    assert evaluate(t, [0, 0]) == (0, 1)
    assert evaluate(t, [1, 1]) == (1, 0)


# -- leaf functionals --------------------------------------------------------


def test_tree_advantage_matches_bruteforce():
    rng = RngStream(31)
    for i in range(25):
        r = rng.spawn("case", i)
        k = 1 + int(r.spawn("k").integers(3))
        d = 1 + int(r.spawn("d").integers(4))
        spaces = ri.random_spaces(r, k)
        t, _ = ri.random_oblivious_tree(r, spaces, d)
        got, weighting = tree_advantage(t, spaces)
        assert abs(got - exhaustive_advantage(t, spaces)) <= 1e-12
        # the weighting attains the advantage by construction
        corr = leaf_correlations(t, spaces)
        attained = sum(weighting[p] * v for p, v in corr.items())
        assert abs(attained - got) <= 1e-12


def test_leaf_law_sums_to_one():
    spaces = [uniform_bit_space(), uniform_bit_space()]
    t = bit_tree([0, 1, 0])
    law = leaf_law(t, [np.array(sp.probs) for sp in spaces])
    assert abs(sum(law.values()) - 1.0) <= 1e-12


def test_single_query_advantage_noisy_bit():
    # (x, z) block with z ~ Bern(0.1); querying x xor z has advantage 0.8
    sp = BlockSpace(
        values=((0, 0), (0, 1), (1, 0), (1, 1)),
        probs=(0.45, 0.05, 0.45, 0.05),
        h=(1, 1, -1, -1),
    )
    branch = tuple(x ^ z for x, z in sp.values)
    assert abs(single_query_advantage(branch, 2, sp) - 0.8) <= 1e-12


# -- merge / expand ----------------------------------------------------------


def test_merge_expand_round_trip_preserves_law():
    rng = RngStream(41)
    for i in range(25):
        r = rng.spawn("case", i)
        k = 1 + int(r.spawn("k").integers(3))
        d = 1 + int(r.spawn("d").integers(5))
        spaces = ri.random_spaces(r, k, max_size=2)
        t, _ = ri.random_oblivious_tree(r, spaces, d)
        merged, record = merge_superqueries(t)
        assert len(alternations(merged)) == len(alternations(t))
        back = expand_superqueries(merged, record)
        mus = [np.array(sp.probs) for sp in spaces]
        tv = law_total_variation(leaf_law(t, mus), leaf_law(back, mus))
        assert tv <= 1e-12
        a0, _ = tree_advantage(t, spaces)
        a1, _ = tree_advantage(merged, spaces)
        a2, _ = tree_advantage(back, spaces)
        assert abs(a0 - a1) <= 1e-12 and abs(a0 - a2) <= 1e-12


def test_merge_makes_runs_single_levels():
    t = bit_tree([0, 0, 1, 1, 1])
    merged, record = merge_superqueries(t)
    assert level_blocks(merged) == [0, 1]
    assert record == [(0, [2, 2]), (1, [2, 2, 2])]
    assert [len(record[i][1]) for i in range(2)] == [2, 3]


# -- move_to_root ------------------------------------------------------------


def test_move_to_root_postconditions_random():
    rng = RngStream(51)
    for i in range(30):
        r = rng.spawn("case", i)
        k = 1 + int(r.spawn("k").integers(3))
        d = 1 + int(r.spawn("d").integers(4))
        levels = ri.random_move_to_root_levels(r, k, d)
        spaces = ri.random_spaces(r, k, max_size=2)
        t = ri.random_tree_for_levels(r, spaces, levels)
        a0, _ = tree_advantage(t, spaces)
        out, witness, info = move_to_root(t, spaces)
        assert level_blocks(out)[0] == levels[-1]
        assert level_blocks(out)[1:] == levels[:-1]
        a1, _ = tree_advantage(out, spaces)
        assert a1 >= a0 - 1e-9
        # the witness weighting already attains at least the input advantage
        corr = leaf_correlations(out, spaces)
        attained = abs(sum(witness[p] * v for p, v in corr.items()))
        assert attained >= a0 - 1e-9
        assert a1 >= attained - 1e-9
        assert functions_covered(out, t)


def test_move_to_root_branch_dependent_choice():
    """Two last-level nodes with different branch functions: the promoted
    branch must be the one with the larger correlation."""
    sp0 = uniform_bit_space()
    sp1 = BlockSpace((0, 1), (0.9, 0.1), (1, -1))
    id_branch = (0, 1)
    const_branch = (0, 0)
    left = Node(1, id_branch, (_LEAF, _LEAF))  # informative query
    right = Node(1, const_branch, (_LEAF, _LEAF))  # useless query
    t = Node(0, (0, 1), (left, right))
    out, witness, info = move_to_root(t, [sp0, sp1])
    assert out.block == 1
    assert out.branch == id_branch
    assert info["chosen_path"] == (0,)
    a0, _ = tree_advantage(t, [sp0, sp1])
    a1, _ = tree_advantage(out, [sp0, sp1])
    assert a1 >= a0 - 1e-12


def test_move_to_root_rejects_repeated_block():
    t = bit_tree([0, 1, 0])
    with pytest.raises(ValueError):
        move_to_root(t, [uniform_bit_space(), uniform_bit_space()])


# -- reorder / collapse ------------------------------------------------------


def test_reorder_properties_random():
    rng = RngStream(61)
    for i in range(60):
        r = rng.spawn("case", i)
        k = 1 + int(r.spawn("k").integers(3))
        d = 1 + int(r.spawn("d").integers(6))
        spaces = ri.random_spaces(r, k, max_size=2)
        t, levels = ri.random_oblivious_tree(r, spaces, d)
        a0, _ = tree_advantage(t, spaces)
        out, cert = reorder(t, spaces)
        assert is_ordered(out)
        assert not alternations(out)
        assert query_multiset(out) == query_multiset(t)
        a1, _ = tree_advantage(out, spaces)
        assert a1 >= a0 - 1e-9
        # stepwise advantages in the certificate never decrease
        for step in cert:
            if "advantage_after" in step:
                assert step["advantage_after"] >= step["advantage_before"] - 1e-9


def test_reorder_certificate_terminates():
    spaces = [uniform_bit_space() for _ in range(3)]
    t = bit_tree([0, 1, 2, 0, 1, 0])
    out, cert = reorder(t, spaces)
    assert cert[-1]["alternations"] == 0
    assert len(cert) <= (3 * 6) ** 2 + 1


def test_collapse_requires_ordered():
    with pytest.raises(ValueError):
        collapse_to_read_once(bit_tree([0, 1, 0]))


def test_collapse_and_product_bound():
    t = bit_tree([0, 0, 1])
    ro, record = collapse_to_read_once(t)
    assert is_read_once(ro)
    spaces = [uniform_bit_space(), uniform_bit_space()]
    value, weighting, alphas = readonce_advantage(ro, spaces)
    bound = 1.0
    for a in alphas.values():
        bound *= a
    assert value <= bound + 1e-9


def test_readonce_noisy_product_case():
    """Two noisy single-bit queries at eps=0.1: advantage 0.8^2 = 0.64."""
    sp = BlockSpace(
        values=((0, 0), (0, 1), (1, 0), (1, 1)),
        probs=(0.45, 0.05, 0.45, 0.05),
        h=(1, 1, -1, -1),
    )
    branch = tuple(x ^ z for x, z in sp.values)
    t = Node(0, branch, (Node(1, branch, (_LEAF, _LEAF)),) * 2)
    value, _w, alphas = readonce_advantage(t, [sp, sp])
    assert abs(value - 0.64) <= 1e-9
    assert abs(alphas[0] - 0.8) <= 1e-12 and abs(alphas[1] - 0.8) <= 1e-12


def test_functions_covered_contract():
    t = bit_tree([0, 1])
    assert functions_covered(t, t)
    other = Node(0, (0, 0), (Node(1, (0, 1), (_LEAF, _LEAF)),) * 2)
    assert not functions_covered(other, t)  # constant branch not in input
    # child relabeling is allowed
    relabeled = Node(0, (1, 0), (Node(1, (0, 1), (_LEAF, _LEAF)),) * 2)
    assert functions_covered(relabeled, t)


# -- serialization -----------------------------------------------------------


def test_tree_json_round_trip():
    rng = RngStream(71)
    spaces = ri.random_spaces(rng, 2)
    t, _ = ri.random_oblivious_tree(rng, spaces, 3)
    text = tree_to_json(t, spaces, meta={"note": "case"})
    back, back_spaces, meta = tree_from_json(text)
    assert trees_equal(t, back)
    assert meta == {"note": "case"}
    assert [sp.values for sp in back_spaces] == [sp.values for sp in spaces]
    a0, _ = tree_advantage(t, spaces)
    a1, _ = tree_advantage(back, back_spaces)
    assert abs(a0 - a1) <= 1e-12


def test_tree_json_leaf_root():
    text = tree_to_json(_LEAF, [])
    root, spaces, _meta = tree_from_json(text)
    assert isinstance(root, trees.Leaf) and spaces == []
