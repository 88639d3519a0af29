"""Expression DSL: evaluation, substitution, and text round trips."""

import pytest

from noisynet import exprs
from noisynet.exprs import (
    And,
    Const,
    ExprSyntaxError,
    Maj,
    MaskBit,
    Noise,
    Not,
    Or,
    OwnInput,
    Rand,
    Received,
    Table,
    Thresh,
    Xor,
    mux,
    parse,
    to_text,
)


class Ctx:
    def __init__(self, own=0, rx=None, rand=None, noise=None, mask=None):
        self._own, self._rx = own, rx or {}
        self._rand, self._noise, self._mask = rand or {}, noise or {}, mask or {}

    def own_input(self, index):
        return self._own

    def rx(self, t):
        return self._rx[t]

    def rand(self, i):
        return self._rand[i]

    def noise(self, i, eps):
        return self._noise[i]

    def mask(self, src, j):
        return self._mask[(src, j)]


def ev(e, **kw):
    return exprs.evaluate(e, Ctx(**kw))


def test_boolean_ops():
    assert ev(Xor((Const(1), Const(1), Const(1)))) == 1
    assert ev(And((Const(1), Const(0)))) == 0
    assert ev(Or((Const(0), Const(1)))) == 1
    assert ev(Not(Const(0))) == 1
    assert ev(Maj((Const(1), Const(1), Const(0)))) == 1
    assert ev(Maj((Const(1), Const(0), Const(0)))) == 0
    assert ev(Thresh((Const(1), Const(1), Const(0)), 2)) == 1
    assert ev(Thresh((Const(1), Const(0), Const(0)), 2)) == 0


def test_mux_selects_correct_branch():
    for sel in (0, 1):
        for a in (0, 1):
            for b in (0, 1):
                got = ev(mux(Const(sel), Const(a), Const(b)))
                assert got == (a if sel == 0 else b)


def test_maj_even_tie_is_zero():
    assert ev(Maj((Const(1), Const(0)))) == 0
    assert ev(Maj((Const(1), Const(1), Const(0), Const(0)))) == 0


def test_atoms_collects_leaves():
    e = Xor((OwnInput(0), Received(3), Noise(1, 0.1), MaskBit(0, 2), Rand(4)))
    got = exprs.atoms(e)
    assert OwnInput(0) in got and Received(3) in got
    assert Noise(1, 0.1) in got and MaskBit(0, 2) in got and Rand(4) in got
    assert exprs.atoms(Const(1)) == set()


def test_substitute():
    e = Xor((Received(0), Received(1)))

    def m(atom):
        if atom == Received(0):
            return Const(1)
        return None

    out = exprs.substitute(e, m)
    assert out == Xor((Const(1), Received(1)))


@pytest.mark.parametrize(
    "e",
    [
        OwnInput(0),
        OwnInput(2),
        Received(7),
        Rand(1),
        Noise(3, 0.125),
        MaskBit(0, 4),
        Const(1),
        Not(Received(0)),
        Xor((OwnInput(0), Received(1), Const(0))),
        And((Received(0), Received(1))),
        Or((Const(0), Const(1))),
        Maj((Received(0), Received(1), Received(2))),
        Thresh((Received(0), Received(1), Received(2)), 2),
        mux(Received(0), Const(0), OwnInput(0)),
        Table((Received(0),), (1, 0)),
    ],
)
def test_text_round_trip(e):
    assert parse(to_text(e)) == e


def test_parse_bare_in_terminates():
    assert parse("in") == OwnInput(0)
    assert parse("rx[12]") == Received(12)


def test_parse_errors():
    for bad in ["", "xor(", "frob(rx[0])", "rx[0]garbage", "const(2)"]:
        with pytest.raises(ExprSyntaxError):
            parse(bad)


def test_table_arity_checked():
    with pytest.raises(ValueError):
        Table((Const(0),), (0, 1, 0))
