"""Protocol execution: sampled traces and exact outcome laws.

The exact engine enumerates every random primitive a protocol actually
reads -- channel noise bits of (receiver, transmission) pairs that some
later expression consumes, internal fair/biased bits, and categorical
regeneration masks -- and pushes the whole assignment grid through the
schedule with vectorized expression evaluation.  Primitives that no
expression reads do not enlarge the grid, so the enumeration cost tracks
the information the protocol uses rather than the raw receiver count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import exprs
from .errors import CapExceeded
from .protocol import AuxRole, InputRole, Protocol

DEFAULT_CAP_BITS = 24


# -- primitives -------------------------------------------------------------


@dataclass(frozen=True)
class _Primitive:
    key: tuple  # ("chan", reader, t) | ("rand", node, i) | ("noise", node, i) | ("mask", src)
    probs: tuple

    @property
    def size(self) -> int:
        return len(self.probs)

    @property
    def internal(self) -> bool:
        return self.key[0] != "chan"


def _collect_primitives(p: Protocol, probes=()):
    """All random primitives read anywhere in the protocol (plus probes)."""
    prims: dict = {}
    noise_eps: dict = {}
    contexts = list(p.all_expressions()) + [(node, e) for node, e in probes]
    for node, expr in contexts:
        for atom in exprs.atoms(expr):
            if isinstance(atom, exprs.Received):
                tr = p.schedule[atom.t]
                if not p.is_neighbor(node, tr.sender) or not tr.noisy:
                    continue
                eps = p.tx_eps(tr)
                if eps in (0.0, 1.0):
                    continue
                prims[("chan", node, atom.t)] = _Primitive(
                    ("chan", node, atom.t), (1 - eps, eps)
                )
            elif isinstance(atom, exprs.Rand):
                prims[("rand", node, atom.i)] = _Primitive(
                    ("rand", node, atom.i), (0.5, 0.5)
                )
            elif isinstance(atom, exprs.Noise):
                key = ("noise", node, atom.i)
                if key in noise_eps and noise_eps[key] != atom.eps:
                    raise ValueError(f"conflicting eps for noise atom {key}")
                noise_eps[key] = atom.eps
                prims[key] = _Primitive(key, (1 - atom.eps, atom.eps))
            elif isinstance(atom, exprs.MaskBit):
                src = p.mask_sources[atom.src]
                key = ("mask", atom.src)
                prims[key] = _Primitive(
                    key, tuple(prob for _, prob in src.table.outcomes())
                )
    return [prims[k] for k in sorted(prims)]


def _mask_bit_matrices(p: Protocol) -> dict:
    out = {}
    for idx, src in enumerate(p.mask_sources):
        out[idx] = np.array(
            [list(mask) for mask, _ in src.table.outcomes()], dtype=np.uint8
        )
    return out


def _enumeration_arrays(prims, cap_bits: int):
    """Outcome-index array per primitive plus the joint weight vector."""
    total = 1
    for pr in prims:
        total *= pr.size
    if total > 2**cap_bits:
        raise CapExceeded(
            f"enumeration size {total} exceeds 2^{cap_bits}", size=total
        )
    arrs, weights = {}, np.ones(total)
    stride = total
    for pr in prims:
        stride //= pr.size
        idx = (np.arange(total) // stride) % pr.size
        arrs[pr.key] = idx.astype(np.int64)
        weights *= np.asarray(pr.probs)[idx]
    return arrs, weights


def _sampled_arrays(prims, trials: int, rng):
    gen = rng.numpy_generator()
    arrs = {}
    for pr in prims:
        if pr.size == 2:
            arrs[pr.key] = (gen.random(trials) < pr.probs[1]).astype(np.int64)
        else:
            arrs[pr.key] = gen.choice(pr.size, size=trials, p=np.asarray(pr.probs))
    rng.counter += trials * len(prims)
    return arrs


# -- simulation -------------------------------------------------------------


class _Sim:
    def __init__(self, p: Protocol, x_bits: dict, arrs: dict, mask_bits: dict):
        self.p = p
        self.x_bits = x_bits
        self.arrs = arrs
        self.mask_bits = mask_bits
        self.sent: list = []
        self._rx: dict = {}

    def ctx(self, node):
        return _NodeCtx(self, node)

    def rx_value(self, node, t):
        key = (node, t)
        if key in self._rx:
            return self._rx[key]
        tr = self.p.schedule[t]
        if not self.p.is_neighbor(node, tr.sender):
            val = 0
        elif not tr.noisy:
            val = self.sent[t]
        else:
            eps = self.p.tx_eps(tr)
            if eps == 0.0:
                val = self.sent[t]
            elif eps == 1.0:
                val = 1 ^ self.sent[t]
            else:
                val = self.sent[t] ^ self.arrs[("chan", node, t)]
        self._rx[key] = val
        return val

    def run(self, probes=()):
        for tr in self.p.schedule:
            self.sent.append(exprs.evaluate(tr.expr, self.ctx(tr.sender)))
        output = exprs.evaluate(self.p.output_expr, self.ctx(self.p.output_node))
        probe_vals = [exprs.evaluate(e, self.ctx(node)) for node, e in probes]
        return output, probe_vals


class _NodeCtx:
    __slots__ = ("sim", "node")

    def __init__(self, sim, node):
        self.sim = sim
        self.node = node

    def own_input(self, index):
        if index != 0:
            raise ValueError("nodes hold a single input bit")
        role = self.sim.p.roles[self.node]
        if isinstance(role, InputRole):
            return self.sim.x_bits[self.node]
        return role.fixed_bit

    def rx(self, t):
        return self.sim.rx_value(self.node, t)

    def rand(self, i):
        return self.sim.arrs[("rand", self.node, i)]

    def noise(self, i, eps):
        return self.sim.arrs[("noise", self.node, i)]

    def mask(self, src, j):
        return self.sim.mask_bits[src][self.sim.arrs[("mask", src)], j]


def _pack(values, length):
    """Pack a list of bit arrays/ints into integer codes."""
    code = None
    for v in values:
        v = np.asarray(v, dtype=np.int64)
        code = v if code is None else (code << 1) | v
    if code is None:
        code = np.int64(0)
    return np.broadcast_to(np.asarray(code, dtype=np.int64), (length,))


# -- input assignments ------------------------------------------------------


def input_order(p: Protocol) -> list:
    """Canonical input-node order: by (block, node index)."""
    return [v for j, blk in sorted(p.blocks().items()) for v in blk]


def all_input_assignments(p: Protocol, limit=2**20) -> list:
    order = input_order(p)
    if 2 ** len(order) > limit:
        raise CapExceeded(f"2^{len(order)} input assignments exceed the cap")
    out = []
    for bits in itertools.product((0, 1), repeat=len(order)):
        out.append(dict(zip(order, bits)))
    return out


def assignment_key(p: Protocol, x_bits: dict) -> tuple:
    return tuple(x_bits[v] for v in input_order(p))


# -- channels ---------------------------------------------------------------


@dataclass
class Channel:
    """Exact (or estimated) outcome law per input assignment.

    ``rows`` maps an input key (bit tuple in canonical input order) to a
    dict outcome -> probability.
    """

    rows: dict
    outcome: str = "output"
    exact: bool = True
    meta: dict = field(default_factory=dict)

    def row(self, key):
        return self.rows[tuple(key)]

    def total_variation(self, other: "Channel") -> float:
        """Max over inputs of the TV distance between matching rows."""
        worst = 0.0
        for key, row in self.rows.items():
            orow = other.rows[key]
            support = set(row) | set(orow)
            tv = 0.5 * sum(abs(row.get(c, 0.0) - orow.get(c, 0.0)) for c in support)
            worst = max(worst, tv)
        return worst


def _outcome_values(p, sim_output, sim_sent, outcome, probe_vals):
    if outcome == "output":
        return [sim_output]
    if outcome == "transcript":
        return sim_sent
    if outcome == "probes":
        return probe_vals
    raise ValueError(f"unknown outcome kind {outcome!r}")


def exact_channel(
    p: Protocol,
    inputs=None,
    outcome: str = "output",
    probes=(),
    cap_bits: int = DEFAULT_CAP_BITS,
    fixed: dict | None = None,
) -> Channel:
    """Exact outcome law by enumerating all read random primitives.

    ``fixed`` optionally pins primitives (key -> outcome index); those no
    longer contribute to the enumeration grid.
    """
    if inputs is None:
        inputs = all_input_assignments(p)
    prims = _collect_primitives(p, probes=probes)
    fixed = fixed or {}
    free = [pr for pr in prims if pr.key not in fixed]
    arrs, weights = _enumeration_arrays(free, cap_bits)
    for key, out_idx in fixed.items():
        arrs[key] = out_idx
    mask_bits = _mask_bit_matrices(p)
    n = len(weights)
    rows = {}
    for x_bits in inputs:
        sim = _Sim(p, x_bits, arrs, mask_bits)
        output, probe_vals = sim.run(probes=probes)
        values = _outcome_values(p, output, sim.sent, outcome, probe_vals)
        codes = _pack(values, n)
        row: dict = {}
        agg = np.bincount(codes, weights=weights)
        for c in np.nonzero(agg)[0]:
            row[int(c)] = float(agg[c])
        rows[assignment_key(p, x_bits)] = row
    return Channel(rows=rows, outcome=outcome, exact=True)


def internal_primitives(p: Protocol) -> list:
    return [pr for pr in _collect_primitives(p) if pr.internal]


def sampled_channel(
    p: Protocol, inputs, trials: int, rng, outcome: str = "output"
) -> Channel:
    """Monte-Carlo estimate of the outcome law, vectorized over trials."""
    prims = _collect_primitives(p)
    mask_bits = _mask_bit_matrices(p)
    rows = {}
    for i, x_bits in enumerate(inputs):
        arrs = _sampled_arrays(prims, trials, rng.spawn("mc", i))
        sim = _Sim(p, x_bits, arrs, mask_bits)
        output, probe_vals = sim.run()
        values = _outcome_values(p, output, sim.sent, outcome, probe_vals)
        codes = _pack(values, trials)
        counts = np.bincount(codes)
        row = {int(c): counts[c] / trials for c in np.nonzero(counts)[0]}
        rows[assignment_key(p, x_bits)] = row
    return Channel(rows=rows, outcome=outcome, exact=False, meta={"trials": trials})


# -- sampled execution ------------------------------------------------------


@dataclass
class TransmissionRecord:
    sender: int
    sent: int
    received: dict  # neighbor -> bit
    noise: dict  # neighbor -> flip bit (empty for noiseless links)


@dataclass
class ExecutionTrace:
    records: list
    output: int


def execute(p: Protocol, x_bits: dict, rng) -> ExecutionTrace:
    """Sample one full run, with noise drawn for every neighbor."""
    internal_cache: dict = {}
    mask_cache: dict = {}
    rx: dict = {}

    class Ctx:
        def __init__(self, node):
            self.node = node

        def own_input(self, index):
            if index != 0:
                raise ValueError("nodes hold a single input bit")
            role = p.roles[self.node]
            return (
                x_bits[self.node] if isinstance(role, InputRole) else role.fixed_bit
            )

        def rx(self, t):
            return rx.get((self.node, t), 0)

        def rand(self, i):
            key = ("rand", self.node, i)
            if key not in internal_cache:
                internal_cache[key] = rng.spawn(*key).bernoulli(0.5)
            return internal_cache[key]

        def noise(self, i, eps):
            key = ("noise", self.node, i)
            if key not in internal_cache:
                internal_cache[key] = rng.spawn(*key).bernoulli(eps)
            return internal_cache[key]

        def mask(self, src, j):
            if src not in mask_cache:
                mask_cache[src] = p.mask_sources[src].table.sample_mask(
                    rng.spawn("mask", src)
                )
            return mask_cache[src][j]

    records = []
    for t, tr in enumerate(p.schedule):
        sent = int(exprs.evaluate(tr.expr, Ctx(tr.sender)))
        received, noise = {}, {}
        eps = p.tx_eps(tr)
        for w in sorted(p.adjacency[tr.sender]):
            if tr.noisy:
                eta = rng.spawn("chan", t, w).bernoulli(eps)
                noise[w] = eta
                received[w] = sent ^ eta
            else:
                received[w] = sent
            rx[(w, t)] = received[w]
        records.append(TransmissionRecord(tr.sender, sent, received, noise))
    output = int(exprs.evaluate(p.output_expr, Ctx(p.output_node)))
    return ExecutionTrace(records=records, output=output)


# -- error probability ------------------------------------------------------


@dataclass
class ErrorEstimate:
    value: float
    method: str
    per_input: dict
    ci: tuple | None = None
    trials: int | None = None


def error_probability(
    p: Protocol,
    f,
    method: str = "exact",
    trials: int = 100_000,
    rng=None,
    cap_bits: int = DEFAULT_CAP_BITS,
    z: float = 3.0,
) -> ErrorEstimate:
    """Worst-case-over-inputs probability that the output differs from f.

    ``f`` maps a canonical input bit tuple to {0, 1}.  The Monte-Carlo
    method reports the max of the per-input upper confidence bounds.
    """
    inputs = all_input_assignments(p)
    if method == "exact":
        ch = exact_channel(p, inputs, outcome="output", cap_bits=cap_bits)
        per_input = {
            key: 1.0 - row.get(f(key), 0.0) for key, row in ch.rows.items()
        }
        worst = max(per_input.values())
        return ErrorEstimate(worst, "exact", per_input)
    if method != "mc":
        raise ValueError("method must be 'exact' or 'mc'")
    if rng is None:
        raise ValueError("Monte-Carlo error estimation needs an rng stream")
    ch = sampled_channel(p, inputs, trials, rng, outcome="output")
    per_input, upper = {}, 0.0
    for key, row in ch.rows.items():
        err = 1.0 - row.get(f(key), 0.0)
        sigma = math.sqrt(max(err * (1 - err), 1e-12) / trials)
        per_input[key] = (err, (max(err - z * sigma, 0.0), min(err + z * sigma, 1.0)))
        upper = max(upper, min(err + z * sigma, 1.0))
    point = max(v[0] for v in per_input.values())
    return ErrorEstimate(upper, "mc", per_input, ci=(point, upper), trials=trials)


def parity_of_inputs(key: tuple) -> int:
    return sum(key) % 2
