"""Protocols on noisy broadcast networks.

A protocol is a fixed-length schedule of single-bit transmissions on a
communication graph.  Each transmission is driven by a closed boolean
expression evaluated at the sender; receivers get independent noisy copies
(or exact copies, for transmissions flagged noiseless).  The declared
answer is computed by the sender of the last transmission.

Node roles split the vertex set into input nodes (one input bit each,
grouped into blocks) and auxiliary nodes (input fixed).  The ``klass`` tag
tracks the protocol hierarchy used by the transformation chain:
``general`` -> ``semi-noisy`` (input nodes broadcast only their input bit,
auxiliary transmissions noiseless) -> ``noisy-copy`` (semi-noisy with
exactly one broadcast per input node).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import exprs
from .exprs import Const, Expr, Maj, OwnInput, Received, Xor
from .noise import RegenTable

GENERAL = "general"
SEMI_NOISY = "semi-noisy"
NOISY_COPY = "noisy-copy"


@dataclass(frozen=True)
class InputRole:
    block: int  # 1-based block index


@dataclass(frozen=True)
class AuxRole:
    fixed_bit: int = 0


@dataclass(frozen=True)
class Transmission:
    sender: int
    expr: Expr
    noisy: bool = True
    eps: float | None = None  # override of the protocol noise parameter


@dataclass(frozen=True)
class MaskSource:
    """Categorical internal random source (a regeneration mask) at a node."""

    node: int
    table: RegenTable


@dataclass
class Protocol:
    n_nodes: int
    adjacency: dict  # node -> frozenset of neighbors
    roles: dict  # node -> InputRole | AuxRole
    schedule: list  # list[Transmission]
    output_node: int
    output_expr: Expr
    eps: float
    klass: str = GENERAL
    mask_sources: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.adjacency = {v: frozenset(nb) for v, nb in self.adjacency.items()}
        self.validate()

    # -- structure ---------------------------------------------------------

    @property
    def T(self) -> int:
        return len(self.schedule)

    def input_nodes(self) -> list:
        return sorted(
            v for v, r in self.roles.items() if isinstance(r, InputRole)
        )

    def blocks(self) -> dict:
        """block index -> sorted list of its input nodes."""
        out: dict = {}
        for v in self.input_nodes():
            out.setdefault(self.roles[v].block, []).append(v)
        return {j: sorted(vs) for j, vs in sorted(out.items())}

    def n_per_block(self) -> int:
        sizes = {len(vs) for vs in self.blocks().values()}
        if len(sizes) != 1:
            raise ValueError("blocks have unequal sizes")
        return sizes.pop()

    def k_blocks(self) -> int:
        return len(self.blocks())

    def is_neighbor(self, v: int, w: int) -> bool:
        return w in self.adjacency.get(v, frozenset())

    def tx_counts(self) -> dict:
        counts = {v: 0 for v in range(self.n_nodes)}
        for tr in self.schedule:
            counts[tr.sender] += 1
        return counts

    def tx_eps(self, tr: Transmission) -> float:
        return self.eps if tr.eps is None else tr.eps

    # -- validation --------------------------------------------------------

    def validate(self):
        for v in range(self.n_nodes):
            if v not in self.roles:
                raise ValueError(f"node {v} has no role")
            if v in self.adjacency.get(v, frozenset()):
                raise ValueError(f"node {v} is its own neighbor")
        for v, nb in self.adjacency.items():
            for w in nb:
                if v not in self.adjacency.get(w, frozenset()):
                    raise ValueError(f"adjacency not symmetric at ({v},{w})")
        for i, tr in enumerate(self.schedule):
            for atom in exprs.atoms(tr.expr):
                if isinstance(atom, Received) and atom.t >= i:
                    raise ValueError(
                        f"transmission {i} reads rx[{atom.t}] (dangling index)"
                    )
                if isinstance(atom, exprs.MaskBit) and atom.src >= len(
                    self.mask_sources
                ):
                    raise ValueError(f"transmission {i} reads unknown mask source")
        for atom in exprs.atoms(self.output_expr):
            if isinstance(atom, Received) and atom.t >= self.T:
                raise ValueError("output expression reads a dangling rx index")
        if self.schedule and self.schedule[-1].sender != self.output_node:
            raise ValueError("output node must send the last transmission")
        if self.klass in (SEMI_NOISY, NOISY_COPY):
            self._validate_semi_noisy()
        if self.klass == NOISY_COPY:
            counts = self.tx_counts()
            for v in self.input_nodes():
                if counts[v] != 1:
                    raise ValueError(
                        f"noisy-copy protocol: input node {v} sends {counts[v]} times"
                    )

    def _validate_semi_noisy(self):
        inputs = set(self.input_nodes())
        for i, tr in enumerate(self.schedule):
            if tr.sender in inputs:
                if tr.expr != OwnInput(0):
                    raise ValueError(
                        f"semi-noisy protocol: input sender {tr.sender} at {i} "
                        "must transmit its raw input"
                    )
                if not tr.noisy:
                    raise ValueError("input broadcasts must be noisy")
            elif tr.noisy:
                raise ValueError(
                    f"semi-noisy protocol: auxiliary transmission {i} must be noiseless"
                )

    def is_deterministic(self) -> bool:
        """True when no expression reads internal randomness."""
        for node, expr in self.all_expressions():
            for atom in exprs.atoms(expr):
                if isinstance(atom, (exprs.Rand, exprs.Noise, exprs.MaskBit)):
                    return False
        return True

    def all_expressions(self):
        """(evaluating node, expression) pairs, schedule order then output."""
        out = [(tr.sender, tr.expr) for tr in self.schedule]
        out.append((self.output_node, self.output_expr))
        return out

    def with_(self, **kw) -> "Protocol":
        base = dict(
            n_nodes=self.n_nodes,
            adjacency=dict(self.adjacency),
            roles=dict(self.roles),
            schedule=list(self.schedule),
            output_node=self.output_node,
            output_expr=self.output_expr,
            eps=self.eps,
            klass=self.klass,
            mask_sources=list(self.mask_sources),
            meta=dict(self.meta),
        )
        base.update(kw)
        return Protocol(**base)


def complete_adjacency(n_nodes: int) -> dict:
    return {
        v: frozenset(w for w in range(n_nodes) if w != v) for v in range(n_nodes)
    }


def star_adjacency(n_leaves: int) -> dict:
    """Leaves 0..n-1 around center node n."""
    adj = {i: frozenset({n_leaves}) for i in range(n_leaves)}
    adj[n_leaves] = frozenset(range(n_leaves))
    return adj


# -- bounded-protocol check ------------------------------------------------


def check_bounded_counts(tx_counts: dict, dec, d: float, D: float) -> dict:
    """Per-block transmission budgets (P3, P4) from a count profile."""
    report = {"p3_ok": True, "p3_witnesses": [], "p4_ok": True, "p4_witnesses": []}
    for j, (inp, aux) in enumerate(zip(dec.input_blocks, dec.aux_blocks), start=1):
        for v in inp:
            c = tx_counts.get(v, 0)
            if c > d:
                report["p3_ok"] = False
                report["p3_witnesses"].append({"block": j, "node": v, "count": c})
        total = sum(tx_counts.get(v, 0) for v in inp) + sum(
            tx_counts.get(v, 0) for v in aux
        )
        if total > D:
            report["p4_ok"] = False
            report["p4_witnesses"].append({"block": j, "count": total})
    report["ok"] = report["p3_ok"] and report["p4_ok"]
    return report


def check_bounded(p: Protocol, dec, d: float, D: float) -> dict:
    return check_bounded_counts(p.tx_counts(), dec, d, D)


# -- reference protocol builders -------------------------------------------


def star_xor(n: int, reps: int = 1, eps: float = 0.1) -> Protocol:
    """n leaves broadcast their bit ``reps`` times; the center XORs the
    majority-decoded values and announces the result."""
    if n < 1 or reps < 1:
        raise ValueError("need n >= 1 and reps >= 1")
    center = n
    roles = {i: InputRole(1) for i in range(n)}
    roles[center] = AuxRole(0)
    schedule = []
    rx_of_leaf = {}
    for leaf in range(n):
        rx_of_leaf[leaf] = list(range(len(schedule), len(schedule) + reps))
        for _ in range(reps):
            schedule.append(Transmission(sender=leaf, expr=OwnInput(0)))
    decoded = [
        Maj(tuple(Received(t) for t in rx_of_leaf[leaf]))
        if reps > 1
        else Received(rx_of_leaf[leaf][0])
        for leaf in range(n)
    ]
    out_expr = Xor(tuple(decoded)) if n > 1 else decoded[0]
    schedule.append(Transmission(sender=center, expr=out_expr))
    return Protocol(
        n_nodes=n + 1,
        adjacency=star_adjacency(n),
        roles=roles,
        schedule=schedule,
        output_node=center,
        output_expr=out_expr,
        eps=eps,
        meta={"builder": "star_xor", "n": n, "reps": reps},
    )


def _common_neighbor(p_adj: dict, nodes, exclude) -> int | None:
    cands = None
    for v in nodes:
        nb = set(p_adj.get(v, ()))
        cands = nb if cands is None else cands & nb
    if not cands:
        return None
    cands -= set(exclude)
    return min(cands) if cands else None


def repetition_majority_parity(net, dec, r: int, eps: float = 0.1) -> Protocol:
    """All input nodes broadcast r times to a shared aggregator, which
    majority-decodes every bit and announces the XOR.

    ``net`` may be None, in which case all nodes are assumed adjacent.
    The aggregator is the smallest-index auxiliary node adjacent to every
    input node.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    inputs = sorted(v for blk in dec.input_blocks for v in blk)
    n_nodes = (
        net.n_nodes
        if net is not None
        else max(inputs + dec.aux0 + [v for b in dec.aux_blocks for v in b]) + 1
    )
    if net is not None:
        adjacency = {v: frozenset(net.neighbors(v)) for v in range(n_nodes)}
    else:
        adjacency = complete_adjacency(n_nodes)
    aux_nodes = sorted(set(range(n_nodes)) - set(inputs))
    agg = _common_neighbor(adjacency, inputs, exclude=inputs)
    if agg is None or agg not in aux_nodes:
        raise ValueError("no auxiliary aggregator adjacent to all input nodes")
    roles = {}
    for j, blk in enumerate(dec.input_blocks, start=1):
        for v in blk:
            roles[v] = InputRole(j)
    for v in aux_nodes:
        roles[v] = AuxRole(dec.fixed_bit)
    schedule = []
    rx_of = {}
    for v in inputs:
        rx_of[v] = list(range(len(schedule), len(schedule) + r))
        for _ in range(r):
            schedule.append(Transmission(sender=v, expr=OwnInput(0)))
    decoded = [
        Maj(tuple(Received(t) for t in rx_of[v])) if r > 1 else Received(rx_of[v][0])
        for v in inputs
    ]
    out_expr = Xor(tuple(decoded)) if len(decoded) > 1 else decoded[0]
    schedule.append(Transmission(sender=agg, expr=out_expr))
    return Protocol(
        n_nodes=n_nodes,
        adjacency=adjacency,
        roles=roles,
        schedule=schedule,
        output_node=agg,
        output_expr=out_expr,
        eps=eps,
        meta={"builder": "repetition_majority_parity", "r": r},
    )


def cluster_sum(net, dec, r_local: int, r_up: int, eps: float = 0.1) -> Protocol:
    """Blockwise parity aggregation along a relay chain of block leaders.

    Each block's members broadcast their bit ``r_local`` times to a block
    leader, who majority-decodes them and folds the block parity into a
    running parity that is relayed leader-to-leader (via shortest paths in
    the network, with ``r_up``-fold repetition per hop).  The last leader
    announces the overall parity.
    """
    from collections import deque

    if r_local < 1 or r_up < 1:
        raise ValueError("repetition factors must be >= 1")
    n_nodes = net.n_nodes
    adjacency = {v: frozenset(net.neighbors(v)) for v in range(n_nodes)}
    inputs = set(v for blk in dec.input_blocks for v in blk)
    roles = {}
    for j, blk in enumerate(dec.input_blocks, start=1):
        for v in blk:
            roles[v] = InputRole(j)
    for v in range(n_nodes):
        if v not in inputs:
            roles[v] = AuxRole(dec.fixed_bit)

    leaders = []
    for blk in dec.input_blocks:
        leader = _common_neighbor(adjacency, blk, exclude=inputs)
        if leader is None:
            raise ValueError(f"no leader adjacent to all of block {blk}")
        leaders.append(leader)

    def shortest_path(a, b):
        if a == b:
            return [a]
        prev = {a: None}
        q = deque([a])
        while q:
            u = q.popleft()
            for w in sorted(adjacency[u]):
                if w not in prev:
                    prev[w] = u
                    if w == b:
                        path = [b]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    q.append(w)
        raise ValueError("network is disconnected between block leaders")

    schedule = []
    # Local phase: every input node broadcasts r_local times.
    rx_of = {}
    for blk in dec.input_blocks:
        for v in sorted(blk):
            rx_of[v] = list(range(len(schedule), len(schedule) + r_local))
            for _ in range(r_local):
                schedule.append(Transmission(sender=v, expr=OwnInput(0)))

    def decode(v):
        if r_local == 1:
            return Received(rx_of[v][0])
        return Maj(tuple(Received(t) for t in rx_of[v]))

    # Upward phase: fold block parities along the leader relay chain.
    running = None  # expression for the carried parity, at the current holder
    holder = None
    for leader, blk in zip(leaders, dec.input_blocks):
        if holder is not None and holder != leader:
            for a, b in zip(
                shortest_path(holder, leader), shortest_path(holder, leader)[1:]
            ):
                idxs = list(range(len(schedule), len(schedule) + r_up))
                for _ in range(r_up):
                    schedule.append(Transmission(sender=a, expr=running))
                running = (
                    Received(idxs[0])
                    if r_up == 1
                    else Maj(tuple(Received(t) for t in idxs))
                )
            holder = leader
        block_parity = Xor(tuple(decode(v) for v in sorted(blk)))
        running = block_parity if running is None else Xor((running, block_parity))
        holder = leader
    schedule.append(Transmission(sender=holder, expr=running))
    return Protocol(
        n_nodes=n_nodes,
        adjacency=adjacency,
        roles=roles,
        schedule=schedule,
        output_node=holder,
        output_expr=running,
        eps=eps,
        meta={"builder": "cluster_sum", "r_local": r_local, "r_up": r_up},
    )


# -- protocol file format ---------------------------------------------------


def protocol_to_text(p: Protocol) -> str:
    lines = [f"nodes {p.n_nodes}", f"eps {p.eps:g}", f"class {p.klass}"]
    for v in range(p.n_nodes):
        role = p.roles[v]
        if isinstance(role, InputRole):
            lines.append(f"node {v} input block={role.block}")
        else:
            lines.append(f"node {v} aux fix={role.fixed_bit}")
    for v in sorted(p.adjacency):
        for w in sorted(p.adjacency[v]):
            if v < w:
                lines.append(f"edge {v} {w}")
    for src in p.mask_sources:
        lines.append(f"masksrc {src.node} {src.table.to_json()}")
    for tr in p.schedule:
        flag = "" if tr.noisy else " noiseless"
        epss = "" if tr.eps is None else f" eps={tr.eps:g}"
        lines.append(f"tx {tr.sender}{flag}{epss} := {exprs.to_text(tr.expr)}")
    lines.append(f"out {p.output_node} := {exprs.to_text(p.output_expr)}")
    return "\n".join(lines) + "\n"


def protocol_from_text(text: str) -> Protocol:
    n_nodes = None
    eps = 0.1
    klass = GENERAL
    roles: dict = {}
    edges = []
    schedule = []
    mask_sources = []
    output = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            head, *rest = line.split(None, 1)
            body = rest[0] if rest else ""
            if head == "nodes":
                n_nodes = int(body)
            elif head == "eps":
                eps = float(body)
            elif head == "class":
                klass = body.strip()
            elif head == "node":
                parts = body.split()
                v = int(parts[0])
                if parts[1] == "input":
                    block = int(parts[2].split("=")[1])
                    roles[v] = InputRole(block)
                elif parts[1] == "aux":
                    fix = int(parts[2].split("=")[1])
                    roles[v] = AuxRole(fix)
                else:
                    raise ValueError(f"unknown role {parts[1]!r}")
            elif head == "edge":
                a, b = body.split()
                edges.append((int(a), int(b)))
            elif head == "masksrc":
                node_s, table_json = body.split(None, 1)
                mask_sources.append(
                    MaskSource(int(node_s), RegenTable.from_json(table_json))
                )
            elif head == "tx":
                lhs, expr_text = body.split(":=", 1)
                toks = lhs.split()
                sender = int(toks[0])
                noisy = "noiseless" not in toks
                tr_eps = None
                for tok in toks[1:]:
                    if tok.startswith("eps="):
                        tr_eps = float(tok[4:])
                schedule.append(
                    Transmission(sender, exprs.parse(expr_text), noisy, tr_eps)
                )
            elif head == "out":
                node_s, expr_text = body.split(":=", 1)
                output = (int(node_s), exprs.parse(expr_text))
            else:
                raise ValueError(f"unknown directive {head!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if n_nodes is None:
        raise ValueError("missing 'nodes' line")
    if output is None:
        raise ValueError("missing 'out' line")
    adjacency = {v: set() for v in range(n_nodes)}
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    return Protocol(
        n_nodes=n_nodes,
        adjacency=adjacency,
        roles=roles,
        schedule=schedule,
        output_node=output[0],
        output_expr=output[1],
        eps=eps,
        klass=klass,
        mask_sources=mask_sources,
    )
