"""The protocol transformation chain: general protocol -> semi-noisy ->
noisy-copy -> oblivious noisy decision tree -> read-once tree.

Each stage preserves the outcome law it must preserve and never loses
advantage, so a lower bound on what the final read-once tree can do for
blockwise parity is a lower bound for the original protocol.  The
stages:

* :func:`to_semi_noisy` -- replaces every transmission by an input
  sender with a 3-transmission gadget on an extended network: the
  sender announces what it would have sent for input 0 and for input 1
  (noiseless), then a fresh input node broadcasts the raw input bit
  (noisy); receivers re-noise internally when the two announcements
  agree, otherwise select the announcement matching their noisy copy of
  the input.  The joint law of the simulated received bits equals the
  original one exactly.
* :func:`to_noisy_copy` -- fronts the schedule with one epsilon^d-noisy
  broadcast per input node; receivers regenerate the d epsilon-noisy
  copies they previously saw via regeneration masks, which leaves the
  per-input outcome law unchanged.  Internal randomness is then fixed
  to its advantage-maximizing assignment (:func:`fix_randomness`).
* :func:`to_xnd_tree` -- unrolls the deterministic auxiliary transcript
  into a binary decision tree; the channel noise of the input
  broadcasts becomes per-(block, sender) noise vectors folded into the
  block value, so each level queries one block through its noisy copy.
* :func:`protocol_to_read_once` -- composes the chain with tree
  reordering and the read-once collapse and certifies per-query
  advantages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import advantage as adv_mod
from . import engine, exprs, trees
from .errors import TreeCapExceeded
from .exprs import Const, MaskBit, Noise, OwnInput, Received, Xor, mux
from .noise import regen_table
from .protocol import (
    NOISY_COPY,
    SEMI_NOISY,
    AuxRole,
    InputRole,
    MaskSource,
    Protocol,
    Transmission,
)

MAX_BLOCK_SPACE = 2**12


# -- stage 1: semi-noisy -----------------------------------------------------


def to_semi_noisy(p: Protocol, dec=None, d=None, D=None):
    """Rewrite ``p`` so input nodes only ever broadcast their raw bit.

    Returns (p1, report); the report carries the node/transmission maps
    and matched probe pairs for checking that the law of the simulated
    received bits equals the original law.
    """
    if dec is not None and d is not None and D is not None:
        from .protocol import check_bounded

        chk = check_bounded(p, dec, d, D)
        if not chk["ok"]:
            raise ValueError(f"protocol is not ({d},{D})-bounded: {chk}")
    inputs = p.input_nodes()
    if p.roles.get(p.output_node) is None or isinstance(
        p.roles[p.output_node], InputRole
    ):
        raise ValueError("the output node must be auxiliary")
    for tr in p.schedule:
        if tr.sender in inputs and not tr.noisy:
            raise ValueError("noiseless transmissions by input nodes unsupported")

    prime_of = {v: p.n_nodes + i for i, v in enumerate(inputs)}
    n_nodes1 = p.n_nodes + len(inputs)
    adjacency = {v: set(p.adjacency.get(v, ())) for v in range(p.n_nodes)}
    for v in inputs:
        vp = prime_of[v]
        adjacency[vp] = {v} | set(p.adjacency.get(v, ()))
        adjacency[v].add(vp)
        for w in p.adjacency.get(v, ()):
            adjacency[w].add(vp)
    roles = {}
    for v in range(p.n_nodes):
        role = p.roles[v]
        roles[v] = AuxRole(0) if isinstance(role, InputRole) else role
    for v in inputs:
        roles[prime_of[v]] = InputRole(p.roles[v].block)

    schedule: list = []
    recv: dict = {}  # (reader, original t) -> Expr
    next_noise = {v: 0 for v in range(n_nodes1)}
    gadget_of: dict = {}
    probe_pairs: list = []

    def fresh_noise(w, eps):
        i = next_noise[w]
        next_noise[w] += 1
        return Noise(i, eps)

    def recv_expr(w, t):
        got = recv.get((w, t))
        return got if got is not None else Const(0)

    def rewrite(expr, reader, own=None):
        def m(atom):
            if isinstance(atom, Received):
                return recv_expr(reader, atom.t)
            if isinstance(atom, OwnInput) and own is not None:
                return Const(own)
            return None

        return exprs.substitute(expr, m)

    for t, tr in enumerate(p.schedule):
        eps_t = p.tx_eps(tr)
        nbrs = sorted(p.adjacency.get(tr.sender, ()))
        if isinstance(p.roles[tr.sender], AuxRole):
            new_expr = rewrite(tr.expr, tr.sender)
            idx = len(schedule)
            schedule.append(Transmission(tr.sender, new_expr, noisy=False))
            gadget_of[t] = [idx]
            for w in nbrs:
                if tr.noisy and 0.0 < eps_t < 1.0:
                    recv[(w, t)] = Xor(
                        (Received(idx), fresh_noise(w, eps_t))
                    )
                else:
                    recv[(w, t)] = Received(idx)
        else:
            v = tr.sender
            b0 = rewrite(tr.expr, v, own=0)
            b1 = rewrite(tr.expr, v, own=1)
            i0 = len(schedule)
            schedule.append(Transmission(v, b0, noisy=False))
            schedule.append(Transmission(v, b1, noisy=False))
            i2 = i0 + 2
            schedule.append(
                Transmission(prime_of[v], OwnInput(0), noisy=True, eps=tr.eps)
            )
            gadget_of[t] = [i0, i0 + 1, i2]
            for w in nbrs:
                r0, r1, c = Received(i0), Received(i1 := i0 + 1), Received(i2)
                same = exprs.Not(Xor((r0, r1)))
                recv[(w, t)] = mux(
                    same, mux(c, r0, r1), Xor((r0, fresh_noise(w, eps_t)))
                )
        for w in nbrs:
            probe_pairs.append(((w, Received(t)), (w, recv[(w, t)])))

    out_expr = rewrite(p.output_expr, p.output_node)
    p1 = Protocol(
        n_nodes=n_nodes1,
        adjacency=adjacency,
        roles=roles,
        schedule=schedule,
        output_node=p.output_node,
        output_expr=out_expr,
        eps=p.eps,
        klass=SEMI_NOISY,
        meta={
            "stage": "semi-noisy",
            "prime_of": prime_of,
            "gadget_of": gadget_of,
        },
    )
    report = {
        "prime_of": prime_of,
        "gadget_of": gadget_of,
        "probe_pairs": probe_pairs,
        "t_aux": sum(
            1 for tr in p.schedule if isinstance(p.roles[tr.sender], AuxRole)
        ),
        "t_input": sum(
            1 for tr in p.schedule if isinstance(p.roles[tr.sender], InputRole)
        ),
    }
    return p1, report


def check_simulation_fidelity(p: Protocol, p1: Protocol, report, cap_bits=24):
    """Max-over-inputs TV between the original received-bit law and the
    simulated one (input keys are matched positionally)."""
    orig_probes = [pr for pr, _ in report["probe_pairs"]]
    new_probes = [pr for _, pr in report["probe_pairs"]]
    ch0 = engine.exact_channel(p, outcome="probes", probes=orig_probes, cap_bits=cap_bits)
    ch1 = engine.exact_channel(p1, outcome="probes", probes=new_probes, cap_bits=cap_bits)
    worst = 0.0
    for key in ch0.rows:
        row0, row1 = ch0.rows[key], ch1.rows[key]
        support = set(row0) | set(row1)
        tv = 0.5 * sum(abs(row0.get(c, 0.0) - row1.get(c, 0.0)) for c in support)
        worst = max(worst, tv)
    return worst


# -- stage 2: noisy-copy -----------------------------------------------------


def to_noisy_copy(p1: Protocol, d: int, f=None, mu=None, fix=True, cap_bits=24):
    """One epsilon^d broadcast per input node, masks regenerating the d
    epsilon-noisy copies, internal randomness fixed.

    Returns (p2, report).  ``f`` (input key -> +/-1) and ``mu`` are
    needed when ``fix`` is true and the protocol reads randomness.
    """
    if p1.klass not in (SEMI_NOISY, NOISY_COPY):
        raise ValueError("to_noisy_copy expects a semi-noisy protocol")
    eps = p1.eps
    if not 0.0 < eps < 0.5:
        raise ValueError("regeneration requires eps in (0, 1/2)")
    for tr in p1.schedule:
        if tr.noisy and tr.eps is not None and tr.eps != eps:
            raise ValueError("per-transmission noise overrides unsupported here")
    inputs = p1.input_nodes()
    counts = p1.tx_counts()
    for v in inputs:
        if counts[v] > d:
            raise ValueError(f"input node {v} sends {counts[v]} > d = {d} times")

    eps_d = eps**d
    schedule: list = []
    t0 = {}
    for v in inputs:
        t0[v] = len(schedule)
        schedule.append(Transmission(v, OwnInput(0), noisy=True, eps=eps_d))

    table = regen_table(d, eps)
    mask_sources: list = []
    src_idx: dict = {}

    def source_for(reader, v):
        key = (reader, v)
        if key not in src_idx:
            src_idx[key] = len(mask_sources)
            mask_sources.append(MaskSource(reader, table))
        return src_idx[key]

    occurrence = {}
    occ_count: dict = {}
    for t, tr in enumerate(p1.schedule):
        if tr.sender in t0:
            occurrence[t] = (tr.sender, occ_count.get(tr.sender, 0))
            occ_count[tr.sender] = occ_count.get(tr.sender, 0) + 1

    def rewrite(expr, reader, old_to_new):
        def m(atom):
            if not isinstance(atom, Received):
                return None
            told = atom.t
            if told in occurrence:
                v, i = occurrence[told]
                if not p1.is_neighbor(reader, v):
                    return Const(0)
                return Xor(
                    (Received(t0[v]), MaskBit(source_for(reader, v), i))
                )
            return Received(old_to_new[told])

        return exprs.substitute(expr, m)

    old_to_new: dict = {}
    for t, tr in enumerate(p1.schedule):
        if t in occurrence:
            continue
        new_expr = rewrite(tr.expr, tr.sender, old_to_new)
        old_to_new[t] = len(schedule)
        schedule.append(Transmission(tr.sender, new_expr, noisy=False))
    out_expr = rewrite(p1.output_expr, p1.output_node, old_to_new)

    p2 = Protocol(
        n_nodes=p1.n_nodes,
        adjacency=dict(p1.adjacency),
        roles=dict(p1.roles),
        schedule=schedule,
        output_node=p1.output_node,
        output_expr=out_expr,
        eps=eps,
        klass=NOISY_COPY,
        mask_sources=mask_sources,
        meta={**p1.meta, "stage": "noisy-copy", "d": d, "eps_d": eps_d},
    )
    report = {
        "d": d,
        "eps_d": eps_d,
        "broadcast_of": t0,
        "aux_map": old_to_new,
        "mask_sources": len(mask_sources),
        "fixed": None,
    }
    if fix and not p2.is_deterministic():
        if f is None or mu is None:
            raise ValueError("fixing randomness needs the target f and mu")
        p2, fix_report = fix_randomness(p2, f, mu, cap_bits=cap_bits)
        report["fixed"] = fix_report
    return p2, report


def fix_randomness(p: Protocol, f, mu, cap_bits=24):
    """Replace internal random atoms by the constants maximizing the
    exact output advantage; by averaging, the best fixing is at least
    as good as the randomized protocol.
    """
    adv_mod.validate_distribution(mu)
    prims = engine._collect_primitives(p)
    internal = [pr for pr in prims if pr.internal]
    if not internal:
        return p, {"assignments": 1, "chosen": {}, "identity": True}
    external = [pr for pr in prims if not pr.internal]
    ordered = internal + external
    total = 1
    for pr in ordered:
        total *= pr.size
    if total > 2**cap_bits:
        raise engine.CapExceeded(
            f"{total} noise assignments exceed 2^{cap_bits}", size=total
        )
    # one joint grid with the internal primitives varying slowest, so each
    # internal assignment owns a contiguous slab of external outcomes
    arrs = {}
    stride = total
    for pr in ordered:
        stride //= pr.size
        arrs[pr.key] = ((np.arange(total) // stride) % pr.size).astype(np.int64)
    inner = 1
    for pr in external:
        inner *= pr.size
    n_assign = total // inner
    w_ext = np.ones(total)
    for pr in external:
        w_ext *= np.asarray(pr.probs)[arrs[pr.key]]
    # probability of each internal assignment (mixed-radix decode)
    sizes = [pr.size for pr in internal]
    p_int = np.ones(n_assign)
    for i in range(n_assign):
        rest = i
        for pr, size in zip(reversed(internal), reversed(sizes)):
            rest, out = divmod(rest, size)
            p_int[i] *= pr.probs[out]

    mask_bits = engine._mask_bit_matrices(p)
    corr = np.zeros(n_assign * 2)
    outer_codes = (np.arange(total) // inner) * 2
    for x_key, px in mu.items():
        if px == 0.0:
            continue
        x_bits = dict(zip(engine.input_order(p), x_key))
        sim = engine._Sim(p, x_bits, arrs, mask_bits)
        output, _probes = sim.run()
        codes = np.broadcast_to(np.asarray(output, dtype=np.int64), (total,))
        corr += np.bincount(
            outer_codes + codes, weights=px * f(tuple(x_key)) * w_ext,
            minlength=n_assign * 2,
        )
    corr = corr.reshape(n_assign, 2)
    advs = np.abs(corr).sum(axis=1)
    r_star = int(np.argmax(advs))  # first maximal assignment
    adv_before = float(np.abs((corr * p_int[:, None]).sum(axis=0)).sum())

    chosen = {}
    rest = r_star
    for pr, size in zip(reversed(internal), reversed(sizes)):
        rest, out = divmod(rest, size)
        chosen[pr.key] = out

    def subst_for(node):
        def m(atom):
            if isinstance(atom, exprs.Rand):
                return Const(int(chosen[("rand", node, atom.i)]))
            if isinstance(atom, Noise):
                return Const(int(chosen[("noise", node, atom.i)]))
            if isinstance(atom, MaskBit):
                out = chosen[("mask", atom.src)]
                return Const(int(mask_bits[atom.src][out, atom.j]))
            return None

        return m

    schedule = [
        Transmission(
            tr.sender,
            exprs.substitute(tr.expr, subst_for(tr.sender)),
            tr.noisy,
            tr.eps,
        )
        for tr in p.schedule
    ]
    out_expr = exprs.substitute(p.output_expr, subst_for(p.output_node))
    fixed_p = p.with_(schedule=schedule, output_expr=out_expr, mask_sources=[])
    if not fixed_p.is_deterministic():
        raise AssertionError("randomness fixing left random atoms behind")
    report = {
        "assignments": n_assign,
        "chosen": {str(k): int(v) for k, v in chosen.items()},
        "advantage": float(advs[r_star]),
        "advantage_randomized": adv_before,
        "identity": False,
    }
    return fixed_p, report


# -- stage 3: transcript tree ------------------------------------------------


@dataclass
class XndTreeArtifact:
    """Transcript tree with its block spaces and provenance report."""

    root: object
    spaces: list  # BlockSpace per block (tree index order)
    block_ids: list  # original 1-based block index per tree block
    block_nodes: list  # input nodes per tree block, x-part order
    lambdas: list  # per tree block: sorted aux senders with a noise vector
    leaf_weighting: dict  # transcript path -> +/-1, from the last bit
    eps_d: float
    report: dict = field(default_factory=dict)

    def conditionals_for(self, x_key: tuple) -> list:
        """Per-block law over extended values given the input bits.

        ``x_key`` lists input bits in canonical input order (block-major).
        """
        out = []
        pos = 0
        for b, sp in enumerate(self.spaces):
            nb = len(self.block_nodes[b])
            x_part = tuple(x_key[pos : pos + nb])
            pos += nb
            vec = []
            for val in sp.values:
                if val[0] != x_part:
                    vec.append(0.0)
                    continue
                prob = 1.0
                for zvec in val[1]:
                    for zb in zvec:
                        prob *= self.eps_d if zb else 1.0 - self.eps_d
                vec.append(prob)
            out.append(np.array(vec))
        return out


class _TreeCtx:
    """Vectorized evaluation of a transmission over one block's values."""

    def __init__(self, own, x_cols, z_cols, prefix_bits, t0_of, aux_new_index):
        self.own = own
        self.x_cols = x_cols  # input node -> array over values (or None)
        self.z_cols = z_cols
        self.prefix_bits = prefix_bits  # aux schedule index -> bit
        self.t0_of = t0_of
        self.aux_new_index = aux_new_index

    def own_input(self, index):
        return self.own

    def rx(self, t):
        if t in self.t0_of:
            v = self.t0_of[t]
            x = self.x_cols.get(v)
            if x is None:
                return 0
            return x ^ self.z_cols[v]
        return self.prefix_bits[self.aux_new_index[t]]

    def rand(self, i):
        raise ValueError("tree construction requires a deterministic protocol")

    noise = rand

    def mask(self, src, j):
        raise ValueError("tree construction requires a deterministic protocol")


def to_xnd_tree(
    p2: Protocol, aux_block_of=None, mu_blocks=None, max_depth=16
) -> XndTreeArtifact:
    """Unroll the auxiliary transcript of a deterministic noisy-copy
    protocol into an oblivious binary decision tree.

    Each auxiliary transmission becomes one level; its sender's reads of
    the input broadcasts appear as x XOR z with one noise vector z per
    (block, sender) pair shared across that sender's levels.  Reads of
    broadcasts from non-neighbors evaluate to 0 in the protocol; the
    tree's query simply ignores those coordinates and the pair is
    recorded as an added edge (the adjacency normalization).  Levels
    reading no input at all are assigned the first block; their branch
    is constant across its values.
    """
    if p2.klass != NOISY_COPY:
        raise ValueError("expects a noisy-copy protocol")
    if not p2.is_deterministic():
        raise ValueError("fix internal randomness before building the tree")
    eps_d = None
    t0_of = {}  # schedule index of broadcast -> input node
    aux_sched = []
    for t, tr in enumerate(p2.schedule):
        if isinstance(p2.roles[tr.sender], InputRole):
            t0_of[t] = tr.sender
            e = p2.tx_eps(tr)
            if eps_d is None:
                eps_d = e
            elif eps_d != e:
                raise ValueError("input broadcasts must share one noise level")
        else:
            aux_sched.append((t, tr))
    T = len(aux_sched)
    if T > max_depth:
        raise TreeCapExceeded(f"transcript length {T} exceeds the tree cap")
    if T == 0:
        raise ValueError("protocol has no auxiliary transcript")
    aux_new_index = {t: i for i, (t, _tr) in enumerate(aux_sched)}
    blocks = p2.blocks()
    block_ids = sorted(blocks)
    block_index = {j: i for i, j in enumerate(block_ids)}
    node_block = {v: j for j, vs in blocks.items() for v in vs}

    # per level: the block it reads, its ignored (non-adjacent) reads
    level_block: list = []
    level_reads: list = []
    added_edges: list = []
    lambdas = [set() for _ in block_ids]
    for t, tr in aux_sched:
        read_blocks = set()
        reads = {}
        for atom in exprs.atoms(tr.expr):
            if isinstance(atom, Received) and atom.t in t0_of:
                v = t0_of[atom.t]
                if p2.is_neighbor(tr.sender, v):
                    read_blocks.add(node_block[v])
                    reads[v] = atom.t
        if aux_block_of and tr.sender in aux_block_of:
            declared = aux_block_of[tr.sender]
            if read_blocks - {declared}:
                raise ValueError(
                    f"level sender {tr.sender} reads outside its block"
                )
            j = declared
        elif len(read_blocks) > 1:
            raise ValueError(
                f"transmission {t} reads several blocks; not a single query"
            )
        else:
            j = read_blocks.pop() if read_blocks else block_ids[0]
        b = block_index[j]
        level_block.append(b)
        level_reads.append(reads)
        if reads:
            lambdas[b].add(tr.sender)
            for v in blocks[j]:
                if v not in reads:
                    added_edges.append((tr.sender, v))
    lambdas = [sorted(s) for s in lambdas]

    # block spaces: values (x part, z parts per lambda)
    if mu_blocks is None:
        mu_blocks = [None] * len(block_ids)
    spaces = []
    value_index = []
    for b, j in enumerate(block_ids):
        nodes = blocks[j]
        nb = len(nodes)
        nz = len(lambdas[b])
        if 2 ** (nb * (1 + nz)) > MAX_BLOCK_SPACE:
            raise TreeCapExceeded(f"block {j} extended value space too large")
        mu_j = mu_blocks[b]
        values, probs, hs = [], [], []
        for x in itertools.product((0, 1), repeat=nb):
            px = mu_j[x] if mu_j is not None else 0.5**nb
            for zs in itertools.product(
                itertools.product((0, 1), repeat=nb), repeat=nz
            ):
                pz = 1.0
                for zvec in zs:
                    for zb in zvec:
                        pz *= eps_d if zb else 1.0 - eps_d
                values.append((x, zs))
                probs.append(px * pz)
                hs.append(-1 if sum(x) % 2 else 1)
        spaces.append(
            trees.BlockSpace(tuple(values), tuple(probs), tuple(hs))
        )
        value_index.append({val: i for i, val in enumerate(values)})

    # per-level branch tables as a function of the prefix bits they read;
    # only the coordinates the sender adjacently read are exposed, the
    # query ignores the rest (they were 0 in the protocol)
    col_cache: dict = {}

    def level_columns(level):
        got = col_cache.get(level)
        if got is not None:
            return got
        t, tr = aux_sched[level]
        b = level_block[level]
        sp = spaces[b]
        nodes = blocks[block_ids[b]]
        x_cols, z_cols = {}, {}
        sender = tr.sender
        if level_reads[level]:
            li = lambdas[b].index(sender)
            for vi, v in enumerate(nodes):
                if v not in level_reads[level]:
                    continue
                x_cols[v] = np.array(
                    [val[0][vi] for val in sp.values], dtype=np.int64
                )
                z_cols[v] = np.array(
                    [val[1][li][vi] for val in sp.values], dtype=np.int64
                )
        col_cache[level] = (x_cols, z_cols)
        return col_cache[level]

    def branch_for(level, prefix_bits):
        t, tr = aux_sched[level]
        sp = spaces[level_block[level]]
        x_cols, z_cols = level_columns(level)
        role = p2.roles[tr.sender]
        ctx = _TreeCtx(
            role.fixed_bit, x_cols, z_cols, prefix_bits, t0_of, aux_new_index
        )
        out = exprs.evaluate(tr.expr, ctx)
        out = np.broadcast_to(np.asarray(out, dtype=np.int64), (sp.size,))
        return tuple(int(x) for x in out)

    memo: dict = {}

    def build(prefix):
        i = len(prefix)
        if i == T:
            return trees._LEAF
        key = prefix
        got = memo.get(key)
        if got is not None:
            return got
        branch = branch_for(i, prefix)
        children = (build(prefix + (0,)), build(prefix + (1,)))
        node = trees.Node(level_block[i], branch, children)
        memo[key] = node
        return node

    root = build(())
    leaf_weighting = {
        path: (1 if path[-1] == 0 else -1)
        for path in itertools.product((0, 1), repeat=T)
    }
    return XndTreeArtifact(
        root=root,
        spaces=spaces,
        block_ids=block_ids,
        block_nodes=[blocks[j] for j in block_ids],
        lambdas=lambdas,
        leaf_weighting=leaf_weighting,
        eps_d=eps_d,
        report={
            "depth": T,
            "added_edges": added_edges,
            "level_block": level_block,
            "level_sender": [tr.sender for _t, tr in aux_sched],
        },
    )


def check_leaf_law(p2: Protocol, art: XndTreeArtifact, cap_bits=24) -> float:
    """Max-over-inputs TV between the protocol's auxiliary transcript law
    and the tree's leaf law."""
    probes = []
    for t, tr in enumerate(p2.schedule):
        if isinstance(p2.roles[tr.sender], AuxRole):
            probes.append((tr.sender, tr.expr))
    ch = engine.exact_channel(p2, outcome="probes", probes=probes, cap_bits=cap_bits)
    worst = 0.0
    for key, row in ch.rows.items():
        law = trees.leaf_law(art.root, art.conditionals_for(key))
        tree_row = {}
        for path, prob in law.items():
            code = 0
            for bit in path:
                code = (code << 1) | bit
            tree_row[code] = tree_row.get(code, 0.0) + prob
        support = set(row) | set(tree_row)
        tv = 0.5 * sum(abs(row.get(c, 0.0) - tree_row.get(c, 0.0)) for c in support)
        worst = max(worst, tv)
    return worst


# -- full chain --------------------------------------------------------------


def stage_advantage(p: Protocol, f, mu, cap_bits=24) -> float:
    ch = engine.exact_channel(p, cap_bits=cap_bits)
    return adv_mod.advantage_exact(ch, f, mu).value


def protocol_to_read_once(
    p: Protocol,
    d: int,
    mu_blocks=None,
    aux_block_of=None,
    D=None,
    alpha_c: float = 1.0,
    cap_bits: int = 24,
):
    """Full chain to a read-once noisy tree with stage-wise advantages
    and per-collapsed-query certificates.

    ``mu_blocks`` optionally gives each block's input law (uniform by
    default).  The certificate compares every collapsed query's exact
    advantage against the closed-form bound at the query's actual depth
    and at the budget depth 3D (when ``D`` is given).
    """
    f = adv_mod.parity_sign
    if p.schedule and p.output_expr != p.schedule[-1].expr:
        raise ValueError(
            "the chain requires the declared output to be the last "
            "transmitted bit"
        )
    blocks = p.blocks()
    block_ids = sorted(blocks)
    if mu_blocks is None:
        mu_list = [
            adv_mod.uniform_distribution(len(blocks[j])) for j in block_ids
        ]
    else:
        mu_list = list(mu_blocks)
    mu = adv_mod.product_distribution(mu_list)

    adv0 = stage_advantage(p, f, mu, cap_bits)
    p1, rep1 = to_semi_noisy(p)
    adv1 = stage_advantage(p1, f, mu, cap_bits)
    p2, rep2 = to_noisy_copy(p1, d, f=f, mu=mu, cap_bits=cap_bits)
    adv2 = stage_advantage(p2, f, mu, cap_bits)
    art = to_xnd_tree(p2, aux_block_of=aux_block_of, mu_blocks=mu_list)
    adv_tree, _w = trees.tree_advantage(art.root, art.spaces)
    ordered, cert = trees.reorder(art.root, art.spaces)
    adv_ordered, _w = trees.tree_advantage(ordered, art.spaces)
    readonce, _rec = trees.collapse_to_read_once(ordered)
    adv_ro, _weighting, alphas = trees.readonce_advantage(readonce, art.spaces)

    query_certs = []
    counts = trees.query_multiset(ordered)
    for b, alpha in sorted(alphas.items()):
        n_b = len(art.block_nodes[b])
        ell = counts.get(b, 0)
        entry = {
            "block": art.block_ids[b],
            "levels": ell,
            "alpha": alpha,
            "bound_at_levels": adv_mod.alpha_bound(n_b, ell, art.eps_d, alpha_c),
        }
        if D is not None:
            entry["bound_at_3D"] = adv_mod.alpha_bound(
                n_b, 3 * D, art.eps_d, alpha_c
            )
        query_certs.append(entry)

    report = {
        "advantages": {
            "general": adv0,
            "semi_noisy": adv1,
            "noisy_copy": adv2,
            "xnd_tree": adv_tree,
            "ordered": adv_ordered,
            "read_once": adv_ro,
        },
        "monotone": bool(
            adv0 <= adv1 + 1e-9
            and adv1 <= adv2 + 1e-9
            and adv2 <= adv_tree + 1e-9
            and adv_tree <= adv_ordered + 1e-9
            and adv_ordered <= adv_ro + 1e-9
        ),
        "semi_noisy": rep1,
        "noisy_copy": rep2,
        "tree": art.report,
        "reorder_certificate": cert,
        "query_certificates": query_certs,
        "alphas": {art.block_ids[b]: a for b, a in alphas.items()},
    }
    return readonce, art, report
