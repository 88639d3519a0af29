"""Random planar networks and their cluster decomposition.

Networks are N points placed uniformly at random in the unit square, with
an edge between every pair at Euclidean distance strictly below the
transmission radius R.  The decomposition tessellates the square into
floor(1/R)^2 cells, picks a spread-out family of cells (row and column
congruent to 1 mod 3), filters them by the transmission load of their
neighborhoods, and turns the lightest-transmitting nodes of each surviving
cell into an input block; everything else becomes auxiliary with input
fixed to 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyS2, UndersizedCell
from .rng import RngStream


class PlanarNetwork:
    """Node positions in [0,1]^2 with radius-R adjacency (strict <)."""

    def __init__(self, positions, radius: float, seed_record=None):
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise ValueError("positions must be an (N, 2) array")
        if positions.size and (positions.min() < 0.0 or positions.max() > 1.0):
            raise ValueError("positions must lie in the unit square")
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.positions = positions
        self.radius = float(radius)
        self.seed_record = seed_record
        self._tree = None
        self._adjacency = None

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.positions)
        return self._tree

    def neighbors(self, i: int) -> list:
        """Indices at distance < radius from node i (excluding i)."""
        if self.radius == 0:
            return []
        cand = self.tree.query_ball_point(self.positions[i], self.radius)
        p = self.positions
        out = [
            j
            for j in cand
            if j != i and np.linalg.norm(p[j] - p[i]) < self.radius
        ]
        return sorted(out)

    def edge_pairs(self):
        """All edges as a sorted list of (i, j) with i < j."""
        if self.radius == 0:
            return []
        pairs = self.tree.query_pairs(self.radius, output_type="ndarray")
        if len(pairs):
            # query_pairs uses <=; enforce the strict-< rule.
            d = np.linalg.norm(
                self.positions[pairs[:, 0]] - self.positions[pairs[:, 1]], axis=1
            )
            pairs = pairs[d < self.radius]
        return sorted(map(tuple, pairs.tolist())) if len(pairs) else []

    @property
    def adjacency(self) -> dict:
        """node -> sorted neighbor list; built lazily and cached."""
        if self._adjacency is None:
            adj = {i: [] for i in range(self.n_nodes)}
            for i, j in self.edge_pairs():
                adj[i].append(j)
                adj[j].append(i)
            self._adjacency = {i: sorted(v) for i, v in adj.items()}
        return self._adjacency

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            return False
        return float(np.linalg.norm(self.positions[i] - self.positions[j])) < self.radius

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "n": self.n_nodes,
                "radius": self.radius,
                "seed": self.seed_record,
                "positions": self.positions.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PlanarNetwork":
        obj = json.loads(text)
        net = cls(obj["positions"], obj["radius"], seed_record=obj.get("seed"))
        if net.n_nodes != obj["n"]:
            raise ValueError("node count mismatch in network file")
        return net


def sample_network(N: int, R: float, rng: RngStream) -> PlanarNetwork:
    """N iid uniform positions in the unit square with radius-R adjacency."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if R < 0:
        raise ValueError("R must be >= 0")
    positions = rng.numpy_generator().random((N, 2))
    return PlanarNetwork(positions, R, seed_record={"seed": rng.seed, "key": list(rng.key)})


def is_connected(net: PlanarNetwork) -> bool:
    """Whole-graph connectivity via union-find over the edge set."""
    n = net.n_nodes
    if n <= 1:
        return True
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    components = n
    for i, j in net.edge_pairs():
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
            if components == 1:
                return True
    return components == 1


def chernoff_bound(mu: float) -> float:
    """Tail bound exp(-0.15 mu) on Pr[X <= mu/2] for iid indicator sums."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return math.exp(-0.15 * mu)


@dataclass
class Tessellation:
    """Partition of the unit square into floor(1/R)^2 equal cells.

    Rows and columns are 1-based; a point on a gridline belongs to the
    lower-index cell.
    """

    m: int  # cells per side
    side: float
    cell_of: dict  # node -> (row, col)
    members: dict  # (row, col) -> sorted node list

    @property
    def M(self) -> int:
        return self.m * self.m


def tessellate(net: PlanarNetwork) -> Tessellation:
    if net.radius > 1:
        raise ValueError("tessellation requires R <= 1")
    m = int(math.floor(1.0 / net.radius))
    side = 1.0 / m
    cell_of = {}
    members = {(r, c): [] for r in range(1, m + 1) for c in range(1, m + 1)}
    for i, (x, y) in enumerate(net.positions):
        col = min(max(1, int(math.ceil(x / side))), m)
        row = min(max(1, int(math.ceil(y / side))), m)
        cell_of[i] = (row, col)
        members[(row, col)].append(i)
    return Tessellation(m=m, side=side, cell_of=cell_of, members=members)


def cell_neighborhood(tess: Tessellation, cell) -> list:
    """Cells within distance < R of ``cell``: the 3x3 block, clipped.

    With cell side >= R this is exactly the set of cells whose closed
    regions come within R of the cell's region.
    """
    r, c = cell
    out = []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            rr, cc = r + dr, c + dc
            if 1 <= rr <= tess.m and 1 <= cc <= tess.m:
                out.append((rr, cc))
    return out


@dataclass
class Decomposition:
    """Certified (n, k, d, D) cluster decomposition of a network."""

    n: int
    k: int
    d: float
    D: float
    input_blocks: list  # k sorted node lists, |block| == n
    aux_blocks: list  # k sorted node lists
    aux0: list
    cells: list = field(default_factory=list)  # (row, col) per block
    fixed_bit: int = 0

    @property
    def input_nodes(self) -> list:
        return sorted(v for blk in self.input_blocks for v in blk)

    def block_of(self) -> dict:
        """node -> block index (1..k) for input nodes, 0 for A_0 aux."""
        out = {}
        for j, blk in enumerate(self.input_blocks, start=1):
            for v in blk:
                out[v] = j
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": 1,
                "n": self.n,
                "k": self.k,
                "d": self.d,
                "D": self.D,
                "input_blocks": self.input_blocks,
                "aux_blocks": self.aux_blocks,
                "aux0": self.aux0,
                "cells": [list(c) for c in self.cells],
                "fixed_bit": self.fixed_bit,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Decomposition":
        obj = json.loads(text)
        return cls(
            n=obj["n"],
            k=obj["k"],
            d=obj["d"],
            D=obj["D"],
            input_blocks=obj["input_blocks"],
            aux_blocks=obj["aux_blocks"],
            aux0=obj["aux0"],
            cells=[tuple(c) for c in obj.get("cells", [])],
            fixed_bit=obj.get("fixed_bit", 0),
        )


def decompose(net: PlanarNetwork, tx_counts: dict, T: int) -> Decomposition:
    """Build the certified decomposition from a transmission profile.

    ``tx_counts`` maps node -> number of transmissions it makes in the
    protocol being decomposed; the counts must sum to ``T``.
    """
    total = sum(tx_counts.get(i, 0) for i in range(net.n_nodes))
    if total != T:
        raise ValueError(f"tx_counts sum to {total}, expected T={T}")
    tess = tessellate(net)
    N, M = net.n_nodes, tess.M
    mu = N / M
    for cell, nodes in tess.members.items():
        if len(nodes) < mu / 2:
            raise UndersizedCell(
                f"cell {cell} holds {len(nodes)} nodes, below mu/2 = {mu / 2:g}"
            )

    s1 = [
        (r, c)
        for r in range(1, tess.m + 1)
        for c in range(1, tess.m + 1)
        if r % 3 == 1 and c % 3 == 1
    ]
    D = 18 * T / M
    s2 = []
    for cell in s1:
        load = sum(
            tx_counts.get(i, 0)
            for nb in cell_neighborhood(tess, cell)
            for i in tess.members[nb]
        )
        if load < D:
            s2.append(cell)
    if not s2:
        raise EmptyS2("no cell passed the transmission filter")

    n = math.ceil(N / (4 * M))
    input_blocks, aux_blocks = [], []
    claimed = set()
    for cell in s2:
        ranked = sorted(tess.members[cell], key=lambda i: (tx_counts.get(i, 0), i))
        block = sorted(ranked[:n])
        input_blocks.append(block)
        claimed.update(block)
    for cell, block in zip(s2, input_blocks):
        aux = sorted(
            i
            for nb in cell_neighborhood(tess, cell)
            for i in tess.members[nb]
            if i not in block
        )
        aux_blocks.append(aux)
        claimed.update(aux)
    aux0 = sorted(set(range(N)) - claimed)
    return Decomposition(
        n=n,
        k=len(s2),
        d=D / n,
        D=D,
        input_blocks=input_blocks,
        aux_blocks=aux_blocks,
        aux0=aux0,
        cells=s2,
    )


def decompose_for_uniform_counts(net: PlanarNetwork) -> Decomposition:
    """Decompose assuming each node transmits exactly once (T = N)."""
    counts = {i: 1 for i in range(net.n_nodes)}
    return decompose(net, counts, net.n_nodes)


def verify_decomposition(net: PlanarNetwork, dec: Decomposition) -> dict:
    """Check the block-size and confinement properties, with witnesses."""
    report = {
        "p1_ok": True,
        "p1_witnesses": [],
        "p2_ok": True,
        "p2_witnesses": [],
        "partition_ok": True,
        "partition_witnesses": [],
    }
    for j, blk in enumerate(dec.input_blocks, start=1):
        if len(blk) != dec.n:
            report["p1_ok"] = False
            report["p1_witnesses"].append({"block": j, "size": len(blk)})

    seen = {}
    all_blocks = (
        [("I", j + 1, b) for j, b in enumerate(dec.input_blocks)]
        + [("A", j + 1, b) for j, b in enumerate(dec.aux_blocks)]
        + [("A", 0, dec.aux0)]
    )
    for kind, j, blk in all_blocks:
        for v in blk:
            if v in seen:
                report["partition_ok"] = False
                report["partition_witnesses"].append(
                    {"node": v, "blocks": [seen[v], (kind, j)]}
                )
            seen[v] = (kind, j)
    if len(seen) != net.n_nodes:
        report["partition_ok"] = False
        missing = sorted(set(range(net.n_nodes)) - set(seen))
        report["partition_witnesses"].append({"missing": missing[:10]})

    for j, blk in enumerate(dec.input_blocks, start=1):
        allowed = set(blk) | set(dec.aux_blocks[j - 1])
        for v in blk:
            for w in net.neighbors(v):
                if w not in allowed:
                    report["p2_ok"] = False
                    report["p2_witnesses"].append({"block": j, "edge": [v, w]})
    report["ok"] = report["p1_ok"] and report["p2_ok"] and report["partition_ok"]
    return report


def s1_neighborhoods_disjoint(net: PlanarNetwork, dec: Decomposition) -> bool:
    """Distinct selected cells must have disjoint cell neighborhoods."""
    tess = tessellate(net)
    seen = set()
    for cell in dec.cells:
        nb = set(cell_neighborhood(tess, cell))
        if nb & seen:
            return False
        seen |= nb
    return True
