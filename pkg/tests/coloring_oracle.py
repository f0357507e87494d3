"""Brute-force coloring oracle and the coloring property sweep."""

import numpy as np

from scneugm.graph.coloring import greedy_color, is_proper, multipartite_graph
from scneugm.wifi import SlotAssignment


def _colorable(sym: np.ndarray, colors: int) -> bool:
    k = len(sym)
    z = np.zeros(k, dtype=int)

    def place(v: int) -> bool:
        if v == k:
            return True
        used = set(z[:v][sym[v, :v]])
        # symmetry breaking: vertex v may open at most one new color
        for c in range(1, min(colors, int(z[:v].max(initial=0)) + 1) + 1):
            if c not in used:
                z[v] = c
                if place(v + 1):
                    return True
        z[v] = 0
        return False

    return place(0)


def chromatic_number(adj) -> int:
    """Exact chromatic number of the symmetrized graph by exhaustive search."""
    adj = np.asarray(adj, dtype=bool)
    sym = adj | adj.T
    if len(sym) == 0:
        return 0
    c = 1
    while not _colorable(sym, c):
        c += 1
    return c


def random_digraph(rng: np.random.Generator, k: int) -> np.ndarray:
    adj = rng.random((k, k)) < rng.uniform(0.0, 0.8)
    np.fill_diagonal(adj, False)
    return adj


def coloring_sweep(graphs: int, seed: int = 0) -> dict:
    """Counts of failures of each coloring property over random digraphs (K <= 12)."""
    rng = np.random.default_rng(seed)
    fails = {"improper": 0, "over_degree_bound": 0, "greedy_below_exact": 0,
             "mask_increases_exact": 0, "multipartite_mismatch": 0}
    for _ in range(graphs):
        k = int(rng.integers(1, 13))
        adj = random_digraph(rng, k)
        sym = adj | adj.T
        asg = greedy_color(adj)
        fails["improper"] += not is_proper(adj, asg)
        fails["over_degree_bound"] += asg.num_slots > int(sym.sum(axis=1).max()) + 1
        if k <= 8:
            exact = chromatic_number(adj)
            fails["greedy_below_exact"] += exact > asg.num_slots
            mask = rng.random((k, k)) < 0.5
            fails["mask_increases_exact"] += chromatic_number(adj & mask) > exact
        z_count = int(rng.integers(1, k + 1))
        labels = np.concatenate([np.arange(1, z_count + 1),
                                 rng.integers(1, z_count + 1, k - z_count)])
        target = SlotAssignment(rng.permutation(labels), z_count)
        rebuilt = greedy_color(multipartite_graph(target))
        same = np.array_equal(target.slot_of[:, None] == target.slot_of[None, :],
                              rebuilt.slot_of[:, None] == rebuilt.slot_of[None, :])
        fails["multipartite_mismatch"] += rebuilt.num_slots != z_count or not same
    return fails
