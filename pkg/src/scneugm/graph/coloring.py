"""Degree-priority greedy coloring and the graphs built around it."""

from __future__ import annotations

import numpy as np

from ..wifi.network import PairIndicators, SlotAssignment, StationState


def _check_adjacency(adj) -> np.ndarray:
    adj = np.asarray(adj).astype(bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("adjacency must be square")
    if np.any(np.diag(adj)):
        raise ValueError("adjacency must have a zero diagonal")
    return adj


def greedy_color(adj) -> SlotAssignment:
    """Color the symmetrized graph, highest degree first, smallest free color.

    Ties in degree go to the lower vertex index. Colors start at 1.
    """
    adj = _check_adjacency(adj)
    sym = adj | adj.T
    k = len(sym)
    if k == 0:
        return SlotAssignment(np.zeros(0, dtype=int), 0)
    degree = sym.sum(axis=1)
    order = np.lexsort((np.arange(k), -degree))
    colors = np.zeros(k, dtype=int)
    for v in order:
        used = colors[sym[v]]
        used = used[used > 0]
        taken = np.zeros(len(used) + 2, dtype=bool)
        taken[used[used <= len(used) + 1]] = True
        taken[0] = True
        colors[v] = int(np.argmin(taken))
    return SlotAssignment(colors, int(colors.max()))


def is_proper(adj, assignment: SlotAssignment) -> bool:
    adj = _check_adjacency(adj)
    sym = adj | adj.T
    z = np.asarray(assignment.slot_of)
    return not np.any(sym & (z[:, None] == z[None, :]))


def chg_graph(indicators: PairIndicators) -> np.ndarray:
    """Contention-and-interference graph: an edge for every contending or hidden pair."""
    adj = indicators.either.copy()
    np.fill_diagonal(adj, False)
    return adj


def ifg_graph(states: list[StationState]) -> np.ndarray:
    """Interference graph: an edge when two STAs share at least one detectable AP."""
    k = len(states)
    if k == 0:
        return np.zeros((0, 0), dtype=bool)
    num_aps = max(int(s.ap_index.max()) for s in states) + 1
    member = np.zeros((k, num_aps), dtype=bool)
    for i, s in enumerate(states):
        member[i, s.ap_index] = True
    m = member.astype(np.int32)
    adj = (m @ m.T) > 0
    np.fill_diagonal(adj, False)
    return adj


def approx_optimal_slots(indicators: PairIndicators) -> int:
    """Greedy color count of the contention-and-interference graph."""
    return max(greedy_color(chg_graph(indicators)).num_slots, 1)


def multipartite_graph(assignment: SlotAssignment) -> np.ndarray:
    """Edges between every pair of STAs in different slots."""
    z = np.asarray(assignment.slot_of)
    return z[:, None] != z[None, :]
