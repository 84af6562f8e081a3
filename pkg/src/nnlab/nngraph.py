"""Directed nearest-neighbor graph on a torus sample and the origin's component."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import nn_scale
from .pointprocess import Sample, torus_distance

SMALL_COMPONENT = 12


class StructuralViolation(AssertionError):
    """A structural property of nearest-neighbor graphs failed; carries the offending sample."""

    def __init__(self, message: str, sample: Sample | None = None):
        super().__init__(message)
        self.sample = sample


@dataclass
class NNGraph:
    nn_index: np.ndarray
    nn_dist: np.ndarray
    in_degree: np.ndarray
    ties: int = 0
    rule: str = "nearest"

    @property
    def n_points(self) -> int:
        return len(self.nn_index)

    def in_neighbors(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR layout of the reversed edges: (order, starts)."""
        order = np.argsort(self.nn_index, kind="stable")
        starts = np.searchsorted(self.nn_index[order], np.arange(self.n_points + 1))
        return order, starts


# ---------------------------------------------------------------- NN kernels

@numba.njit(cache=True)
def _d2(pts, i, j, side):
    acc = 0.0
    for k in range(pts.shape[1]):
        dx = abs(pts[i, k] - pts[j, k])
        if side - dx < dx:
            dx = side - dx
        acc += dx * dx
    return acc


@numba.njit(cache=True)
def _shell_offsets(d, k):
    """Integer offsets with Chebyshev norm exactly k, one row each."""
    side = 2 * k + 1
    total = side**d
    inner = (side - 2) ** d if k > 0 else 0
    out = np.empty((total - inner, d), dtype=np.int64)
    off = np.empty(d, dtype=np.int64)
    row = 0
    for code in range(total):
        c = code
        on_shell = False
        for t in range(d):
            off[t] = c % side - k
            c //= side
            if off[t] == k or off[t] == -k:
                on_shell = True
        if on_shell or k == 0:
            out[row, :] = off
            row += 1
    return out


@numba.njit(cache=True)
def _grid_nn(pts, side, m):
    n, d = pts.shape
    h = side / m
    cell = np.empty((n, d), dtype=np.int64)
    cid = np.zeros(n, dtype=np.int64)
    for i in range(n):
        mult = 1
        for t in range(d):
            c = int(pts[i, t] / h)
            if c >= m:
                c = m - 1
            if c < 0:
                c = 0
            cell[i, t] = c
            cid[i] += c * mult
            mult *= m
    order = np.argsort(cid, kind="mergesort")
    spts = np.empty((n, d))
    for q in range(n):
        spts[q, :] = pts[order[q], :]
    ncell = m**d
    start = np.zeros(ncell + 1, dtype=np.int64)
    for i in range(n):
        start[cid[i] + 1] += 1
    for c in range(ncell):
        start[c + 1] += start[c]

    k_max = (m - 2) // 2  # largest k with 2k + 1 < m
    n_off = (2 * k_max + 1) ** d if k_max >= 0 else 0
    offs = np.empty((n_off, d), dtype=np.int64)
    shell_start = np.zeros(k_max + 2, dtype=np.int64)
    for k in range(k_max + 1):
        sh = _shell_offsets(d, k)
        shell_start[k + 1] = shell_start[k] + sh.shape[0]
        offs[shell_start[k]:shell_start[k + 1], :] = sh

    nn = np.full(n, -1, dtype=np.int64)
    best_d2 = np.full(n, np.inf)
    n_ties = 0
    slack = 1e-9 * h
    for q in range(n):
        i = order[q]
        best = np.inf
        bidx = -1
        cnt = 0
        k = 0
        while True:
            if k > k_max:
                # shells would wrap onto themselves: finish with a full scan
                for j in range(n):
                    if j == i:
                        continue
                    dd = _d2(pts, i, j, side)
                    if dd < best:
                        best = dd
                        bidx = j
                        cnt = 1
                    elif dd == best:
                        cnt += 1
                        if j < bidx:
                            bidx = j
                break
            for r in range(shell_start[k], shell_start[k + 1]):
                c = 0
                mult = 1
                for t in range(d):
                    ct = cell[i, t] + offs[r, t]
                    if ct < 0:
                        ct += m
                    elif ct >= m:
                        ct -= m
                    c += ct * mult
                    mult *= m
                for u in range(start[c], start[c + 1]):
                    j = order[u]
                    if j == i:
                        continue
                    acc = 0.0
                    for t in range(d):
                        dx = abs(pts[i, t] - spts[u, t])
                        if side - dx < dx:
                            dx = side - dx
                        acc += dx * dx
                    if acc < best:
                        best = acc
                        bidx = j
                        cnt = 1
                    elif acc == best:
                        cnt += 1
                        if j < bidx:
                            bidx = j
            # every unscanned point lies outside the (2k+1)^d block of cells
            lb = np.inf
            for t in range(d):
                lo = pts[i, t] - (cell[i, t] - k) * h
                hi = (cell[i, t] + k + 1) * h - pts[i, t]
                if lo < lb:
                    lb = lo
                if hi < lb:
                    lb = hi
            lb -= slack
            if lb > 0 and best < lb * lb:
                break
            k += 1
        nn[i] = bidx
        best_d2[i] = best
        if cnt > 1:
            n_ties += 1
    return nn, best_d2, n_ties


def grid_cells_per_side(n: int, d: int, side: float) -> int:
    m = int(side / nn_scale(d))
    cap = int(math.floor((2.0 * n) ** (1.0 / d) + 1e-9))
    return max(1, min(m, cap))


def nn_grid(points: np.ndarray, side: float, cells_per_side: int | None = None):
    """Grid-accelerated nearest neighbors under the torus metric.

    Returns (nn_index, squared_distance, tie_count); ties go to the smaller index.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n, d = pts.shape
    if n < 2:
        raise ValueError("need at least two points")
    m = cells_per_side or grid_cells_per_side(n, d, side)
    return _grid_nn(pts, float(side), int(m))


def nn_brute(points: np.ndarray, side: float, rank: int = 1, chunk: int = 512):
    """O(n^2) oracle; ``rank=2`` gives the second-nearest neighbor (used for mutation tests)."""
    pts = np.asarray(points, dtype=np.float64)
    n, d = pts.shape
    if n < rank + 1:
        raise ValueError("not enough points")
    nn = np.empty(n, dtype=np.int64)
    best = np.empty(n)
    ties = 0
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        acc = np.zeros((hi - lo, n))
        for k in range(d):
            dx = np.abs(pts[lo:hi, k][:, None] - pts[:, k][None, :])
            dx = np.minimum(dx, side - dx)
            acc += dx * dx
        acc[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        if rank == 1:
            idx = np.argmin(acc, axis=1)
        else:
            idx = np.argsort(acc, axis=1, kind="stable")[:, rank - 1]
        val = acc[np.arange(hi - lo), idx]
        ties += int(np.sum(np.sum(acc == val[:, None], axis=1) > 1))
        nn[lo:hi] = idx
        best[lo:hi] = val
    return nn, best, ties


def build_nn_graph(sample: Sample, rule: str = "nearest", method: str = "auto") -> NNGraph:
    """Directed NN graph over ``sample``.

    ``rule="second"`` links every point to its second-nearest neighbor instead;
    it exists only to demonstrate that the structural checks catch a wrong rule.
    """
    pts = sample.points
    side = sample.window.side
    if len(pts) < 2:
        raise ValueError("sample must have at least two points")
    if rule == "second":
        nn, d2, ties = nn_brute(pts, side, rank=2)
    elif rule != "nearest":
        raise ValueError(f"unknown rule {rule!r}")
    elif method == "brute" or (method == "auto" and len(pts) <= 32):
        nn, d2, ties = nn_brute(pts, side)
    else:
        nn, d2, ties = nn_grid(pts, side)
    in_degree = np.bincount(nn, minlength=len(pts))
    return NNGraph(nn, np.sqrt(d2), in_degree, int(ties), rule)


def max_in_degree(graph: NNGraph) -> int:
    return int(graph.in_degree.max())


# --------------------------------------------------------- origin component

@dataclass
class ComponentInfo:
    members: np.ndarray
    loop_pair: tuple[int, int]
    generation: dict
    extent: float
    diameter: float
    chain_points: int
    chain_norms: tuple
    longest_path_points: int
    max_member_nn_dist: float

    def to_json(self) -> dict:
        return {
            "members": [int(m) for m in self.members],
            "loop_pair": [int(x) for x in self.loop_pair],
            "generations": {str(k): int(v) for k, v in self.generation.items()},
            "extent": float(self.extent),
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def _adjacency(graph: NNGraph, order, starts, v: int) -> list[int]:
    nbrs = [int(x) for x in order[starts[v]:starts[v + 1]]]
    t = int(graph.nn_index[v])
    if t not in nbrs:
        nbrs.append(t)
    return nbrs


def component_of(graph: NNGraph, v: int, csr=None) -> list[int]:
    order, starts = csr if csr is not None else graph.in_neighbors()
    seen = {v}
    queue = deque([v])
    out = []
    while queue:
        u = queue.popleft()
        out.append(u)
        for w in _adjacency(graph, order, starts, u):
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return out


def directed_chain(origin: int, graph: NNGraph, sample: Sample | None = None):
    """Follow NN arrows from ``origin`` until a point repeats.

    Returns (points_touched, norms): the number of distinct points visited after
    the origin and their torus distances to the origin (empty if no sample).
    """
    nn = graph.nn_index
    visited = {origin}
    chain = []
    x = origin
    while True:
        x = int(nn[x])
        if x in visited:
            break
        visited.add(x)
        chain.append(x)
    norms = ()
    if sample is not None and chain:
        o = sample.points[origin]
        norms = tuple(float(v) for v in torus_distance(sample.points[chain], o, sample.window))
    return len(chain), norms


def longest_path_through(origin: int, component: ComponentInfo | list, graph: NNGraph,
                         csr=None) -> int:
    """Number of points on the longest simple path through ``origin``.

    With the mini-loop collapsed to one undirected edge the component is a tree,
    so the answer is 1 + the two deepest branch depths at the origin.
    """
    members = component.members if isinstance(component, ComponentInfo) else component
    order, starts = csr if csr is not None else graph.in_neighbors()
    depth = {origin: 0}
    branch_depth: dict[int, int] = {}
    branch_of = {origin: -1}
    queue = deque([origin])
    while queue:
        u = queue.popleft()
        for w in _adjacency(graph, order, starts, u):
            if w in depth:
                continue
            depth[w] = depth[u] + 1
            b = w if u == origin else branch_of[u]
            branch_of[w] = b
            branch_depth[b] = max(branch_depth.get(b, 0), depth[w])
            queue.append(w)
    if len(depth) != len(members):
        raise StructuralViolation("component traversal disagrees with member set")
    top = sorted(branch_depth.values(), reverse=True)[:2]
    return 1 + sum(top)


def origin_component(graph: NNGraph, sample: Sample, origin: int | None = None) -> ComponentInfo:
    origin = sample.origin_index if origin is None else origin
    nn = graph.nn_index
    csr = graph.in_neighbors()
    members = component_of(graph, origin, csr)
    mutual = [m for m in members if nn[nn[m]] == m]
    if len(mutual) != 2:
        raise StructuralViolation(
            f"origin component has {len(mutual)} mutual-NN endpoints, expected 2"
            f" (members={len(members)})", sample)

    x = origin
    for _ in range(len(members) + 1):
        if nn[nn[x]] == x:
            break
        x = int(nn[x])
    else:
        raise StructuralViolation("directed chain from origin never reaches a mini-loop", sample)
    loop_pair = (int(x), int(nn[x]))

    order, starts = csr
    gen = {loop_pair[0]: 1, loop_pair[1]: 1}
    queue = deque(loop_pair)
    while queue:
        u = queue.popleft()
        for w in _adjacency(graph, order, starts, u):
            if w not in gen:
                gen[w] = gen[u] + 1
                queue.append(w)

    pts = sample.points[members]
    norms = torus_distance(pts, sample.points[origin], sample.window)
    if len(members) > 1:
        diam = max(float(np.max(torus_distance(pts, p, sample.window))) for p in pts)
    else:
        diam = 0.0
    n_chain, chain_norms = directed_chain(origin, graph, sample)
    info = ComponentInfo(
        members=np.asarray(members, dtype=np.int64),
        loop_pair=loop_pair,
        generation=gen,
        extent=float(np.max(norms)),
        diameter=diam,
        chain_points=n_chain,
        chain_norms=chain_norms,
        longest_path_points=0,
        max_member_nn_dist=float(np.max(graph.nn_dist[members])),
    )
    info.longest_path_points = longest_path_through(origin, info, graph, csr)
    return info


# -------------------------------------------------------- structural suite

@numba.njit(cache=True)
def _max_flips_small(nn, comp_nodes, comp_start, max_size):
    """Largest orientation-flip count over simple paths in components of <= max_size points.

    Edge u->v is labeled +1 when nn[u] == v, -1 when nn[v] == u, 0 when both
    (the mini-loop edge is compatible with either orientation).
    """
    n = len(nn)
    local = np.full(n, -1, dtype=np.int64)
    worst = 0
    n_checked = 0
    for c in range(len(comp_start) - 1):
        a = comp_start[c]
        b = comp_start[c + 1]
        s = b - a
        if s > max_size or s < 2:
            continue
        n_checked += 1
        nodes = comp_nodes[a:b]
        for q in range(s):
            local[nodes[q]] = q
        adj = np.zeros((s, s), dtype=np.int64)
        lab = np.zeros((s, s), dtype=np.int64)
        for q in range(s):
            u = nodes[q]
            v = nn[u]
            lv = local[v]
            adj[q, lv] = 1
            adj[lv, q] = 1
        for q in range(s):
            for r in range(s):
                if adj[q, r] == 1:
                    f = nn[nodes[q]] == nodes[r]
                    g = nn[nodes[r]] == nodes[q]
                    if f and g:
                        lab[q, r] = 0
                    elif f:
                        lab[q, r] = 1
                    else:
                        lab[q, r] = -1
        path = np.empty(s, dtype=np.int64)
        nxt = np.empty(s, dtype=np.int64)
        last = np.empty(s, dtype=np.int64)
        flips = np.empty(s, dtype=np.int64)
        onpath = np.zeros(s, dtype=np.bool_)
        for src in range(s):
            top = 0
            path[0] = src
            nxt[0] = 0
            last[0] = 0
            flips[0] = 0
            onpath[src] = True
            while top >= 0:
                u = path[top]
                if nxt[top] >= s:
                    onpath[u] = False
                    top -= 1
                    continue
                w = nxt[top]
                nxt[top] += 1
                if adj[u, w] == 0 or onpath[w]:
                    continue
                lb = lab[u, w]
                fl = flips[top]
                ls = last[top]
                if lb != 0:
                    if ls != 0 and ls != lb:
                        fl += 1
                    ls = lb
                if fl > worst:
                    worst = fl
                top += 1
                path[top] = w
                nxt[top] = 0
                last[top] = ls
                flips[top] = fl
                onpath[w] = True
        for q in range(s):
            local[nodes[q]] = -1
    return worst, n_checked


def structural_report(graph: NNGraph, max_path_size: int = SMALL_COMPONENT) -> dict:
    """Scan every component of ``graph`` for the structural facts of NN graphs.

    Counts: components whose mutual-NN pair count is not exactly one, points on
    directed cycles of length >= 3, directed edges whose successor edge is not
    strictly shorter (mini-loop excluded), and the largest orientation-flip count
    over simple paths in components of at most ``max_path_size`` points.
    """
    nn = graph.nn_index
    n = len(nn)
    idx = np.arange(n)
    adj = coo_matrix((np.ones(n), (idx, nn)), shape=(n, n))
    n_comp, labels = connected_components(adj, directed=True, connection="weak")

    mutual = nn[nn] == idx
    pairs_per_comp = np.bincount(labels[mutual], minlength=n_comp) // 2
    odd = np.bincount(labels[mutual], minlength=n_comp) % 2
    bad_loop = int(np.sum((pairs_per_comp != 1) | (odd != 0)))

    # pointer doubling lands every point on its component's cycle
    f = nn.copy()
    for _ in range(max(1, int(math.ceil(math.log2(n))) + 1)):
        f = f[f]
    on_cycle = np.zeros(n, dtype=bool)
    on_cycle[f] = True
    long_cycle_points = int(np.sum(on_cycle & ~mutual))

    succ = graph.nn_dist[nn]
    not_decreasing = int(np.sum(~mutual & ~(succ < graph.nn_dist)))

    order = np.argsort(labels, kind="stable")
    comp_start = np.searchsorted(labels[order], np.arange(n_comp + 1))
    worst_flips, n_checked = _max_flips_small(nn, order, comp_start, max_path_size)
    return {
        "components": int(n_comp),
        "bad_loop_components": bad_loop,
        "long_cycle_points": long_cycle_points,
        "non_decreasing_edges": not_decreasing,
        "max_orientation_flips": int(worst_flips),
        "small_components_path_checked": int(n_checked),
        "ties": int(graph.ties),
    }


def structural_violations(report: dict) -> list[str]:
    out = []
    if report["bad_loop_components"]:
        out.append(f"{report['bad_loop_components']} component(s) without exactly one mini-loop")
    if report["long_cycle_points"]:
        out.append(f"{report['long_cycle_points']} point(s) on directed cycles of length >= 3")
    if report["non_decreasing_edges"]:
        out.append(f"{report['non_decreasing_edges']} chain step(s) without decreasing length")
    if report["max_orientation_flips"] > 1:
        out.append(f"a simple path with {report['max_orientation_flips']} orientation changes")
    return out
