"""Multiscale graph on a separated net of the support, and the closed walk
that turns it into a Lipschitz curve.

The graph starts as stars inside every 3Q with l(Q) = l0.  At each doubling
scale l, every dyadic Q of side 2l whose 3Q meets two or more components
of the graph restricted to 7Q gets one edge per component, joining a
representative of it to a fixed point of 3Q.  Edges added at one scale
never see each other: every square reads the graph as it stood before
the scale started.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .dyadic import Square, cell_keys, dilate, scale_of

_BLOCK3 = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
_BLOCK7 = [(a, b) for a in range(-3, 4) for b in range(-3, 4)]


@dataclass(frozen=True, eq=False)
class Net:
    points: np.ndarray
    source_index: np.ndarray  # row of each net point in the source measure
    separation: float
    source: str = ""

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class BaseTag:
    Q: Square


@dataclass(frozen=True)
class InductiveTag:
    Q: Square
    scale: float


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def count(self):
        return sum(1 for i in range(len(self.parent)) if self.find(i) == i)


class NetGraph:
    """Undirected simple graph on the net vertices with tagged edges."""

    def __init__(self, net):
        self.net = net
        self.edges = []  # (i, j, tag) with i < j
        self._seen = set()
        self.components = UnionFind(len(net))

    def add_edge(self, i, j, tag):
        """Add {i, j} unless it is a loop or already present; True if added."""
        i, j = int(i), int(j)
        if i == j:
            return False
        key = (min(i, j), max(i, j))
        if key in self._seen:
            return False
        self._seen.add(key)
        self.edges.append((key[0], key[1], tag))
        self.components.union(*key)
        return True

    def edge_array(self):
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array([(i, j) for i, j, _ in self.edges], dtype=np.int64)

    def edge_length(self, i, j):
        p = self.net.points
        return math.hypot(p[i, 0] - p[j, 0], p[i, 1] - p[j, 1])

    def total_length(self):
        return math.fsum(self.edge_length(i, j) for i, j, _ in self.edges)

    def to_json(self):
        def tag(t):
            d = {"kind": "base" if isinstance(t, BaseTag) else "inductive", "Q": t.Q.to_json()}
            if isinstance(t, InductiveTag):
                d["scale"] = t.scale
            return d
        return {"separation": self.net.separation, "source": self.net.source,
                "vertices": self.net.points.tolist(),
                "edges": [[i, j, tag(t)] for i, j, t in self.edges]}


@dataclass(frozen=True)
class LedgerEntry:
    Q: Square
    scale: float
    added_length: float
    edge_count: int


@dataclass
class LengthLedger:
    P: Square
    tau: float
    l0: float
    base_total: float = 0.0
    base_square_max: float = 0.0  # largest single star length
    inductive_entries: list = field(default_factory=list)
    separation_failures: list = field(default_factory=list)  # (Q, scale, min distance)
    max_edge_ratio: float = 0.0  # max inductive edge length / scale
    edge_lengths: list = field(default_factory=list, repr=False)  # every added edge, in order

    @property
    def Q_set(self):
        """Squares inside 7P where the inductive step added something."""
        P7 = dilate(self.P, 7)
        return [e.Q for e in self.inductive_entries if e.Q.is_inside(P7)]

    @property
    def total_length(self):
        return math.fsum(self.edge_lengths)

    @property
    def max_edge_count(self):
        return max((e.edge_count for e in self.inductive_entries), default=0)

    def lbound_constants(self):
        """(C1, C2) with total = C1 tau^-2 l(P) + C2 sum_Q l(Q) split term by term."""
        c1 = self.base_total * self.tau ** 2 / self.P.side
        c2 = max((e.added_length / e.Q.side for e in self.inductive_entries), default=0.0)
        return c1, c2

    def lbound_holds(self):
        c1, c2 = self.lbound_constants()
        rhs = c1 * self.P.side / self.tau ** 2 + c2 * math.fsum(e.Q.side for e in self.inductive_entries)
        return self.total_length <= rhs * (1 + 1e-12)

    def to_json(self):
        c1, c2 = self.lbound_constants()
        return {"P": self.P.to_json(), "tau": self.tau, "l0": self.l0, "base_total": self.base_total,
                "base_square_max": self.base_square_max, "total_length": self.total_length,
                "max_edge_ratio": self.max_edge_ratio, "max_edge_count": self.max_edge_count,
                "C1": c1, "C2": c2, "Q_count": len(self.Q_set),
                "separation_failures": [[q.to_json(), s, d] for q, s, d in self.separation_failures],
                "inductive_entries": [{"Q": e.Q.to_json(), "scale": e.scale, "added_length": e.added_length,
                                       "edge_count": e.edge_count} for e in self.inductive_entries]}


def packing_constant(tau):
    """C with star length <= C tau^-2 l0 for a tau l0-separated set in a 3 l0 square.

    At most (3 + tau)^2 / (pi tau^2 / 4) points fit; each edge is at most
    the diagonal 3 sqrt(2) l0.
    """
    return 12 * math.sqrt(2) * (3 + tau) ** 2 / math.pi


# ------------------------------------------------------------------ net

def build_net(mu, tau, l0):
    """Greedy maximal tau*l0-separated subset, scanning support points in index order."""
    if not 0 < tau < 1 / 16:
        raise ValueError("tau must lie in (0, 1/16)")
    scale_of(l0)
    sep = tau * l0
    if sep < 2 * mu.mesh * (1 - 1e-12):
        raise ValueError(f"net separation {sep} is finer than twice the mesh {mu.mesh}")
    pts = mu.points
    keys = np.floor(pts / sep).astype(np.int64)
    grid = {}
    chosen = []
    for i in range(len(pts)):
        kx, ky = int(keys[i, 0]), int(keys[i, 1])
        x, y = pts[i]
        close = False
        for a, b in _BLOCK3:
            for c in grid.get((kx + a, ky + b), ()):
                if math.hypot(x - pts[c, 0], y - pts[c, 1]) < sep:
                    close = True
                    break
            if close:
                break
        if not close:
            grid.setdefault((kx, ky), []).append(i)
            chosen.append(i)
    idx = np.array(chosen, dtype=np.int64)
    return Net(pts[idx].copy(), idx, sep, mu.label)


# ------------------------------------------------------------------ steps

def _cells(points, j):
    cells = {}
    for v, (kx, ky) in enumerate(cell_keys(points, j).tolist()):
        cells.setdefault((kx, ky), []).append(v)
    return cells


def _block(cells, kx, ky, block):
    out = []
    for a, b in block:
        out.extend(cells.get((kx + a, ky + b), ()))
    out.sort()
    return out


def _candidates(cells):
    cand = set()
    for kx, ky in cells:
        for a, b in _BLOCK3:
            cand.add((kx + a, ky + b))
    return sorted(cand)


def _fixed_point(points, members, Q):
    """Member nearest to the centre of Q; lowest index on exact ties."""
    p = points[members]
    d = np.hypot(p[:, 0] - Q.cx, p[:, 1] - Q.cy)
    return members[int(np.argmin(d))]


def base_step(net, l0):
    """Star edges (i, j, BaseTag(Q)) for every scale-l0 dyadic Q with 3Q meeting the net."""
    j = scale_of(l0)
    cells = _cells(net.points, j)
    out = []
    for kx, ky in _candidates(cells):
        members = _block(cells, kx, ky, _BLOCK3)
        if len(members) < 2:
            continue
        Q = Square.dyadic(j, kx, ky)
        f = _fixed_point(net.points, members, Q)
        tag = BaseTag(Q)
        out.extend((min(f, v), max(f, v), tag) for v in members if v != f)
    return out


def _local_components(edges, verts, n):
    """Components of the graph on `verts` (sorted) using edges with both ends in it."""
    if len(verts) == 0:
        return []
    inv = np.full(n, -1, dtype=np.int64)
    inv[verts] = np.arange(len(verts))
    if len(edges):
        a, b = inv[edges[:, 0]], inv[edges[:, 1]]
        keep = (a >= 0) & (b >= 0)
        a, b = a[keep], b[keep]
    else:
        a = b = np.zeros(0, dtype=np.int64)
    adj = sparse.coo_matrix((np.ones(len(a)), (a, b)), shape=(len(verts), len(verts)))
    k, lab = connected_components(adj, directed=False)
    verts = np.asarray(verts)
    comps = [verts[lab == c] for c in range(k)]
    comps.sort(key=lambda c: int(c[0]))
    return comps


def subgraph_components(g, Q):
    """Partition of the net vertices in 7Q by connectivity through edges with
    both endpoints in 7Q.  Components come sorted, ordered by smallest vertex."""
    verts = np.flatnonzero(dilate(Q, 7).contains(g.net.points))
    return _local_components(g.edge_array(), verts, len(g.net))


def _min_gap(points, comps):
    """Smallest distance between vertices of two different components."""
    best = math.inf
    trees = [cKDTree(points[c]) for c in comps]
    for a in range(len(comps)):
        for b in range(a + 1, len(comps)):
            d, _ = trees[b].query(points[comps[a]])
            best = min(best, float(d.min()))
    return best


def separation_check(g, Q, ell, return_gap=False):
    """True when the components of the 7Q-subgraph that meet 3Q are ell-separated within 3Q."""
    in3 = dilate(Q, 3).contains(g.net.points)
    comps = [c[in3[c]] for c in subgraph_components(g, Q)]
    comps = [c for c in comps if len(c)]
    gap = _min_gap(g.net.points, comps) if len(comps) > 1 else math.inf
    return (gap >= ell, gap) if return_gap else gap >= ell


def _inductive_scan(g, ell, check=False):
    j = scale_of(2 * ell)
    pts = g.net.points
    n = len(pts)
    cells = _cells(pts, j)
    edges = g.edge_array()
    out, entries, failures = [], [], []
    for kx, ky in _candidates(cells):
        in3 = _block(cells, kx, ky, _BLOCK3)
        if len(in3) < 2:
            continue
        comps = _local_components(edges, _block(cells, kx, ky, _BLOCK7), n)
        in3_set = np.zeros(n, dtype=bool)
        in3_set[in3] = True
        meets = [c[in3_set[c]] for c in comps]
        meets = [c for c in meets if len(c)]
        if len(meets) < 2:
            continue
        Q = Square.dyadic(j, kx, ky)
        if check:
            gap = _min_gap(pts, meets)
            if gap < ell:
                failures.append((Q, ell, gap))
        f = _fixed_point(pts, in3, Q)
        tag = InductiveTag(Q, ell)
        added = []
        for c in meets:
            r = int(c[0])
            if r != f:
                added.append((min(f, r), max(f, r), tag))
        out.extend(added)
        length = math.fsum(math.hypot(*(pts[a] - pts[b])) for a, b, _ in added)
        entries.append(LedgerEntry(Q, ell, length, len(added)))
    return out, entries, failures


def inductive_step(g, ell):
    """New edges for scale ell, all read from the graph as it stands."""
    return _inductive_scan(g, ell)[0]


def build_graph(mu, P, tau, l0, check_separation=False):
    """Base step at l0, then the inductive step at l0, 2 l0, ..., l(P)/2."""
    if P.index is None:
        raise ValueError("P must be a dyadic square")
    d = P.index[0] - scale_of(l0)
    if d < 1:
        raise ValueError("l0 must be l(P) 2^-d with d >= 1")
    net = build_net(mu, tau, l0)
    g = NetGraph(net)
    led = LengthLedger(P, tau, l0)
    stars = {}
    for i, j, t in base_step(net, l0):
        if g.add_edge(i, j, t):
            stars.setdefault(t.Q, []).append(g.edge_length(i, j))
    led.edge_lengths = [g.edge_length(i, j) for i, j, _ in g.edges]
    led.base_total = math.fsum(led.edge_lengths)
    stars = {q: math.fsum(v) for q, v in stars.items()}
    led.base_square_max = max(stars.values(), default=0.0)
    for k in range(d):
        ell = l0 * 2 ** k
        new, entries, failures = _inductive_scan(g, ell, check_separation)
        led.separation_failures.extend(failures)
        by_q = {}
        for i, j, t in new:
            if g.add_edge(i, j, t):
                by_q.setdefault(t.Q, []).append(g.edge_length(i, j))
                led.edge_lengths.append(g.edge_length(i, j))
                led.max_edge_ratio = max(led.max_edge_ratio, g.edge_length(i, j) / ell)
        for e in entries:
            # edges already present from an earlier square add no length
            lens = by_q.get(e.Q, [])
            led.inductive_entries.append(LedgerEntry(e.Q, ell, math.fsum(lens), len(lens)))
    return g, led


# ------------------------------------------------------------------ walk

@dataclass(frozen=True, eq=False)
class PolylineCurve:
    vertex_walk: np.ndarray
    points: np.ndarray
    cumulative_length: np.ndarray
    total: float
    lip_constant: float

    def __call__(self, t):
        """Constant-speed parametrization on [0, 1]."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        if self.total == 0:
            return np.broadcast_to(self.points[0], t.shape + (2,)).copy()
        s = t * self.total
        x = np.interp(s, self.cumulative_length, self.points[:, 0])
        y = np.interp(s, self.cumulative_length, self.points[:, 1])
        return np.stack([x, y], axis=-1)

    def distance_to(self, pts):
        """Distance from each point to the polyline."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if len(self.points) == 1:
            return np.hypot(*(pts - self.points[0]).T)
        a, b = self.points[:-1], self.points[1:]
        ab = b - a
        L2 = (ab ** 2).sum(axis=1)
        best = np.full(len(pts), np.inf)
        for s in range(0, len(a), 512):
            A, AB, l2 = a[s:s + 512], ab[s:s + 512], L2[s:s + 512]
            ap = pts[:, None, :] - A[None]
            t = np.where(l2 > 0, (ap * AB[None]).sum(-1) / np.where(l2 > 0, l2, 1), 0.0)
            t = np.clip(t, 0.0, 1.0)
            q = A[None] + t[..., None] * AB[None]
            best = np.minimum(best, np.hypot(*(pts[:, None, :] - q).transpose(2, 0, 1)).min(axis=1))
        return best

    def to_csv_rows(self, samples=1001):
        t = np.linspace(0.0, 1.0, samples)
        return np.column_stack([t, self(t)])


def walk_component(g, P):
    """Vertices of the single component of the 7P-subgraph that meets 3P."""
    in3 = dilate(P, 3).contains(g.net.points)
    comps = [c for c in subgraph_components(g, P) if in3[c].any()]
    if not comps:
        raise ValueError("no component of the graph meets 3P")
    if len(comps) > 1:
        raise ValueError(f"{len(comps)} components meet 3P; the construction is incomplete")
    return comps[0]


def euler_walk(g, P):
    """Closed walk traversing every edge of the 3P-component exactly twice."""
    comp = walk_component(g, P)
    inside = np.zeros(len(g.net), dtype=bool)
    inside[comp] = True
    E = g.edge_array()
    if len(E):
        E = E[inside[E[:, 0]] & inside[E[:, 1]]]
    m = len(E)
    adj = {int(v): [] for v in comp}
    # edge e and e + m are the two copies of one edge
    for e in range(2 * m):
        a, b = E[e % m]
        adj[int(a)].append((e, int(b)))
        adj[int(b)].append((e, int(a)))
    used = [False] * (2 * m)
    ptr = {v: 0 for v in adj}
    start = int(comp[0])
    stack, path = [start], []
    while stack:
        v = stack[-1]
        lst = adj[v]
        while ptr[v] < len(lst) and used[lst[ptr[v]][0]]:
            ptr[v] += 1
        if ptr[v] < len(lst):
            e, u = lst[ptr[v]]
            used[e] = True
            stack.append(u)
        else:
            path.append(stack.pop())
    walk = np.array(path[::-1], dtype=np.int64)
    pts = g.net.points[walk]
    seg = np.hypot(*np.diff(pts, axis=0).T) if len(walk) > 1 else np.zeros(0)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = math.fsum(seg)
    cum[-1] = total if len(cum) > 1 else 0.0
    return PolylineCurve(walk, pts, cum, total, total)
