"""Weighted graphs, vertex measures, and exhaustions.

A weighted graph is a triple (vertices, edge weights b, vertex weights rho):
b is symmetric with zero diagonal and finite row sums, rho is strictly
positive and defines the counting-style measure mu(A) = sum of rho over A.
Everything downstream (Laplacians, heat kernels, compactness certificates)
is built on these three ingredients.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

# Edge weights below this are ignored for adjacency (x ~ y) but kept in sums,
# so connectivity does not flap on float dust.
ADJACENCY_EPS = 1e-15


class GraphFormatError(ValueError):
    """Raised when a graph file or constructor input is malformed."""


@dataclass(frozen=True)
class WeightedGraph:
    """Immutable weighted graph. Vertex order fixes all matrix indexing."""

    vertices: tuple[str, ...]
    rho: dict[str, float]
    b: dict[frozenset, float]  # one entry per unordered pair

    def __post_init__(self):
        index = {v: i for i, v in enumerate(self.vertices)}
        object.__setattr__(self, "_index", index)
        adj: dict[str, list[tuple[str, float]]] = {v: [] for v in self.vertices}
        for pair, w in self.b.items():
            if w > ADJACENCY_EPS:
                u, v = tuple(pair)
                adj[u].append((v, w))
                adj[v].append((u, w))
        object.__setattr__(self, "_adj", adj)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self, v: str) -> int:
        return self._index[v]

    def neighbors(self, v: str) -> list[tuple[str, float]]:
        """Neighbors of v with edge weights, adjacency per b > eps."""
        return self._adj[v]

    def edge(self, u: str, v: str) -> float:
        return self.b.get(frozenset((u, v)), 0.0)

    def degree(self, v: str) -> float:
        """Weighted degree sum_y b(v, y); includes sub-eps weights."""
        return sum(w for pair, w in self.b.items() if v in pair)

    def rho_vector(self) -> np.ndarray:
        return np.array([self.rho[v] for v in self.vertices], dtype=float)


def make_graph(vertices, rho, edges) -> WeightedGraph:
    """Build a WeightedGraph from (id list, rho map, (u, v, b) triples).

    Symmetrizes edges; rejects loops, duplicate pairs with conflicting b,
    and unknown endpoints.
    """
    vertices = tuple(vertices)
    seen = set(vertices)
    if len(seen) != len(vertices):
        raise GraphFormatError("duplicate vertex ids")
    b: dict[frozenset, float] = {}
    for u, v, w in edges:
        if u not in seen or v not in seen:
            raise GraphFormatError(f"edge ({u},{v}) references unknown vertex")
        if u == v:
            raise GraphFormatError(f"loop at {u}")
        key = frozenset((u, v))
        if key in b and b[key] != w:
            raise GraphFormatError(f"duplicate edge ({u},{v}) with differing b")
        b[key] = float(w)
    return WeightedGraph(vertices, {v: float(rho[v]) for v in vertices}, b)


@dataclass(frozen=True)
class Measure:
    """Vertex measure; plain mu_rho, or rho reweighted by a positive F1."""

    weights: dict[str, float]

    def __post_init__(self):
        for v, w in self.weights.items():
            if not w > 0:
                raise ValueError(f"nonpositive measure weight at {v}")

    @staticmethod
    def from_rho(g: WeightedGraph, f1=None) -> "Measure":
        if f1 is None:
            return Measure(dict(g.rho))
        return Measure({v: f1[v] * g.rho[v] for v in g.vertices})

    def of(self, subset) -> float:
        return sum(self.weights[v] for v in subset)

    def vector(self, vertices) -> np.ndarray:
        return np.array([self.weights[v] for v in vertices], dtype=float)


@dataclass(frozen=True)
class Exhaustion:
    """Strictly increasing finite vertex subsets, covering the host."""

    levels: tuple[frozenset, ...]

    def __post_init__(self):
        for a, bset in zip(self.levels, self.levels[1:]):
            if not a < bset:
                raise ValueError("exhaustion levels must strictly increase")


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_graph(g: WeightedGraph) -> ValidationReport:
    """Diagnostic check of all structural invariants; never raises."""
    report = ValidationReport()
    for pair in g.b:
        if len(pair) == 1:
            (v,) = tuple(pair)
            report.violations.append(f"loop at {v}")
    for v in g.vertices:
        if not g.rho.get(v, 0.0) > 0:
            report.violations.append(f"nonpositive rho at {v}")
        if not math.isfinite(g.degree(v)):
            report.violations.append(f"infinite weighted degree at {v}")
    for pair, w in g.b.items():
        if w < 0:
            u, v = tuple(pair)
            report.violations.append(f"negative edge weight on ({u},{v})")
    if g.n > 0:
        reached = _bfs(g, g.vertices[0])
        if len(reached) < g.n:
            missing = sorted(set(g.vertices) - reached)[:5]
            report.violations.append(f"graph disconnected; unreachable e.g. {missing}")
    return report


def _bfs(g: WeightedGraph, root: str, max_hops: int | None = None) -> set:
    seen = {root}
    frontier = deque([(root, 0)])
    while frontier:
        v, d = frontier.popleft()
        if max_hops is not None and d >= max_hops:
            continue
        for u, _ in g.neighbors(v):
            if u not in seen:
                seen.add(u)
                frontier.append((u, d + 1))
    return seen


def lq_norm(f, q: float, m: Measure) -> float:
    """L^q norm of a vertex function w.r.t. the measure; q in [1, inf]."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if math.isinf(q):
        return max((abs(f[v]) for v in m.weights), default=0.0)
    return sum(abs(f[v]) ** q * m.weights[v] for v in m.weights) ** (1.0 / q)


def weak_vanishing_profile(f, m: Measure, thresholds) -> dict[float, float]:
    """Measure of the level sets {|f| >= c} for each threshold c.

    Finite values for every c are the finite-truncation proxy for the
    potential class that vanishes weakly at infinity.
    """
    out = {}
    for c in thresholds:
        if not c > 0:
            raise ValueError("thresholds must be positive")
        out[c] = sum(m.weights[v] for v in m.weights if abs(f[v]) >= c)
    return out


def build_exhaustion(g: WeightedGraph, root: str, radii) -> Exhaustion:
    """Exhaustion by hop-count balls around root with increasing radii.

    Truncates once the full host is covered (further radii add nothing).
    """
    if root not in g.rho:
        raise ValueError(f"unknown root {root}")
    report = validate_graph(g)
    if any("disconnected" in v for v in report.violations):
        raise ValueError("cannot exhaust a disconnected host")
    radii = list(radii)
    if sorted(radii) != radii or len(set(radii)) != len(radii):
        raise ValueError("radii must be strictly increasing")
    levels = []
    for r in radii:
        ball = frozenset(_bfs(g, root, max_hops=r))
        if levels and ball == levels[-1]:
            break
        levels.append(ball)
        if len(ball) == g.n:
            break
    return Exhaustion(tuple(levels))


# ---------------------------------------------------------------------------
# file I/O and generators used by the CLI and the test-suite

def load_graph(path) -> WeightedGraph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise GraphFormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    try:
        vertices = [v["id"] for v in doc["vertices"]]
        rho = {v["id"]: v["rho"] for v in doc["vertices"]}
        edges = [(e["u"], e["v"], e["b"]) for e in doc["edges"]]
    except (KeyError, TypeError) as e:
        raise GraphFormatError(f"{path}: missing field {e}")
    return make_graph(vertices, rho, edges)


def dump_graph(g: WeightedGraph, path):
    doc = {
        "vertices": [{"id": v, "rho": g.rho[v]} for v in g.vertices],
        "edges": [
            {"u": u, "v": v, "b": w}
            for (u, v), w in sorted(
                ((tuple(sorted(p)), w) for p, w in g.b.items())
            )
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def path_graph(n: int, rho=1.0, b=1.0) -> WeightedGraph:
    """Path on n vertices v0 - v1 - ... - v(n-1)."""
    names = [f"v{i}" for i in range(n)]
    rho_map = {v: rho for v in names} if np.isscalar(rho) else dict(zip(names, rho))
    edges = [(names[i], names[i + 1], b) for i in range(n - 1)]
    return make_graph(names, rho_map, edges)


def lattice2d_graph(nx: int, ny: int, rho=1.0, b=1.0) -> WeightedGraph:
    names = [f"v{i}_{j}" for i in range(nx) for j in range(ny)]
    edges = []
    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx:
                edges.append((f"v{i}_{j}", f"v{i+1}_{j}", b))
            if j + 1 < ny:
                edges.append((f"v{i}_{j}", f"v{i}_{j+1}", b))
    return make_graph(names, {v: rho for v in names}, edges)


def random_graph(n: int, rng: np.random.Generator, p=0.15,
                 rho_range=(0.1, 10.0), b_range=(0.2, 2.0)) -> WeightedGraph:
    """Seeded Erdos-Renyi graph, forced connected via a random spanning path."""
    names = [f"v{i}" for i in range(n)]
    rho = {v: float(rng.uniform(*rho_range)) for v in names}
    order = rng.permutation(n)
    edges = {}
    for a, c in zip(order, order[1:]):
        key = frozenset((names[a], names[c]))
        edges[key] = float(rng.uniform(*b_range))
    for i in range(n):
        for j in range(i + 1, n):
            key = frozenset((names[i], names[j]))
            if key not in edges and rng.random() < p:
                edges[key] = float(rng.uniform(*b_range))
    triples = [(*sorted(pair), w) for pair, w in edges.items()]
    return make_graph(names, rho, triples)
