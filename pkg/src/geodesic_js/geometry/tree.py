"""Metric trees: finite weighted trees and the infinite 3-regular tree with unit edges.

Points are ``TreePoint(tail, head, offset)``: a vertex when ``tail == head`` and ``offset == 0``,
otherwise the point at distance ``offset`` from ``tail`` along the edge ``tail``-``head``.
"""
from __future__ import annotations

import logging
import math
from abc import abstractmethod
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Generic, Hashable, Iterator, Sequence, TypeVar

from pydantic import BaseModel, ConfigDict

from .core import (
    DimensionError,
    DomainError,
    GeodesicSpace,
    WeightedDataset,
    check_unit_interval,
    frechet_functional,
)

logger = logging.getLogger(__name__)

V = TypeVar("V", bound=Hashable)

TreeWord = tuple[int, ...]
ORIGIN: TreeWord = ()

SNAP_TOL = 1e-12


@dataclass(frozen=True)
class TreePoint(Generic[V]):
    tail: V
    head: V
    offset: float = 0.0

    @property
    def is_vertex(self) -> bool:
        return self.offset == 0.0 and self.tail == self.head


class MetricTree(GeodesicSpace[TreePoint[V]], Generic[V]):
    """Shortest-path geometry shared by finite and lazily enumerated trees."""

    @abstractmethod
    def vertex_distance(self, u: V, v: V) -> float:
        ...

    @abstractmethod
    def vertex_path(self, u: V, v: V) -> list[V]:
        """Vertices from ``u`` to ``v`` inclusive."""

    @abstractmethod
    def edge_length(self, u: V, v: V) -> float:
        ...

    @abstractmethod
    def _orient(self, u: V, v: V) -> tuple[V, V]:
        ...

    def check_point(self, p: TreePoint[V]) -> None:
        if p.is_vertex:
            return
        if self._orient(p.tail, p.head) != (p.tail, p.head):
            raise DomainError(f"Edge point {p} is not in canonical orientation.")
        if not 0.0 < p.offset < self.edge_length(p.tail, p.head):
            raise DomainError(f"Offset {p.offset} is not interior to edge ({p.tail}, {p.head}).")

    def vertex(self, v: V) -> TreePoint[V]:
        return TreePoint(v, v, 0.0)

    def point_on_edge(self, u: V, v: V, dist: float) -> TreePoint[V]:
        """The point at distance ``dist`` from ``u`` toward ``v``; snaps to the endpoints."""
        length = self.edge_length(u, v)
        if dist <= SNAP_TOL * max(1.0, length):
            return self.vertex(u)
        if dist >= length - SNAP_TOL * max(1.0, length):
            return self.vertex(v)
        tail, head = self._orient(u, v)
        return TreePoint(tail, head, dist if tail == u else length - dist)

    def _anchors(self, p: TreePoint[V]) -> list[tuple[V, float]]:
        if p.is_vertex:
            return [(p.tail, 0.0)]
        return [(p.tail, p.offset), (p.head, self.edge_length(p.tail, p.head) - p.offset)]

    @staticmethod
    def _same_edge(a: TreePoint[V], b: TreePoint[V]) -> bool:
        return not a.is_vertex and not b.is_vertex and (a.tail, a.head) == (b.tail, b.head)

    def _route(self, a: TreePoint[V], b: TreePoint[V]) -> tuple[float, V, float, V, float]:
        best: tuple[float, V, float, V, float] | None = None
        for va, da in self._anchors(a):
            for vb, db in self._anchors(b):
                total = da + self.vertex_distance(va, vb) + db
                if best is None or total < best[0]:
                    best = (total, va, da, vb, db)
        assert best is not None
        return best

    def distance(self, x: TreePoint[V], y: TreePoint[V]) -> float:
        self.check_point(x)
        self.check_point(y)
        if self._same_edge(x, y):
            return abs(x.offset - y.offset)
        return self._route(x, y)[0]

    def interpolate(self, x: TreePoint[V], y: TreePoint[V], t: float) -> TreePoint[V]:
        check_unit_interval(t)
        self.check_point(x)
        self.check_point(y)
        if t == 0.0:
            return x
        if t == 1.0 or x == y:
            return y
        if self._same_edge(x, y):
            return self.point_on_edge(x.tail, x.head, (1.0 - t) * x.offset + t * y.offset)

        total, va, da, vb, db = self._route(x, y)
        remaining = t * total
        if remaining <= da:
            return self._toward(x, va, remaining)
        remaining -= da
        path = self.vertex_path(va, vb)
        for u, w in zip(path, path[1:]):
            length = self.edge_length(u, w)
            if remaining <= length:
                return self.point_on_edge(u, w, remaining)
            remaining -= length
        if y.is_vertex:
            return y
        return self._toward_from_vertex(vb, y, remaining)

    def _toward(self, p: TreePoint[V], end: V, dist: float) -> TreePoint[V]:
        """Move ``dist`` from the edge point ``p`` toward the edge endpoint ``end``."""
        position = p.offset - dist if end == p.tail else p.offset + dist
        return self.point_on_edge(p.tail, p.head, position)

    def _toward_from_vertex(self, start: V, p: TreePoint[V], dist: float) -> TreePoint[V]:
        length = self.edge_length(p.tail, p.head)
        position = dist if start == p.tail else length - dist
        return self.point_on_edge(p.tail, p.head, min(max(position, 0.0), length))


@dataclass(frozen=True, eq=False)
class WeightedTree(MetricTree[int]):
    """A finite tree on vertices ``0..m-1`` with positive edge weights, rooted at vertex 0."""

    edges: tuple[tuple[int, int, float], ...]
    n_vertices: int = 0
    name: str = "tree"
    _lookup: dict[tuple[int, int], tuple[float, int]] = field(init=False, repr=False)
    _adjacency: dict[int, list[tuple[int, float, int]]] = field(init=False, repr=False)
    _parent: list[int] = field(init=False, repr=False)
    _depth: list[int] = field(init=False, repr=False)
    _root_dist: list[float] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        edges = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        m = self.n_vertices or len(edges) + 1
        if len(edges) != m - 1:
            raise DimensionError(f"A tree on {m} vertices has {m - 1} edges, got {len(edges)}.")
        lookup: dict[tuple[int, int], tuple[float, int]] = {}
        adjacency: dict[int, list[tuple[int, float, int]]] = {v: [] for v in range(m)}
        for index, (u, v, w) in enumerate(edges):
            if not (0 <= u < m and 0 <= v < m) or u == v:
                raise DomainError(f"Edge ({u}, {v}) does not join two distinct vertices of 0..{m - 1}.")
            if not w > 0 or not math.isfinite(w):
                raise DomainError(f"Edge ({u}, {v}) has non-positive weight {w}.")
            if (u, v) in lookup:
                raise DomainError(f"Duplicate edge ({u}, {v}).")
            lookup[(u, v)] = lookup[(v, u)] = (w, index)
            adjacency[u].append((v, w, index))
            adjacency[v].append((u, w, index))

        parent = [-1] * m
        depth = [0] * m
        root_dist = [0.0] * m
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v, w, _ in adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    parent[v], depth[v], root_dist[v] = u, depth[u] + 1, root_dist[u] + w
                    queue.append(v)
        if len(seen) != m:
            raise DomainError("Edges do not form a connected tree.")

        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "n_vertices", m)
        object.__setattr__(self, "_lookup", lookup)
        object.__setattr__(self, "_adjacency", adjacency)
        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_depth", depth)
        object.__setattr__(self, "_root_dist", root_dist)

    @property
    def max_degree(self) -> int:
        return max((len(nbrs) for nbrs in self._adjacency.values()), default=0)

    def neighbors(self, v: int) -> list[tuple[int, float, int]]:
        """``(neighbor, length, edge index)`` triples in edge order."""
        return self._adjacency[v]

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n_vertices:
            raise DomainError(f"Vertex {v} is not in a tree on {self.n_vertices} vertices.")

    def check_point(self, p: TreePoint[int]) -> None:
        self._check_vertex(p.tail)
        self._check_vertex(p.head)
        super().check_point(p)

    def _lca(self, u: int, v: int) -> int:
        while self._depth[u] > self._depth[v]:
            u = self._parent[u]
        while self._depth[v] > self._depth[u]:
            v = self._parent[v]
        while u != v:
            u, v = self._parent[u], self._parent[v]
        return u

    def vertex_distance(self, u: int, v: int) -> float:
        return self._root_dist[u] + self._root_dist[v] - 2.0 * self._root_dist[self._lca(u, v)]

    def vertex_path(self, u: int, v: int) -> list[int]:
        top = self._lca(u, v)
        up, down = [u], [v]
        while up[-1] != top:
            up.append(self._parent[up[-1]])
        while down[-1] != top:
            down.append(self._parent[down[-1]])
        return up + down[-2::-1]

    def edge_length(self, u: int, v: int) -> float:
        try:
            return self._lookup[(u, v)][0]
        except KeyError:
            raise DomainError(f"({u}, {v}) is not an edge.") from None

    def _orient(self, u: int, v: int) -> tuple[int, int]:
        try:
            index = self._lookup[(u, v)][1]
        except KeyError:
            raise DomainError(f"({u}, {v}) is not an edge.") from None
        tail, head, _ = self.edges[index]
        return tail, head

    def grid(self, step: float) -> Iterator[TreePoint[int]]:
        """All vertices plus points every ``step`` along each edge."""
        if step <= 0:
            raise DomainError("Grid step must be positive.")
        for v in range(self.n_vertices):
            yield self.vertex(v)
        for u, v, w in self.edges:
            count = math.ceil(w / step)
            for i in range(1, count):
                yield TreePoint(u, v, w * i / count)

    def frechet_mean(
        self, points: Sequence[TreePoint[int]], weights: Sequence[float] | None = None
    ) -> TreePoint[int]:
        return tree_frechet_mean(self, WeightedDataset(tuple(points), tuple(weights or ())))


@dataclass(frozen=True)
class TreeMeanResult:
    point: TreePoint[int]
    value: float
    visited: int


def tree_frechet_mean_trace(
    tree: WeightedTree, data: WeightedDataset[TreePoint[int]], start: int = 0
) -> TreeMeanResult:
    """Exact weighted Fréchet mean on a finite tree by descent over vertices.

    At a vertex each incident edge sees every data point as a signed coordinate on the edge's
    line: +d(v, x) when the geodesic to x leaves through that edge, -d(v, x) otherwise. The
    functional restricted to the edge is then a 1-D weighted least-squares problem whose
    minimizer is the weighted mean m of those coordinates. The vertex is optimal when m <= 0 on
    every edge; otherwise walk the edge with the largest m, stopping inside it when m is shorter
    than the edge.
    """
    for x in data.points:
        tree.check_point(x)
    tree._check_vertex(start)
    total_weight = math.fsum(data.weights)
    current = start
    visited = 1
    while True:
        here = [tree.distance(tree.vertex(current), x) for x in data.points]
        best: tuple[float, int, int, float] | None = None
        for nbr, length, index in tree.neighbors(current):
            tol = tree.tolerance(length)
            there = (tree.distance(tree.vertex(nbr), x) for x in data.points)
            coords = (
                d_here if d_there < d_here + length - tol else -d_here
                for d_here, d_there in zip(here, there)
            )
            m = math.fsum(w * c for w, c in zip(data.weights, coords)) / total_weight
            if m > 0.0 and (best is None or m > best[0] or (m == best[0] and index < best[1])):
                best = (m, index, nbr, length)

        if best is None:
            point = tree.vertex(current)
            break
        m, _, nbr, length = best
        if m < length:
            point = tree.point_on_edge(current, nbr, m)
            break
        current = nbr
        visited += 1
        if visited > tree.n_vertices:
            raise DomainError("Fréchet mean descent revisited vertices; tree metric is inconsistent.")

    value = frechet_functional(tree, data, point)
    logger.debug("Tree Fréchet mean %s (value %.6g) after %d vertices", point, value, visited)
    return TreeMeanResult(point, value, visited)


def tree_frechet_mean(tree: WeightedTree, data: WeightedDataset[TreePoint[int]]) -> TreePoint[int]:
    return tree_frechet_mean_trace(tree, data).point


def parse_word(text: str) -> TreeWord:
    word = tuple(int(ch) for ch in text.strip())
    check_word(word)
    return word


def format_word(word: TreeWord) -> str:
    return "".join(str(letter) for letter in word)


def check_word(word: TreeWord) -> None:
    if word and word[0] not in (0, 1, 2):
        raise DomainError(f"First letter must be 0, 1 or 2, got {word[0]}.")
    if any(letter not in (0, 1) for letter in word[1:]):
        raise DomainError(f"Letters after the first must be 0 or 1, got {format_word(word)!r}.")


def common_prefix_length(u: TreeWord, v: TreeWord) -> int:
    n = 0
    for a, b in zip(u, v):
        if a != b:
            break
        n += 1
    return n


def word_distance(u: TreeWord, v: TreeWord) -> int:
    return len(u) + len(v) - 2 * common_prefix_length(u, v)


@dataclass(frozen=True)
class RegularTree(MetricTree[TreeWord]):
    """The infinite 3-regular tree with unit edges; vertices are words from the origin."""

    name: str = "regular-tree"

    def vertex(self, v: TreeWord) -> TreePoint[TreeWord]:
        check_word(v)
        return TreePoint(v, v, 0.0)

    def vertex_distance(self, u: TreeWord, v: TreeWord) -> float:
        return float(word_distance(u, v))

    def vertex_path(self, u: TreeWord, v: TreeWord) -> list[TreeWord]:
        n = common_prefix_length(u, v)
        up = [u[:i] for i in range(len(u), n - 1, -1)]
        down = [v[:i] for i in range(n + 1, len(v) + 1)]
        return up + down

    def edge_length(self, u: TreeWord, v: TreeWord) -> float:
        if (len(v) == len(u) + 1 and v[:-1] == u) or (len(u) == len(v) + 1 and u[:-1] == v):
            return 1.0
        raise DomainError(f"{format_word(u)!r} and {format_word(v)!r} are not adjacent.")

    def _orient(self, u: TreeWord, v: TreeWord) -> tuple[TreeWord, TreeWord]:
        self.edge_length(u, v)
        return (u, v) if len(u) < len(v) else (v, u)

    def frechet_mean(
        self, points: Sequence[TreePoint[TreeWord]], weights: Sequence[float] | None = None
    ) -> TreePoint[TreeWord]:
        if not points:
            raise DomainError("Cannot average an empty point set.")
        subtree = materialize_spanning_subtree([w for p in points for w in (p.tail, p.head)])
        embedded = [subtree.embed(p) for p in points]
        mean = tree_frechet_mean(subtree.tree, WeightedDataset(tuple(embedded), tuple(weights or ())))
        return subtree.lift(mean)


def word_interpolate(u: TreeWord, v: TreeWord, t: float) -> TreePoint[TreeWord]:
    space = RegularTree()
    return space.interpolate(space.vertex(u), space.vertex(v), t)


@dataclass(frozen=True)
class SpanningSubtree:
    tree: WeightedTree
    points: tuple[TreePoint[int], ...]
    words: tuple[TreeWord, ...]

    def vertex_id(self, word: TreeWord) -> int:
        try:
            return self.words.index(word)
        except ValueError:
            raise DomainError(f"Word {format_word(word)!r} is outside the spanning subtree.") from None

    def embed(self, p: TreePoint[TreeWord]) -> TreePoint[int]:
        return TreePoint(self.vertex_id(p.tail), self.vertex_id(p.head), p.offset)

    def lift(self, p: TreePoint[int]) -> TreePoint[TreeWord]:
        return TreePoint(self.words[p.tail], self.words[p.head], p.offset)


def materialize_spanning_subtree(words: Sequence[TreeWord]) -> SpanningSubtree:
    """The finite subtree spanned by ``words``: the union of their paths to a common ancestor.

    Vertex 0 is the longest common prefix; other ids follow first appearance. Each edge is stored
    as (parent, child) so offsets agree with the regular tree's orientation.
    """
    if not words:
        raise DomainError("Cannot span an empty word list.")
    for word in words:
        check_word(word)
    base = min(common_prefix_length(words[0], w) for w in words)
    ids: dict[TreeWord, int] = {}
    order: list[TreeWord] = []
    edges: list[tuple[int, int, float]] = []
    for word in words:
        for i in range(base, len(word) + 1):
            prefix = word[:i]
            if prefix in ids:
                continue
            ids[prefix] = len(order)
            order.append(prefix)
            if i > base:
                edges.append((ids[prefix[:-1]], ids[prefix], 1.0))
    tree = WeightedTree(tuple(edges), n_vertices=len(order), name="spanning-subtree")
    points = tuple(tree.vertex(ids[w]) for w in words)
    return SpanningSubtree(tree, points, tuple(order))


class TreeFixture(BaseModel):
    """JSON tree fixture: ``{"edges": [[u, v, w], ...], "points": [v | [u, v, offset], ...]}``."""

    model_config = ConfigDict(extra="forbid")

    edges: list[tuple[int, int, float]]
    points: list[int | tuple[int, int, float]] = []

    def build(self) -> tuple[WeightedTree, list[TreePoint[int]]]:
        tree = WeightedTree(tuple(self.edges))
        points: list[TreePoint[int]] = []
        for raw in self.points:
            if isinstance(raw, int):
                point = tree.vertex(raw)
            else:
                u, v, offset = raw
                point = tree.point_on_edge(u, v, offset)
            tree.check_point(point)
            points.append(point)
        return tree, points


def load_tree(path: str | Path) -> tuple[WeightedTree, list[TreePoint[int]]]:
    return TreeFixture.model_validate_json(Path(path).read_text(encoding="utf-8")).build()


TRIPOD_CENTER, TRIPOD_A, TRIPOD_C, TRIPOD_B = 0, 1, 2, 3


def tripod() -> WeightedTree:
    """Center 0 with arms of length 1 to A (1), 1 to C (2) and 2 to B (3)."""
    return WeightedTree(((0, 1, 1.0), (0, 2, 1.0), (0, 3, 2.0)), name="tripod")
