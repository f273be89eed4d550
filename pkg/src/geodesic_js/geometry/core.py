"""Space-agnostic geometry: the geodesic-space contract, product spaces and Fréchet functionals."""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Generic, Iterable, Iterator, Sequence, TypeVar

P = TypeVar("P")

ABS_TOL = 1e-9
REL_TOL = 1e-9


class GeometryError(ValueError):
    pass


class DomainError(GeometryError):
    pass


class DimensionError(GeometryError):
    pass


class NearSingularError(GeometryError):
    pass


def tolerance(scale: float = 0.0, atol: float = ABS_TOL, rtol: float = REL_TOL) -> float:
    """Absolute tolerance for distances up to 1, relative beyond."""
    return max(atol, rtol * abs(scale))


def check_unit_interval(t: float) -> float:
    if not 0.0 <= t <= 1.0 or math.isnan(t):
        raise DomainError(f"Geodesic parameter must lie in [0, 1], got {t}.")
    return float(t)


class GeodesicSpace(ABC, Generic[P]):
    """A uniquely geodesic metric space.

    Subclasses provide ``distance`` and ``interpolate``; ``interpolate(x, y, t)`` is the point
    a fraction ``t`` of the way along the geodesic from ``x`` to ``y``.
    """

    name: str = "space"
    is_hadamard: bool = True
    is_flat: bool = False
    atol: float = ABS_TOL
    rtol: float = REL_TOL

    @abstractmethod
    def distance(self, x: P, y: P) -> float:
        ...

    @abstractmethod
    def interpolate(self, x: P, y: P, t: float) -> P:
        ...

    def points_equal(self, x: P, y: P, tol: float | None = None) -> bool:
        gap = self.distance(x, y)
        return gap <= (tol if tol is not None else self.tolerance(gap))

    def tolerance(self, scale: float = 0.0) -> float:
        return tolerance(scale, self.atol, self.rtol)

    def frechet_mean(self, points: Sequence[P], weights: Sequence[float] | None = None) -> P:
        raise DomainError(f"{self.name} has no exact Fréchet mean routine; use brute_force_frechet_mean.")


@dataclass(frozen=True)
class ProductPoint:
    components: tuple[Any, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise DimensionError("A product point needs at least one component.")

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[Any]:
        return iter(self.components)

    def __getitem__(self, index: int) -> Any:
        return self.components[index]

    def prefix(self, n: int) -> ProductPoint:
        return ProductPoint(self.components[:n])


def _check_components(a: ProductPoint, b: ProductPoint, spaces: Sequence[GeodesicSpace]) -> None:
    if not (len(a) == len(b) == len(spaces)):
        raise DimensionError(
            f"Component counts differ: {len(a)}, {len(b)} points for {len(spaces)} spaces."
        )


def product_distance(a: ProductPoint, b: ProductPoint, spaces: Sequence[GeodesicSpace]) -> float:
    """Root-mean-square of component distances (the 1/n-normalized product metric)."""
    _check_components(a, b, spaces)
    total = math.fsum(space.distance(x, y) ** 2 for space, x, y in zip(spaces, a, b))
    return math.sqrt(total / len(spaces))


def product_interpolate(
    a: ProductPoint, b: ProductPoint, t: float, spaces: Sequence[GeodesicSpace]
) -> ProductPoint:
    check_unit_interval(t)
    _check_components(a, b, spaces)
    return ProductPoint(tuple(space.interpolate(x, y, t) for space, x, y in zip(spaces, a, b)))


@dataclass(frozen=True)
class ProductSpace(GeodesicSpace[ProductPoint]):
    spaces: tuple[GeodesicSpace, ...]
    name: str = field(default="product", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "spaces", tuple(self.spaces))
        if not self.spaces:
            raise DimensionError("A product space needs at least one factor.")
        object.__setattr__(self, "is_hadamard", all(s.is_hadamard for s in self.spaces))
        object.__setattr__(self, "is_flat", all(s.is_flat for s in self.spaces))

    @classmethod
    def uniform(cls, space: GeodesicSpace, n: int) -> ProductSpace:
        if n < 1:
            raise DimensionError("A product space needs at least one factor.")
        return cls(spaces=(space,) * n, name=f"{space.name}^{n}")

    @property
    def n(self) -> int:
        return len(self.spaces)

    @property
    def homogeneous(self) -> bool:
        first = self.spaces[0]
        return all(space == first for space in self.spaces[1:])

    def prefix(self, n: int) -> ProductSpace:
        return ProductSpace(spaces=self.spaces[:n], name=self.name)

    def distance(self, x: ProductPoint, y: ProductPoint) -> float:
        return product_distance(x, y, self.spaces)

    def squared_distances(self, x: ProductPoint, y: ProductPoint) -> list[float]:
        _check_components(x, y, self.spaces)
        return [space.distance(a, b) ** 2 for space, a, b in zip(self.spaces, x, y)]

    def interpolate(self, x: ProductPoint, y: ProductPoint, t: float) -> ProductPoint:
        return product_interpolate(x, y, t, self.spaces)

    def points_equal(self, x: ProductPoint, y: ProductPoint, tol: float | None = None) -> bool:
        _check_components(x, y, self.spaces)
        return all(space.points_equal(a, b, tol) for space, a, b in zip(self.spaces, x, y))


@dataclass(frozen=True)
class WeightedDataset(Generic[P]):
    points: tuple[P, ...]
    weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        points = tuple(self.points)
        if not points:
            raise DomainError("A dataset needs at least one point.")
        weights = tuple(float(w) for w in self.weights) if self.weights else (1.0,) * len(points)
        if len(weights) != len(points):
            raise DimensionError(f"{len(points)} points but {len(weights)} weights.")
        if any(w < 0 or math.isnan(w) for w in weights):
            raise DomainError("Weights must be nonnegative.")
        if not any(w > 0 for w in weights):
            raise DomainError("At least one weight must be strictly positive.")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.points)

    def pairs(self) -> Iterator[tuple[P, float]]:
        return zip(self.points, self.weights)


def frechet_functional(space: GeodesicSpace[P], data: WeightedDataset[P], z: P) -> float:
    return math.fsum(w * space.distance(x, z) ** 2 for x, w in data.pairs())


def brute_force_frechet_mean(
    space: GeodesicSpace[P], data: WeightedDataset[P], candidates: Iterable[P]
) -> tuple[P, float]:
    """Exhaustive minimization of the Fréchet functional; the first minimal candidate wins."""
    best: P | None = None
    best_value = math.inf
    seen = False
    for candidate in candidates:
        seen = True
        value = frechet_functional(space, data, candidate)
        if value < best_value:
            best, best_value = candidate, value
    if not seen:
        raise DomainError("Candidate set is empty.")
    return best, best_value  # type: ignore[return-value]


def hull_grid(space: GeodesicSpace[P], points: Sequence[P], step: float | None = None) -> Iterator[P]:
    """Candidates along every pairwise geodesic of ``points``.

    In a tree (and on the line) the union of pairwise geodesics is the convex hull. The default
    step is 1e-3 times the diameter of the point set.
    """
    points = list(points)
    yield from points
    pairs = list(combinations(points, 2))
    diameter = max((space.distance(x, y) for x, y in pairs), default=0.0)
    if diameter == 0.0:
        return
    step = step if step is not None else 1e-3 * diameter
    if step <= 0:
        raise DomainError("Grid step must be positive.")
    for x, y in pairs:
        length = space.distance(x, y)
        count = math.ceil(length / step)
        for i in range(1, count):
            yield space.interpolate(x, y, i / count)


def cat0_slack(space: GeodesicSpace[P], x: P, y: P, z: P, t: float) -> float:
    """Right-hand side minus left-hand side of the CAT(0) inequality at [x, y]_t against z."""
    check_unit_interval(t)
    mid = space.interpolate(x, y, t)
    lhs = space.distance(mid, z) ** 2
    rhs = (
        (1 - t) * space.distance(x, z) ** 2
        + t * space.distance(y, z) ** 2
        - t * (1 - t) * space.distance(x, y) ** 2
    )
    return rhs - lhs


def geodesic_convexity_gap(space: GeodesicSpace[P], x: P, y: P, w: P, z: P, t: float) -> float:
    """(1-t) d(x, w) + t d(y, z) - d([x, y]_t, [w, z]_t); nonnegative in a Hadamard space."""
    check_unit_interval(t)
    left = space.interpolate(x, y, t)
    right = space.interpolate(w, z, t)
    return (1 - t) * space.distance(x, w) + t * space.distance(y, z) - space.distance(left, right)


def conditional_frechet_mean_discrete(
    space: GeodesicSpace[P],
    support: Sequence[P],
    probs: Sequence[float],
    candidates: Iterable[P] | None = None,
) -> P:
    """Fréchet mean of a finite discrete law.

    Uses the space's exact mean routine unless a candidate set is supplied.
    """
    if len(support) != len(probs):
        raise DimensionError(f"{len(support)} support points but {len(probs)} probabilities.")
    if any(p < 0 for p in probs):
        raise DomainError("Probabilities must be nonnegative.")
    if abs(math.fsum(probs) - 1.0) > 1e-9:
        raise DomainError(f"Probabilities must sum to 1, got {math.fsum(probs)}.")
    data = WeightedDataset(tuple(support), tuple(probs))
    if candidates is None:
        return space.frechet_mean(data.points, data.weights)
    point, _ = brute_force_frechet_mean(space, data, candidates)
    return point
