from .core import (
    DimensionError,
    DomainError,
    GeodesicSpace,
    GeometryError,
    NearSingularError,
    ProductPoint,
    ProductSpace,
    WeightedDataset,
)

__all__ = [
    "DimensionError",
    "DomainError",
    "GeodesicSpace",
    "GeometryError",
    "NearSingularError",
    "ProductPoint",
    "ProductSpace",
    "WeightedDataset",
]
