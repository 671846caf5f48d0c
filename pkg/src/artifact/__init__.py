"""Graph calculus for deformation quantization of linear Poisson structures."""

from .algebra import LieAlgebraSpec, load_algebra, preset
from .graphs import EdgeColor, GraphClass, KGraph, canonical_id, classify, enumerate_graphs, parse, serialize
from .lieseries import LieSeries, dynkin_bch, graph_symbol, kontsevich_bch, lyndon_basis
from .poly import EpsPoly, Poly
from .source import WeightSource
from .star import duflo_map, j_series, star
from .weights import WeightCache, WeightEstimate, integrate_weight, snap_rational

__version__ = "0.1.0"

__all__ = [
    "EdgeColor", "EpsPoly", "GraphClass", "KGraph", "LieAlgebraSpec", "LieSeries", "Poly", "WeightCache",
    "WeightEstimate", "WeightSource", "canonical_id", "classify", "duflo_map", "dynkin_bch", "enumerate_graphs",
    "graph_symbol", "integrate_weight", "j_series", "kontsevich_bch", "load_algebra", "lyndon_basis", "parse",
    "preset", "serialize", "snap_rational", "star",
]
