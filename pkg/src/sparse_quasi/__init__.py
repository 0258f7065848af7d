"""Sparse-grid quasi-interpolation and quadrature with anisotropic Gaussian kernels."""

from .errors import (
    DataError,
    DimensionError,
    EmptyIndexSetError,
    OracleFailure,
    RegistryError,
    SparseQuasiError,
)
from .kernel import KernelSpec, eval_kernel, product_weight, univariate_weight
from .multiindex_grid import (
    AnisotropicGrid,
    CombinationTerm,
    MultiIndex,
    SparseGridLevel,
    combination_terms,
    enumerate_level_indices,
    grid_points,
    nodes_visited,
    point_count,
    sparse_grid,
)
from .multilevel import (
    BenchRecord,
    LevelTrace,
    MultilevelApproximant,
    build_ml_full_grid,
    build_qmusik,
    eval_multilevel,
)
from .quadrature import (
    QuadratureResult,
    QuadratureRule,
    export_rule,
    integrate,
    qmusik_quadrature,
    qsik_quadrature,
    subgrid_quadrature,
)
from .quasi_ops import (
    CombinedOperator,
    FullGridOperator,
    NodeTable,
    SubgridOperator,
    build_full_grid,
    build_qsik,
    build_subgrid_operator,
    eval_combined,
    eval_on_grid,
    eval_subgrid,
)

__version__ = "0.1.0"
