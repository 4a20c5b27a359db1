"""Discrete wave-spectrum laboratory: Green systems, boundary control and eikonal algebras."""

from wavespec.numlin import (
    EPS_RANK,
    ProjectionFamily,
    Subspace,
    SymOp,
    fit_linear_map,
    lattice_ops,
    op_norm,
    orthonormalize,
    principal_angles,
    psd_order,
)

__all__ = [
    "EPS_RANK",
    "ProjectionFamily",
    "Subspace",
    "SymOp",
    "fit_linear_map",
    "lattice_ops",
    "op_norm",
    "orthonormalize",
    "principal_angles",
    "psd_order",
]

__version__ = "0.1.0"
