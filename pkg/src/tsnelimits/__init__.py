"""Discrete, nonlocal and local energies of t-SNE style embeddings."""
from .continuum import (
    ContinuumEnergyReport,
    DegenerateSupportError,
    DivergenceError,
    continuum_attraction,
    continuum_energy,
    continuum_repulsion,
    rearrange_1d,
    scaling_identity_check,
)
from .data import BandwidthField, DensitySpec, PointCloud, PushforwardDensity, sample
from .discrete import EmbeddingState, descend, kl_divergence, kl_terms, rescaled_energy
from .experiments import run_consistency_sweep, run_experiment_sec33, run_mixture_experiment
from .graph import AffinityGraph, IsolatedVertexError, build_affinities, build_q
from .kernels import KernelSpec, phi_s, theta
from .maps import PiecewiseLinearMap
from .microstructure import CuttingMap, build_cutting_map, cutting_energy_scan
from .nonlocal_energy import GridMap, ResolutionError, nonlocal_attraction, nonlocal_repulsion
from .solver1d import SolverResult, fixed_point_solve

__version__ = "0.1.0"

__all__ = [
    "AffinityGraph", "BandwidthField", "ContinuumEnergyReport", "CuttingMap", "DegenerateSupportError",
    "DensitySpec", "DivergenceError", "EmbeddingState", "GridMap", "IsolatedVertexError", "KernelSpec",
    "PiecewiseLinearMap", "PointCloud", "PushforwardDensity", "ResolutionError", "SolverResult",
    "build_affinities", "build_cutting_map", "build_q", "continuum_attraction", "continuum_energy",
    "continuum_repulsion", "cutting_energy_scan", "descend", "fixed_point_solve", "kl_divergence", "kl_terms",
    "nonlocal_attraction", "nonlocal_repulsion", "phi_s", "rearrange_1d", "rescaled_energy", "run_consistency_sweep",
    "run_experiment_sec33", "run_mixture_experiment", "sample",
    "scaling_identity_check", "theta",
]
