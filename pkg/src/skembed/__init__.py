"""Optimal stopping embeddings for the simple random walk on a bounded lattice domain."""
from .embed import build_problem, feasibility, solve, verify_dual
from .lattice import LatticeSpec, WalkKernel, build_lattice
from .measures import DiscreteMeasure
from .presets import Instance, make_preset

__version__ = "0.1.0"

__all__ = ["LatticeSpec", "WalkKernel", "build_lattice", "DiscreteMeasure", "build_problem",
           "solve", "feasibility", "verify_dual", "Instance", "make_preset"]
