"""Exact and Monte Carlo tools for sign clusters of the Ising model on
triangular-type lattices times Z."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"

from ._jit import JIT_ENABLED, backend_name
from .lattice import Box, Region, build_region, lattice_kind

__all__ = ["Box", "Region", "build_region", "lattice_kind", "JIT_ENABLED", "backend_name", "__version__"]
