"""SPR-neighborhood likelihood tests for phylogenetic tree topologies."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
