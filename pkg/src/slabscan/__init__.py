"""slabscan: cavity detection in a slab by spherical-front boundary probing.

The pipeline simulates boundary measurements for the steady conductivity
equation on a truncated slab with an insulating cavity, computes the energy
gap between cavity-free and cavity responses for a family of complex
spherical waves, classifies each probing front from the gap's exponential
rate in the semiclassical parameter, and carves the cavity envelope from
the recovered distances.
"""

from . import geometry, indicator, probe, reconstruct, solver

__all__ = ["geometry", "indicator", "probe", "reconstruct", "solver"]
__version__ = "0.1.0"
