"""cadmatch: classify mechanical parts from images and point clouds, then
retrieve the nearest CAD model by joint-feature distance."""

__version__ = "0.1.0"
