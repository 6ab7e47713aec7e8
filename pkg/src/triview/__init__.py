"""Sparse-view novel-view synthesis from camera triplets.

The package covers the geometric core of feedforward view interpolation on
multi-camera rigs: Delaunay-based camera-triplet selection, coarse-to-fine
plane-sweep depth estimation, and depth-guided multi-view fusion, together
with an analytic scene generator and a metric suite for closed-loop testing.
"""

__version__ = "0.1.0"
