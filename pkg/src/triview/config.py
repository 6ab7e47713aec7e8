"""Shared pipeline configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PipelineConfig:
    """Tunables of the depth sweep, fusion, and triangulation stages.

    The depth range and coarse hypothesis count default to the standard
    capture-stage working volume; the 1m origin/plane offsets give the most
    balanced rig triangulations. ``window_count`` must be odd so every
    refinement window contains the zero offset.
    """

    d_min: float = 0.5
    d_max: float = 8.5
    coarse_count: int = 32
    window_count: int = 5
    beta: float = 10.0
    kappa_photo: float = 5.0
    kappa_ang: float = 2.0
    origin_offset: float = 1.0
    plane_offset: float = 1.0
    threads: int = 1
    seed: int = 0
    weights_per_level: bool = False

    def __post_init__(self):
        if not 0 < self.d_min < self.d_max:
            raise ValueError(f"need 0 < d_min < d_max, got [{self.d_min}, {self.d_max}]")
        if self.coarse_count < 2:
            raise ValueError("coarse_count must be >= 2")
        if self.window_count < 3 or self.window_count % 2 == 0:
            raise ValueError("window_count must be odd and >= 3")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
