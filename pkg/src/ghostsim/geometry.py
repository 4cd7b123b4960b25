"""Optical geometry of the two-branch 4f apparatus and the grids it induces.

A mask pixel at object coordinate x corresponds to transverse momentum
q = k x / f in the Fourier plane, and a detection lens sends q to
detector position x = f_D q / k.  With the pitches chosen below all three
grids share the same pixel index, so the discrete delta of the detection
lens is a one-to-one pixel map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .fields import GridSpec


@dataclass(frozen=True)
class OpticalGeometry:
    f: float
    f_D: float
    k: float
    d1: float | None = None
    d2: float | None = None
    pupil_radius1: float = math.inf
    pupil_radius2: float = math.inf

    def __post_init__(self):
        for name in ("f", "f_D", "k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"geometry.{name} must be positive, got {value}")
        # with d = f_D the detector-plane quadratic phase vanishes
        if self.d1 is None:
            object.__setattr__(self, "d1", self.f_D)
        if self.d2 is None:
            object.__setattr__(self, "d2", self.f_D)
        for name in ("pupil_radius1", "pupil_radius2"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"geometry.{name} must be positive or inf")

    @property
    def magnification(self) -> float:
        return self.f_D / self.f

    @property
    def has_finite_pupils(self) -> bool:
        return math.isfinite(self.pupil_radius1) or math.isfinite(self.pupil_radius2)

    def momentum_grid(self, mask_spec: GridSpec) -> GridSpec:
        return GridSpec(mask_spec.n, self.k * mask_spec.pitch / self.f)

    def detector_grid(self, mask_spec: GridSpec) -> GridSpec:
        """Detector plane behind a lens: pitch = f_D * pitch_q / k = m * mask pitch."""
        return GridSpec(mask_spec.n, self.f_D * self.momentum_grid(mask_spec).pitch / self.k)

    def bucket_grid(self, mask_spec: GridSpec) -> GridSpec:
        """Lens-free bucket plane: one period of the q-grid Fourier series.

        A bucket integral of |sum_q c_q exp(-i q x)|^2 over all x equals the
        number of periods times the integral over one period, and on this
        DFT-conjugate grid the one-period sum is exact.
        """
        pitch_q = self.momentum_grid(mask_spec).pitch
        return GridSpec(mask_spec.n, 2.0 * math.pi / (mask_spec.n * pitch_q))
