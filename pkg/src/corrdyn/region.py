"""Rectangular windows of the complex plane sampled at pixel centres."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_complex
from .errors import InvalidArgumentError

ASPECT_RTOL = 1e-9


@dataclass(frozen=True)
class Region:
    center: complex
    half_width: float
    half_height: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_complex(self.center, "center"))
        for name in ("half_width", "half_height"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise InvalidArgumentError(f"{name} must be positive and finite, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def for_raster(cls, center, half_width: float, width: int, height: int) -> "Region":
        """Window with square pixels: ``half_height = half_width * height / width``."""
        return cls(center, half_width, half_width * height / width)

    @classmethod
    def from_bounds(cls, re_min, re_max, im_min, im_max) -> "Region":
        return cls(
            complex(0.5 * (re_min + re_max), 0.5 * (im_min + im_max)),
            0.5 * (re_max - re_min),
            0.5 * (im_max - im_min),
        )

    def check_aspect(self, width: int, height: int):
        want = width / height
        got = self.half_width / self.half_height
        if abs(got - want) > ASPECT_RTOL * want:
            raise InvalidArgumentError(
                f"region aspect {got:.6g} does not match raster aspect {width}x{height}"
            )

    def pixel_size(self, width: int, height: int):
        return 2.0 * self.half_width / width, 2.0 * self.half_height / height

    def axes(self, width: int, height: int):
        """Pixel-centre coordinates: ``xs`` left to right, ``ys`` top to bottom.

        ``x_i = cx + hw*(2i + 1 - W)/W`` and ``y_j = cy + hh*(H - 1 - 2j)/H``;
        the integer numerators make the grid exactly symmetric about its centre.
        """
        i = np.arange(width, dtype=np.float64)
        j = np.arange(height, dtype=np.float64)
        xs = self.center.real + self.half_width * ((2.0 * i + 1.0 - width) / width)
        ys = self.center.imag + self.half_height * ((height - 1.0 - 2.0 * j) / height)
        return xs, ys

    def pixel_index(self, re: np.ndarray, im: np.ndarray, width: int, height: int):
        """Map points to ``(col, row, inside)`` arrays."""
        dx, dy = self.pixel_size(width, height)
        col = np.floor((re - (self.center.real - self.half_width)) / dx)
        row = np.floor(((self.center.imag + self.half_height) - im) / dy)
        inside = (col >= 0) & (col < width) & (row >= 0) & (row < height)
        return col.astype(np.int64), row.astype(np.int64), inside

    def to_json(self):
        return {
            "center": [self.center.real, self.center.imag],
            "half_width": self.half_width,
            "half_height": self.half_height,
        }
