"""Sampled grids, thin-object masks and phase screens.

Every grid is square with its origin at index ``n // 2``.  With that choice
the point reflection x -> -x is the exact index permutation
``i -> (n - i) % n``, so parity statements hold bit-for-bit on the grid
instead of up to interpolation error.  Coordinates of pixel ``(i, j)`` are
``((i - n/2) * pitch, (j - n/2) * pitch)``; the first component runs along
array axis 0 (e1), the second along axis 1 (e2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ConfigError, PhysicsError


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridSpec:
    n: int
    pitch: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16 or self.n % 2:
            raise ConfigError(f"grid n must be an even integer >= 16, got {self.n}")
        if not (self.pitch > 0 and math.isfinite(self.pitch)):
            raise ConfigError(f"grid pitch must be positive, got {self.pitch}")

    @property
    def center(self) -> int:
        return self.n // 2

    def coords(self) -> np.ndarray:
        """1D pixel coordinates along either axis (meters)."""
        return (np.arange(self.n) - self.center) * self.pitch

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.coords()
        return np.meshgrid(c, c, indexing="ij")

    def scaled(self, factor: float) -> "GridSpec":
        return GridSpec(self.n, self.pitch * factor)

    def index_of(self, coord: np.ndarray) -> np.ndarray:
        """Nearest pixel index for physical coordinates; may fall off-grid.

        Rounding is half-to-even, which is odd-symmetric, so
        ``index_of(-x) - c == -(index_of(x) - c)`` always holds.
        """
        return np.rint(np.asarray(coord, dtype=float) / self.pitch).astype(np.int64) + self.center


def reflect_grid(values: np.ndarray) -> np.ndarray:
    """Point reflection of the trailing two axes: out[..., i, j] = in[..., -i % n, -j % n]."""
    flipped = values[..., ::-1, ::-1]
    return np.roll(flipped, shift=(1, 1), axis=(-2, -1))


@dataclass(frozen=True)
class ComplexField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.spec.n, self.spec.n):
            raise ConfigError(f"field shape {vals.shape} does not match grid n={self.spec.n}")
        if not np.all(np.isfinite(vals)):
            raise PhysicsError("field contains NaN or Inf")
        object.__setattr__(self, "values", _frozen(vals))

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def reflect(field: ComplexField) -> ComplexField:
    return ComplexField(field.spec, reflect_grid(field.values))


def decompose_parity(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a grid into its even and odd parts under x -> -x.

    Both parts are exactly (anti)symmetric on the grid.  ``even + odd``
    reproduces ``phi`` to within one rounding of each sum, not bit-exactly.
    """
    phi = np.asarray(phi, dtype=float)
    mirrored = reflect_grid(phi)
    return 0.5 * (phi + mirrored), 0.5 * (phi - mirrored)


# --------------------------------------------------------------------------
# Phase screens over a disk-polynomial (Zernike) basis
# --------------------------------------------------------------------------

ModeIndex = tuple[int, int]

MODE_NAMES: dict[str, ModeIndex] = {
    "piston": (0, 0),
    "tilt_x": (1, 1),
    "tilt_y": (1, -1),
    "defocus": (2, 0),
    "astigmatism": (2, 2),
    "astigmatism_45": (2, -2),
    "coma": (3, 1),
    "coma_x": (3, 1),
    "coma_y": (3, -1),
    "trefoil_x": (3, 3),
    "trefoil_y": (3, -3),
    "spherical": (4, 0),
    "secondary_astigmatism": (4, 2),
    "secondary_astigmatism_45": (4, -2),
    "quadrafoil": (4, 4),
    "quadrafoil_45": (4, -4),
}


def parse_mode(mode: Union[str, Sequence[int]]) -> ModeIndex:
    """Accept a mode name, an ``"n,m"`` string or an ``(n, m)`` pair."""
    if isinstance(mode, str):
        key = mode.strip().lower()
        if key in MODE_NAMES:
            return MODE_NAMES[key]
        try:
            n_str, m_str = key.split(",")
            mode = (int(n_str), int(m_str))
        except ValueError:
            raise ConfigError(f"unknown phase-screen mode {mode!r}") from None
    try:
        n, m = (int(v) for v in mode)
    except (TypeError, ValueError):
        raise ConfigError(f"unknown phase-screen mode {mode!r}") from None
    if n < 0 or abs(m) > n or (n - abs(m)) % 2:
        raise ConfigError(f"invalid mode (n={n}, m={m}): need |m| <= n and n - |m| even")
    return n, m


def mode_parity(mode: ModeIndex) -> str:
    """Parity under point reflection is (-1)**m."""
    return "even" if mode[1] % 2 == 0 else "odd"


def _radial_coefficients(n: int, m: int) -> list[tuple[int, float]]:
    m = abs(m)
    out = []
    for k in range((n - m) // 2 + 1):
        c = (-1) ** k * math.factorial(n - k) / (
            math.factorial(k) * math.factorial((n + m) // 2 - k) * math.factorial((n - m) // 2 - k)
        )
        out.append((n - 2 * k, c))
    return out


def zernike(mode: ModeIndex, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """RMS-normalized disk polynomial at unit-disk coordinates (u, v); zero for rho >= 1.

    Evaluated in Cartesian form, rho**p * cos(m theta) = rho2**((p - m)/2) * Re(z**m),
    with z**m built by repeated multiplication.  Negating (u, v) then negates
    z**m exactly for odd m, which keeps parity bit-exact.
    """
    n, m = mode
    am = abs(m)
    rho2 = u * u + v * v
    z = u + 1j * v
    zm = np.ones_like(z)
    for _ in range(am):
        zm = zm * z
    angular = zm.real if m >= 0 else zm.imag
    radial = np.zeros_like(rho2)
    for power, c in _radial_coefficients(n, m):
        radial = radial + c * rho2 ** ((power - am) // 2)
    norm = math.sqrt(n + 1) if m == 0 else math.sqrt(2 * (n + 1))
    return np.where(rho2 < 1.0, norm * radial * angular, 0.0)


@dataclass(frozen=True)
class PhaseScreen:
    """Weighted sum of disk polynomials; weights are RMS phase in radians.

    ``radius`` is the disk radius in meters; ``None`` means half the grid
    extent.  Pixels with rho >= 1 carry zero phase.
    """

    coefficients: tuple[tuple[ModeIndex, float], ...] = ()
    radius: float | None = None

    def __post_init__(self):
        coeffs = tuple((parse_mode(mode), float(w)) for mode, w in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_pairs(cls, pairs: Iterable, radius: float | None = None) -> "PhaseScreen":
        if isinstance(pairs, dict):
            pairs = pairs.items()
        return cls(tuple(pairs), radius)

    @property
    def parities(self) -> tuple[str, ...]:
        return tuple(mode_parity(mode) for mode, _ in self.coefficients)

    def only(self, parity: str) -> "PhaseScreen":
        keep = tuple(c for c in self.coefficients if mode_parity(c[0]) == parity)
        return PhaseScreen(keep, self.radius)

    @classmethod
    def random(cls, rng: np.random.Generator, n_modes: int = 6, max_weight: float = 2.0,
               max_degree: int = 5, radius: float | None = None) -> "PhaseScreen":
        """Random mixed-parity screen, weights uniform in [-max_weight, max_weight]."""
        modes = [(n, m) for n in range(1, max_degree + 1) for m in range(-n, n + 1, 2)]
        picks = rng.choice(len(modes), size=min(n_modes, len(modes)), replace=False)
        weights = rng.uniform(-max_weight, max_weight, size=len(picks))
        return cls(tuple((modes[i], float(w)) for i, w in zip(sorted(picks), weights)), radius)


def render_phase_screen(screen: PhaseScreen, spec: GridSpec) -> np.ndarray:
    radius = screen.radius if screen.radius is not None else spec.center * spec.pitch
    if not radius > 0:
        raise ConfigError("phase-screen radius must be positive")
    if radius > spec.center * spec.pitch:
        # a larger disk would reach the unpaired Nyquist row and break parity
        raise ConfigError("phase-screen radius exceeds half the grid extent")
    c = np.arange(spec.n) - spec.center
    scale = spec.pitch / radius
    u, v = np.meshgrid(c * scale, c * scale, indexing="ij")
    phi = np.zeros((spec.n, spec.n))
    for mode, weight in screen.coefficients:
        phi = phi + weight * zernike(mode, u, v)
    return phi


# --------------------------------------------------------------------------
# Thin-object masks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectMask:
    """Thin object G(x) = t(x) exp(i phi(x)) with 0 <= t <= 1."""

    amplitude: np.ndarray
    phase: np.ndarray
    spec: GridSpec
    label: str = field(default="mask", compare=False)

    def __post_init__(self):
        t = np.asarray(self.amplitude, dtype=float)
        phi = np.asarray(self.phase, dtype=float)
        shape = (self.spec.n, self.spec.n)
        if t.shape != shape or phi.shape != shape:
            raise ConfigError(f"mask grids must be {shape}, got {t.shape} and {phi.shape}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(phi))):
            raise PhysicsError(f"{self.label}: non-finite amplitude or phase")
        if t.min() < 0 or t.max() > 1:
            raise PhysicsError(
                f"{self.label}: transmittance must lie in [0, 1], got range [{t.min()}, {t.max()}]"
            )
        object.__setattr__(self, "amplitude", _frozen(t))
        object.__setattr__(self, "phase", _frozen(phi))

    def as_complex(self) -> ComplexField:
        return ComplexField(self.spec, self.amplitude * np.exp(1j * self.phase))

    def intensity(self) -> np.ndarray:
        """|G|**2, computed from the amplitude grid alone."""
        return self.amplitude * self.amplitude

    def with_phase(self, extra: np.ndarray | PhaseScreen) -> "ObjectMask":
        if isinstance(extra, PhaseScreen):
            extra = render_phase_screen(extra, self.spec)
        return ObjectMask(self.amplitude, self.phase + extra, self.spec, self.label)

    def phase_free(self) -> "ObjectMask":
        return ObjectMask(self.amplitude, np.zeros_like(self.phase), self.spec, self.label)

    def parity_parts(self) -> tuple[np.ndarray, np.ndarray]:
        return decompose_parity(self.phase)


def unit_mask(spec: GridSpec) -> ObjectMask:
    return ObjectMask(np.ones((spec.n, spec.n)), np.zeros((spec.n, spec.n)), spec, "unit")


def disk_mask(spec: GridSpec, radius: float, center: tuple[float, float] = (0.0, 0.0)) -> ObjectMask:
    if radius <= 0:
        raise ConfigError("disk radius must be positive")
    x, y = spec.mesh()
    t = (((x - center[0]) ** 2 + (y - center[1]) ** 2) <= radius * radius).astype(float)
    return ObjectMask(t, np.zeros_like(t), spec, f"disk({radius:g})")


def slit_mask(spec: GridSpec, width: float, length: float | None = None) -> ObjectMask:
    """Open strip |x1| <= width/2, optionally limited to |x2| <= length/2."""
    if width <= 0:
        raise ConfigError("slit width must be positive")
    x, y = spec.mesh()
    t = np.abs(x) <= width / 2
    if length is not None:
        t &= np.abs(y) <= length / 2
    t = t.astype(float)
    return ObjectMask(t, np.zeros_like(t), spec, f"slit({width:g})")


def pinhole_mask(spec: GridSpec, radius: float = 0.0) -> ObjectMask:
    """A disk of the given radius; radius 0 opens only the center pixel."""
    if radius < 0:
        raise ConfigError("pinhole radius must be non-negative")
    if radius == 0:
        t = np.zeros((spec.n, spec.n))
        t[spec.center, spec.center] = 1.0
        return ObjectMask(t, np.zeros_like(t), spec, "pinhole")
    return disk_mask(spec, radius)


# 5x7 bitmaps; rows run along e1 (top row = most negative x1)
_GLYPHS = {
    "F": ["11111", "10000", "10000", "11110", "10000", "10000", "10000"],
    "L": ["10000", "10000", "10000", "10000", "10000", "10000", "11111"],
    "P": ["11110", "10001", "10001", "11110", "10000", "10000", "10000"],
    "R": ["11110", "10001", "10001", "11110", "10100", "10010", "10001"],
}


def letter_mask(spec: GridSpec, glyph: str = "F", height: float | None = None) -> ObjectMask:
    """Upright block letter centered on the grid; ``height`` defaults to half the extent."""
    glyph = glyph.upper()
    if glyph not in _GLYPHS:
        raise ConfigError(f"no built-in glyph {glyph!r}; choose from {sorted(_GLYPHS)}")
    rows = _GLYPHS[glyph]
    height = height if height is not None else spec.n * spec.pitch / 2
    cell = max(1, int(round(height / spec.pitch / len(rows))))
    bitmap = np.array([[c == "1" for c in r] for r in rows], dtype=float)
    block = np.kron(bitmap, np.ones((cell, cell)))
    h, w = block.shape
    if h >= spec.n or w >= spec.n:
        raise ConfigError("letter does not fit on the grid")
    t = np.zeros((spec.n, spec.n))
    i0, j0 = spec.center - h // 2, spec.center - w // 2
    t[i0:i0 + h, j0:j0 + w] = block
    return ObjectMask(t, np.zeros_like(t), spec, f"letter({glyph})")
