"""Correlated-photon source models.

Two sources are supported: the SPDC biphoton spectrum
``Phi(q, nu) = sinc(L*Delta/2) * exp(i*L*Delta/2)`` with
``Delta = -nu*D + M*q2 + 2|q|^2/k_pump`` (walk-off along grid axis e2), and a
classical beam-steered source whose coincidence pairs (q, -q) carry
weight F(q).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PhysicsError
from .fields import ComplexField, GridSpec, reflect_grid

_SINC_SERIES_BELOW = 1e-4


def sinc(u):
    """sin(u)/u with a two-term Taylor branch near zero (unnormalized, unlike np.sinc)."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SINC_SERIES_BELOW
    safe = np.where(small, 1.0, u)
    return np.where(small, 1.0 - u * u / 6.0, np.sin(safe) / safe)


@dataclass(frozen=True)
class SpdcParams:
    L: float
    D: float
    M: float
    k_pump: float
    omega0: float
    bandwidth: float
    n_nu: int = 9

    def __post_init__(self):
        for name in ("L", "k_pump", "omega0", "bandwidth"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"spdc.{name} must be positive, got {value}")
        if not (math.isfinite(self.D) and math.isfinite(self.M)):
            raise ConfigError("spdc.D and spdc.M must be finite")
        if int(self.n_nu) != self.n_nu or self.n_nu < 1 or self.n_nu % 2 == 0:
            raise ConfigError(f"spdc.n_nu must be a positive odd integer, got {self.n_nu}")

    def nu_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric trapezoid nodes and weights on [-bandwidth, bandwidth].

        Nodes are built as -reversed(positive half) so the set is closed
        under nu -> -nu exactly; nu = 0 is always a node.
        """
        half = self.n_nu // 2
        if half == 0:
            return np.zeros(1), np.array([2.0 * self.bandwidth])
        pos = self.bandwidth * np.arange(1, half + 1) / half
        nodes = np.concatenate([-pos[::-1], [0.0], pos])
        step = self.bandwidth / half
        weights = np.full(self.n_nu, step)
        weights[0] = weights[-1] = step / 2
        return nodes, weights


def phase_mismatch(q, nu, p: SpdcParams):
    """Delta(q, nu) in 1/m; ``q`` is a pair (q1, q2) of scalars or arrays."""
    q1, q2 = q
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    return -nu * p.D + p.M * q2 + 2.0 * (q1 * q1 + q2 * q2) / p.k_pump


def spdc_spectrum(q, nu, p: SpdcParams):
    half = p.L * phase_mismatch(q, nu, p) / 2.0
    return sinc(half) * np.exp(1j * half)


def symmetrized_spectrum(q, nu, p: SpdcParams):
    """Phi(q, nu) + Phi(-q, -nu): both photons of the pair may reach either detector."""
    q1, q2 = q
    return spdc_spectrum((q1, q2), nu, p) + spdc_spectrum((-np.asarray(q1), -np.asarray(q2)), -nu, p)


@dataclass(frozen=True)
class ClassicalSpectrum:
    """Momentum weight F(q) = f(q)**2 of a beam-steered classical source."""

    F: ComplexField
    even: bool = True

    def __post_init__(self):
        if self.even:
            vals = self.F.values
            scale = np.max(np.abs(vals))
            err = np.max(np.abs(reflect_grid(vals) - vals))
            if scale == 0 or err > 1e-12 * scale:
                raise PhysicsError(f"classical spectrum flagged even but F(-q) != F(q) (max dev {err:.3g})")

    @property
    def spec(self) -> GridSpec:
        return self.F.spec

    @classmethod
    def uniform(cls, q_spec: GridSpec) -> "ClassicalSpectrum":
        return cls(ComplexField(q_spec, np.ones((q_spec.n, q_spec.n))))

    @classmethod
    def gaussian(cls, q_spec: GridSpec, sigma_q: float) -> "ClassicalSpectrum":
        """F(q) = exp(-|q|^2 / (2 sigma_q^2))."""
        if not sigma_q > 0:
            raise ConfigError("sigma_q must be positive")
        q1, q2 = q_spec.mesh()
        return cls(ComplexField(q_spec, np.exp(-(q1 * q1 + q2 * q2) / (2.0 * sigma_q**2))))


def classical_pair_weight(q, s: ClassicalSpectrum):
    """F at momentum q (nearest grid bin); zero off the momentum grid.

    The coincidence-contributing pair is q in branch 1 and -q in branch 2.
    """
    q1, q2 = q
    i = s.spec.index_of(q1)
    j = s.spec.index_of(q2)
    n = s.spec.n
    inside = (i >= 0) & (i < n) & (j >= 0) & (j < n)
    out = np.where(inside, s.F.values[np.clip(i, 0, n - 1), np.clip(j, 0, n - 1)], 0.0)
    return out if out.ndim else complex(out)
