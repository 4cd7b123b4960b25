"""Coincidence rate of the aberration-cancelling two-photon interferometer.

R(tau) = R0 * [1 - tri(1 - 2 tau / (D L)) * Re W(tau)], with

    R0     = sum_q |G1(fq/k) G2(-fq/k)|^2 dq^2
    W(tau) = (1/R0) sum_q exp(-2i M tau q2 / D)
             * G1*(fq/k) G1(-fq/k) G2*(-fq/k) G2(fq/k) dq^2

Even phase components of each mask cancel from W; odd components cancel
only when both branches carry the same mask.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._parallel import pmap
from .errors import ConfigError, UndefinedModulationError
from .fields import ObjectMask, reflect_grid
from .geometry import OpticalGeometry
from .sources import SpdcParams

log = logging.getLogger(__name__)


def triangular(x):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= 1.0, 1.0 - np.abs(x), 0.0)
    return out if out.ndim else float(out)


def _check_pair(G1: ObjectMask, G2: ObjectMask):
    if G1.spec != G2.spec:
        raise ConfigError("both masks must share one grid")


def background_R0(G1: ObjectMask, G2: ObjectMask, geom: OpticalGeometry) -> float:
    _check_pair(G1, G2)
    dq = geom.momentum_grid(G1.spec).pitch
    g1 = G1.as_complex().values
    g2m = reflect_grid(G2.as_complex().values)
    r0 = float(np.sum(np.abs(g1 * g2m) ** 2) * dq * dq)
    if r0 == 0.0:
        msg = "background R0 is zero: the masks have no overlapping open area"
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return r0


def _modulation_kernel(G1: ObjectMask, G2: ObjectMask, geom: OpticalGeometry):
    g1 = G1.as_complex().values
    g2 = G2.as_complex().values
    g1m = reflect_grid(g1)
    g2m = reflect_grid(g2)
    product = np.conj(g1) * g1m * np.conj(g2m) * g2
    q_spec = geom.momentum_grid(G1.spec)
    q2 = q_spec.coords()[np.newaxis, :]
    return product, q2, q_spec.pitch**2


def modulation_W(tau: float, G1: ObjectMask, G2: ObjectMask, p: SpdcParams,
                 geom: OpticalGeometry, R0: float | None = None) -> complex:
    _check_pair(G1, G2)
    if p.D == 0:
        raise ConfigError("spdc.D must be nonzero for the interferometer")
    if R0 is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            R0 = background_R0(G1, G2, geom)
    if R0 == 0:
        raise UndefinedModulationError("W(tau) is undefined when R0 = 0")
    product, q2, dq2 = _modulation_kernel(G1, G2, geom)
    return _w_from_kernel(tau, product, q2, dq2, R0, p)


def _w_from_kernel(tau, product, q2, dq2, R0, p: SpdcParams) -> complex:
    phase = np.exp(-2j * p.M * tau / p.D * q2)
    return complex(np.sum(product * phase) * dq2 / R0)


@dataclass(frozen=True)
class TauScan:
    taus: np.ndarray
    rates: np.ndarray
    W: np.ndarray
    R0: float
    params: SpdcParams
    masks: tuple[ObjectMask, ObjectMask]

    @property
    def dip_center(self) -> float:
        return float(self.taus[int(np.argmin(self.rates))])

    @property
    def dip_depth(self) -> float:
        return float(self.R0 - np.min(self.rates))

    def dip_width(self) -> float:
        """Base width of the dip.

        Each edge sits halfway between the outermost sample that departs
        from R0 and its neighbour on the baseline; a dip touching the end
        of the scan is measured to that end.
        """
        idx = np.nonzero(self.rates != self.R0)[0]
        if idx.size == 0:
            return 0.0
        lo, hi = idx[0], idx[-1]
        left = 0.5 * (self.taus[lo - 1] + self.taus[lo]) if lo > 0 else self.taus[lo]
        right = 0.5 * (self.taus[hi] + self.taus[hi + 1]) if hi + 1 < self.taus.size else self.taus[hi]
        return float(right - left)


def rate_scan(taus: Sequence[float], G1: ObjectMask, G2: ObjectMask, p: SpdcParams,
              geom: OpticalGeometry, threads: int | None = None) -> TauScan:
    taus = np.asarray(taus, dtype=float)
    if not np.all(np.isfinite(taus)):
        raise ConfigError("tau values must be finite")
    R0 = background_R0(G1, G2, geom)
    if R0 == 0:
        raise UndefinedModulationError("cannot scan tau with R0 = 0")
    if p.D == 0:
        raise ConfigError("spdc.D must be nonzero for the interferometer")
    product, q2, dq2 = _modulation_kernel(G1, G2, geom)
    W = np.array(pmap(lambda t: _w_from_kernel(t, product, q2, dq2, R0, p), taus, threads))
    envelope = triangular(1.0 - 2.0 * taus / (p.D * p.L))
    rates = R0 * (1.0 - envelope * W.real)
    return TauScan(taus, rates, W, R0, p, (G1, G2))
