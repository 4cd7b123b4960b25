"""Coincidence imaging through two 4f branches with objects on the Fourier plane.

Two computation paths are provided:

* analytic: R(x1) = R_0 |G1(x1/m)|^2 |G2(-x1/m)|^2 with m = f_D / f, or
  |F(k x1 / f_D)|^2 |G1|^2 |G2|^2 for the classical source;
* brute force: the detection amplitude
  a(x1, x2, nu) = sum_q S_nu(q) H1(q, x1) H2(-q, x2) is summed explicitly
  and R(x1) = sum_nu w_nu sum_x2 |a|^2.

For SPDC, S_nu(q) = Phi(q, nu) + Phi(-q, -nu), which carries the
B(x1) + B(-x1) + C + C* structure of the rate.  For the classical source
there is a single term with S(q) = F(q).
"""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np
import scipy.fft

from ._parallel import pmap
from .errors import ConfigError, ResourceError
from .fields import GridSpec, ObjectMask, reflect_grid
from .geometry import OpticalGeometry
from .sources import ClassicalSpectrum, SpdcParams, spdc_spectrum, symmetrized_spectrum

log = logging.getLogger(__name__)

Mode = Literal["with_lens", "without_lens"]
MODES = ("with_lens", "without_lens")
DEFAULT_PAIR_BUDGET = 2**30


def _pair_budget() -> int:
    raw = os.environ.get("GHOSTSIM_MAX_PAIRS")
    return int(raw) if raw else DEFAULT_PAIR_BUDGET


@dataclass(frozen=True)
class CoincidenceMap:
    spec: GridSpec
    rates: np.ndarray
    norm: float
    path: Literal["analytic", "bruteforce"]
    source: Literal["spdc", "classical"]
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        if not np.all(np.isfinite(rates)):
            raise ValueError("coincidence map is not finite")
        if rates.min() < 0:
            raise ValueError("coincidence map has negative rates")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    def normalized(self) -> np.ndarray:
        peak = self.rates.max()
        return self.rates / peak if peak > 0 else self.rates.copy()

    def cv(self) -> float:
        """Coefficient of variation over the whole detector grid."""
        mean = self.rates.mean()
        return float(self.rates.std() / mean) if mean > 0 else float("inf")


# --------------------------------------------------------------------------
# grid lookups
# --------------------------------------------------------------------------


def _lookup(values: np.ndarray, spec: GridSpec, c1, c2, fill=0.0):
    """Nearest-pixel lookup at physical coordinates.

    The unpaired Nyquist coordinate +n/2 * pitch is identified with
    -n/2 * pitch, matching the modulo-n reflection; anything else off the
    grid returns ``fill``.
    """
    n = spec.n
    i = spec.index_of(c1)
    j = spec.index_of(c2)
    i = np.where(i == n, 0, i)
    j = np.where(j == n, 0, j)
    inside = (i >= 0) & (i < n) & (j >= 0) & (j < n)
    picked = values[np.clip(i, 0, n - 1), np.clip(j, 0, n - 1)]
    return np.where(inside, picked, fill)


def sample_mask(mask: ObjectMask, c1, c2) -> np.ndarray:
    """Complex transmittance G at object-plane coordinates (opaque off-grid)."""
    return _lookup(mask.as_complex().values, mask.spec, c1, c2)


def _sample_amplitude(mask: ObjectMask, c1, c2) -> np.ndarray:
    return _lookup(mask.amplitude, mask.spec, c1, c2)


# --------------------------------------------------------------------------
# branch transfer functions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchTransfer:
    mode: Mode
    mask: ObjectMask
    geom: OpticalGeometry
    branch: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"branch mode must be one of {MODES}, got {self.mode!r}")
        if self.branch not in (1, 2):
            raise ConfigError("branch must be 1 or 2")

    @property
    def pupil_radius(self) -> float:
        return self.geom.pupil_radius1 if self.branch == 1 else self.geom.pupil_radius2

    def detector_grid(self) -> GridSpec:
        """Where this branch is sampled: the map grid for branch 1 or behind a
        lens, the bucket plane for a lens-free branch 2."""
        if self.mode == "with_lens" or self.branch == 1:
            return self.geom.detector_grid(self.mask.spec)
        return self.geom.bucket_grid(self.mask.spec)


def _wrap_nyquist(index, n):
    return np.where(index == n, 0, index)


def transfer(branch: BranchTransfer, q, x_j):
    """H_j(q, x_j) for one branch at momentum ``q`` and detector point ``x_j``.

    without_lens: G(fq/k) exp(i q.x).
    with_lens: exp(-i k |x|^2 (d2/f_D - 1) / (2 f_D)) exp(-i d1 |q|^2 / (2k))
    G(fq/k) times a discrete delta of height n at the detector pixel nearest
    x = f_D q / k.  The height n makes sum_x |H|^2 equal for both modes with
    a unit mask.
    """
    geom = branch.geom
    q1, q2 = (np.asarray(v, dtype=float) for v in q)
    x1, x2 = (np.asarray(v, dtype=float) for v in x_j)
    G = sample_mask(branch.mask, geom.f * q1 / geom.k, geom.f * q2 / geom.k)
    pupil = (x1 * x1 + x2 * x2) <= branch.pupil_radius**2
    if branch.mode == "without_lens":
        out = G * np.exp(1j * (q1 * x1 + q2 * x2)) * pupil
    else:
        det = geom.detector_grid(branch.mask.spec)
        n = det.n
        # -q of the unpaired Nyquist bin lands on index n; wrap it like reflect_grid
        hit_i = _wrap_nyquist(det.index_of(geom.f_D * q1 / geom.k), n)
        hit_j = _wrap_nyquist(det.index_of(geom.f_D * q2 / geom.k), n)
        at_i = det.index_of(x1)
        at_j = det.index_of(x2)
        on_grid = (hit_i >= 0) & (hit_i < n) & (hit_j >= 0) & (hit_j < n)
        delta = np.where(on_grid & (hit_i == at_i) & (hit_j == at_j), float(n), 0.0)
        quad = np.exp(-1j * geom.k * (x1 * x1 + x2 * x2) / (2 * geom.f_D) * (geom.d2 / geom.f_D - 1.0))
        quad = quad * np.exp(-1j * geom.d1 * (q1 * q1 + q2 * q2) / (2 * geom.k))
        out = quad * G * delta * pupil
    return out if out.ndim else complex(out)


# --------------------------------------------------------------------------
# B and C integrals, analytic maps
# --------------------------------------------------------------------------


def _detector_momentum(x1, geom: OpticalGeometry):
    return geom.k * np.asarray(x1[0], dtype=float) / geom.f_D, geom.k * np.asarray(x1[1], dtype=float) / geom.f_D


def b_integral(x1, p: SpdcParams, geom: OpticalGeometry) -> float:
    """B(x1) = int dnu |Phi(k x1 / f_D, nu)|^2 on the trapezoid nodes."""
    q = _detector_momentum(x1, geom)
    nodes, weights = p.nu_nodes()
    return float(sum(w * np.abs(spdc_spectrum(q, nu, p)) ** 2 for nu, w in zip(nodes, weights)))


def c_integral(x1, p: SpdcParams, geom: OpticalGeometry) -> complex:
    """C(x1) = int dnu Phi(k x1 / f_D, nu) Phi*(-k x1 / f_D, -nu)."""
    q = _detector_momentum(x1, geom)
    mq = (-q[0], -q[1])
    nodes, weights = p.nu_nodes()
    return complex(sum(w * spdc_spectrum(q, nu, p) * np.conj(spdc_spectrum(mq, -nu, p))
                       for nu, w in zip(nodes, weights)))


def rate_constant(p: SpdcParams, geom: OpticalGeometry, x1=(0.0, 0.0)) -> float:
    """R_0 = B(x1) + B(-x1) + 2 Re C(x1), evaluated once (at the axis by default)."""
    mx = (-x1[0], -x1[1])
    return b_integral(x1, p, geom) + b_integral(mx, p, geom) + 2.0 * c_integral(x1, p, geom).real


def bc_spread(p: SpdcParams, geom: OpticalGeometry, spec: GridSpec, samples: int = 9) -> dict:
    """Relative spread of B and C over points along both detector axes."""
    det = geom.detector_grid(spec)
    reach = (det.center - 1) * det.pitch
    t = np.linspace(-1.0, 1.0, samples)
    points = [(s * reach, 0.0) for s in t] + [(0.0, s * reach) for s in t if s != 0]
    B = np.array([b_integral(x, p, geom) for x in points])
    C = np.array([c_integral(x, p, geom) for x in points])
    return {"B_spread": relative_spread(B), "C_spread": relative_spread(C), "n_points": len(points)}


def relative_spread(values) -> float:
    """Largest pairwise distance over the modulus of the mean (works for complex values)."""
    v = np.asarray(values)
    return float(np.max(np.abs(v[:, np.newaxis] - v[np.newaxis, :])) / np.abs(np.mean(v)))


def _check_pair(G1: ObjectMask, G2: ObjectMask):
    if G1.spec != G2.spec:
        raise ConfigError("both masks must share one grid")


def _pupil_warning(geom: OpticalGeometry):
    if geom.has_finite_pupils:
        warnings.warn("finite detection pupils are experimental", RuntimeWarning, stacklevel=3)


def _analytic_intensity(G1: ObjectMask, G2: ObjectMask, geom: OpticalGeometry,
                        detector: GridSpec | None = None):
    """|G1(x1/m)|^2 |G2(-x1/m)|^2 on the detector grid, from the amplitude grids only.

    The default detector grid has pitch m * mask pitch, so pixels map one
    to one; any other grid is sampled nearest-pixel.
    """
    det = detector if detector is not None else geom.detector_grid(G1.spec)
    X1, X2 = det.mesh()
    m = geom.magnification
    t1 = _sample_amplitude(G1, X1 / m, X2 / m)
    t2 = _sample_amplitude(G2, -(X1 / m), -(X2 / m))
    return det, (t1 * t1) * (t2 * t2)


def image_entangled_analytic(G1: ObjectMask, G2: ObjectMask, p: SpdcParams, geom: OpticalGeometry,
                             detector: GridSpec | None = None) -> CoincidenceMap:
    _check_pair(G1, G2)
    det, shape = _analytic_intensity(G1, G2, geom, detector)
    r0 = rate_constant(p, geom)
    return CoincidenceMap(det, r0 * shape, r0, "analytic", "spdc")


def image_classical_analytic(G1: ObjectMask, G2: ObjectMask, s: ClassicalSpectrum, geom: OpticalGeometry,
                             detector: GridSpec | None = None) -> CoincidenceMap:
    _check_pair(G1, G2)
    if not s.even:
        raise ConfigError("classical imaging assumes an even spectrum F(q)")
    det, shape = _analytic_intensity(G1, G2, geom, detector)
    X1, X2 = det.mesh()
    F = _lookup(s.F.values, s.spec, geom.k * X1 / geom.f_D, geom.k * X2 / geom.f_D)
    envelope = np.abs(F) ** 2
    return CoincidenceMap(det, envelope * shape, 1.0, "analytic", "classical")


# --------------------------------------------------------------------------
# brute-force detection amplitude
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Engine:
    """Precomputed per-geometry pieces of the brute-force sum."""

    G1: ObjectMask
    G2: ObjectMask
    geom: OpticalGeometry
    lens1: bool
    lens2: bool

    def __post_init__(self):
        spec = self.G1.spec
        geom = self.geom
        n = spec.n
        q_spec = geom.momentum_grid(spec)
        det = geom.detector_grid(spec)
        bucket = geom.bucket_grid(spec)
        q = q_spec.coords()
        Q1, Q2 = q_spec.mesh()

        # H1's mask factor at q, H2's at -q
        g1 = sample_mask(self.G1, geom.f * Q1 / geom.k, geom.f * Q2 / geom.k)
        g2m = reflect_grid(sample_mask(self.G2, geom.f * Q1 / geom.k, geom.f * Q2 / geom.k))
        q_phase = np.exp(-1j * geom.d1 * (Q1 * Q1 + Q2 * Q2) / (2 * geom.k))

        # detection-lens delta: q bin -> detector pixel of f_D q / k
        hit = det.index_of(geom.f_D * q / geom.k)
        if not np.array_equal(hit, np.arange(n)):
            raise ConfigError("momentum and detector grids are not in one-to-one correspondence")

        x1 = det.coords()
        X1a, X1b = det.mesh()
        x1_quad = np.exp(-1j * geom.k * (X1a**2 + X1b**2) / (2 * geom.f_D) * (geom.d2 / geom.f_D - 1.0))
        pupil1 = (X1a**2 + X1b**2) <= geom.pupil_radius1**2

        # branch 2 sees -q, so its lens sends bin a to pixel (n - a) % n
        reflect_idx = (n - np.arange(n)) % n
        pupil2_lens = (X1a**2 + X1b**2) <= geom.pupil_radius2**2
        xb = bucket.coords()
        XBa, XBb = bucket.mesh()
        pupil2_bucket = (XBa**2 + XBb**2) <= geom.pupil_radius2**2

        bucket_pupil_open = bool(np.all(pupil2_bucket))
        fields = dict(bucket_pupil_open=bucket_pupil_open, 
            n=n, q=q, g1=g1, g2m=g2m, q_phase=q_phase, x1=x1, x1_quad=x1_quad, pupil1=pupil1,
            reflect_idx=reflect_idx, pupil2_lens=pupil2_lens, xb=xb, pupil2_bucket=pupil2_bucket,
            q_spec=q_spec, det=det, bucket=bucket,
        )
        for k, v in fields.items():
            object.__setattr__(self, k, v)

    def _quad2(self) -> np.ndarray:
        X2a, X2b = self.det.mesh()
        return np.exp(-1j * self.geom.k * (X2a**2 + X2b**2) / (2 * self.geom.f_D)
                      * (self.geom.d2 / self.geom.f_D - 1.0))

    @property
    def _quad2_masked(self) -> np.ndarray:
        cached = self.__dict__.get("_q2m")
        if cached is None:
            cached = self._quad2() * self.pupil2_lens
            object.__setattr__(self, "_q2m", cached)
        return cached

    def lens1_weight(self, S: np.ndarray) -> np.ndarray:
        """Amplitude reaching detector pixel x1 through the branch-1 lens, before branch 2.

        Only q bin x1 couples to pixel x1, so this is a grid over (i, j) = q bin.
        """
        return self.n * S * self.g1 * self.g2m * self.q_phase * self.x1_quad * self.pupil1

    def branch1_coeffs(self, S: np.ndarray, i: int) -> np.ndarray:
        """c[j, qa, qb]: q-space amplitude after branch 1 for detector pixel (i, j).

        Includes S(q) G1(q) G2(-q); branch-2 kernels are applied afterwards.
        """
        n = self.n
        if self.lens1:
            c = np.zeros((n, n, n), dtype=complex)
            cols = np.arange(n)
            c[cols, i, cols] = self.lens1_weight(S)[i]
            return c
        base = S * self.g1 * self.g2m
        return base[np.newaxis] * self._x1_phase(i) * self.pupil1[i][:, np.newaxis, np.newaxis]

    def _x1_phase(self, i: int) -> np.ndarray:
        """exp(i q.x1) for detector row i, shape (j, qa, qb)."""
        e1 = np.exp(1j * self.q * self.x1[i])
        e2 = np.exp(1j * np.outer(self.x1, self.q))
        return e1[np.newaxis, :, np.newaxis] * e2[:, np.newaxis, :]

    @property
    def fold2(self) -> np.ndarray:
        """Branch-2 factors that depend only on the q bin, moved ahead of the x2 sum.

        With the lens, bin q reaches pixel -q: the factor is n exp(-i d1 |q|^2 / 2k)
        times the detector-plane phase and pupil read at the reflected pixel.
        """
        if not self.lens2:
            return np.ones((self.n, self.n))
        return self.n * self.q_phase * reflect_grid(self._quad2_masked)

    def _to_plane2(self, c_folded: np.ndarray) -> np.ndarray:
        if self.lens2:
            # q bin (qa, qb) lands on pixel ((n - qa) % n, (n - qb) % n)
            return reflect_grid(c_folded)
        # lens-free: sum_q c_q exp(-i q.x2) on the DFT-conjugate bucket grid
        shifted = np.fft.ifftshift(c_folded, axes=(-2, -1))
        a = np.fft.fftshift(scipy.fft.fft2(shifted, overwrite_x=True), axes=(-2, -1))
        if self.bucket_pupil_open:
            return a
        return a * self.pupil2_bucket

    def branch2_amplitude(self, c: np.ndarray) -> np.ndarray:
        """a[j, x2a, x2b] = sum_q c[j, q] H2(-q, x2) without the G2 factor (already in c)."""
        return self._to_plane2(c * self.fold2)

    def amplitude(self, S: np.ndarray, i: int) -> np.ndarray:
        return self.branch2_amplitude(self.branch1_coeffs(S, i))

    def row_rate(self, spectra: Sequence[tuple[float, np.ndarray]], i: int) -> np.ndarray:
        out = np.zeros(self.n)
        if self.lens1:
            # branch 2 receives a single plane wave exp(-i q.x2) per pixel; its
            # bucket sum is computed once and scaled by each nu's amplitude
            e = np.exp(-1j * np.outer(self.q, self.xb))  # [q bin, x2]
            wave = e[i][np.newaxis, :, np.newaxis] * e[:, np.newaxis, :] * self.pupil2_bucket
            bucket = _sumsq(wave)
            for w, S in spectra:
                amp = self.lens1_weight(S)[i]
                out += w * (amp * amp.conj()).real * bucket
            return out
        phase = self._x1_phase(i) * self.pupil1[i][:, np.newaxis, np.newaxis]
        fold = self.g1 * self.g2m * self.fold2
        for w, S in spectra:
            out += w * _sumsq(self._to_plane2((S * fold)[np.newaxis] * phase))
        return out

    def sparse_rate(self, spectra: Sequence[tuple[float, np.ndarray]]) -> np.ndarray:
        """Both lenses present: each x1 couples to one q bin and one x2 pixel."""
        # pixel hit in branch 2 for q bin (i, j) is the reflected pixel
        quad2_hit = reflect_grid(self._quad2())
        pupil2_hit = reflect_grid(self.pupil2_lens)
        out = np.zeros((self.n, self.n))
        for w, S in spectra:
            amp = self.lens1_weight(S) * self.n * self.q_phase * quad2_hit * pupil2_hit
            out += w * (amp * amp.conj()).real
        return out


def _sumsq(a: np.ndarray) -> np.ndarray:
    """sum |a|^2 over the last two axes."""
    flat = a.reshape(a.shape[0], -1)
    return np.einsum("ij,ij->i", flat.real, flat.real) + np.einsum("ij,ij->i", flat.imag, flat.imag)


def pair_amplitude(G1: ObjectMask, G2: ObjectMask, S: np.ndarray, geom: OpticalGeometry,
                   modes: tuple[Mode, Mode], x1_index: tuple[int, int]) -> np.ndarray:
    """Detection amplitude over the branch-2 plane for one detector-1 pixel.

    ``S`` is the pair weight on the momentum grid.  Exposed for checking
    the engine against a direct triple sum.
    """
    lens1, lens2 = _parse_modes(modes)
    eng = _Engine(G1, G2, geom, lens1, lens2)
    i, j = x1_index
    return eng.amplitude(np.asarray(S, dtype=complex), i)[j]


def _check_budget(spec: GridSpec, budget: int | None):
    budget = _pair_budget() if budget is None else budget
    pairs = spec.n**4
    if pairs > budget:
        suggestion = spec.n
        while suggestion > 16 and suggestion**4 > budget:
            suggestion //= 2
        raise ResourceError(
            f"brute force needs {pairs:.3g} (q, x2) pairs, over the budget of {budget:.3g}; "
            f"try n = {suggestion}"
        )


def _parse_modes(modes) -> tuple[bool, bool]:
    if len(modes) != 2:
        raise ConfigError("need one mode per branch")
    out = []
    for m in modes:
        m = m.mode if isinstance(m, BranchTransfer) else m
        if m not in MODES:
            raise ConfigError(f"branch mode must be one of {MODES}, got {m!r}")
        out.append(m == "with_lens")
    return out[0], out[1]


def _bruteforce(G1, G2, geom, spectra, modes, budget, threads) -> tuple[GridSpec, np.ndarray]:
    _check_pair(G1, G2)
    _check_budget(G1.spec, budget)
    _pupil_warning(geom)
    lens1, lens2 = _parse_modes(modes)
    eng = _Engine(G1, G2, geom, lens1, lens2)
    if lens1 and lens2:
        raw = eng.sparse_rate(spectra)
    else:
        rows = pmap(lambda i: eng.row_rate(spectra, i), range(eng.n), threads)
        raw = np.stack(rows)
    # q bins whose lens pixel falls outside the detection pupil contribute nothing
    diagnostics = {
        "modes": ["with_lens" if lens1 else "without_lens", "with_lens" if lens2 else "without_lens"],
        "vignetted_bins": [int(np.count_nonzero(~eng.pupil1)) if lens1 else 0,
                           int(np.count_nonzero(~eng.pupil2_lens)) if lens2 else 0],
    }
    return eng.det, raw, diagnostics


def _spdc_spectra(p: SpdcParams, geom: OpticalGeometry, spec: GridSpec):
    Q1, Q2 = geom.momentum_grid(spec).mesh()
    nodes, weights = p.nu_nodes()
    return [(float(w), symmetrized_spectrum((Q1, Q2), nu, p)) for nu, w in zip(nodes, weights)]


def _peak_normalized(det, raw, diagnostics, path_source):
    peak = float(raw.max())
    rates = raw / peak if peak > 0 else raw
    return CoincidenceMap(det, rates, peak, "bruteforce", path_source, diagnostics)


def image_entangled_bruteforce(G1: ObjectMask, G2: ObjectMask, p: SpdcParams, geom: OpticalGeometry,
                               modes=("with_lens", "with_lens"), budget: int | None = None,
                               threads: int | None = None) -> CoincidenceMap:
    spectra = _spdc_spectra(p, geom, G1.spec)
    return _peak_normalized(*_bruteforce(G1, G2, geom, spectra, modes, budget, threads), "spdc")


def image_classical_bruteforce(G1: ObjectMask, G2: ObjectMask, s: ClassicalSpectrum, geom: OpticalGeometry,
                               modes=("with_lens", "with_lens"), budget: int | None = None,
                               threads: int | None = None) -> CoincidenceMap:
    if s.spec != geom.momentum_grid(G1.spec):
        raise ConfigError("classical spectrum must live on the momentum grid of the masks")
    spectra = [(1.0, np.asarray(s.F.values, dtype=complex))]
    return _peak_normalized(*_bruteforce(G1, G2, geom, spectra, modes, budget, threads), "classical")


def image_classical(G1: ObjectMask, G2: ObjectMask, s: ClassicalSpectrum, geom: OpticalGeometry,
                    path: Literal["analytic", "bruteforce"] = "analytic", **kwargs) -> CoincidenceMap:
    if path == "analytic":
        return image_classical_analytic(G1, G2, s, geom)
    if path == "bruteforce":
        return image_classical_bruteforce(G1, G2, s, geom, **kwargs)
    raise ConfigError(f"unknown path {path!r}")


# --------------------------------------------------------------------------
# bucket-bucket correlator
# --------------------------------------------------------------------------

Source = Union[SpdcParams, ClassicalSpectrum, None]


def correlate_scan(G1: ObjectMask, G2: ObjectMask, displacements, source: Source,
                   geom: OpticalGeometry, deinvert: bool = False) -> list[tuple[tuple[float, float], float]]:
    """g(r) = sum_x1 |G1((x1 + r)/m)|^2 |G2(-x1/m)|^2 for each displacement r.

    ``deinvert`` models the extra lens that replaces G2(-x) by G2(x).  With
    a classical source each x1 is further weighted by |F(k x1 / f_D)|^2.
    The SPDC rate constant is left out.  Displacements are detector-plane
    vectors and must be whole detector pixels.
    """
    _check_pair(G1, G2)
    det = geom.detector_grid(G1.spec)
    X1, X2 = det.mesh()
    m = geom.magnification
    t1 = _sample_amplitude(G1, X1 / m, X2 / m)
    sign = 1.0 if deinvert else -1.0
    t2 = _sample_amplitude(G2, sign * (X1 / m), sign * (X2 / m))
    I1 = t1 * t1
    I2 = t2 * t2
    if isinstance(source, ClassicalSpectrum):
        F = _lookup(source.F.values, source.spec, geom.k * X1 / geom.f_D, geom.k * X2 / geom.f_D)
        I2 = I2 * np.abs(F) ** 2
    n = det.n
    out = []
    for r in displacements:
        r = (float(r[0]), float(r[1]))
        s = np.array(r) / det.pitch
        si = np.rint(s).astype(int)
        if np.max(np.abs(s - si)) > 1e-6:
            raise ConfigError(f"displacement {r} is not a whole number of detector pixels")
        a, b = int(si[0]), int(si[1])
        # shifted[i, j] = I1[i + a, j + b]; entries that would come from off-grid are lost
        src_i = slice(max(a, 0), n + min(a, 0))
        src_j = slice(max(b, 0), n + min(b, 0))
        kept = I1[src_i, src_j]
        if kept.sum() != I1.sum():
            raise ConfigError(f"displacement {r} pushes object 1 off the grid")
        shifted = np.zeros_like(I1)
        shifted[max(-a, 0):n - max(a, 0), max(-b, 0):n - max(b, 0)] = kept
        out.append((r, float(np.sum(shifted * I2))))
    return out
