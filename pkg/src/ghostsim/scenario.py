"""Scenario files: TOML with nested sections, validated into simulation objects.

See docs/scenario.md for the schema.  Relative file paths are resolved
against the scenario file's directory.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import fields as F
from .errors import ConfigError
from .geometry import OpticalGeometry
from .imaging import DEFAULT_PAIR_BUDGET
from .io import read_pgm, read_phase_raw
from .sources import ClassicalSpectrum, SpdcParams


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridModel(_Model):
    n: int = 128
    pitch: float = Field(gt=0)


class GeometryModel(_Model):
    f: float = Field(gt=0)
    f_D: float = Field(gt=0)
    k: Optional[float] = Field(default=None, gt=0)
    wavelength: Optional[float] = Field(default=None, gt=0)
    d1: Optional[float] = None
    d2: Optional[float] = None
    pupil_radius1: float = math.inf
    pupil_radius2: float = math.inf

    @model_validator(mode="after")
    def _one_wavenumber(self):
        if (self.k is None) == (self.wavelength is None):
            raise ValueError("give exactly one of k or wavelength")
        return self

    def build(self) -> OpticalGeometry:
        k = self.k if self.k is not None else 2 * math.pi / self.wavelength
        return OpticalGeometry(self.f, self.f_D, k, self.d1, self.d2, self.pupil_radius1, self.pupil_radius2)


class SpdcModel(_Model):
    type: Literal["spdc"]
    L: float
    D: float
    M: float = 0.0
    k_pump: float
    omega0: float
    bandwidth: float
    n_nu: int = 9

    def build(self) -> SpdcParams:
        return SpdcParams(self.L, self.D, self.M, self.k_pump, self.omega0, self.bandwidth, self.n_nu)


class ClassicalModel(_Model):
    type: Literal["classical"]
    F: Literal["gaussian", "uniform", "file"] = "uniform"
    sigma_q: Optional[float] = Field(default=None, gt=0)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _needs(self):
        if self.F == "gaussian" and self.sigma_q is None:
            raise ValueError("F = 'gaussian' needs sigma_q")
        if self.F == "file" and self.path is None:
            raise ValueError("F = 'file' needs path")
        return self


class PhaseModel(_Model):
    modes: dict[str, float] = {}
    random: int = Field(default=0, ge=0)
    max_weight: float = Field(default=2.0, ge=0)
    max_degree: int = Field(default=5, ge=1)
    radius: Optional[float] = Field(default=None, gt=0)
    file: Optional[str] = None


class MaskModel(_Model):
    type: Literal["unit", "disk", "slit", "pinhole", "letter", "file"] = "unit"
    radius: Optional[float] = None
    width: Optional[float] = None
    length: Optional[float] = None
    glyph: str = "F"
    height: Optional[float] = None
    path: Optional[str] = None
    scale: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    phase: Optional[PhaseModel] = None


class ImageModel(_Model):
    path: Literal["analytic", "bruteforce", "both"] = "analytic"
    branch1_lens: bool = True
    branch2_lens: bool = True


class InterfereModel(_Model):
    tau_min: float
    tau_max: float
    steps: int = Field(default=101, ge=2)


class CorrelateModel(_Model):
    rmax: float = Field(gt=0)
    steps: int = Field(default=9, ge=1)
    deinvert: bool = False


class ResourcesModel(_Model):
    max_pairs: int = Field(default=DEFAULT_PAIR_BUDGET, gt=0)


class ScenarioModel(_Model):
    experiment: Literal["image", "interfere", "correlate", "lens-study"] = "image"
    seed: int = 0
    grid: GridModel
    geometry: GeometryModel
    source: Annotated[Union[SpdcModel, ClassicalModel], Field(discriminator="type")]
    mask1: MaskModel = MaskModel()
    mask2: MaskModel = MaskModel()
    image: ImageModel = ImageModel()
    interfere: Optional[InterfereModel] = None
    correlate: Optional[CorrelateModel] = None
    resources: ResourcesModel = ResourcesModel()
    # metric name -> largest acceptable value
    checks: dict[str, float] = {}


@dataclass(frozen=True)
class Scenario:
    model: ScenarioModel
    base_dir: Path
    digest: str
    name: str = "scenario"

    @property
    def seed(self) -> int:
        return self.model.seed

    def grid(self) -> F.GridSpec:
        return F.GridSpec(self.model.grid.n, self.model.grid.pitch)

    def geometry(self) -> OpticalGeometry:
        return self.model.geometry.build()

    def source(self):
        src = self.model.source
        if isinstance(src, SpdcModel):
            return src.build()
        q_spec = self.geometry().momentum_grid(self.grid())
        if src.F == "uniform":
            return ClassicalSpectrum.uniform(q_spec)
        if src.F == "gaussian":
            return ClassicalSpectrum.gaussian(q_spec, src.sigma_q)
        values, spec = read_phase_raw(self._resolve(src.path))
        if spec.n != q_spec.n or not math.isclose(spec.pitch, q_spec.pitch, rel_tol=1e-9):
            raise ConfigError(f"source.path: grid (n={spec.n}, pitch={spec.pitch}) does not match "
                              f"the momentum grid (n={q_spec.n}, pitch={q_spec.pitch})")
        return ClassicalSpectrum(F.ComplexField(q_spec, values))

    def masks(self) -> tuple[F.ObjectMask, F.ObjectMask]:
        spec = self.grid()
        return (self._build_mask(self.model.mask1, spec, 1, "mask1"),
                self._build_mask(self.model.mask2, spec, 2, "mask2"))

    def _resolve(self, path: str) -> Path:
        p = Path(path)
        p = p if p.is_absolute() else self.base_dir / p
        if not p.exists():
            raise ConfigError(f"referenced file does not exist: {p}")
        return p

    def _build_mask(self, m: MaskModel, spec: F.GridSpec, index: int, where: str) -> F.ObjectMask:
        def need(attr):
            value = getattr(m, attr)
            if value is None:
                raise ConfigError(f"{where}: type '{m.type}' needs '{attr}'")
            return value

        if m.type == "unit":
            mask = F.unit_mask(spec)
        elif m.type == "disk":
            mask = F.disk_mask(spec, need("radius"), tuple(m.center))
        elif m.type == "slit":
            mask = F.slit_mask(spec, need("width"), m.length)
        elif m.type == "pinhole":
            mask = F.pinhole_mask(spec, m.radius or 0.0)
        elif m.type == "letter":
            mask = F.letter_mask(spec, m.glyph, m.height)
        else:
            t = read_pgm(self._resolve(need("path"))) * m.scale
            if t.shape != (spec.n, spec.n):
                raise ConfigError(f"{where}.path: image is {t.shape}, grid is {spec.n}x{spec.n}")
            mask = F.ObjectMask(t, np.zeros_like(t), spec, where)
        if m.phase is not None:
            mask = mask.with_phase(self._build_phase(m.phase, spec, index, where))
        return mask

    def _build_phase(self, ph: PhaseModel, spec: F.GridSpec, index: int, where: str) -> np.ndarray:
        try:
            screen = F.PhaseScreen.from_pairs(ph.modes, ph.radius)
        except ConfigError as exc:
            raise ConfigError(f"{where}.phase.modes: {exc}") from None
        phi = F.render_phase_screen(screen, spec)
        if ph.random:
            rng = np.random.default_rng([self.seed, index])
            extra = F.PhaseScreen.random(rng, ph.random, ph.max_weight, ph.max_degree, ph.radius)
            phi = phi + F.render_phase_screen(extra, spec)
        if ph.file is not None:
            raw, raw_spec = read_phase_raw(self._resolve(ph.file))
            if raw_spec.n != spec.n:
                raise ConfigError(f"{where}.phase.file: grid n={raw_spec.n} does not match n={spec.n}")
            phi = phi + raw
        return phi


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_scenario(text: str, base_dir: Path = Path("."), name: str = "scenario") -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: parse error: {exc}") from None
    try:
        model = ScenarioModel.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{name}: {_format_validation(exc)}") from None
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return Scenario(model, Path(base_dir), digest, name)


def builtin_scenarios() -> list[str]:
    folder = resources.files("ghostsim") / "scenarios"
    return sorted(p.name for p in folder.iterdir() if p.name.endswith(".scn"))


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario file; a bare shipped name such as ``tau_dip.scn`` also works."""
    path = Path(path)
    if not path.exists():
        shipped = resources.files("ghostsim") / "scenarios" / path.name
        if path.parent == Path(".") and shipped.is_file():
            with resources.as_file(shipped) as real:
                return parse_scenario(real.read_text(), real.parent, path.name)
        raise ConfigError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(), path.parent, path.name)
