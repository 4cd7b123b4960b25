"""Scenario-driven experiments.  Each returns JSON-ready metrics plus file artifacts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError
from .fields import ObjectMask, reflect_grid, unit_mask
from .imaging import (
    bc_spread,
    correlate_scan,
    image_classical_analytic,
    image_classical_bruteforce,
    image_entangled_analytic,
    image_entangled_bruteforce,
)
from .interferometer import modulation_W, rate_scan
from .io import encode_pgm16
from .scenario import Scenario
from .sources import ClassicalSpectrum, SpdcParams


@dataclass
class Result:
    metrics: dict
    artifacts: dict[str, bytes] = field(default_factory=dict)
    failed_checks: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed_checks


def _stamp(sc: Scenario) -> dict:
    return {"tool": "ghostsim", "version": __version__, "scenario": sc.name,
            "scenario_sha256": sc.digest, "seed": sc.seed}


def _comments(sc: Scenario) -> list[str]:
    return [f"ghostsim {__version__}", f"scenario_sha256 {sc.digest}", f"seed {sc.seed}"]


def _csv(sc: Scenario, header: list[str], rows) -> bytes:
    lines = [f"# {c}" for c in _comments(sc)] + [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    return ("\n".join(lines) + "\n").encode("ascii")


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(a - b)))


def _analytic(G1, G2, source, geom):
    if isinstance(source, ClassicalSpectrum):
        return image_classical_analytic(G1, G2, source, geom)
    return image_entangled_analytic(G1, G2, source, geom)


def _bruteforce(G1, G2, source, geom, modes, budget):
    if isinstance(source, ClassicalSpectrum):
        return image_classical_bruteforce(G1, G2, source, geom, modes=modes, budget=budget)
    return image_entangled_bruteforce(G1, G2, source, geom, modes=modes, budget=budget)


def _modes(lens1: bool, lens2: bool):
    return ("with_lens" if lens1 else "without_lens", "with_lens" if lens2 else "without_lens")


def run_image(sc: Scenario, path: str | None = None, lens1: bool | None = None,
              lens2: bool | None = None) -> Result:
    cfg = sc.model.image
    path = path or cfg.path
    lens1 = cfg.branch1_lens if lens1 is None else lens1
    lens2 = cfg.branch2_lens if lens2 is None else lens2
    geom, source = sc.geometry(), sc.source()
    G1, G2 = sc.masks()
    spec = G1.spec
    P1, P2 = G1.phase_free(), G2.phase_free()
    U = unit_mask(spec)

    metrics: dict = {"experiment": "image", "path": path, "branch1_lens": lens1, "branch2_lens": lens2}
    artifacts: dict[str, bytes] = {}
    reference = _analytic(P1, P2, source, geom)
    if isinstance(source, SpdcParams):
        metrics["bc_spread"] = bc_spread(source, geom, spec)

    if path in ("analytic", "both"):
        an = _analytic(G1, G2, source, geom)
        left = _analytic(G1, U, source, geom)
        right = _analytic(U, G2, source, geom)
        product = left.rates * right.rates / (an.norm if an.norm else 1.0)
        metrics["analytic"] = {
            "max": float(an.rates.max()),
            "cv": an.cv(),
            "norm": an.norm,
            "phase_cancellation_residual": _rel(an.rates, reference.rates),
            "product_structure_residual": _rel(an.rates, product),
            "inversion_residual": _rel(_analytic(U, G1, source, geom).rates, reflect_grid(left.rates)),
        }
        artifacts["image_analytic.pgm"] = encode_pgm16(an.rates, _comments(sc))

    if path in ("bruteforce", "both"):
        bf = _bruteforce(G1, G2, source, geom, _modes(lens1, lens2), sc.model.resources.max_pairs)
        entry = {"max": bf.norm, "cv": bf.cv()}
        if lens1 and lens2:
            entry["phase_cancellation_residual"] = _rel(bf.normalized(), reference.normalized())
        metrics["bruteforce"] = entry
        artifacts["image_bruteforce.pgm"] = encode_pgm16(bf.rates, _comments(sc))

    return _finish(sc, metrics, artifacts)


def _even_stripped(mask: ObjectMask) -> ObjectMask:
    _, odd = mask.parity_parts()
    return ObjectMask(mask.amplitude, odd, mask.spec, mask.label)


def run_interfere(sc: Scenario, tau_min=None, tau_max=None, steps=None) -> Result:
    cfg = sc.model.interfere
    if tau_min is None or tau_max is None or steps is None:
        if cfg is None:
            raise ConfigError("interfere: give --tau-min/--tau-max/--steps or an [interfere] section")
        tau_min = cfg.tau_min if tau_min is None else tau_min
        tau_max = cfg.tau_max if tau_max is None else tau_max
        steps = cfg.steps if steps is None else steps
    p, geom = sc.source(), sc.geometry()
    if not isinstance(p, SpdcParams):
        raise ConfigError("interfere needs an spdc source")
    G1, G2 = sc.masks()
    taus = np.linspace(tau_min, tau_max, int(steps))
    scan = rate_scan(taus, G1, G2, p, geom)
    DL = p.D * p.L
    lo, hi = min(0.0, DL), max(0.0, DL)
    outside = (taus < lo) | (taus > hi)
    step = float(taus[1] - taus[0]) if len(taus) > 1 else 0.0
    ref = rate_scan(taus, _even_stripped(G1), _even_stripped(G2), p, geom)
    ref_r0 = rate_scan(taus[:1], G1.phase_free(), G2.phase_free(), p, geom).R0
    metrics = {
        "experiment": "interfere",
        "R0": scan.R0,
        "DL": DL,
        "dip_center": scan.dip_center,
        "dip_depth": scan.dip_depth,
        "dip_width": scan.dip_width(),
        "dip_width_error_steps": abs(scan.dip_width() - abs(DL)) / step if step else 0.0,
        "baseline_residual": float(np.max(np.abs(scan.rates[outside] - scan.R0)) / scan.R0) if outside.any() else 0.0,
        "R0_phase_residual": abs(scan.R0 - ref_r0) / ref_r0,
        "even_phase_residual": float(np.max(np.abs(scan.W - ref.W))),
        "W_at_center": [float(np.real(modulation_W(DL / 2, G1, G2, p, geom))),
                        float(np.imag(modulation_W(DL / 2, G1, G2, p, geom)))],
    }
    rows = zip(taus, scan.rates, scan.W.real, scan.W.imag)
    artifacts = {"tau_scan.csv": _csv(sc, ["tau", "R", "ReW", "ImW"], rows)}
    return _finish(sc, metrics, artifacts)


def scan_offsets(rmax: float, steps: int, pitch: float) -> list[tuple[float, float]]:
    """Square grid of displacements snapped to whole detector pixels."""
    pix = np.unique(np.rint(np.linspace(-rmax, rmax, steps) / pitch).astype(int))
    return [(float(a * pitch), float(b * pitch)) for a in pix for b in pix]


def run_correlate(sc: Scenario, rmax=None, steps=None, deinvert=None) -> Result:
    cfg = sc.model.correlate
    if rmax is None or steps is None:
        if cfg is None:
            raise ConfigError("correlate: give --scan rmax,steps or a [correlate] section")
        rmax = cfg.rmax if rmax is None else rmax
        steps = cfg.steps if steps is None else steps
    if deinvert is None:
        deinvert = cfg.deinvert if cfg is not None else False
    geom, source = sc.geometry(), sc.source()
    G1, G2 = sc.masks()
    det = geom.detector_grid(G1.spec)
    offsets = scan_offsets(rmax, int(steps), det.pitch)
    g = correlate_scan(G1, G2, offsets, source, geom, deinvert=deinvert)
    g_ref = correlate_scan(G1.phase_free(), G2.phase_free(), offsets, source, geom, deinvert=deinvert)
    values = np.array([v for _, v in g])
    ref = np.array([v for _, v in g_ref])
    best = g[int(np.argmax(values))][0]
    metrics = {
        "experiment": "correlate",
        "deinvert": bool(deinvert),
        "points": len(g),
        "g_max": float(values.max()),
        "argmax_r": list(best),
        "phase_cancellation_residual": _rel(values, ref),
    }
    rows = [(r[0], r[1], v) for r, v in g]
    return _finish(sc, metrics, {"correlation.csv": _csv(sc, ["rx", "ry", "g"], rows)})


def run_lens_study(sc: Scenario, include_both_off: bool = False) -> Result:
    geom, source = sc.geometry(), sc.source()
    G1, G2 = sc.masks()
    budget = sc.model.resources.max_pairs
    combos = {"both": (True, True), "branch1_off": (False, True), "branch2_off": (True, False)}
    if include_both_off:
        combos["both_off"] = (False, False)
    maps = {name: _bruteforce(G1, G2, source, geom, _modes(*lens), budget) for name, lens in combos.items()}
    metrics = {
        "experiment": "lens-study",
        "cv": {name: m.cv() for name, m in maps.items()},
        "branch1_removed_cv": maps["branch1_off"].cv(),
        "branch2_removed_residual": _rel(maps["branch2_off"].normalized(), maps["both"].normalized()),
    }
    artifacts = {f"lens_{name}.pgm": encode_pgm16(m.rates, _comments(sc)) for name, m in maps.items()}
    return _finish(sc, metrics, artifacts)


def _lookup_metric(metrics: dict, dotted: str):
    node = metrics
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def _finish(sc: Scenario, metrics: dict, artifacts: dict[str, bytes]) -> Result:
    failed = []
    checks = {}
    for name, limit in sc.model.checks.items():
        value = _lookup_metric(metrics, name)
        passed = isinstance(value, (int, float)) and value <= limit
        checks[name] = {"value": value, "max": limit, "passed": bool(passed)}
        if not passed:
            failed.append(name)
    metrics = {**_stamp(sc), **metrics, "checks": checks, "passed": not failed}
    artifacts["metrics.json"] = (json.dumps(metrics, indent=2, sort_keys=True) + "\n").encode()
    return Result(metrics, artifacts, failed)


RUNNERS = {
    "image": run_image,
    "interfere": run_interfere,
    "correlate": run_correlate,
    "lens-study": run_lens_study,
}
