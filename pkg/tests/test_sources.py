import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostsim.errors import ConfigError, PhysicsError
from ghostsim.fields import ComplexField, GridSpec
from ghostsim.sources import (
    ClassicalSpectrum,
    SpdcParams,
    classical_pair_weight,
    phase_mismatch,
    sinc,
    spdc_spectrum,
    symmetrized_spectrum,
)

from conftest import thin_spdc


def test_sinc_at_zero_and_across_series_switch():
    assert sinc(0.0) == 1.0
    u = np.array([9.99e-5, 1.0001e-4, -9.99e-5, 0.3, -2.0])
    assert np.allclose(sinc(u), np.sinc(u / np.pi), rtol=1e-15, atol=0)


def test_nu_nodes_symmetric_trapezoid():
    p = thin_spdc(n_nu=9)
    nodes, weights = p.nu_nodes()
    assert np.array_equal(nodes, -nodes[::-1])
    assert nodes[4] == 0.0 and nodes[-1] == p.bandwidth
    assert np.sum(weights) == pytest.approx(2 * p.bandwidth)
    # odd moments vanish on a symmetric rule
    assert np.sum(weights * nodes) == 0.0


def test_single_node():
    nodes, weights = thin_spdc(n_nu=1).nu_nodes()
    assert nodes.tolist() == [0.0]


@pytest.mark.parametrize("field,value", [("L", 0.0), ("k_pump", -1.0), ("n_nu", 4), ("D", math.inf)])
def test_spdc_params_validation(field, value):
    kw = dict(L=1e-3, D=1e-10, M=0.0, k_pump=1e7, omega0=1e15, bandwidth=1e13, n_nu=9)
    kw[field] = value
    with pytest.raises(ConfigError):
        SpdcParams(**kw)


def test_phase_mismatch_hand_value():
    p = SpdcParams(L=1e-3, D=2e-10, M=0.05, k_pump=1.5e7, omega0=2e15, bandwidth=1e13)
    # -nu D + M q2 + 2 |q|^2 / k_p
    expected = -3e12 * 2e-10 + 0.05 * 4e3 + 2 * (3e3**2 + 4e3**2) / 1.5e7
    assert phase_mismatch((3e3, 4e3), 3e12, p) == pytest.approx(expected, rel=1e-15)


def test_spectrum_is_one_at_perfect_matching():
    p = thin_spdc()
    assert spdc_spectrum((0.0, 0.0), 0.0, p) == 1.0
    half = p.L * phase_mismatch((2e3, -1e3), 1e12, p) / 2
    assert spdc_spectrum((2e3, -1e3), 1e12, p) == pytest.approx(np.sin(half) / half * np.exp(1j * half))


@settings(max_examples=40, deadline=None)
@given(st.floats(-2e4, 2e4), st.floats(-2e4, 2e4), st.floats(-3e14, 3e14), st.floats(-0.1, 0.1))
def test_symmetrized_spectrum_is_even(q1, q2, nu, M):
    p = SpdcParams(L=1e-3, D=1.9e-10, M=M, k_pump=1.55e7, omega0=2.3e15, bandwidth=3.3e13)
    a = symmetrized_spectrum((q1, q2), nu, p)
    b = symmetrized_spectrum((-q1, -q2), -nu, p)
    assert a == b


def test_classical_spectrum_checks_evenness():
    spec = GridSpec(16, 1.0)
    x, _ = spec.mesh()
    with pytest.raises(PhysicsError):
        ClassicalSpectrum(ComplexField(spec, np.exp(x / 10)))
    ClassicalSpectrum(ComplexField(spec, np.exp(x / 10)), even=False)


def test_gaussian_spectrum_and_pair_weight():
    spec = GridSpec(32, 500.0)
    s = ClassicalSpectrum.gaussian(spec, 3e3)
    assert classical_pair_weight((0.0, 0.0), s) == 1.0
    assert classical_pair_weight((3e3, 0.0), s) == pytest.approx(math.exp(-0.5))
    # off the momentum grid
    assert classical_pair_weight((1e6, 0.0), s) == 0.0
    with pytest.raises(ConfigError):
        ClassicalSpectrum.gaussian(spec, 0.0)
    assert np.all(ClassicalSpectrum.uniform(spec).F.values == 1.0)
