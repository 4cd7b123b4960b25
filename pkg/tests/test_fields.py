import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostsim.errors import ConfigError, PhysicsError
from ghostsim.fields import (
    MODE_NAMES,
    ComplexField,
    GridSpec,
    ObjectMask,
    PhaseScreen,
    decompose_parity,
    disk_mask,
    letter_mask,
    mode_parity,
    parse_mode,
    pinhole_mask,
    reflect,
    reflect_grid,
    render_phase_screen,
    slit_mask,
    unit_mask,
    zernike,
)

ALL_MODES = [(n, m) for n in range(0, 7) for m in range(-n, n + 1, 2)]


def test_grid_origin_sits_at_index_n_over_2():
    spec = GridSpec(16, 2e-6)
    x = spec.coords()
    assert x[8] == 0.0
    assert x[0] == -16e-6 and x[15] == 14e-6
    X1, X2 = spec.mesh()
    assert X1[9, 0] == 2e-6 and X2[0, 9] == 2e-6


@pytest.mark.parametrize("n", [15, 8, 0, 17.5])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ConfigError):
        GridSpec(n, 1e-6)


def test_grid_rejects_bad_pitch():
    with pytest.raises(ConfigError):
        GridSpec(16, 0.0)


def test_index_of_is_odd_symmetric():
    spec = GridSpec(32, 1.0)
    x = np.linspace(-15.5, 15.5, 311)
    assert np.array_equal(spec.index_of(-x) - spec.center, -(spec.index_of(x) - spec.center))


def test_reflect_maps_x_to_minus_x():
    spec = GridSpec(16, 1.0)
    a = np.random.default_rng(0).normal(size=(16, 16))
    r = reflect_grid(a)
    c = spec.center
    for i, j in [(c, c), (c + 3, c - 2), (1, 15), (5, 9)]:
        assert r[i, j] == a[2 * c - i, 2 * c - j]
    # the unpaired Nyquist row maps to itself
    assert np.array_equal(r[0, 0], a[0, 0])
    assert np.array_equal(reflect_grid(r), a)


def test_reflect_field_keeps_spec():
    spec = GridSpec(16, 3e-6)
    f = ComplexField(spec, np.exp(1j * np.arange(256.0).reshape(16, 16)))
    g = reflect(f)
    assert g.spec == spec
    assert np.array_equal(g.values, reflect_grid(f.values))


def test_complex_field_rejects_nan():
    spec = GridSpec(16, 1.0)
    bad = np.ones((16, 16), dtype=complex)
    bad[3, 3] = np.nan
    with pytest.raises((ConfigError, PhysicsError)):
        ComplexField(spec, bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parity_parts_are_exactly_even_and_odd(seed):
    phi = np.random.default_rng(seed).normal(scale=3.0, size=(16, 16))
    even, odd = decompose_parity(phi)
    assert np.array_equal(reflect_grid(even), even)
    assert np.array_equal(reflect_grid(odd), -odd)
    # recomposition is good to rounding
    assert np.max(np.abs(even + odd - phi)) <= 4 * np.finfo(float).eps * np.max(np.abs(phi))


def test_parse_mode_forms():
    assert parse_mode("defocus") == (2, 0)
    assert parse_mode("Coma_Y") == (3, -1)
    assert parse_mode("4,-2") == (4, -2)
    assert parse_mode((5, 1)) == (5, 1)


@pytest.mark.parametrize("bad", ["wobble", "3,2", (2, 4), "x,y", (1,)])
def test_parse_mode_rejects(bad):
    with pytest.raises(ConfigError):
        parse_mode(bad)


def test_named_mode_parities():
    even = {"piston", "defocus", "astigmatism", "astigmatism_45", "spherical",
            "secondary_astigmatism", "secondary_astigmatism_45", "quadrafoil", "quadrafoil_45"}
    for name, mode in MODE_NAMES.items():
        assert mode_parity(mode) == ("even" if name in even else "odd")


@pytest.mark.parametrize("mode", ALL_MODES)
def test_rendered_mode_parity_is_bit_exact(mode):
    spec = GridSpec(64, 1e-5)
    phi = render_phase_screen(PhaseScreen(((mode, 1.0),)), spec)
    sign = 1.0 if mode_parity(mode) == "even" else -1.0
    assert np.array_equal(reflect_grid(phi), sign * phi)


@pytest.mark.parametrize("mode", [(1, 1), (2, 0), (3, -1), (4, 4), (6, 2)])
def test_zernike_rms_normalization(mode):
    u = np.linspace(-1, 1, 801)
    U, V = np.meshgrid(u, u, indexing="ij")
    inside = U**2 + V**2 < 1
    z = zernike(mode, U, V)
    assert np.sqrt(np.mean(z[inside] ** 2)) == pytest.approx(1.0, rel=5e-3)
    assert np.all(z[~inside] == 0)


def test_zernike_known_values():
    # defocus sqrt(3)(2 rho^2 - 1) and x-tilt 2 rho cos(theta)
    assert zernike((2, 0), np.array(0.0), np.array(0.0)) == pytest.approx(-np.sqrt(3))
    assert zernike((1, 1), np.array(0.5), np.array(0.0)) == pytest.approx(1.0)
    assert zernike((1, -1), np.array(0.0), np.array(0.5)) == pytest.approx(1.0)


def test_random_screens_are_seeded_and_bounded():
    a = PhaseScreen.random(np.random.default_rng(11), n_modes=6, max_weight=2.0)
    b = PhaseScreen.random(np.random.default_rng(11), n_modes=6, max_weight=2.0)
    assert a == b
    assert len(a.coefficients) == 6
    assert all(abs(w) <= 2.0 for _, w in a.coefficients)
    assert all(1 <= n <= 5 for (n, _), _ in a.coefficients)


def test_only_filters_by_parity():
    s = PhaseScreen.from_pairs({"defocus": 1.0, "coma": 0.5, "trefoil_x": 0.2, "spherical": 0.1})
    assert set(s.only("even").parities) == {"even"}
    assert len(s.only("odd").coefficients) == 2


def test_screen_radius_limits():
    spec = GridSpec(16, 1.0)
    with pytest.raises(ConfigError):
        render_phase_screen(PhaseScreen.from_pairs({"defocus": 1}, radius=9.0), spec)
    phi = render_phase_screen(PhaseScreen.from_pairs({"defocus": 1}, radius=4.0), spec)
    assert phi[spec.center + 5, spec.center] == 0.0


def test_mask_transmittance_bounds():
    spec = GridSpec(16, 1.0)
    with pytest.raises(PhysicsError):
        ObjectMask(np.full((16, 16), 1.5), np.zeros((16, 16)), spec)
    with pytest.raises(PhysicsError):
        ObjectMask(np.full((16, 16), -0.1), np.zeros((16, 16)), spec)
    with pytest.raises(ConfigError):
        ObjectMask(np.ones((8, 8)), np.zeros((8, 8)), spec)


def test_mask_intensity_ignores_phase():
    spec = GridSpec(16, 1.0)
    m = disk_mask(spec, 5.0)
    screen = PhaseScreen.from_pairs({"coma": 2.0, "defocus": -1.5})
    assert np.array_equal(m.with_phase(screen).intensity(), m.intensity())
    assert np.array_equal(m.with_phase(screen).phase_free().phase, np.zeros((16, 16)))
    G = m.with_phase(screen).as_complex().values
    assert np.allclose(np.abs(G), m.amplitude)


def test_generators():
    spec = GridSpec(64, 1e-5)
    pin = pinhole_mask(spec)
    assert pin.amplitude.sum() == 1 and pin.amplitude[32, 32] == 1
    slit = slit_mask(spec, 5e-5)
    assert np.array_equal(np.nonzero(slit.amplitude[:, 0])[0], np.arange(30, 35))
    assert slit.amplitude[31].all()
    short = slit_mask(spec, 5e-5, length=1e-4)
    assert short.amplitude.sum() == 5 * 11
    disk = disk_mask(spec, 1e-4)
    assert disk.amplitude.sum() == pytest.approx(np.pi * 100, rel=0.05)
    shifted = disk_mask(spec, 3e-5, center=(1e-4, 0.0))
    assert shifted.amplitude[42, 32] == 1 and shifted.amplitude[32, 32] == 0
    assert unit_mask(spec).amplitude.all()


def test_letter_is_upright_and_not_symmetric():
    spec = GridSpec(128, 1e-5)
    F = letter_mask(spec, "F").amplitude
    assert F[64, 64] == 1
    assert not np.array_equal(reflect_grid(F), F)
    rows = np.nonzero(F.any(axis=1))[0]
    cols = np.nonzero(F.any(axis=0))[0]
    # the top bar spans the full width of the glyph
    assert F[rows[0], cols].all()
    with pytest.raises(ConfigError):
        letter_mask(spec, "Q")
