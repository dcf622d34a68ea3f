import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_deloc.stieltjes import (
    SpectralParam,
    boundary_density,
    eval_m,
    eval_m_alpha,
    eval_m_tilde,
    gap,
    m_alpha_identity_residual,
    transform,
)

mp.mp.dps = 40


def mp_m(z):
    """Independent oracle: pick the root of w^2 + z w + 1 with Im > 0."""
    z = mp.mpc(z)
    r = mp.sqrt(z * z - 4)
    a, b = (-z + r) / 2, (-z - r) / 2
    return complex(a if mp.im(a) > 0 else b)


def random_z(rng, n):
    re = rng.uniform(-6, 6, n)
    im = 10 ** rng.uniform(-4, 1, n)
    return re + 1j * im


# ------------------------------------------------------------------ examples


def test_m_at_i():
    assert eval_m(1j) == pytest.approx(1j * (math.sqrt(5) - 1) / 2, abs=1e-14)


def test_m_real_axis_outside_support_takes_small_root():
    assert eval_m(2.5 + 1e-9j) == pytest.approx(-0.5, abs=1e-8)
    assert eval_m_tilde(2.5 + 1e-9j) == pytest.approx(-2.0, abs=1e-8)


def test_m_at_2i():
    m = eval_m(2j)
    assert m == pytest.approx(1j * (math.sqrt(2) - 1), abs=1e-14)
    assert abs(-1 / (2j + m) - m) < 1e-12


def test_m_tilde_at_i():
    assert eval_m_tilde(1j) == pytest.approx(-1j * (math.sqrt(5) + 1) / 2, abs=1e-14)


def test_m_alpha_examples():
    z = 0.4 + 0.3j
    assert eval_m_alpha(0, z) == pytest.approx(-1 / z, abs=1e-15)
    assert abs(eval_m_alpha(1, z) - eval_m(z)) < 1e-12
    assert eval_m_alpha(2, 1j) == pytest.approx(1j / math.sqrt(5), abs=1e-14)


def test_gap_examples():
    assert gap(1j) == pytest.approx(math.sqrt(5), abs=1e-14)
    assert gap(2 + 1e-9j) < 1e-4
    assert gap(0.5 + 1j) > gap(0.5 + 0.01j)


def test_identity_residual_examples():
    assert m_alpha_identity_residual(1, 1j) == 0.0
    assert m_alpha_identity_residual(2, 1j) <= 1e-12
    assert m_alpha_identity_residual(0.3, 0.7 + 0.05j) <= 1e-12


def test_boundary_density_examples():
    assert boundary_density(1, 0.0, 1e-6) == pytest.approx(1 / math.pi, abs=1e-6)
    assert boundary_density(1, 3.0, 1e-6) < 1e-6
    assert boundary_density(0, 0.5, 1e-6) < 1e-5


def test_boundary_density_tracks_semicircle():
    E = np.linspace(-1.9, 1.9, 39)
    ref = np.sqrt(4 - E**2) / (2 * math.pi)
    assert np.max(np.abs(boundary_density(1, E, 1e-6) - ref)) < 1e-5


def test_boundary_density_converges_in_eta():
    errs = [abs(boundary_density(1, 0.7, eta) - math.sqrt(4 - 0.49) / (2 * math.pi)) for eta in (1e-3, 1e-4, 1e-5)]
    assert errs[0] > errs[1] > errs[2]


# ------------------------------------------------------------------ errors


@pytest.mark.parametrize("z", [0.5, 0.5 - 1e-3j, 1 + 0j])
def test_rejects_closed_lower_half_plane(z):
    with pytest.raises(ValueError):
        eval_m(z)
    with pytest.raises(ValueError):
        eval_m_tilde(z)


def test_spectral_param_validation():
    with pytest.raises(ValueError):
        SpectralParam(0.1, 0.0)
    p = SpectralParam(0.3, 0.2)
    assert eval_m(p) == eval_m(0.3 + 0.2j)
    assert SpectralParam.from_complex(p.z) == p


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        eval_m_alpha(-0.1, 1j)


def test_boundary_density_eta_range():
    with pytest.raises(ValueError):
        boundary_density(1, 0.0, 1e-2)
    with pytest.raises(ValueError):
        boundary_density(1, 0.0, 0.0)


# ------------------------------------------------------------------ invariants


def test_matches_high_precision_oracle():
    rng = np.random.default_rng(1)
    z = random_z(rng, 300)
    got = eval_m(z)
    ref = np.array([mp_m(complex(w)) for w in z])
    assert np.max(np.abs(got - ref) / np.maximum(1, np.abs(ref))) < 1e-13


def test_near_cut_negative_real_part():
    # the naive principal sqrt(z^2 - 4) picks the wrong sheet here
    z = np.array([-1.5 + 1e-10j, -0.3 + 1e-12j, -3 + 1e-12j, 1.5 + 1e-10j])
    got = eval_m(z)
    ref = np.array([mp_m(complex(w)) for w in z])
    assert np.all(got.imag > 0)
    assert np.max(np.abs(got - ref)) < 1e-12


def test_self_consistency_and_roots_bulk():
    rng = np.random.default_rng(2)
    z = random_z(rng, 10_000)
    m, mt = eval_m(z), eval_m_tilde(z)
    assert np.max(np.abs(m + 1 / (z + m))) <= 1e-12
    assert np.all(m.imag > 0) and np.all(mt.imag < 0)
    assert np.max(np.abs(m)) <= 1 + 1e-12
    assert np.max(np.abs(m * mt - 1)) <= 1e-12
    assert np.max(np.abs(m + mt + z)) <= 1e-12
    assert np.max(np.abs(gap(z) - np.abs(np.sqrt(z - 2) * np.sqrt(z + 2)))) == 0


def test_reflection_symmetry():
    rng = np.random.default_rng(3)
    z = random_z(rng, 2000)
    assert np.max(np.abs(eval_m(-np.conj(z)) + np.conj(eval_m(z)))) <= 1e-12


def test_im_m_bounded_below_on_lower_domain():
    kappa, N = 0.1, 10_000
    re = np.linspace(-(2 - kappa), 2 - kappa, 200)
    im = np.geomspace(N ** (-1 + kappa), 1.0, 60)
    Z = re[:, None] + 1j * im[None, :]
    assert np.min(eval_m(Z).imag) >= 0.05


def test_m_alpha_bounds_on_domains():
    kappa, N = 0.1, 10_000
    im = np.geomspace(N ** (-1 + kappa), 1.0, 40)
    re_l = np.linspace(-(2 - kappa), 2 - kappa, 81)
    re_u = np.concatenate([np.linspace(-4, -kappa, 60), np.linspace(kappa, 4, 60)])
    for re, alphas in ((re_l, np.linspace(kappa, 3, 30)), (re_u, np.linspace(0, 2 - kappa, 30))):
        Z = re[:, None] + 1j * im[None, :]
        m = eval_m(Z)
        for a in alphas:
            ma = eval_m_alpha(a, Z)
            assert np.max(np.abs(ma)) <= 20
            assert np.max(np.abs(ma - m)) <= 20 * abs(a - 1) + 1e-12


def test_gap_monotone_in_im():
    rng = np.random.default_rng(4)
    im = np.geomspace(1e-4, 10, 200)
    for re in rng.uniform(-4, 4, 100):
        g = gap(re + 1j * im)
        assert np.all(np.diff(g) > 0)


def test_transform_record():
    t = transform(0.2 + 0.5j)
    assert t.m == eval_m(0.2 + 0.5j)
    assert t.gap == pytest.approx(gap(0.2 + 0.5j), rel=1e-14)


@settings(max_examples=300, deadline=None)
@given(
    re=st.floats(-10, 10),
    log_im=st.floats(-4, 1),
    alpha=st.floats(0, 3),
)
def test_m_alpha_properties(re, log_im, alpha):
    z = complex(re, 10**log_im)
    ma = eval_m_alpha(alpha, z)
    assert ma.imag > 0
    assert abs(ma) <= 1 / z.imag * (1 + 1e-12)
    assert m_alpha_identity_residual(alpha, z) <= 1e-12
