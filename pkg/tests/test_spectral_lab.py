import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparse_deloc.matrix_model import ModelConfig, model_from_edges, sample_er_adjacency, sample_generic_sparse
from sparse_deloc.spectral_lab import (
    PHASE_COLUMNS,
    EigenReport,
    default_windows,
    deloc_bound,
    delocalization_verdict,
    eigen_full,
    phase_sweep,
    q_columns,
    q_measure,
    write_phase_csv,
    write_phase_dat,
)


def er(N, b, seed=0):
    return sample_er_adjacency(ModelConfig.from_b(N, b, seed=seed))


def graph(N, edges, d=None):
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return model_from_edges(ModelConfig(N=N, d=d if d is not None else 2 * len(e) / N), e)


# ------------------------------------------------------------------ q


def test_q_examples():
    assert q_measure(np.eye(7)[3]) == 1.0
    assert q_measure(np.ones(100)) == pytest.approx(0.01)
    u = np.zeros(50)
    u[:2] = 1
    assert q_measure(u) == 0.5
    with pytest.raises(ValueError):
        q_measure(np.zeros(4))


@settings(max_examples=100, deadline=None)
@given(
    u=arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3)),
    c=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3),
)
def test_q_bounds_and_scale_invariance(u, c):
    if not np.any(u != 0) or np.sum(u**2) < 1e-200:
        return
    q = q_measure(u)
    assert 1 / u.size - 1e-12 <= q <= 1 + 1e-12
    assert q_measure(c * u) == pytest.approx(q, rel=1e-12)


def test_q_columns_matches_scalar():
    rng = np.random.default_rng(0)
    U = rng.standard_normal((9, 5)) + 1j * rng.standard_normal((9, 5))
    np.testing.assert_allclose(q_columns(U), [q_measure(U[:, k]) for k in range(5)], rtol=1e-14)


# ------------------------------------------------------------------ eigen_full


def test_two_vertex_graph():
    rep = eigen_full(graph(2, [[0, 1]], d=1.0), "raw")
    np.testing.assert_allclose(rep.eigenvalues, [-1, 1], atol=1e-15)
    np.testing.assert_allclose(rep.q_values, [0.5, 0.5], atol=1e-15)


def test_isolated_vertex_eigenpair():
    m = graph(5, [[0, 1], [1, 2], [2, 3]], d=1.5)
    rep = eigen_full(m, keep_vectors=True)
    pairs = rep.zero_site_pairs()
    assert (pairs[0][1], len(pairs)) == (4, 1)
    i = pairs[0][0]
    np.testing.assert_allclose(np.abs(rep.vectors[:, i]), np.eye(5)[4], atol=1e-10)


def test_residual_and_completeness():
    m = er(300, 1.2, seed=3)
    rep = eigen_full(m, keep_vectors=True)
    M = m.dense_M()
    U, lam = rep.vectors, rep.eigenvalues
    R = M @ U - U * lam
    assert np.max(np.linalg.norm(R, axis=0)) <= 1e-8
    np.testing.assert_allclose(np.sum(U**2, axis=0), 1, atol=1e-8)
    np.testing.assert_allclose(np.sum(U**2, axis=1), 1, atol=1e-8)
    assert np.all(np.diff(lam) >= 0)
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(M), atol=1e-10)
    assert np.all(rep.q_values >= 1 / 300 - 1e-12) and np.all(rep.q_values <= 1 + 1e-12)


def test_raw_vs_rescaled():
    m = er(200, 2.0, seed=1)
    raw, res = eigen_full(m, "raw"), eigen_full(m, "by_sqrt_d")
    np.testing.assert_allclose(raw.scaled(), res.eigenvalues, atol=1e-10)
    assert raw.outlier_index == res.outlier_index == 199
    with pytest.raises(ValueError):
        eigen_full(m, "half")


def test_generic_model_dense_path():
    m = sample_generic_sparse(ModelConfig(N=60, d=6.0, f=0.0, seed=2))
    rep = eigen_full(m)
    np.testing.assert_allclose(rep.eigenvalues, np.linalg.eigvalsh(m.dense_M()), atol=1e-10)


def test_outlier_near_rank_one_prediction():
    m = er(2000, 3.5, seed=5)
    rep = eigen_full(m)
    sqd = math.sqrt(m.d)
    assert rep.outlier_index == m.N - 1
    assert rep.eigenvalues[-1] == pytest.approx(sqd + 1 / sqd, rel=0.1)
    assert abs(rep.eigenvalues[-2]) < 2 + 0.3


# ------------------------------------------------------------------ verdicts


def uniform_report(N=64):
    return EigenReport(
        eigenvalues=np.linspace(-1.5, 1.5, N), q_values=np.full(N, 1 / N), peak_site=np.zeros(N, int),
        unit=1.0, outlier_index=None, N=N,
    )


@pytest.mark.parametrize("kappa", [1e-3, 0.1, 0.3])
def test_uniform_fixture_passes(kappa):
    rep = uniform_report()
    for regime in ("everywhere", "bulk"):
        assert delocalization_verdict(rep, regime, kappa).passed


def test_isolated_vertex_fails_both_regimes():
    m = graph(6, [[0, 1], [1, 2], [2, 3], [3, 4], [4, 0]], d=1.7)
    rep = eigen_full(m)
    for regime in ("everywhere", "bulk"):
        v = delocalization_verdict(rep, regime, 0.3)
        assert not v.passed and v.max_q == pytest.approx(1.0)
    with pytest.raises(ValueError):
        delocalization_verdict(rep, "edge")


def test_verdict_excludes_outlier():
    rep = uniform_report(10)
    rep.q_values[-1] = 1.0
    rep.eigenvalues[-1] = 5.0
    assert not delocalization_verdict(rep).passed
    rep.outlier_index = 9
    v = delocalization_verdict(rep)
    assert v.passed and v.n_considered == 9
    assert v.bound == deloc_bound(10, 0.3)


def test_window_properties():
    rep = uniform_report(8)
    rep.eigenvalues = np.array([-2.5, -1.9, -1.0, -0.1, 0.1, 1.0, 1.9, 2.5])
    rep.q_values = np.arange(1, 9) / 10
    assert rep.max_q_center == pytest.approx(0.5)
    assert rep.max_q_bulk == pytest.approx(0.6)
    assert rep.max_q_edge == pytest.approx(0.8)


# ------------------------------------------------------------------ sweep


def test_phase_sweep_deterministic_and_thread_independent(tmp_path):
    kw = dict(b_grid=[0.5, 2.0], energy_windows=default_windows(0.3), N=300, trials=3, seed=11)
    a = phase_sweep(**kw, workers=1)
    b = phase_sweep(**kw, workers=3)
    assert [c.max_q_samples for c in a] == [c.max_q_samples for c in b]
    assert len(a) == 6
    for c in a:
        assert c.q_p50 <= c.q_p90 <= c.q_max or math.isnan(c.q_max)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_phase_csv(p1, a)
    write_phase_csv(p2, b)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().splitlines()[0] == ",".join(PHASE_COLUMNS)
    write_phase_dat(tmp_path / "p.dat", a)
    blocks = (tmp_path / "p.dat").read_text().strip().split("\n\n")
    assert len(blocks) == 2


def test_phase_sweep_isolated_vertices_localize_center():
    cells = phase_sweep([0.5], [(0.0, 0.3)], N=1000, trials=5, seed=2)
    assert cells[0].verdict_fraction == 0.0
    assert cells[0].q_max == pytest.approx(1.0)


def test_phase_sweep_validation():
    with pytest.raises(ValueError):
        phase_sweep([], [(0, 1)], 100, 1)
    with pytest.raises(ValueError):
        phase_sweep([1.0], [(0, 1)], 100, 0)


def test_bulk_q_shrinks_with_n():
    med = []
    for N in (1000, 2000, 4000):
        med.append(np.median([eigen_full(er(N, 3.5, seed=s)).max_q_bulk for s in range(4)]))
    assert med[0] >= med[1] >= med[2]
