import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import catalog, lead_rational, random_hermitian
from triple_scatter import scatter
from triple_scatter.weyl import ExtensionParams, Interval, LeadRational, StarGraph, boundary_value

K = np.linspace(0.1, 10.0, 40)


def test_oracle_by_hand():
    # u'(0) = u(0) on one lead at q = 1: (i - 1)^{-1}(i + 1) = -i
    assert scatter.vertex_scattering_oracle(np.eye(1), 1.0)[0, 0] == pytest.approx(-1j)
    with pytest.raises(ValueError):
        scatter.vertex_scattering_oracle(np.eye(1), 0.0)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_star_graph_matches_plane_wave_oracle(n, rng):
    for _ in range(3):
        kappa = random_hermitian(rng, n, 2.0)
        ext = ExtensionParams.sqrt2(kappa)
        sigma = scatter.scattering_matrix(ext, StarGraph(n), K)
        oracle = scatter.vertex_scattering_oracle(kappa, np.sqrt(K))
        assert np.max(np.abs(sigma - oracle)) < 1e-9


def test_oracle_uses_b_kappa_for_general_alpha(rng):
    kappa = random_hermitian(rng, 2)
    alpha = np.diag([0.5, 1.5])
    ext = ExtensionParams(alpha, kappa)
    sigma = scatter.scattering_matrix(ext, StarGraph(2), K)
    oracle = scatter.vertex_scattering_oracle(ext.b_kappa, np.sqrt(K))
    assert np.max(np.abs(sigma - oracle)) < 1e-9


@pytest.mark.parametrize("name", ["star2", "lead", "interval"])
def test_zero_coupling_gives_identity(name):
    model = catalog()[name]
    ext = ExtensionParams.sqrt2(np.zeros((model.dim, model.dim)))
    for k in K:
        sigma = scatter.scattering_matrix(ext, model, k)
        assert np.max(np.abs(sigma - np.eye(model.dim))) < 1e-12


@given(st.integers(0, 2**31), st.sampled_from(["star1", "star3", "lead"]))
def test_weighted_unitarity(seed, name):
    model = catalog()[name]
    rng = np.random.default_rng(seed)
    ext = ExtensionParams.sqrt2(random_hermitian(rng, model.dim, 3.0))
    curve = scatter.scan(ext, model, np.linspace(0.2, 9.0, 12))
    assert not curve.skipped
    assert curve.max_unitarity_defect() < 1e-8


@pytest.mark.parametrize("name", ["star2", "lead", "interval"])
def test_weight_identity(name):
    model = catalog()[name]
    for k in K:
        w = scatter.weights(model, k)
        assert w.identity_residual < 1e-10
        assert w.g_residual < 1e-9


def test_weights_on_star_graph_by_hand():
    # S = (sqrt k - 1)/(sqrt k + 1), W = 4 sqrt(k)
    k = 2.0
    w = scatter.weights(StarGraph(1), k)
    s = (np.sqrt(k) - 1) / (np.sqrt(k) + 1)
    assert w.w_left[0, 0] == pytest.approx(1 - s * s)
    assert w.spectral[0, 0] == pytest.approx(4 * np.sqrt(k))


@pytest.mark.parametrize("name", ["star1", "star3", "lead", "interval"])
def test_model_form_agrees_with_sigma_after_conjugation(name, rng):
    model = catalog()[name]
    ext = ExtensionParams.sqrt2(random_hermitian(rng, model.dim))
    for k in K[::4]:
        x = scatter.scattering_via_model_form(ext, model, k)
        m = boundary_value(model, k)[0]
        sigma = scatter.scattering_matrix(ext, model, k)
        assert np.max(np.abs(scatter.g_conjugate(x, m) - sigma)) < 1e-9


def test_model_form_needs_sqrt2():
    ext = ExtensionParams(np.eye(1), np.eye(1))
    with pytest.raises(ValueError):
        scatter.scattering_via_model_form(ext, StarGraph(1), 1.0)


def test_unconjugated_model_form_differs_from_sigma():
    # the conjugation by M + iI matters: without it the two disagree
    model = lead_rational()
    ext = ExtensionParams.sqrt2(np.diag([1.0, -0.5]))
    k = 3.7
    x = scatter.scattering_via_model_form(ext, model, k)
    assert np.max(np.abs(x - scatter.scattering_matrix(ext, model, k))) > 1e-3


def test_scan_records_skips():
    model = LeadRational(np.eye(1), poles=[(1.0, np.eye(1))])
    ext = ExtensionParams.sqrt2(np.eye(1) * 0.5)
    curve = scatter.scan(ext, model, [0.0, 0.5, 1.0, 1.5])
    reasons = {s.k: s.reason for s in curve.skipped}
    assert reasons == {0.0: "NonConvergent", 1.0: "AtPole"}
    ks, stack = curve.sigma_stack()
    assert ks.tolist() == [0.5, 1.5] and stack.shape == (2, 1, 1)


def test_scan_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        scatter.scan(ExtensionParams.sqrt2(np.eye(1)), StarGraph(1), [2.0, 1.0])


def test_csv_layout_and_round_trip():
    ext = ExtensionParams.sqrt2(np.array([[1.0, 0.3], [0.3, -2.0]]))
    curve = scatter.scan(ext, StarGraph(2), [0.5, 1.5, 7.25])
    rows = list(csv.reader(io.StringIO(curve.to_csv())))
    header = rows[0]
    assert header[:5] == ["k", "sigma_re_0_0", "sigma_re_0_1", "sigma_re_1_0", "sigma_re_1_1"]
    assert header[-3:] == ["unitarity_defect", "skipped", "reason"]
    assert len(rows) == 4
    for row, sample in zip(rows[1:], curve.samples):
        re = np.array([float(v) for v in row[1:5]])
        im = np.array([float(v) for v in row[5:9]])
        # 17 significant digits reproduce every double exactly
        assert np.array_equal(re + 1j * im, sample.sigma_hat.ravel())


def test_json_export():
    ext = ExtensionParams.sqrt2(np.eye(1))
    curve = scatter.scan(ext, Interval(2.0), [0.5, (np.pi / 2) ** 2])
    data = json.loads(curve.to_json())
    assert data["model"] == {"kind": "Interval", "length": 2.0}
    assert [s["skipped"] for s in data["samples"]] == [False, True]
    assert data["samples"][1]["reason"] == "AtPole"


def test_clip_psd():
    w = np.diag([2.0, -1e-14])
    clipped = scatter.clip_psd(w)
    assert np.allclose(clipped, np.diag([2.0, 0.0]))
    assert np.linalg.eigvalsh(clipped)[0] >= 0
