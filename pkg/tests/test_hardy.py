import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from triple_scatter import corpus, hardy, kernel, scatter
from triple_scatter.errors import (EdgeMass, MaskedEverywhere, NegativeNorm, NotInK, WrongHalfPlane)
from triple_scatter.hardy import (Grid, ModelVector, PoleTerm, SymbolTrack, model_inner, model_norm,
                                  project_K)
from triple_scatter.weyl import ExtensionParams, StarGraph


def s_axis(x):
    """Boundary values of S for one lead at alpha = sqrt(2): (sqrt k - 1)/(sqrt k + 1)."""
    r = kernel.sqrt_branch(x, kernel.PLUS_I0)
    return (r - 1) / (r + 1)


def line_integral(func):
    total = 0.0
    for part in (np.real, np.imag):
        for lo, hi in ((-np.inf, 0.0), (0.0, np.inf)):
            val, _ = quad(lambda x: part(func(x)), lo, hi, limit=400, epsabs=1e-13, epsrel=1e-11)
            total = total + (1j if part is np.imag else 1) * val
    return total


@pytest.fixture(scope="module")
def one_lead():
    ext = ExtensionParams.sqrt2(np.eye(1))
    grid = Grid(50.0, 2048)
    return ext, StarGraph(1), SymbolTrack.from_model(grid, ext, StarGraph(1))


@pytest.fixture(scope="module")
def two_leads():
    ext = ExtensionParams.sqrt2(np.diag([1.0, -1.0]))
    model = StarGraph(2)
    grid = Grid(50.0, 4096)
    return ext, model, SymbolTrack.from_model(grid, ext, model)


def pole_vector(track, w, a, b):
    zero = np.zeros((track.grid.N, track.n))
    return ModelVector(track, zero, zero, poles=(PoleTerm(w, np.atleast_1d(a), np.atleast_1d(b)),))


# --- grid and projections ------------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(50.0, 1000)
    with pytest.raises(ValueError):
        Grid(0.0, 1024)
    grid = Grid(10.0, 256)
    assert grid.x[0] == -10.0 and grid.dx == pytest.approx(20.0 / 256)
    assert grid.edge_mask.sum() == 2 * round(256 * hardy.EDGE_FRACTION / 2)


def test_riesz_projection_splits_by_frequency():
    grid = Grid(10.0, 256)
    up = np.exp(1j * grid.omega[3] * grid.x)
    down = np.exp(1j * grid.omega[-3] * grid.x)
    dc = np.ones(grid.N)
    assert np.allclose(hardy.riesz_project(up, grid, 1), up)
    assert np.allclose(hardy.riesz_project(down, grid, 1), 0)
    assert np.allclose(hardy.riesz_project(dc, grid, 1), dc)
    assert np.allclose(hardy.riesz_project(down, grid, -1), down)


@given(st.integers(0, 2**31))
def test_riesz_projections_are_complementary_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    grid = Grid(10.0, 256)
    f = rng.normal(size=(grid.N, 2)) + 1j * rng.normal(size=(grid.N, 2))
    p, m = hardy.riesz_project(f, grid, 1), hardy.riesz_project(f, grid, -1)
    assert np.allclose(p + m, f)
    assert np.allclose(hardy.riesz_project(p, grid, 1), p)
    assert abs(np.vdot(p, m)) < 1e-9 * np.vdot(f, f).real


def test_split_projection_against_partial_fractions():
    grid = Grid(50.0, 4096)
    p, q = 1.0 - 0.8j, -0.5 + 1.2j
    x = grid.x
    f = (1.0 / ((x - p) ** 2 * (x - q) ** 2))[:, None]
    # the principal part at p (below the axis) is the H^2_+ component
    exact_plus = (1.0 / ((p - q) ** 2 * (x - p) ** 2) - 2.0 / ((p - q) ** 3 * (x - p)))[:, None]
    for sign, exact in ((1, exact_plus), (-1, f - exact_plus)):
        sampled, terms = hardy.split_projection(f, grid, sign)
        total = sampled + sum((1.0 / (x - w))[:, None] * c for w, c in terms)
        assert np.max(np.abs(total - exact)) < 1e-6
        assert all((w.imag < 0) == (sign > 0) for w, _ in terms)


# --- symbol tracks -------------------------------------------------------------------------------


def test_symbol_track_checks():
    grid = Grid(10.0, 256)
    with pytest.raises(ValueError):
        SymbolTrack.constant(grid, 2.0)
    with pytest.raises(ValueError):
        SymbolTrack(grid, np.zeros((10, 1, 1)))
    track = SymbolTrack.constant(grid, 0.5)
    assert np.allclose(track.s_at(1j), 0.5)
    with pytest.raises(WrongHalfPlane):
        track.s_at(-1j)
    bare = SymbolTrack(grid, np.zeros((grid.N, 1, 1)))
    with pytest.raises(ValueError):
        bare.s_at(1j)


# --- pole terms in closed form -------------------------------------------------------------------

POINTS = (-1j, 0.5 - 2j, 1.5j, -0.3 + 0.8j, 1j)


@pytest.mark.parametrize("w1", POINTS)
@pytest.mark.parametrize("w2", POINTS)
def test_pole_pole_inner_product_by_quadrature(one_lead, w1, w2):
    _, _, track = one_lead
    a1, b1, a2, b2 = 0.7 - 0.2j, 0.3 + 1.1j, -0.4 + 0.5j, 1.0 - 0.6j
    v = pole_vector(track, w1, a1, b1)
    w = pole_vector(track, w2, a2, b2)

    def integrand(x):
        s = s_axis(x)
        t1, u1 = a1 / (x - w1), b1 / (x - w1)
        t2, u2 = a2 / (x - w2), b2 / (x - w2)
        return np.conj(t2) * (t1 + np.conj(s) * u1) + np.conj(u2) * (s * t1 + u1)

    assert model_inner(v, w) == pytest.approx(line_integral(integrand), abs=1e-7)


@pytest.mark.parametrize("w", (-1j, 0.5 - 2j, 1.5j, -0.3 + 0.8j))
@pytest.mark.parametrize("z", (-0.6j, 0.4 - 1.7j, 0.9j, -1.2 + 0.5j))
@pytest.mark.parametrize("which", ("plus", "minus"))
def test_pole_continuation_by_cauchy_integral(one_lead, w, z, which):
    _, _, track = one_lead
    a, b = 0.7 - 0.2j, 0.3 + 1.1j
    v = pole_vector(track, w, a, b)

    def f(x):
        s = s_axis(x)
        return (a + np.conj(s) * b) / (x - w) if which == "plus" else (s * a + b) / (x - w)

    sign = 1 if z.imag > 0 else -1
    expected = sign * line_integral(lambda x: f(x) / (x - z)) / (2j * np.pi)
    assert hardy.hardy_value(v, which, z)[0] == pytest.approx(expected, abs=1e-8)


def test_l2_norm_with_poles(one_lead):
    _, _, track = one_lead
    x = track.grid.x
    h = np.exp(-x ** 2)[:, None]
    v = ModelVector(track, h, 0 * h, poles=(PoleTerm(-1j, [1.0], [0.5j]),))
    expected = line_integral(lambda t: abs(np.exp(-t * t) + 1 / (t + 1j)) ** 2 + abs(0.5 / (t + 1j)) ** 2)
    assert v.l2_norm() ** 2 == pytest.approx(expected.real, rel=1e-9)


def test_pole_terms_merge_and_cancel(one_lead):
    _, _, track = one_lead
    v = pole_vector(track, 1j, 1.0, 2.0)
    assert len((v + v).poles) == 1
    assert (v - v).poles == ()
    assert np.allclose((2.0 * v).poles[0].b, 4.0)
    with pytest.raises(ValueError):
        PoleTerm(1.0, [1.0], [1.0])


def test_divide_by_partial_fractions(one_lead):
    _, _, track = one_lead
    v = pole_vector(track, 1j, 1.0, 0.0)
    z = 2.0 - 1j
    out = hardy.divide(v, z)
    x = track.grid.x
    gt, _ = out.samples()
    assert np.allclose(gt[:, 0], 1.0 / ((x - 1j) * (x - z)))
    with pytest.raises(ValueError):
        hardy.divide(v, 1j)


# --- the space K ---------------------------------------------------------------------------------


def test_projection_onto_K(two_leads):
    ext, _, track = two_leads
    rng = np.random.default_rng(0)
    v = corpus.smooth_vector(track, ext.kappa, corpus.rational_seed(track.grid.x, 2, rng))
    u = project_K(v)
    assert hardy.k_defect(u) < 1e-3
    again = project_K(u)
    assert (again - u).l2_norm() < 1e-3 * u.l2_norm()
    for d in corpus.d_vectors(track):
        assert abs(model_inner(u, d)) < 1e-3 * model_norm(u) * model_norm(d)


def test_d_vectors_project_to_zero(two_leads):
    _, _, track = two_leads
    for d in corpus.d_vectors(track):
        assert project_K(d).l2_norm() < 1e-12 * d.l2_norm()
        assert hardy.k_defect(d) > 0.5


def test_k_member_lies_in_K():
    grid = Grid(50.0, 4096)
    track = SymbolTrack.constant(grid, np.array([[0.5, 0.2], [0.0, -0.3j]]))
    h_plus = corpus.bump(grid, 2, point=0.2 - 0.9j)
    h_minus = corpus.bump(grid, 2, point=-0.4 + 1.1j)
    v = corpus.k_member(track, h_minus, h_plus)
    assert np.all(v.mask)
    assert np.allclose(v.f_plus, h_minus) and np.allclose(v.f_minus, h_plus)
    assert hardy.k_defect(v) < 1e-6
    swapped = corpus.k_member(track, h_plus, h_minus)
    assert hardy.k_defect(swapped) > 0.1


def test_model_norm_is_positive_and_detects_broken_tracks(two_leads):
    ext, _, track = two_leads
    rng = np.random.default_rng(2)
    v = corpus.smooth_vector(track, ext.kappa, corpus.rational_seed(track.grid.x, 2, rng))
    assert model_norm(v) > 0
    grid = Grid(10.0, 256)
    broken = SymbolTrack(grid, np.full((grid.N, 1, 1), 2.0 + 0j), tol_contraction=10.0)
    h = np.exp(-grid.x ** 2)
    with pytest.raises(NegativeNorm):
        hardy.model_norm(ModelVector(broken, h, -h))


def test_model_vector_json_round_trip(two_leads):
    _, _, track = two_leads
    rng = np.random.default_rng(5)
    x = track.grid.x
    v = ModelVector(track, corpus.rational_seed(x, 2, rng), corpus.rational_seed(x, 2, rng),
                    poles=(PoleTerm(-1j, [1, 2], [0, 1j]), PoleTerm(2j, [0, 0], [1, 1])))
    again = ModelVector.from_json(v.to_json(), track)
    assert np.allclose(again.g_tilde, v.g_tilde) and np.allclose(again.g, v.g)
    assert len(again.poles) == 2
    data = json.loads(v.to_json())
    assert len(data["components"]) == 2 and len(data["components"][0][0]) == 5
    with pytest.raises(ValueError):
        ModelVector.from_dict(data, SymbolTrack.constant(Grid(50.0, 2048), np.zeros((2, 2))))


# --- continuation, resolvent and gamma -----------------------------------------------------------


def test_analytic_continuation_of_rational_function():
    grid = Grid(50.0, 4096)
    p = 0.5 - 1j
    f = 1.0 / (grid.x - p) ** 3
    z = 0.3 + 0.7j
    assert hardy.analytic_continuation(f, grid, z, 1) == pytest.approx(1.0 / (z - p) ** 3, abs=1e-6)
    with pytest.raises(WrongHalfPlane):
        hardy.analytic_continuation(f, grid, -1j, 1)


def test_edge_mass_is_refused():
    grid = Grid(10.0, 256)
    f = np.exp(-(grid.x - 9.5) ** 2)
    with pytest.raises(EdgeMass):
        hardy.analytic_continuation(f, grid, 1j, 1)


def test_resolvent_equals_compressed_multiplication_on_smooth_vectors(two_leads):
    ext, model, track = two_leads
    rng = np.random.default_rng(11)
    v = corpus.smooth_vector(track, ext.kappa, corpus.rational_seed(track.grid.x, 2, rng))
    u = project_K(v)
    for z in (-1j, 1j, 0.5 + 2j):
        r = hardy.model_resolvent(u, ext, model, z)
        assert model_norm(r - hardy.compressed_multiplication(v, z)) < 1e-3 * model_norm(u)


def test_resolvent_refuses_vectors_outside_K(two_leads):
    ext, model, track = two_leads
    with pytest.raises(NotInK):
        hardy.model_resolvent(corpus.d_vectors(track)[0], ext, model, -1j)
    with pytest.raises(WrongHalfPlane):
        hardy.model_resolvent(corpus.d_vectors(track)[0], ext, model, 1.0)


def test_gamma_identity_holds_on_minus_smooth_vectors_only(two_leads):
    ext, model, track = two_leads
    rng = np.random.default_rng(3)
    v = corpus.minus_smooth_vector(track, ext.kappa, corpus.rational_seed(track.grid.x, 2, rng))
    assert hardy.gamma_check(v, ext, model, -1j) < 1e-3 * v.l2_norm()
    h = corpus.bump(track.grid, 2, point=0.3 + 0.7j)
    generic = ModelVector(track, h, 0 * h)
    assert hardy.gamma_check(generic, ext, model, -1j) > 1e-2 * generic.l2_norm()
    with pytest.raises(WrongHalfPlane):
        hardy.gamma_check(v, ext, model, 1j)


def test_semigroup_composes(two_leads):
    ext, _, track = two_leads
    rng = np.random.default_rng(4)
    u = project_K(corpus.smooth_vector(track, ext.kappa, corpus.rational_seed(track.grid.x, 2, rng)))
    one = hardy.semigroup_step(u, 1.0)
    two = hardy.semigroup_step(hardy.semigroup_step(u, 0.4), 0.6)
    assert (one - two).l2_norm() < 1e-3 * u.l2_norm()
    assert model_norm(one) <= model_norm(u) * (1 + 1e-6)


# --- wave and scattering maps --------------------------------------------------------------------


@pytest.fixture(scope="module")
def wave_setup(two_leads):
    ext, model, track = two_leads
    rng = np.random.default_rng(0)
    gt = corpus.rational_seed(track.grid.x, 2, rng)
    zero = np.zeros((2, 2))
    return ext, track, corpus.smooth_vector(track, ext.kappa, gt), corpus.smooth_vector(track, zero, gt)


@pytest.mark.parametrize("direction,source_kappa,target_zero", [
    (hardy.W_MINUS_0K, "k", True), (hardy.W_PLUS_0K, "k", True),
    (hardy.W_MINUS_K0, "0", False), (hardy.W_PLUS_K0, "0", False)])
def test_wave_maps_are_isometric_and_land_on_smooth_vectors(wave_setup, direction, source_kappa, target_zero):
    ext, track, vk, v0 = wave_setup
    v = vk if source_kappa == "k" else v0
    target = ext.with_kappa(np.zeros((2, 2))) if target_zero else ext
    ratio = model_norm(hardy.wave_map(direction, v, ext)) / model_norm(project_K(v))
    assert abs(ratio - 1) < 1e-3
    c = hardy.wave_components(direction, v, ext)
    for sign in (-1, 1):
        assert hardy.smooth_defect(c, target, sign) < hardy.TOL_SMOOTH * c.l2_norm()


def test_scattering_intertwines_wave_maps(wave_setup):
    ext, _, _, v0 = wave_setup
    lhs = hardy.wave_components(hardy.W_PLUS_K0, hardy.scattering_components(v0, ext), ext)
    rhs = hardy.wave_components(hardy.W_MINUS_K0, v0, ext)
    assert model_norm(project_K(lhs - rhs)) < 1e-9 * model_norm(project_K(v0))


def test_scattering_with_zero_coupling_is_identity(wave_setup):
    ext, _, _, v0 = wave_setup
    u = project_K(v0)
    s = hardy.scattering_map(v0, ext.with_kappa(np.zeros((2, 2))))
    assert model_norm(s - u) < 1e-12 * model_norm(u)


def test_scattering_multiplier_on_one_lead():
    ext = ExtensionParams.sqrt2(np.eye(1))
    model = StarGraph(1)
    grid = Grid(50.0, 2048)
    track = SymbolTrack.from_model(grid, ext, model)
    v0 = corpus.smooth_vector(track, np.zeros((1, 1)),
                              corpus.rational_seed(grid.x, 1, np.random.default_rng(8)))
    out = hardy.scattering_components(v0, ext)
    keep = np.abs(v0.g_tilde[:, 0]) > 1e-8
    multiplier = out.g_tilde[keep, 0] / v0.g_tilde[keep, 0]
    product = scatter.model_form_product(ext, track.S[keep])[:, 0, 0]
    assert np.max(np.abs(multiplier - product)) < 1e-12
    # in the weighted representation the multiplier is the vertex scattering matrix
    k = grid.x[keep][grid.x[keep] > 0.2]
    on_k = scatter.model_form_product(ext, track.S[keep][grid.x[keep] > 0.2])
    m = 1j * np.sqrt(k)[:, None, None] * np.ones((1, 1))
    assert np.allclose(scatter.g_conjugate(on_k, m), scatter.vertex_scattering_oracle(np.eye(1), np.sqrt(k)),
                       atol=1e-12)


def test_inverse_cap_can_mask_everything(wave_setup):
    ext, _, _, v0 = wave_setup
    with pytest.raises(MaskedEverywhere):
        hardy.wave_map(hardy.W_MINUS_K0, v0, ext, inverse_cap=1e-3)


def test_unknown_direction(wave_setup):
    ext, _, _, v0 = wave_setup
    with pytest.raises(ValueError):
        hardy.wave_map("W(A0)", v0, ext)
