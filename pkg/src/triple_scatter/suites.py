"""Verification suites run by ``triple-scatter verify``.

Each suite returns a list of :class:`Check` records. A check carries the
largest residual seen, its tolerance, a pass flag and every point that had to
be skipped, with a reason code. Checks whose points were all skipped have
``passed = None`` and do not count towards the overall verdict.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import chartheta, corpus, hardy, kernel, scatter
from .errors import TripleScatterError
from .hardy import Grid, SymbolTrack, model_norm, project_K
from .weyl import ExtensionParams, StarGraph, validate_herglotz

TOL_EXACT = 1e-10
TOL_CAYLEY = 1e-11
TOL_CR = 1e-6
TOL_ZERO_COUPLING = 1e-12
TOL_ORACLE = 1e-9
TOL_CROSS = 1e-9
TOL_HARDY = 1e-3
TOL_WAVE_NORM = 0.05
TOL_COMPOSITION = 1e-9

SAMPLE_COUNT = 100
RANDOM_KAPPA_DRAWS = 5
SEMIGROUP_TIMES = (-5.0, -20.0, -80.0)
RESOLVENT_POINTS = (-1j, 0.5 - 2j)


@dataclass
class Check:
    tag: str
    residual: float | None
    tol: float
    passed: bool | None
    skipped: list = field(default_factory=list)
    ladder: list | None = None

    def to_dict(self):
        out = {
            "tag": self.tag,
            "residual": self.residual,
            "tol": self.tol,
            "pass": self.passed,
            "skipped": self.skipped,
        }
        if self.ladder is not None:
            out["ladder"] = self.ladder
        return out


def _reason(exc):
    name = type(exc).__name__
    factor = getattr(exc, "factor", None)
    return f"{name}:{factor}" if factor else name


def _point(z):
    z = complex(z)
    return [z.real, z.imag] if z.imag else z.real


def _finish(tag, values, tol, skipped):
    if not values:
        return Check(tag, None, tol, None, skipped)
    worst = float(max(values))
    return Check(tag, worst, tol, bool(worst < tol), skipped)


def pointwise_check(tag, points, residual, tol):
    """Evaluate ``residual(p)`` at every point, skipping points that raise a package error."""
    values, skipped = [], []
    for p in points:
        try:
            values.append(float(residual(p)))
        except TripleScatterError as exc:
            skipped.append({"point": _point(p), "reason": _reason(exc)})
    return _finish(tag, values, tol, skipped)


def ladder_check(tag, values, tol):
    """Pass when ``values`` strictly decrease and the middle entry is below ``tol``."""
    mid = values[len(values) // 2]
    decreasing = all(b < a for a, b in zip(values, values[1:]))
    return Check(tag, float(mid), tol, bool(decreasing and mid < tol), ladder=[float(v) for v in values])


def _errors_as_check(tag, tol, exc):
    return Check(tag, None, tol, None, [{"point": None, "reason": _reason(exc)}])


def random_hermitian(rng, n, scale=2.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


@dataclass
class SuiteContext:
    """Everything a suite needs: the model, the extension and the sampling parameters."""

    model: object
    ext: ExtensionParams
    k_grid: np.ndarray
    hardy_N: int = 4096
    hardy_L: float = 50.0
    seed: int = 0
    corrupt_kappa_sign: bool = False
    _tracks: dict = field(default_factory=dict, repr=False)

    @cached_property
    def upper_points(self):
        rng = np.random.default_rng([self.seed, 1])
        re = rng.uniform(-10.0, 10.0, SAMPLE_COUNT)
        im = rng.uniform(0.1, 5.0, SAMPLE_COUNT)
        return re + 1j * im

    @cached_property
    def lower_points(self):
        rng = np.random.default_rng([self.seed, 2])
        re = rng.uniform(-10.0, 10.0, SAMPLE_COUNT)
        im = rng.uniform(0.1, 5.0, SAMPLE_COUNT)
        return re - 1j * im

    @property
    def ladder_sizes(self):
        return (self.hardy_N // 2, self.hardy_N, self.hardy_N * 2)

    def track(self, N):
        """Symbol track on the ``N``-point grid, built once per context."""
        if N not in self._tracks:
            self._tracks[N] = SymbolTrack.from_model(Grid(self.hardy_L, N), self.ext, self.model)
        return self._tracks[N]

    @cached_property
    def no_ac_spectrum(self):
        """True when ``I - S^*S`` vanishes on the whole grid, leaving no room for smooth vectors."""
        track = self.track(self.hardy_N)
        weight = np.eye(track.n) - track.S_star @ track.S
        return bool(np.max(kernel.max_norm(weight)) < scatter.WEIGHT_FLOOR)


# --- Herglotz and Cayley -------------------------------------------------------------------------


def suite_herglotz(ctx):
    report = validate_herglotz(ctx.model, ctx.upper_points)
    return [
        Check("reflection-symmetry", report.reflection_defect, TOL_EXACT, bool(report.reflection_defect < TOL_EXACT)),
        Check("im-positivity", report.positivity_defect, TOL_EXACT, bool(report.positivity_defect < TOL_EXACT)),
    ]


def suite_cayley(ctx):
    if not ctx.ext.is_sqrt2:
        return [Check("s-equals-cayley", None, TOL_CAYLEY, None, [{"point": None, "reason": "alpha-not-sqrt2I"}])]

    def residual(z):
        return np.max(kernel.max_norm(chartheta.char_function(ctx.ext, ctx.model, z)
                                      - chartheta.cayley_form(ctx.model, z)))

    return [pointwise_check("s-equals-cayley", ctx.upper_points, residual, TOL_CAYLEY)]


# --- Theta calculus ------------------------------------------------------------------------------


def suite_theta_identities(ctx):
    ext, model = ctx.ext, ctx.model

    def theta_from_s(z):
        return np.max(kernel.max_norm(chartheta.theta(ext, model, z) - chartheta.theta_via_s(ext, model, z)))

    def theta_hat_from_s(z):
        return np.max(kernel.max_norm(chartheta.theta_hat(ext, model, z)
                                      - chartheta.theta_hat_via_s(ext, model, z)))

    def theta_inv(z):
        return chartheta.inverse_residual(chartheta.theta_inverse(ext, model, z), chartheta.theta(ext, model, z))

    def theta_hat_inv(z):
        return chartheta.inverse_residual(chartheta.theta_hat_inverse(ext, model, z),
                                          chartheta.theta_hat(ext, model, z))

    def analytic(z):
        return np.max(chartheta.cauchy_riemann_residual(ext, model, z))

    return [
        pointwise_check("theta-via-s", ctx.lower_points, theta_from_s, TOL_EXACT),
        pointwise_check("theta-hat-via-s", ctx.upper_points, theta_hat_from_s, TOL_EXACT),
        pointwise_check("theta-inverse", ctx.lower_points, theta_inv, TOL_EXACT),
        pointwise_check("theta-hat-inverse", ctx.upper_points, theta_hat_inv, TOL_EXACT),
        pointwise_check("s-cauchy-riemann", ctx.upper_points, analytic, TOL_CR),
    ]


def suite_inverse_formulas(ctx):
    checks = []
    for name in ("I+S", "I+S*", "I+chi-(S-I)", "I+chi+(S*-I)"):
        def residual(z, name=name):
            closed, target = chartheta.resolvent_style_inverses(ctx.ext, ctx.model, z)[name]
            return chartheta.inverse_residual(closed, target)

        checks.append(pointwise_check(f"inverse-{name}", ctx.upper_points, residual, TOL_EXACT))
    return checks


# --- real-axis scattering ------------------------------------------------------------------------


def suite_weight_identity(ctx):
    ext, model = ctx.ext, ctx.model
    ks = ctx.k_grid
    out = [
        pointwise_check("weight-identity", ks, lambda k: scatter.weights(model, k).identity_residual, TOL_EXACT),
        pointwise_check("weight-conjugation", ks, lambda k: scatter.weights(model, k).g_residual,
                        scatter.TOL_WEIGHT),
    ]

    if ext.is_selfadjoint:
        def unitary(k):
            m = scatter._m_boundary(model, k, scatter.EPS_LADDER, scatter.TOL_BV)
            w = scatter.spectral_weight(m)
            if kernel.max_norm(w) <= scatter.WEIGHT_FLOOR:
                return 0.0
            return scatter.unitarity_defect(scatter.sigma_from_m(m, ext.b_kappa), w)

        out.append(pointwise_check("weighted-unitarity", ks, unitary, scatter.TOL_UNITARY))
    else:
        out.append(Check("weighted-unitarity", None, scatter.TOL_UNITARY, None,
                         [{"point": None, "reason": "kappa-not-selfadjoint"}]))

    if ext.is_sqrt2:
        def cross(k):
            x = scatter.scattering_via_model_form(ext, model, k)
            m = scatter._m_boundary(model, k, scatter.EPS_LADDER, scatter.TOL_BV)
            return kernel.max_norm(scatter.g_conjugate(x, m) - scatter.scattering_matrix(ext, model, k))

        out.append(pointwise_check("model-form-vs-sigma", ks, cross, TOL_CROSS))
    else:
        out.append(Check("model-form-vs-sigma", None, TOL_CROSS, None,
                         [{"point": None, "reason": "alpha-not-sqrt2I"}]))
    return out


def _oracle_residual(ext, model, ks, corrupt):
    used = ext.with_kappa(-ext.kappa) if corrupt else ext
    positive = ks[ks > 0]

    def residual(k):
        sigma = scatter.scattering_matrix(used, model, k)
        return kernel.max_norm(sigma - scatter.vertex_scattering_oracle(ext.b_kappa, np.sqrt(k)))

    return positive, residual


def suite_oracle_equivalence(ctx):
    ext, model = ctx.ext, ctx.model
    zero = ext.with_kappa(np.zeros((ext.dim, ext.dim)))
    out = [pointwise_check(
        "zero-coupling-identity", ctx.k_grid,
        lambda k: kernel.max_norm(scatter.scattering_matrix(zero, model, k) - np.eye(ext.dim)),
        TOL_ZERO_COUPLING)]
    if not isinstance(model, StarGraph):
        out.append(Check("sigma-vs-plane-wave-oracle", None, TOL_ORACLE, None,
                         [{"point": None, "reason": "oracle-needs-StarGraph"}]))
        return out
    ks, residual = _oracle_residual(ext, model, ctx.k_grid, ctx.corrupt_kappa_sign)
    out.append(pointwise_check("sigma-vs-plane-wave-oracle", ks, residual, TOL_ORACLE))
    rng = np.random.default_rng([ctx.seed, 3])
    for j in range(RANDOM_KAPPA_DRAWS):
        drawn = ext.with_kappa(random_hermitian(rng, ext.dim))
        ks, residual = _oracle_residual(drawn, model, ctx.k_grid, ctx.corrupt_kappa_sign)
        out.append(pointwise_check(f"sigma-vs-plane-wave-oracle-random-{j}", ks, residual, TOL_ORACLE))
    return out


# --- model space ---------------------------------------------------------------------------------


def _d_leak(u, track):
    nu = model_norm(u)
    return max(abs(hardy.model_inner(u, d)) / (nu * model_norm(d)) for d in corpus.d_vectors(track))


def _hardy_corpus(ctx, track):
    return corpus.rational_corpus(track, ctx.ext.kappa, count=2, seed=ctx.seed)


def _ladder(ctx, measure):
    return [max(measure(ctx.track(N), v) for v in _hardy_corpus(ctx, ctx.track(N))) for N in ctx.ladder_sizes]


def _guarded(tag, tol, build, ctx=None):
    try:
        if ctx is not None and ctx.no_ac_spectrum:
            return Check(tag, None, tol, None, [{"point": None, "reason": "no-ac-spectrum"}])
        return build()
    except TripleScatterError as exc:
        return _errors_as_check(tag, tol, exc)
    except ValueError as exc:
        return Check(tag, None, tol, None, [{"point": None, "reason": f"ValueError:{exc}"}])


def suite_hardy_convergence(ctx):
    ext, model = ctx.ext, ctx.model
    z = RESOLVENT_POINTS[0]

    def leak(track, v):
        return _d_leak(project_K(v), track)

    def smooth_resolvent(track, v):
        u = project_K(v)
        r = hardy.model_resolvent(u, ext, model, z)
        return model_norm(r - hardy.compressed_multiplication(v, z)) / model_norm(u)

    def f_isometry():
        track = ctx.track(ctx.hardy_N)
        zero = np.zeros((track.n, track.n))
        worst = 0.0
        weight = np.eye(track.n) - track.S_star @ track.S
        for v in (corpus.rational_corpus(track, zero, 3, ctx.seed)
                  + corpus.gaussian_corpus(track, zero, 2, ctx.seed)):
            q = hardy.model_norm_squared(project_K(v))
            ref = np.real(np.vdot(v.g_tilde, hardy._apply(weight, v.g_tilde))) * track.grid.dx
            worst = max(worst, abs(q - ref) / q)
        return Check("f-isometry", float(worst), TOL_HARDY, bool(worst < TOL_HARDY))

    return [
        _guarded("k-orthogonality-leak", TOL_HARDY,
                 lambda: ladder_check("k-orthogonality-leak", _ladder(ctx, leak), TOL_HARDY), ctx),
        _guarded("smooth-vector-resolvent", TOL_HARDY,
                 lambda: ladder_check("smooth-vector-resolvent", _ladder(ctx, smooth_resolvent), TOL_HARDY), ctx),
        _guarded("f-isometry", TOL_HARDY, f_isometry, ctx),
    ]


def suite_gamma_identity(ctx):
    ext, model = ctx.ext, ctx.model
    z = RESOLVENT_POINTS[0]

    def measure(track, _):
        worst = 0.0
        rng = np.random.default_rng([ctx.seed, 4])
        for _ in range(2):
            v = corpus.minus_smooth_vector(track, ext.kappa, corpus.rational_seed(track.grid.x, track.n, rng))
            worst = max(worst, hardy.gamma_check(v, ext, model, z) / v.l2_norm())
        return worst

    def build():
        values = [measure(ctx.track(N), None) for N in ctx.ladder_sizes]
        return ladder_check("gamma-identity", values, TOL_HARDY)

    return [_guarded("gamma-identity", TOL_HARDY, build, ctx)]


def suite_resolvent_identity(ctx):
    ext, model = ctx.ext, ctx.model
    z, w = RESOLVENT_POINTS

    def measure(track, v):
        u = project_K(v)
        rz = hardy.model_resolvent(u, ext, model, z)
        rw = hardy.model_resolvent(u, ext, model, w)
        rzw = hardy.model_resolvent(rw, ext, model, z)
        return model_norm(rz - rw - (z - w) * rzw) / model_norm(u)

    return [_guarded("first-resolvent-identity", TOL_HARDY,
                     lambda: ladder_check("first-resolvent-identity", _ladder(ctx, measure), TOL_HARDY), ctx)]


def suite_wave_maps(ctx):
    ext = ctx.ext
    ext0 = ext.with_kappa(np.zeros((ext.dim, ext.dim)))
    out = []

    def setup():
        track = ctx.track(ctx.hardy_N)
        rng = np.random.default_rng([ctx.seed, 5])
        gt = corpus.rational_seed(track.grid.x, track.n, rng)
        return track, corpus.smooth_vector(track, ext.kappa, gt), corpus.smooth_vector(track, ext0.kappa, gt)

    try:
        track, vk, v0 = setup()
    except (TripleScatterError, ValueError) as exc:
        return [_errors_as_check("wave-maps", TOL_WAVE_NORM, exc)]

    cases = (
        (hardy.W_MINUS_0K, vk, ext0),
        (hardy.W_PLUS_0K, vk, ext0),
        (hardy.W_MINUS_K0, v0, ext),
        (hardy.W_PLUS_K0, v0, ext),
    )
    for direction, v, target in cases:
        def norm_check(direction=direction, v=v):
            if not ext.is_selfadjoint:
                return Check(f"isometry-{direction}", None, TOL_WAVE_NORM, None,
                             [{"point": None, "reason": "kappa-not-selfadjoint"}])
            ratio = model_norm(hardy.wave_map(direction, v, ext)) / model_norm(project_K(v))
            r = abs(ratio - 1.0)
            return Check(f"isometry-{direction}", float(r), TOL_WAVE_NORM, bool(r < TOL_WAVE_NORM))

        def smooth_check(direction=direction, v=v, target=target):
            c = hardy.wave_components(direction, v, ext)
            r = max(hardy.smooth_defect(c, target, -1), hardy.smooth_defect(c, target, 1)) / c.l2_norm()
            return Check(f"target-smoothness-{direction}", float(r), hardy.TOL_SMOOTH, bool(r < hardy.TOL_SMOOTH))

        out.append(_guarded(f"isometry-{direction}", TOL_WAVE_NORM, norm_check, ctx))
        out.append(_guarded(f"target-smoothness-{direction}", hardy.TOL_SMOOTH, smooth_check, ctx))

    def composition():
        lhs = hardy.wave_components(hardy.W_PLUS_K0, hardy.scattering_components(v0, ext), ext)
        rhs = hardy.wave_components(hardy.W_MINUS_K0, v0, ext)
        r = model_norm(project_K(lhs - rhs)) / model_norm(project_K(v0))
        return Check("scattering-intertwining", float(r), TOL_COMPOSITION, bool(r < TOL_COMPOSITION))

    def zero_coupling():
        u = project_K(v0)
        r = model_norm(hardy.scattering_map(v0, ext0) - u) / model_norm(u)
        return Check("zero-coupling-scattering", float(r), TOL_ZERO_COUPLING, bool(r < TOL_ZERO_COUPLING))

    def decay():
        if not ext.is_selfadjoint:
            return Check("semigroup-decay-ratio", None, 1.0, None,
                         [{"point": None, "reason": "kappa-not-selfadjoint"}])
        nyquist = np.pi / track.grid.dx
        if max(abs(t) for t in SEMIGROUP_TIMES) >= nyquist:
            return Check("semigroup-decay-ratio", None, 1.0, None,
                         [{"point": None, "reason": "time-beyond-grid-bandwidth"}])
        rng = np.random.default_rng([ctx.seed, 6])
        g = corpus.rational_seed(track.grid.x, track.n, rng)
        pk, p0 = corpus.paired_vectors(track, ext.kappa, g)
        diff = pk.g_tilde - p0.g_tilde
        grid = track.grid
        values = [grid.norm(hardy.riesz_project(np.exp(-1j * grid.x * t)[:, None] * diff, grid, -1))
                  for t in SEMIGROUP_TIMES]
        ratio = max(b / a for a, b in zip(values, values[1:]))
        return Check("semigroup-decay-ratio", float(ratio), 1.0, bool(ratio < 1.0),
                     ladder=[float(v) for v in values])

    out.append(_guarded("scattering-intertwining", TOL_COMPOSITION, composition, ctx))
    out.append(_guarded("zero-coupling-scattering", TOL_ZERO_COUPLING, zero_coupling, ctx))
    out.append(_guarded("semigroup-decay-ratio", 1.0, decay, ctx))
    return out


SUITES = {
    "herglotz": suite_herglotz,
    "cayley": suite_cayley,
    "theta-identities": suite_theta_identities,
    "inverse-formulas": suite_inverse_formulas,
    "weight-identity": suite_weight_identity,
    "oracle-equivalence": suite_oracle_equivalence,
    "hardy-convergence": suite_hardy_convergence,
    "gamma-identity": suite_gamma_identity,
    "resolvent-identity": suite_resolvent_identity,
    "wave-maps": suite_wave_maps,
}


def run_suites(names, ctx):
    """Run the named suites in order; returns ``[(name, [Check, ...]), ...]``."""
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suites: {unknown}")
    return [(name, SUITES[name](ctx)) for name in names]


def overall_pass(results):
    return all(c.passed is not False for _, checks in results for c in checks)
