"""Discretized two-component model space over a uniform real grid.

Fourier convention: a grid function is ``f(x) = sum_m c_m exp(i w_m x)`` with
``w_m = pi m / L``. ``exp(i w x)`` is bounded in the upper half-plane exactly
when ``w >= 0``, so ``H^2_+`` is the span of the nonnegative frequencies (the
zero bin included) and ``H^2_-`` the span of the negative ones (the Nyquist bin
included). Consequently multiplication by ``exp(i k t)`` with ``t >= 0`` maps
``H^2_+`` into itself.

Model vectors are pairs ``(g_tilde, g)`` of ``E``-valued functions with the
weight ``[[I, S^*], [S, I]]`` built from a :class:`SymbolTrack`. Summands of
the form ``(a, b) / (x - w)`` are carried in closed form.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import chartheta, kernel
from .errors import EdgeMass, MaskedEverywhere, NegativeNorm, NotInK, WrongHalfPlane
from .kernel import adjoint

EDGE_TOL = 1e-4
EDGE_FRACTION = 0.05
INVERSE_CAP = 1e6
TOL_SMOOTH = 1e-6
TOL_NORM = 1e-10
TOL_K = 1e-2
TOL_TRACK = 1e-8

W_MINUS_0K = "W-(A0,Ak)"
W_PLUS_0K = "W+(A0,Ak)"
W_MINUS_K0 = "W-(Ak,A0)"
W_PLUS_K0 = "W+(Ak,A0)"
DIRECTIONS = (W_MINUS_0K, W_PLUS_0K, W_MINUS_K0, W_PLUS_K0)


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_j = -L + j 2L/N`` on ``[-L, L)``."""

    L: float = 50.0
    N: int = 4096

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("half-width L must be positive")
        n = int(self.N)
        if n != self.N or n < 256 or n & (n - 1):
            raise ValueError("N must be a power of two and at least 256")

    @cached_property
    def dx(self):
        return 2.0 * self.L / self.N

    @cached_property
    def x(self):
        return -self.L + self.dx * np.arange(self.N)

    @cached_property
    def omega(self):
        """Angular frequencies in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @cached_property
    def plus_mask(self):
        return self.omega >= 0

    @cached_property
    def edge_mask(self):
        """The outer ``EDGE_FRACTION`` of the points, split evenly between both ends."""
        m = max(1, int(round(self.N * EDGE_FRACTION / 2)))
        mask = np.zeros(self.N, bool)
        mask[:m] = True
        mask[-m:] = True
        return mask

    def norm(self, f):
        """Plain ``L^2`` norm of a scalar or ``E``-valued grid function."""
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.dx))


def riesz_project(f, grid, sign):
    """Riesz projection onto ``H^2_+`` (``sign=+1``) or ``H^2_-`` (``sign=-1``).

    ``f`` has the grid along axis 0.
    """
    f = np.asarray(f, dtype=complex)
    keep = grid.plus_mask if sign > 0 else ~grid.plus_mask
    c = np.fft.fft(f, axis=0)
    c[~keep] = 0.0
    return np.fft.ifft(c, axis=0)


def _check_contraction(s, tol):
    d = chartheta.contraction_defect(s)
    if np.any(d > tol):
        raise ValueError(f"symbol track is not a contraction (defect {np.max(d):.3g})")


@dataclass(frozen=True, eq=False)
class SymbolTrack:
    """Boundary values ``S(k)`` sampled on a grid, shape ``(N, n, n)``.

    ``s_upper`` optionally evaluates ``S`` at points of the open upper
    half-plane; it is needed for vectors that carry pole terms.
    """

    grid: Grid
    S: np.ndarray
    tol_contraction: float = chartheta.TOL_CONTRACTION
    s_upper: object = field(default=None, repr=False)

    def __post_init__(self):
        s = np.asarray(self.S, dtype=complex)
        if s.ndim != 3 or s.shape[0] != self.grid.N or s.shape[1] != s.shape[2]:
            raise ValueError(f"S must have shape (N, n, n), got {s.shape}")
        _check_contraction(s, self.tol_contraction)
        s.setflags(write=False)
        object.__setattr__(self, "S", s)

    @property
    def n(self):
        return self.S.shape[-1]

    @cached_property
    def S_star(self):
        return adjoint(self.S)

    def s_at(self, w):
        """``S(w)`` for ``w`` in the upper half-plane."""
        if self.s_upper is None:
            raise ValueError("this track cannot evaluate S off the real axis")
        if not complex(w).imag > 0:
            raise WrongHalfPlane("S is evaluated in the upper half-plane")
        return np.asarray(self.s_upper(complex(w)), dtype=complex).reshape(self.n, self.n)

    def s_star_at(self, w):
        """``S^*(conj w) = S(conj w)^*`` for ``w`` in the lower half-plane."""
        return adjoint(self.s_at(np.conj(complex(w))))

    @classmethod
    def constant(cls, grid, value):
        value = np.atleast_2d(np.asarray(value, dtype=complex))
        return cls(grid, np.broadcast_to(value, (grid.N,) + value.shape).copy(), s_upper=lambda w: value)

    @classmethod
    def from_model(cls, grid, ext, model, tol_contraction=TOL_TRACK):
        """Upper-rim boundary values of ``S`` for a catalog model.

        The default tolerance is looser than for hand-made tracks because
        samples next to a pole of ``M`` come from extrapolation.
        """
        return cls(
            grid,
            chartheta.s_on_axis(ext, model, grid.x),
            tol_contraction,
            s_upper=lambda w: chartheta.char_function(ext, model, w),
        )


def _vecs(a, grid, n):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape != (grid.N, n):
        raise ValueError(f"component must have shape ({grid.N}, {n}), got {a.shape}")
    return a


def _apply(mats, vecs):
    return np.einsum("jab,jb->ja", mats, vecs)


@dataclass(frozen=True, eq=False)
class PoleTerm:
    """The pair ``(a, b) / (x - w)`` with constant vectors ``a``, ``b`` and ``Im w != 0``."""

    w: complex
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        w = complex(self.w)
        if w.imag == 0:
            raise ValueError("pole must lie off the real axis")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", np.asarray(self.a, dtype=complex).ravel())
        object.__setattr__(self, "b", np.asarray(self.b, dtype=complex).ravel())

    def scaled(self, c):
        return PoleTerm(self.w, c * self.a, c * self.b)


def _same_point(p, q):
    return abs(p - q) <= 1e-13 * max(1.0, abs(p))


def _merge(poles):
    out = []
    for p in poles:
        for i, q in enumerate(out):
            if _same_point(p.w, q.w):
                out[i] = PoleTerm(q.w, q.a + p.a, q.b + p.b)
                break
        else:
            out.append(p)
    return tuple(p for p in out if np.any(p.a) or np.any(p.b))


def _pole_samples(poles, grid, n):
    gt = np.zeros((grid.N, n), complex)
    g = np.zeros((grid.N, n), complex)
    for p in poles:
        r = (1.0 / (grid.x - p.w))[:, None]
        gt += r * p.a
        g += r * p.b
    return gt, g


@dataclass(frozen=True, eq=False)
class ModelVector:
    """A pair ``(g_tilde, g)`` of ``E``-valued functions on the grid.

    The pair is stored as sampled parts ``g_tilde``, ``g`` plus a tuple of
    :class:`PoleTerm` summands that are kept in closed form. Resolvents
    create such terms, and their slow ``1/x`` decay is exactly what a
    truncated grid handles badly, so projections, continuations and inner
    products treat them analytically.

    ``mask`` (optional, boolean over the grid) records points removed by a
    pointwise-inverse truncation; masked points carry zeros.
    """

    track: SymbolTrack
    g_tilde: np.ndarray
    g: np.ndarray
    mask: np.ndarray = field(default=None, repr=False)
    poles: tuple = ()

    def __post_init__(self):
        grid, n = self.track.grid, self.track.n
        object.__setattr__(self, "g_tilde", _vecs(self.g_tilde, grid, n))
        object.__setattr__(self, "g", _vecs(self.g, grid, n))
        poles = _merge(self.poles)
        for p in poles:
            if p.a.shape != (n,) or p.b.shape != (n,):
                raise ValueError("pole coefficients must have length n")
        object.__setattr__(self, "poles", poles)

    @property
    def grid(self):
        return self.track.grid

    def samples(self):
        """Total ``(g_tilde, g)`` on the grid, pole terms included."""
        if not self.poles:
            return self.g_tilde, self.g
        pt, pg = _pole_samples(self.poles, self.grid, self.track.n)
        return self.g_tilde + pt, self.g + pg

    def materialized(self):
        """The same vector with pole terms replaced by their grid samples."""
        gt, g = self.samples()
        return ModelVector(self.track, gt, g, self.mask)

    @property
    def f_plus(self):
        """``g_tilde + S^* g`` on the grid."""
        gt, g = self.samples()
        return gt + _apply(self.track.S_star, g)

    @property
    def f_minus(self):
        """``S g_tilde + g`` on the grid."""
        gt, g = self.samples()
        return _apply(self.track.S, gt) + g

    @property
    def grid_f_plus(self):
        return self.g_tilde + _apply(self.track.S_star, self.g)

    @property
    def grid_f_minus(self):
        return _apply(self.track.S, self.g_tilde) + self.g

    def replace(self, g_tilde=None, g=None, mask=None, poles=None):
        return ModelVector(
            self.track,
            self.g_tilde if g_tilde is None else g_tilde,
            self.g if g is None else g,
            self.mask if mask is None else mask,
            self.poles if poles is None else poles,
        )

    def __add__(self, other):
        return self.replace(self.g_tilde + other.g_tilde, self.g + other.g, poles=self.poles + other.poles)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, c):
        return self.replace(c * self.g_tilde, c * self.g, poles=tuple(p.scaled(c) for p in self.poles))

    __rmul__ = __mul__

    def l2_norm(self):
        """Unweighted ``L^2`` norm of the pair over the real line."""
        grid = self.grid
        q = grid.norm(self.g_tilde) ** 2 + grid.norm(self.g) ** 2
        if self.poles:
            pt, pg = _pole_samples(self.poles, grid, self.track.n)
            cross = np.vdot(pt, self.g_tilde) + np.vdot(pg, self.g)
            q += 2.0 * cross.real * grid.dx
            for p in self.poles:
                for r in self.poles:
                    i0 = _integral_one(p.w, np.conj(r.w))
                    q += (np.vdot(r.a, p.a) * i0 + np.vdot(r.b, p.b) * i0).real
        return float(np.sqrt(max(q, 0.0)))

    def to_dict(self):
        x = self.grid.x
        gt, g = self.samples()
        comps = []
        for i in range(self.track.n):
            a, b = gt[:, i], g[:, i]
            comps.append(np.column_stack([x, a.real, a.imag, b.real, b.imag]).tolist())
        out = {"L": self.grid.L, "N": self.grid.N, "components": comps}
        if self.poles:
            out["poles"] = [
                {"w": [p.w.real, p.w.imag],
                 "a": [[c.real, c.imag] for c in p.a],
                 "b": [[c.real, c.imag] for c in p.b]}
                for p in self.poles
            ]
        return out

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data, track):
        """Inverse of :meth:`to_dict`; pole terms are split off the samples again."""
        comps = np.asarray(data["components"], dtype=float)
        if comps.shape[0] != track.n or comps.shape[1] != track.grid.N:
            raise ValueError("vector does not match the symbol track")
        if not np.allclose(comps[0, :, 0], track.grid.x, rtol=0, atol=1e-12 * track.grid.L):
            raise ValueError("grid points do not match the symbol track")
        g_tilde = (comps[:, :, 1] + 1j * comps[:, :, 2]).T
        g = (comps[:, :, 3] + 1j * comps[:, :, 4]).T
        poles = []
        for p in data.get("poles", []):
            a = np.array([complex(*c) for c in p["a"]])
            b = np.array([complex(*c) for c in p["b"]])
            poles.append(PoleTerm(complex(*p["w"]), a, b))
        pt, pg = _pole_samples(poles, track.grid, track.n)
        return cls(track, g_tilde - pt, g - pg, poles=tuple(poles))

    @classmethod
    def from_json(cls, text, track):
        return cls.from_dict(json.loads(text), track)


# Integrals over the real line of F(x) / ((x - p)(x - q)) with F bounded and
# analytic in one half-plane, by residues. Coincident points give a double
# pole whose residue needs F'.


def _derivative(func, p):
    h = 1e-3 * max(1.0, abs(p.imag))
    return (8 * (func(p + h) - func(p - h)) - (func(p + 2 * h) - func(p - 2 * h))) / (12 * h)


def _integral_one(p, q):
    """``int dx / ((x - p)(x - q))``."""
    if _same_point(p, q) or (p.imag > 0) == (q.imag > 0):
        return 0.0
    upper, lower = (p, q) if p.imag > 0 else (q, p)
    return 2j * np.pi / (upper - lower)


def _integral_upper(func, p, q):
    """``int F(x) dx / ((x - p)(x - q))`` for ``F`` analytic and bounded in the upper half-plane."""
    if _same_point(p, q):
        return 2j * np.pi * _derivative(func, p) if p.imag > 0 else 0.0
    total = 0.0
    if p.imag > 0:
        total = total + func(p) / (p - q)
    if q.imag > 0:
        total = total + func(q) / (q - p)
    return 2j * np.pi * total


def _integral_lower(func, p, q):
    """``int F(x) dx / ((x - p)(x - q))`` for ``F`` analytic and bounded in the lower half-plane."""
    if _same_point(p, q):
        return -2j * np.pi * _derivative(func, p) if p.imag < 0 else 0.0
    total = 0.0
    if p.imag < 0:
        total = total + func(p) / (p - q)
    if q.imag < 0:
        total = total + func(q) / (q - p)
    return -2j * np.pi * total


def _pole_pole_inner(track, p, r):
    """``<W p, r>`` for two pole terms, exactly."""
    x0, x1 = p.w, np.conj(r.w)
    i0 = _integral_one(x0, x1)
    i_s = _integral_upper(track.s_at, x0, x1)
    i_ss = _integral_lower(track.s_star_at, x0, x1)
    return (np.vdot(r.a, p.a) * i0 + np.vdot(r.a, np.dot(i_ss, p.b))
            + np.vdot(r.b, np.dot(i_s, p.a)) + np.vdot(r.b, p.b) * i0)


def model_inner(v, w):
    """Weighted inner product ``<[[I, S^*], [S, I]] v, w>`` (linear in ``v``).

    Products of sampled parts use the grid quadrature, products of two pole
    terms are integrated over the whole line by residues.
    """
    grid, n = v.grid, v.track.n
    dx = grid.dx
    total = np.vdot(w.g_tilde, v.grid_f_plus) + np.vdot(w.g, v.grid_f_minus)
    if w.poles:
        wt, wg = _pole_samples(w.poles, grid, n)
        total += np.vdot(wt, v.grid_f_plus) + np.vdot(wg, v.grid_f_minus)
    if v.poles:
        vt, vg = _pole_samples(v.poles, grid, n)
        vp = vt + _apply(v.track.S_star, vg)
        vm = _apply(v.track.S, vt) + vg
        total += np.vdot(w.g_tilde, vp) + np.vdot(w.g, vm)
    total = total * dx
    for p in v.poles:
        for r in w.poles:
            total += _pole_pole_inner(v.track, p, r)
    return complex(total)


def model_norm_squared(v, tol_norm=TOL_NORM):
    """Quadratic form of the weight, clipped at zero when it dips below.

    Pole terms make the form a mix of exact integrals and grid quadrature,
    which can come out slightly negative for vectors that nearly cancel. The
    plain grid quadrature of the sampled pair cannot, as long as the symbol is
    a contraction, so that is what decides between clipping and raising.

    Raises
    ------
    NegativeNorm
        If the grid quadrature is below ``-tol_norm * ||v||_2^2`` (the
        symbol track is not a contraction).
    """
    q = model_inner(v, v).real
    if q < 0:
        gt, g = v.samples()
        fp = gt + _apply(v.track.S_star, g)
        fm = _apply(v.track.S, gt) + g
        grid_form = (np.vdot(gt, fp) + np.vdot(g, fm)).real * v.grid.dx
        size = v.grid.norm(gt) ** 2 + v.grid.norm(g) ** 2
        if grid_form < -tol_norm * max(size, np.finfo(float).tiny):
            raise NegativeNorm(f"model norm squared {grid_form:.3g} is negative")
        q = 0.0
    return q


def model_norm(v, tol_norm=TOL_NORM):
    """Weighted norm of a model vector."""
    return float(np.sqrt(model_norm_squared(v, tol_norm)))


# Riesz projections of a sampled function decay like 1/x unless its moments
# vanish. The leading tail coefficients are therefore moved into simple pole
# terms at fixed auxiliary points, and only the fast-decaying remainder is
# projected with the FFT.
TAIL_POINTS = (-0.7 - 1.3j, 0.6 - 1.9j, -0.2 - 2.6j)


def split_projection(f, grid, sign, points=TAIL_POINTS):
    """``P_sign f`` as a sampled part plus pole terms.

    Parameters
    ----------
    f : ndarray, shape (N, n)
        Sampled function, assumed to decay fast enough for its first
        ``len(points)`` moments to exist.
    sign : {+1, -1}
    points : sequence of complex
        Lower half-plane points; their conjugates carry the ``H^2_-`` tail.

    Returns
    -------
    sampled : ndarray, shape (N, n)
    terms : list of (w, c)
        ``P_sign f = sampled + sum c / (x - w)``.
    """
    x, dx = grid.x, grid.dx
    lower = np.asarray(points, dtype=complex)
    order = np.arange(len(lower))
    moments = np.stack([np.sum(x[:, None] ** j * f, axis=0) * dx for j in order])
    # P+ f ~ sum_j t_j / x^{j+1} and P- f ~ -sum_j t_j / x^{j+1}
    tail = -moments / (2j * np.pi)
    c_plus = np.linalg.solve(lower[None, :] ** order[:, None], tail)
    upper = np.conj(lower)
    c_minus = np.linalg.solve(upper[None, :] ** order[:, None], -tail)
    psi = (np.sum(c_plus[None] / (x[:, None, None] - lower[None, :, None]), axis=1)
           + np.sum(c_minus[None] / (x[:, None, None] - upper[None, :, None]), axis=1))
    sampled = riesz_project(f - psi, grid, sign)
    coeffs, where = (c_plus, lower) if sign > 0 else (c_minus, upper)
    return sampled, list(zip(where, coeffs))


def _project_pole(track, p):
    if p.w.imag < 0:
        # 1/(x - w) lies in H^2_+, so only S^* b needs splitting
        return PoleTerm(p.w, -track.s_star_at(p.w) @ p.b, p.b)
    return PoleTerm(p.w, p.a, -track.s_at(p.w) @ p.a)


def project_K(v):
    """Orthogonal projection onto ``K``: ``(g_tilde - P+(g_tilde + S^*g), g - P-(S g_tilde + g))``."""
    grid = v.grid
    zero = np.zeros(v.track.n, complex)
    plus, plus_terms = split_projection(v.grid_f_plus, grid, +1)
    minus, minus_terms = split_projection(v.grid_f_minus, grid, -1)
    poles = [_project_pole(v.track, p) for p in v.poles]
    poles += [PoleTerm(w, -c, zero) for w, c in plus_terms]
    poles += [PoleTerm(w, zero, -c) for w, c in minus_terms]
    return v.replace(v.g_tilde - plus, v.g - minus, poles=tuple(poles))


def _pole_defects(v):
    """Coefficients of ``P+(f_plus)`` and ``P-(f_minus)`` coming from pole terms."""
    plus, minus = [], []
    for p in v.poles:
        if p.w.imag < 0:
            plus.append((p.w, p.a + v.track.s_star_at(p.w) @ p.b))
        else:
            minus.append((p.w, v.track.s_at(p.w) @ p.a + p.b))
    return plus, minus


def _defect_norm(sampled, terms, grid):
    q = grid.norm(sampled) ** 2
    if terms:
        r = np.zeros_like(sampled)
        for w, c in terms:
            r += (1.0 / (grid.x - w))[:, None] * c
        q += 2.0 * np.vdot(r, sampled).real * grid.dx
        for w1, c1 in terms:
            for w2, c2 in terms:
                q += (np.vdot(c2, c1) * _integral_one(w1, np.conj(w2))).real
    return np.sqrt(max(q, 0.0))


def k_defect(v):
    """Relative size of the parts of ``v`` that violate ``K``-membership.

    ``sqrt(||P+(g_tilde + S^*g)||^2 + ||P-(S g_tilde + g)||^2) / ||v||_2``.
    """
    grid = v.grid
    plus, minus = _pole_defects(v)
    sp, tp = split_projection(v.grid_f_plus, grid, +1)
    sm, tm = split_projection(v.grid_f_minus, grid, -1)
    a = _defect_norm(sp, _merge_terms(plus + tp), grid)
    b = _defect_norm(sm, _merge_terms(minus + tm), grid)
    scale = v.l2_norm()
    return 0.0 if scale == 0 else float(np.hypot(a, b) / scale)


def _merge_terms(terms):
    out = []
    for w, c in terms:
        for i, (w2, c2) in enumerate(out):
            if _same_point(w, w2):
                out[i] = (w2, c2 + c)
                break
        else:
            out.append((w, c))
    return out


def smooth_combination(v, ext):
    """``chi+(g_tilde + S^*g) + chi-(S g_tilde + g)`` pointwise."""
    return v.f_plus @ ext.chi_plus.T + v.f_minus @ ext.chi_minus.T


def smooth_defect(v, ext, sign):
    """``||P_sign(chi+(g_tilde + S^*g) + chi-(S g_tilde + g))||`` on the grid."""
    return v.grid.norm(riesz_project(smooth_combination(v, ext), v.grid, sign))


def edge_ratio(f, grid, scale=None):
    """Share of the ``L^2`` norm of ``f`` carried by the grid edges.

    ``scale`` replaces ``||f||`` as the reference norm when given.
    """
    total = grid.norm(f) if scale is None else scale
    if total == 0:
        return 0.0
    return grid.norm(np.asarray(f)[grid.edge_mask]) / total


def analytic_continuation(f, grid, z, sign, edge_tol=EDGE_TOL, scale=None):
    """Value at ``z`` of the analytic continuation of ``f`` from the real line.

    ``f`` is taken to lie in ``H^2_sign``, and ``z`` must lie in the matching
    half-plane. Cauchy quadrature:
    ``f(z) = sign / (2 pi i) * sum_j f(x_j) / (x_j - z) dx``.

    Parameters
    ----------
    f : array_like, shape (N,) or (N, n)
    grid : Grid
    z : complex or array_like of complex
    sign : {+1, -1}
    edge_tol : float
    scale : float, optional
        Reference norm for the edge test; defaults to ``||f||``.

    Returns
    -------
    ndarray, shape ``z.shape + f.shape[1:]``

    Raises
    ------
    WrongHalfPlane, EdgeMass
    """
    f = np.asarray(f, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if np.any(np.sign(z.imag) != np.sign(sign)):
        raise WrongHalfPlane("continuation point must lie in the half-plane matching the Hardy class")
    ratio = edge_ratio(f, grid, scale)
    if ratio > edge_tol:
        raise EdgeMass(f"edge share {ratio:.2e} exceeds {edge_tol:g}")
    kern = 1.0 / (grid.x - z[..., None])
    out = np.tensordot(kern, f, axes=([-1], [0])) * grid.dx
    return sign * out / (2j * np.pi)


def _pole_continuation(track, p, which, z):
    w = p.w
    if _same_point(w, z):
        raise ValueError("continuation point coincides with a pole term")
    if which == "plus":
        if z.imag < 0:
            if w.imag < 0:
                return (track.s_star_at(z) - track.s_star_at(w)) @ p.b / (z - w)
            return (p.a + track.s_star_at(z) @ p.b) / (z - w)
        if w.imag < 0:
            return (p.a + track.s_star_at(w) @ p.b) / (z - w)
        return np.zeros_like(p.a)
    if z.imag > 0:
        if w.imag < 0:
            return (track.s_at(z) @ p.a + p.b) / (z - w)
        return (track.s_at(z) - track.s_at(w)) @ p.a / (z - w)
    if w.imag > 0:
        return (track.s_at(w) @ p.a + p.b) / (z - w)
    return np.zeros_like(p.a)


def hardy_value(v, which, z, edge_tol=EDGE_TOL):
    """Continuation to ``z`` of the Hardy part of ``g_tilde + S^*g`` or ``S g_tilde + g``.

    ``which`` is ``"plus"`` for ``g_tilde + S^*g`` and ``"minus"`` for
    ``S g_tilde + g``. The part taken is ``P-`` for ``z`` in the lower
    half-plane and ``P+`` for ``z`` in the upper one, so for ``v`` in ``K``
    the ``"plus"`` value below the axis and the ``"minus"`` value above it
    continue the whole function.

    Raises
    ------
    WrongHalfPlane, EdgeMass
    """
    z = complex(z)
    if z.imag == 0:
        raise WrongHalfPlane("continuation point must lie off the real axis")
    if which not in ("plus", "minus"):
        raise ValueError(f"which must be 'plus' or 'minus', got {which!r}")
    sign = 1 if z.imag > 0 else -1
    f = v.grid_f_plus if which == "plus" else v.grid_f_minus
    # the Cauchy integral of f itself already picks out its P_sign part;
    # edge mass is judged against the whole vector, pole terms included
    scale = max(v.grid.norm(f), v.l2_norm())
    out = analytic_continuation(f, v.grid, z, sign, edge_tol, scale)
    for p in v.poles:
        out = out + _pole_continuation(v.track, p, which, z)
    return out


def divide(v, z):
    """``(x - z)^{-1} v``; pole terms are split into partial fractions."""
    z = complex(z)
    inv_xz = (1.0 / (v.grid.x - z))[:, None]
    poles = []
    for p in v.poles:
        if _same_point(p.w, z):
            raise ValueError("division point coincides with a pole term")
        c = 1.0 / (p.w - z)
        poles += [p.scaled(c), PoleTerm(z, -c * p.a, -c * p.b)]
    return v.replace(v.g_tilde * inv_xz, v.g * inv_xz, poles=tuple(poles))


def resolvent_shift(v, ext, model, z, edge_tol=EDGE_TOL):
    """The constant vector subtracted in the resolvent formula at ``z``.

    ``chi+ Theta^{-1}(z) (g_tilde + S^*g)(z)`` below the axis,
    ``chi- Theta_hat^{-1}(z) (S g_tilde + g)(z)`` above it.
    """
    z = complex(z)
    if z.imag < 0:
        return ext.chi_plus @ chartheta.theta_inverse(ext, model, z) @ hardy_value(v, "plus", z, edge_tol)
    return ext.chi_minus @ chartheta.theta_hat_inverse(ext, model, z) @ hardy_value(v, "minus", z, edge_tol)


def model_resolvent(v, ext, model, z, tol_k=TOL_K, edge_tol=EDGE_TOL):
    """Resolvent of the model image of ``A_kappa`` applied to ``v`` in ``K``.

    For ``z`` in the lower half-plane the second component is shifted by
    ``chi+ Theta^{-1}(z) (g_tilde + S^*g)(z)``, for ``z`` in the upper one the
    first component by ``chi- Theta_hat^{-1}(z) (S g_tilde + g)(z)``; the
    shifted pair is divided by ``x - z`` and projected onto ``K``. The shift
    enters as a pole term at ``z``.

    Raises
    ------
    NotInK
        If :func:`k_defect` exceeds ``tol_k``.
    SingularMatrix, EdgeMass
    """
    z = complex(z)
    if z.imag == 0:
        raise WrongHalfPlane("resolvent needs Im z != 0")
    d = k_defect(v)
    if d > tol_k:
        raise NotInK(f"K-defect {d:.2e} exceeds {tol_k:g}")
    c = resolvent_shift(v, ext, model, z, edge_tol)
    zero = np.zeros_like(c)
    shift = PoleTerm(z, zero, -c) if z.imag < 0 else PoleTerm(z, -c, zero)
    shifted = divide(v, z)
    return project_K(shifted.replace(poles=shifted.poles + (shift,)))


def compressed_multiplication(v, z):
    """``P_K[(x - z)^{-1} v]``."""
    return project_K(divide(v, z))


def gamma_terms(v, ext, model, z, edge_tol=EDGE_TOL):
    """``gamma(z)`` and ``P-(S g_tilde + g)(z)`` for ``z`` in the lower half-plane.

    ``gamma(z) = chi+ Theta^{-1}(z) (P-(g_tilde + S^*g)(z) - S^*(conj z) P-(S g_tilde + g)(z))``.
    """
    z = complex(z)
    if z.imag >= 0:
        raise WrongHalfPlane("gamma is defined in the lower half-plane")
    a = hardy_value(v, "plus", z, edge_tol)
    b = hardy_value(v, "minus", z, edge_tol)
    s_refl = chartheta.s_star_reflected(ext, model, z)
    gamma = ext.chi_plus @ chartheta.theta_inverse(ext, model, z) @ (a - s_refl @ b)
    return gamma, b


def gamma_check(v, ext, model, z, edge_tol=EDGE_TOL):
    """``|gamma(z) + P-(S g_tilde + g)(z)|``.

    The residual vanishes for vectors whose combination
    ``chi+(g_tilde + S^*g) + chi-(S g_tilde + g)`` has no ``H^2_-`` part;
    in general it equals ``|(I + chi+(S^*(conj z) - I))^{-1} P-(...)(z)|``.
    """
    gamma, b = gamma_terms(v, ext, model, z, edge_tol)
    return float(np.linalg.norm(gamma + b))


def _masked_inverse(mats, cap):
    eye = np.broadcast_to(np.eye(mats.shape[-1], dtype=complex), mats.shape)
    inv, singular = kernel.solve_masked(mats, eye)
    keep = ~singular & (kernel.op_norm(inv) <= cap)
    inv[~keep] = 0.0
    return inv, keep


def _support(v, rel=1e-14):
    amp = np.sum(np.abs(v.g_tilde) ** 2 + np.abs(v.g) ** 2, axis=1)
    return amp > rel * max(amp.max(), np.finfo(float).tiny)


def wave_components(direction, v, ext, inverse_cap=INVERSE_CAP):
    """Pointwise part of a wave map, before the projection onto ``K``.

    Returns
    -------
    ModelVector
        With ``mask`` set to the points that were kept.

    Raises
    ------
    MaskedEverywhere
    """
    v = v.materialized()
    s = v.track.S
    ss = v.track.S_star
    eye = np.eye(v.track.n)
    if direction == W_MINUS_0K:
        inv, keep = _masked_inverse(eye + s, inverse_cap)
        new_gt = -_apply(inv, _apply(eye + ss, v.g))
        out_gt, out_g = new_gt, v.g
    elif direction == W_PLUS_0K:
        inv, keep = _masked_inverse(eye + ss, inverse_cap)
        out_gt, out_g = v.g_tilde, -_apply(inv, _apply(eye + s, v.g_tilde))
    elif direction == W_MINUS_K0:
        inv, keep = _masked_inverse(eye + ext.chi_minus @ (s - eye), inverse_cap)
        out_gt = -_apply(inv, _apply(eye + ext.chi_plus @ (ss - eye), v.g))
        out_g = v.g
    elif direction == W_PLUS_K0:
        inv, keep = _masked_inverse(eye + ext.chi_plus @ (ss - eye), inverse_cap)
        out_gt = v.g_tilde
        out_g = -_apply(inv, _apply(eye + ext.chi_minus @ (s - eye), v.g_tilde))
    else:
        raise ValueError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")
    return _apply_mask(v, out_gt, out_g, keep)


def _apply_mask(v, out_gt, out_g, keep):
    support = _support(v)
    if np.any(support) and not np.any(keep & support):
        raise MaskedEverywhere("inverse cap removes the whole support")
    if v.mask is not None:
        keep = keep & v.mask
    k = keep[:, None]
    return v.replace(np.where(k, out_gt, 0.0), np.where(k, out_g, 0.0), keep)


def wave_map(direction, v, ext, inverse_cap=INVERSE_CAP):
    """Wave operator in the model representation.

    ``direction`` is one of ``"W-(A0,Ak)"``, ``"W+(A0,Ak)"``, ``"W-(Ak,A0)"``,
    ``"W+(Ak,A0)"``. One component is replaced pointwise, the other kept, and
    the result projected onto ``K``. Points where the needed pointwise inverse
    exceeds ``inverse_cap`` in norm are zeroed and recorded in ``mask``.
    """
    w = wave_components(direction, v, ext, inverse_cap)
    return project_K(w)


def scattering_components(v, ext, inverse_cap=INVERSE_CAP):
    """Pointwise part of the scattering operator on smooth vectors of ``A_0``."""
    v = v.materialized()
    s = v.track.S
    ss = v.track.S_star
    eye = np.eye(v.track.n)
    inv1, keep1 = _masked_inverse(eye + ext.chi_minus @ (s - eye), inverse_cap)
    inv2, keep2 = _masked_inverse(eye + ss, inverse_cap)
    first = -_apply(inv1, _apply(eye + ext.chi_plus @ (ss - eye), v.g))
    second = -_apply(inv2, _apply(eye + s, first))
    return _apply_mask(v, first, second, keep1 & keep2)


def scattering_map(v, ext, inverse_cap=INVERSE_CAP):
    """Scattering operator of ``(A_kappa, A_0)`` in the model representation."""
    return project_K(scattering_components(v, ext, inverse_cap))


def semigroup_step(v, t):
    """``P_K[exp(i k t) v]``; pole terms are sampled first."""
    v = v.materialized()
    phase = np.exp(1j * v.grid.x * t)[:, None]
    return project_K(v.replace(v.g_tilde * phase, v.g * phase))
