"""Matrix-valued Herglotz functions M(z) and the extension parameters (alpha, kappa).

Three model families are available:

``StarGraph(n)``
    ``n`` half-line leads joined at a vertex, ``M(z) = i sqrt(z) I``.
``LeadRational(W, V, poles)``
    ``M(z) = V + i sqrt(z) W + sum_j A_j / (lambda_j - z)``.
``Interval(length)``
    ``-d^2/dx^2`` on ``[0, length]`` with boundary values ``(u(0), u(length))``
    and inward derivatives ``(u'(0), -u'(length))``.

All models evaluate on arrays of points and return stacks ``(..., n, n)``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .errors import AtPole, NonConvergent, NotHermitian, SingularMatrix
from .kernel import MINUS_I0, PLUS_I0, adjoint, herm_defect, max_norm, psd_defect

POLE_FLOOR = 1e-8
TOL_HERGLOTZ = 1e-9
TOL_BV = 1e-6
EPS_LADDER = (1e-2, 1e-3, 1e-4, 1e-5)
LADDER_CLEARANCE = 10.0


def _side_for(z, side):
    """Points exactly on the real axis default to the upper rim when ``side`` is ``+1``."""
    if side in (1, "+", PLUS_I0):
        return PLUS_I0
    if side in (-1, "-", MINUS_I0):
        return MINUS_I0
    if side is None:
        return None
    raise ValueError(f"unknown side {side!r}")


def _as_matrix(value, n=None, name="matrix"):
    a = np.atleast_2d(np.asarray(value, dtype=complex))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name} must be {n}x{n}, got {a.shape}")
    return a


class HerglotzModel:
    """Base class for evaluable Weyl functions.

    Subclasses implement :meth:`_evaluate` for points that are already known to
    be away from poles and cuts, and report their real poles through
    :attr:`poles`.
    """

    kind = "abstract"
    dim = 0

    @property
    def poles(self):
        """Real poles of ``M`` as a 1-d array (possibly empty)."""
        return np.empty(0)

    def distance_to_pole(self, z):
        z = np.asarray(z, dtype=complex)
        p = self.poles
        if p.size == 0:
            return np.full(z.shape, np.inf)
        return np.min(np.abs(z[..., None] - p), axis=-1)

    def __call__(self, z, side=None):
        """Evaluate ``M(z)``.

        Parameters
        ----------
        z : complex or array_like
            Points off the real axis, or real points together with ``side``.
        side : {None, "+i0", "-i0", +1, -1}
            Rim of the real axis to use for real ``z``.

        Raises
        ------
        AtPole
            If some ``z`` is within ``POLE_FLOOR`` of a pole.
        """
        z = np.asarray(z, dtype=complex)
        if np.any(self.distance_to_pole(z) < POLE_FLOOR):
            raise AtPole(f"{self.kind}: evaluation point within {POLE_FLOOR:g} of a pole")
        return self._evaluate(z, _side_for(z, side))

    def _evaluate(self, z, side):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class StarGraph(HerglotzModel):
    """``n`` semi-infinite leads with Kirchhoff-free vertex data, ``M(z) = i sqrt(z) I``."""

    kind = "StarGraph"

    def __init__(self, n):
        if int(n) != n or n < 1:
            raise ValueError("StarGraph needs a positive integer number of leads")
        self.dim = int(n)

    def _evaluate(self, z, side):
        root = kernel.sqrt_branch(z, side)
        return 1j * np.asarray(root)[..., None, None] * np.eye(self.dim)

    def to_dict(self):
        return {"kind": "StarGraph", "n": self.dim}


@dataclass(frozen=True, eq=False)
class _Pole:
    location: float
    residue: np.ndarray


class LeadRational(HerglotzModel):
    """``M(z) = V + i sqrt(z) W + sum_j A_j / (lambda_j - z)``.

    Parameters
    ----------
    W : array_like
        Positive semidefinite lead coupling.
    V : array_like
        Hermitian constant part.
    poles : sequence of (float, array_like)
        Pairs ``(lambda_j, A_j)`` with distinct real ``lambda_j`` and PSD ``A_j``.
    check : bool
        Validate the Herglotz structure. Turning this off exists to build
        deliberately broken instances for validator tests.
    """

    kind = "LeadRational"

    def __init__(self, W, V=None, poles=(), check=True):
        W = _as_matrix(W, name="W")
        n = W.shape[0]
        V = np.zeros((n, n), complex) if V is None else _as_matrix(V, n, "V")
        plist = [_Pole(float(lam), _as_matrix(A, n, "A_j")) for lam, A in poles]
        if check:
            tol = kernel.TOL_HERM
            if herm_defect(W) > tol or psd_defect(W) > tol:
                raise ValueError("W must be Hermitian positive semidefinite")
            if herm_defect(V) > tol:
                raise ValueError("V must be Hermitian")
            locs = [p.location for p in plist]
            if len(set(locs)) != len(locs):
                raise ValueError("pole locations must be distinct")
            for p in plist:
                if herm_defect(p.residue) > tol or psd_defect(p.residue) > tol:
                    raise ValueError("pole residues must be Hermitian positive semidefinite")
        self.dim = n
        self.W = W
        self.V = V
        self._poles = plist

    @property
    def poles(self):
        return np.array([p.location for p in self._poles], dtype=float)

    @property
    def residues(self):
        return [p.residue for p in self._poles]

    def _evaluate(self, z, side):
        out = np.broadcast_to(self.V, z.shape + self.V.shape).copy()
        if np.any(self.W):
            root = np.asarray(kernel.sqrt_branch(z, side))
            out = out + 1j * root[..., None, None] * self.W
        for p in self._poles:
            out = out + p.residue / (p.location - z)[..., None, None]
        return out

    def to_dict(self):
        return {
            "kind": "LeadRational",
            "W": encode_matrix(self.W),
            "V": encode_matrix(self.V),
            "poles": [{"lambda": p.location, "A": encode_matrix(p.residue)} for p in self._poles],
        }


class Interval(HerglotzModel):
    """Weyl matrix of ``-u''`` on ``[0, length]``.

    With ``q = sqrt(z)`` the matrix is ``q [[-cot(q l), csc(q l)], [csc(q l), -cot(q l)]]``,
    an even function of ``q`` and hence meromorphic in ``z`` with poles at the
    Dirichlet eigenvalues ``(m pi / l)^2``.
    """

    kind = "Interval"
    dim = 2

    def __init__(self, length):
        if not length > 0:
            raise ValueError("interval length must be positive")
        self.length = float(length)

    def pole_list(self, upto):
        """Dirichlet eigenvalues not exceeding ``upto``."""
        m = np.arange(1, int(np.sqrt(max(upto, 0)) * self.length / np.pi) + 2)
        lam = (m * np.pi / self.length) ** 2
        return lam[lam <= upto]

    def distance_to_pole(self, z):
        z = np.asarray(z, dtype=complex)
        q = kernel.sqrt_branch(np.where(z == 0, 1.0, z), PLUS_I0)
        m = np.maximum(np.rint(np.real(q) * self.length / np.pi), 1.0)
        return np.abs(z - (m * np.pi / self.length) ** 2)

    def _evaluate(self, z, side):
        ell = self.length
        q = np.asarray(kernel.sqrt_branch(z, side or PLUS_I0))
        t = q * ell
        small = np.abs(t) < 1e-3
        t_safe = np.where(small, 1.0, t)
        # exp(2it) is bounded because Im q >= 0
        e1 = np.exp(1j * t_safe)
        e2 = e1 * e1
        den = e2 - 1.0
        cot_term = q * 1j * (e2 + 1.0) / den
        csc_term = q * 2j * e1 / den
        t2 = t * t
        cot_series = (1.0 - t2 / 3.0 - t2 * t2 / 45.0) / ell
        csc_series = (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) / ell
        diag = -np.where(small, cot_series, cot_term)
        off = np.where(small, csc_series, csc_term)
        out = np.empty(z.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = diag
        out[..., 1, 1] = diag
        out[..., 0, 1] = off
        out[..., 1, 0] = off
        return out

    def to_dict(self):
        return {"kind": "Interval", "length": self.length}

    def __repr__(self):
        return f"Interval(length={self.length})"


def encode_matrix(a):
    """Nested ``[re, im]`` pairs for JSON."""
    a = np.asarray(a, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


def decode_matrix(data, name="matrix"):
    """Inverse of :func:`encode_matrix`; plain real numbers are accepted too."""
    try:
        rows = []
        for row in data:
            vals = []
            for v in row:
                if isinstance(v, (list, tuple)):
                    if len(v) != 2:
                        raise ValueError
                    vals.append(complex(float(v[0]), float(v[1])))
                else:
                    vals.append(complex(float(v)))
            rows.append(vals)
        a = np.array(rows, dtype=complex)
    except (TypeError, ValueError):
        raise ValueError(f"{name}: expected nested [re, im] pairs") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"{name}: expected a non-empty square matrix, got shape {a.shape}")
    return a


def model_from_dict(data):
    """Build a model from its JSON description."""
    kind = data.get("kind")
    if kind == "StarGraph":
        return StarGraph(data["n"])
    if kind == "LeadRational":
        W = decode_matrix(data["W"], "W")
        V = decode_matrix(data["V"], "V") if "V" in data else None
        poles = [(p["lambda"], decode_matrix(p["A"], "A")) for p in data.get("poles", [])]
        return LeadRational(W, V, poles)
    if kind == "Interval":
        return Interval(data["length"])
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ExtensionParams:
    """Boundary parameters of the extension ``A_kappa``.

    Parameters
    ----------
    alpha : array_like
        Hermitian positive definite.
    kappa : array_like
        Any square matrix of the same size; Hermitian for self-adjoint extensions.
    """

    alpha: np.ndarray
    kappa: np.ndarray
    b_kappa: np.ndarray = field(init=False, repr=False)
    chi_plus: np.ndarray = field(init=False, repr=False)
    chi_minus: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        alpha = _as_matrix(self.alpha, name="alpha")
        kappa = _as_matrix(self.kappa, alpha.shape[0], "kappa")
        if herm_defect(alpha) > kernel.TOL_HERM * max(1.0, max_norm(alpha)):
            raise NotHermitian("alpha must be Hermitian")
        if np.linalg.eigvalsh(0.5 * (alpha + adjoint(alpha)))[0] <= 0:
            raise ValueError("alpha must be positive definite")
        eye = np.eye(alpha.shape[0])
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "b_kappa", alpha @ kappa @ alpha / 2)
        object.__setattr__(self, "chi_plus", (eye + 1j * kappa) / 2)
        object.__setattr__(self, "chi_minus", (eye - 1j * kappa) / 2)

    @classmethod
    def sqrt2(cls, kappa):
        """``alpha = sqrt(2) I``, the normalization under which ``S`` is a Cayley transform."""
        kappa = _as_matrix(kappa, name="kappa")
        return cls(np.sqrt(2.0) * np.eye(kappa.shape[0]), kappa)

    @property
    def dim(self):
        return self.alpha.shape[0]

    @property
    def b_ii(self):
        """``B`` for ``kappa = iI``: ``i alpha^2 / 2``."""
        return 0.5j * self.alpha @ self.alpha

    @property
    def is_sqrt2(self):
        return np.allclose(self.alpha, np.sqrt(2.0) * np.eye(self.dim), rtol=0, atol=1e-14)

    @property
    def is_selfadjoint(self):
        return herm_defect(self.kappa) <= kernel.TOL_HERM * max(1.0, max_norm(self.kappa))

    def with_kappa(self, kappa):
        return ExtensionParams(self.alpha, kappa)


def eval_weyl(model, z, side=None):
    """``M(z)`` for a catalog model (thin wrapper over ``model(z, side)``)."""
    return model(z, side)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_herglotz`."""

    reflection_defect: float
    positivity_defect: float
    min_eigenvalue: float
    tol: float

    @property
    def passed(self):
        return self.reflection_defect <= self.tol and self.positivity_defect <= self.tol


def validate_herglotz(model, z_grid, tol=TOL_HERGLOTZ):
    """Check ``M(z)^* = M(conj z)`` and ``Im M(z) >= 0`` on points of the upper half-plane.

    Returns
    -------
    ValidationReport
        Maximal defects over the grid and the smallest eigenvalue of ``Im M``.
    """
    z = np.asarray(z_grid, dtype=complex).ravel()
    if np.any(z.imag <= 0):
        raise ValueError("validation grid must lie in the open upper half-plane")
    m_up = model(z)
    m_down = model(np.conj(z))
    reflection = float(np.max(max_norm(adjoint(m_up) - m_down)))
    im_part = (m_up - adjoint(m_up)) / 2j
    lam = np.linalg.eigvalsh(im_part)[..., 0]
    return ValidationReport(reflection, float(max(0.0, -lam.min())), float(lam.min()), tol)


def richardson_to_axis(func, k, eps_ladder=EPS_LADDER):
    """Extrapolate ``func(k + i eps)`` to ``eps = 0``.

    Uses the full Neville table over the ladder (polynomial extrapolation in
    ``eps``). The error estimate is the max-norm difference between the
    extrapolant over all rungs and the one that drops the coarsest rung.

    Parameters
    ----------
    func : callable
        Maps an array of complex points to a stack of matrices.
    k : float or array_like
    eps_ladder : array_like
        Strictly decreasing positive steps, at least three of them. A 2-d
        ladder of shape ``(rungs,) + k.shape`` gives every point its own steps.

    Returns
    -------
    value : ndarray
    estimate : ndarray
    """
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.shape[0] < 3 or np.any(np.diff(eps, axis=0) >= 0) or np.any(eps <= 0):
        raise ValueError("eps_ladder needs >= 3 strictly decreasing positive rungs")
    k = np.asarray(k, dtype=float)
    samples = [np.asarray(func(k + 1j * e)) for e in eps]
    # per-point steps broadcast against the trailing matrix axes
    eps = eps.reshape(eps.shape + (1, 1))
    # Neville: table[i] holds the extrapolant through rungs i..i+level
    table = list(samples)
    m = len(eps)
    prev_top = None
    for level in range(1, m):
        new = []
        for i in range(m - level):
            e_lo, e_hi = eps[i], eps[i + level]
            new.append((e_lo * table[i + 1] - e_hi * table[i]) / (e_lo - e_hi))
        if level == m - 1:
            prev_top = table[1]
        table = new
    value = table[0]
    estimate = max_norm(value - prev_top)
    return value, estimate


def pole_scaled_ladder(model, k, eps_ladder=EPS_LADDER, clearance=LADDER_CLEARANCE):
    """Shrink the ladder at points closer than ``clearance * eps_ladder[0]`` to a pole.

    Returns an array of shape ``(rungs,) + k.shape``. Points far from every
    pole keep the ladder unchanged, and so do points within ``POLE_FLOOR`` of
    one, where only functions that stay finite at the pole are extrapolated.
    """
    eps = np.asarray(eps_ladder, dtype=float)
    k = np.asarray(k, dtype=float)
    d = model.distance_to_pole(k)
    factor = np.where(d < POLE_FLOOR, 1.0, np.minimum(1.0, d / (clearance * eps[0])))
    return eps.reshape((-1,) + (1,) * k.ndim) * factor


def boundary_value(model, k, eps_ladder=EPS_LADDER, tol=TOL_BV):
    """``M(k + i0)`` by extrapolation down an epsilon ladder.

    Parameters
    ----------
    model : HerglotzModel
    k : float or array_like
    eps_ladder : sequence of float
    tol : float
        Allowed estimate, relative to ``max(1, max|M|)``.

    Returns
    -------
    value : ndarray, shape (..., n, n)
    estimate : ndarray

    Raises
    ------
    AtPole
        If ``k`` is within ``POLE_FLOOR`` of a pole.
    NonConvergent
        If the extrapolation estimate exceeds the tolerance anywhere.
    """
    k = np.asarray(k, dtype=float)
    if np.any(model.distance_to_pole(k) < POLE_FLOOR):
        raise AtPole(f"k within {POLE_FLOOR:g} of a pole of {model.kind}")
    value, estimate = richardson_to_axis(model, k, pole_scaled_ladder(model, k, eps_ladder))
    if np.any(estimate > tol * np.maximum(1.0, max_norm(value))):
        raise NonConvergent(f"boundary value estimate {np.max(estimate):.3g} exceeds {tol:g}")
    return value, estimate


__all__ = [
    "AtPole",
    "EPS_LADDER",
    "ExtensionParams",
    "HerglotzModel",
    "Interval",
    "LeadRational",
    "NonConvergent",
    "POLE_FLOOR",
    "SingularMatrix",
    "StarGraph",
    "TOL_BV",
    "TOL_HERGLOTZ",
    "ValidationReport",
    "boundary_value",
    "decode_matrix",
    "encode_matrix",
    "eval_weyl",
    "model_from_dict",
    "pole_scaled_ladder",
    "richardson_to_axis",
    "validate_herglotz",
]
