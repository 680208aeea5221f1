"""Scattering matrices of the pair (A_kappa, A_0) on the real axis.

The scattering matrix lives in the weighted space ``L^2(E; W)`` with spectral
weight ``W(k) = -2i (M - M^*) = 4 Im M(k + i0)``.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import chartheta, kernel
from .errors import AtPole, NonConvergent, SingularMatrix
from .kernel import adjoint, max_norm, solve
from .weyl import EPS_LADDER, TOL_BV, boundary_value, encode_matrix

TOL_UNITARY = 1e-8
TOL_WEIGHT = 1e-9
WEIGHT_FLOOR = 1e-8


def _m_boundary(model, k, eps_ladder, tol):
    return boundary_value(model, k, eps_ladder, tol)[0]


def sigma_from_m(m, b):
    """``(M - B)^{-1} (M^* - B) (M^*)^{-1} M`` for stacks ``m`` and a fixed ``b``."""
    ms = adjoint(m)
    right = solve(ms, m, factor="M*")
    return solve(m - b, (ms - b) @ right, factor="M - B_kappa")


def scattering_matrix(ext, model, k, eps_ladder=EPS_LADDER, tol=TOL_BV):
    """Scattering matrix ``Sigma_hat(k)`` of ``(A_kappa, A_0)``.

    The shift is ``B_kappa = alpha kappa alpha / 2``, which reduces to ``kappa``
    at ``alpha = sqrt(2) I``.

    Raises
    ------
    AtPole, NonConvergent, SingularMatrix
    """
    m = _m_boundary(model, k, eps_ladder, tol)
    return sigma_from_m(m, ext.b_kappa)


def spectral_weight(m):
    """``-2i (M - M^*)``."""
    return -2j * (m - adjoint(m))


def clip_psd(w):
    """Project a Hermitian stack onto the PSD cone by zeroing negative eigenvalues."""
    h = 0.5 * (w + adjoint(w))
    lam, vec = np.linalg.eigh(h)
    return (vec * np.maximum(lam, 0.0)[..., None, :]) @ adjoint(vec)


def unitarity_defect(sigma, weight):
    """``max|Sigma^* W Sigma - W|``."""
    return max_norm(adjoint(sigma) @ weight @ sigma - weight)


def model_form_product(ext, s):
    """``(I + chi-(S - I))^{-1} (I + chi+(S^* - I)) (I + S^*)^{-1} (I + S)`` for boundary values ``s``."""
    eye = np.eye(ext.dim)
    ss = adjoint(s)
    tail = solve(eye + ss, eye + s, factor="I + S*")
    mid = (eye + ext.chi_plus @ (ss - eye)) @ tail
    return solve(eye + ext.chi_minus @ (s - eye), mid, factor="I + chi-(S - I)")


def g_conjugate(x, m):
    """``(M + iI)^{-1} X (M + iI)``: the product above seen in the weighted representation."""
    shift = m + 1j * np.eye(m.shape[-1])
    return solve(shift, x @ shift, factor="M + iI")


def scattering_via_model_form(ext, model, k, eps_ladder=EPS_LADDER, tol=TOL_BV):
    """The model-space multiplier of the scattering operator at ``k``.

    Boundary values of ``S`` come from the epsilon ladder applied to ``S``
    itself. Pass the result through :func:`g_conjugate` with ``M(k + i0)`` to
    compare with :func:`scattering_matrix`.

    Raises
    ------
    ValueError
        Unless ``alpha = sqrt(2) I``.
    """
    if not ext.is_sqrt2:
        raise ValueError("the model-form product is defined for alpha = sqrt(2) I")
    s, _ = chartheta.s_boundary_value(ext, model, k, eps_ladder, tol)
    return model_form_product(ext, s)


@dataclass(frozen=True, eq=False)
class WeightPair:
    """Weights at a real point ``k``.

    Attributes
    ----------
    w_left, w_right : ndarray
        ``I - S^* S`` and ``I - S S^*``.
    spectral : ndarray
        ``-2i (M - M^*)``.
    identity_residual : float
        ``max|(I - S^* S) + 2i (M^* - iI)^{-1} (M - M^*) (M + iI)^{-1}|``.
    g_residual : float
        ``max|(M + iI)^* (I - S^* S) (M + iI) - (-2i (M - M^*))|`` divided by
        ``max(1, max|M + iI|^2)``, since the conjugation amplifies errors in
        ``S`` by that factor.
    """

    k: float
    w_left: np.ndarray
    w_right: np.ndarray
    spectral: np.ndarray
    identity_residual: float
    g_residual: float


def weights(model, k, eps_ladder=EPS_LADDER, tol=TOL_BV):
    """Weights ``I - S^*S``, ``I - SS^*`` and ``-2i(M - M^*)`` at ``alpha = sqrt(2) I``.

    ``S`` and ``M`` are extrapolated to the axis independently, so the two
    residuals recorded on the result are genuine cross-checks.
    """
    n = model.dim
    eye = np.eye(n)
    ext = _sqrt2_zero(n)
    m = _m_boundary(model, k, eps_ladder, tol)
    s, _ = chartheta.s_boundary_value(ext, model, k, eps_ladder, tol)
    ss = adjoint(s)
    w_left = eye - ss @ s
    w_right = eye - s @ ss
    spec = spectral_weight(m)
    plus = m + 1j * eye
    rhs = -2j * solve(adjoint(plus), (m - adjoint(m)) @ kernel.inv(plus, factor="M + iI"), factor="M* - iI")
    identity_residual = float(np.max(max_norm(w_left - rhs)))
    scale = np.maximum(1.0, max_norm(plus) ** 2)
    g_residual = float(np.max(max_norm(adjoint(plus) @ w_left @ plus - spec) / scale))
    return WeightPair(float(k) if np.ndim(k) == 0 else k, w_left, w_right, spec, identity_residual, g_residual)


def _sqrt2_zero(n):
    from .weyl import ExtensionParams

    return ExtensionParams.sqrt2(np.zeros((n, n)))


def vertex_scattering_oracle(kappa, q):
    """Plane-wave scattering matrix ``(iqI - kappa)^{-1} (iqI + kappa)`` of the vertex condition ``u'(0) = kappa u(0)``.

    Parameters
    ----------
    kappa : array_like
        Vertex coupling.
    q : float or array_like
        Wavenumber, ``q > 0``; the spectral parameter is ``q**2``.
    """
    kappa = np.atleast_2d(np.asarray(kappa, dtype=complex))
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("wavenumber must be positive")
    iq = 1j * q[..., None, None] * np.eye(kappa.shape[0])
    return solve(iq - kappa, iq + kappa, factor="iq - kappa")


@dataclass(frozen=True, eq=False)
class ScatteringSample:
    k: float
    sigma_hat: np.ndarray = None
    weight: np.ndarray = None
    unitarity_defect: float = float("nan")
    skipped: bool = False
    reason: str = ""


@dataclass(frozen=True, eq=False)
class ScatteringCurve:
    """Samples of ``Sigma_hat`` and the spectral weight along a real grid."""

    ext: object
    model: object
    samples: list = field(default_factory=list)

    @property
    def k(self):
        return np.array([s.k for s in self.samples])

    @property
    def skipped(self):
        return [s for s in self.samples if s.skipped]

    def sigma_stack(self):
        """Stack of ``Sigma_hat`` over non-skipped samples, with their ``k``."""
        kept = [s for s in self.samples if not s.skipped]
        n = self.ext.dim
        if not kept:
            return np.empty(0), np.empty((0, n, n), complex)
        return np.array([s.k for s in kept]), np.array([s.sigma_hat for s in kept])

    def max_unitarity_defect(self, weight_floor=WEIGHT_FLOOR):
        """Largest defect over samples whose weight is not numerically zero."""
        vals = [s.unitarity_defect for s in self.samples
                if not s.skipped and max_norm(s.weight) > weight_floor]
        return max(vals, default=0.0)

    def to_dict(self):
        samples = []
        for s in self.samples:
            samples.append({
                "k": float(s.k),
                "sigma_hat": None if s.skipped else encode_matrix(s.sigma_hat),
                "weight": None if s.skipped else encode_matrix(s.weight),
                "unitarity_defect": None if s.skipped else float(s.unitarity_defect),
                "skipped": bool(s.skipped),
                "reason": s.reason,
            })
        return {
            "model": self.model.to_dict(),
            "alpha": encode_matrix(self.ext.alpha),
            "kappa": encode_matrix(self.ext.kappa),
            "samples": samples,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def csv_header(self):
        n = self.ext.dim
        idx = [f"{i}_{j}" for i in range(n) for j in range(n)]
        cols = ["k"]
        for prefix in ("sigma_re", "sigma_im", "weight_re", "weight_im"):
            cols += [f"{prefix}_{ij}" for ij in idx]
        return cols + ["unitarity_defect", "skipped", "reason"]

    def to_csv(self):
        n = self.ext.dim
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.csv_header())
        for s in self.samples:
            row = [_fmt(s.k)]
            if s.skipped:
                row += ["nan"] * (4 * n * n) + ["nan", "1", s.reason]
            else:
                sig = s.sigma_hat.ravel()
                w = s.weight.ravel()
                for part in (sig.real, sig.imag, w.real, w.imag):
                    row += [_fmt(v) for v in part]
                row += [_fmt(s.unitarity_defect), "0", ""]
            writer.writerow(row)
        return buf.getvalue()


def _fmt(x):
    return f"{float(x):.17g}"


def scan(ext, model, k_grid, eps_ladder=EPS_LADDER, tol=TOL_BV):
    """Sweep ``Sigma_hat``, the spectral weight and the unitarity defect over ``k_grid``.

    Points where evaluation fails are kept as skipped samples with a reason
    code (``AtPole``, ``NonConvergent`` or ``SingularMatrix:<factor>``).
    """
    ks = np.asarray(k_grid, dtype=float).ravel()
    if np.any(np.diff(ks) < 0):
        raise ValueError("k_grid must be sorted")
    samples = []
    for k in ks:
        try:
            m = _m_boundary(model, k, eps_ladder, tol)
            sigma = sigma_from_m(m, ext.b_kappa)
        except AtPole:
            samples.append(ScatteringSample(float(k), skipped=True, reason="AtPole"))
            continue
        except NonConvergent:
            samples.append(ScatteringSample(float(k), skipped=True, reason="NonConvergent"))
            continue
        except SingularMatrix as exc:
            samples.append(ScatteringSample(float(k), skipped=True, reason=f"SingularMatrix:{exc.factor}"))
            continue
        w = spectral_weight(m)
        samples.append(ScatteringSample(float(k), sigma, w, float(unitarity_defect(sigma, w))))
    return ScatteringCurve(ext, model, samples)
