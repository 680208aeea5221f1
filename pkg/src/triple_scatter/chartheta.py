"""Characteristic function S(z) and the Theta transforms built from it.

Conventions
-----------
``S(z) = I + i alpha (B_iI^* - M(z))^{-1} alpha`` on the upper half-plane, with
``B_iI = i alpha^2 / 2``. For ``z`` in the lower half-plane the reflected
value ``S^*(conj z)`` is always formed by evaluating ``S`` at ``conj z`` and
taking the conjugate transpose.

All functions accept a scalar point or an array of points and return a stack of
matrices with the point axes in front.
"""

import numpy as np

from . import kernel
from .errors import NonConvergent, WrongHalfPlane
from .kernel import adjoint, solve
from .weyl import EPS_LADDER, POLE_FLOOR, TOL_BV, pole_scaled_ladder, richardson_to_axis

TOL_IDENTITY = 1e-10
TOL_CONTRACTION = 1e-10


def _upper(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise WrongHalfPlane("point must lie in the open upper half-plane")
    return z


def _lower(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag >= 0):
        raise WrongHalfPlane("point must lie in the open lower half-plane")
    return z


def _eye(ext):
    return np.eye(ext.dim, dtype=complex)


def _s_formula(ext, m):
    """``I + i alpha (B_iI^* - m)^{-1} alpha`` for an arbitrary stack ``m``."""
    a = ext.alpha
    x = solve(adjoint(ext.b_ii) - m, a, factor="B_iI^* - M")
    return _eye(ext) + 1j * a @ x


def char_function(ext, model, z):
    """Characteristic function ``S(z)`` for ``z`` in the upper half-plane.

    Raises
    ------
    WrongHalfPlane, SingularMatrix
    """
    z = _upper(z)
    return _s_formula(ext, model(z))


def s_star_reflected(ext, model, z):
    """``S^*(conj z) = (S(conj z))^*`` for ``z`` in the lower half-plane."""
    z = _lower(z)
    return adjoint(char_function(ext, model, np.conj(z)))


def cayley_form(model, z):
    """``(M - iI)(M + iI)^{-1}``, equal to ``S`` when ``alpha = sqrt(2) I``."""
    z = _upper(z)
    m = model(z)
    eye = np.eye(m.shape[-1])
    # M - i and (M + i)^{-1} commute
    return solve(m + 1j * eye, m - 1j * eye, factor="M + iI")


def contraction_defect(s):
    """``max(0, ||S||_op - 1)`` per stacked matrix."""
    return np.maximum(0.0, kernel.op_norm(s) - 1.0)


def theta(ext, model, z):
    """``Theta(z) = I - i alpha (B_iI - M(z))^{-1} alpha chi+`` for ``z`` in the lower half-plane."""
    z = _lower(z)
    a = ext.alpha
    x = solve(ext.b_ii - model(z), a @ ext.chi_plus, factor="B_iI - M")
    return _eye(ext) - 1j * a @ x


def theta_hat(ext, model, z):
    """``Theta_hat(z) = I + i alpha (B_iI^* - M(z))^{-1} alpha chi-`` for ``z`` in the upper half-plane."""
    z = _upper(z)
    a = ext.alpha
    x = solve(adjoint(ext.b_ii) - model(z), a @ ext.chi_minus, factor="B_iI^* - M")
    return _eye(ext) + 1j * a @ x


def theta_via_s(ext, model, z):
    """``I + (S^*(conj z) - I) chi+`` for ``z`` in the lower half-plane."""
    eye = _eye(ext)
    return eye + (s_star_reflected(ext, model, z) - eye) @ ext.chi_plus


def theta_hat_via_s(ext, model, z):
    """``I + (S(z) - I) chi-`` for ``z`` in the upper half-plane."""
    eye = _eye(ext)
    return eye + (char_function(ext, model, z) - eye) @ ext.chi_minus


def theta_inverse(ext, model, z):
    """Closed-form ``Theta(z)^{-1} = I + i alpha (B_kappa - M(z))^{-1} alpha chi+`` on the lower half-plane.

    Raises
    ------
    SingularMatrix
        When ``z`` sits numerically on the spectrum of ``A_kappa``.
    """
    z = _lower(z)
    a = ext.alpha
    x = solve(ext.b_kappa - model(z), a @ ext.chi_plus, factor="B_kappa - M")
    return _eye(ext) + 1j * a @ x


def theta_hat_inverse(ext, model, z):
    """Closed-form ``Theta_hat(z)^{-1} = I - i alpha (B_kappa - M(z))^{-1} alpha chi-`` on the upper half-plane."""
    z = _upper(z)
    a = ext.alpha
    x = solve(ext.b_kappa - model(z), a @ ext.chi_minus, factor="B_kappa - M")
    return _eye(ext) - 1j * a @ x


def theta_hat_inverse_as_printed(ext, model, z):
    """The variant with ``B_iI^*`` in the resolvent factor.

    Kept for comparison only: its product with ``theta_hat`` is not the
    identity (see the test suite), so :func:`theta_hat_inverse` is the one used
    throughout.
    """
    z = _upper(z)
    a = ext.alpha
    x = solve(adjoint(ext.b_ii) - model(z), a @ ext.chi_minus, factor="B_iI^* - M")
    return _eye(ext) - 1j * a @ x


def resolvent_style_inverses(ext, model, z):
    """Closed forms for four inverses built from ``S``, paired with their targets.

    ``z`` lies in the upper half-plane; the two inverses involving the
    reflected symbol are evaluated at the lower point ``conj z``, where
    ``S^*(conj(conj z)) = S(z)^*``.

    Returns
    -------
    dict
        ``name -> (closed_form, target)``; ``closed_form @ target`` should be ``I``.
        Names are ``"I+S"``, ``"I+S*"``, ``"I+chi-(S-I)"`` and ``"I+chi+(S*-I)"``.
    """
    z = _upper(z)
    eye = _eye(ext)
    a = ext.alpha
    s = char_function(ext, model, z)
    zl = np.conj(z)
    s_refl = s_star_reflected(ext, model, zl)
    m_up = model(z)
    m_dn = model(zl)
    m_up_inv_a = solve(m_up, a, factor="M(z) for I+S")
    m_dn_inv_a = solve(m_dn, a, factor="M(z) for I+S*")
    bk_up = solve(ext.b_kappa - m_up, a, factor="B_kappa - M for I+chi-(S-I)")
    bk_dn = solve(ext.b_kappa - m_dn, a, factor="B_kappa - M for I+chi+(S*-I)")
    return {
        "I+S": (0.5 * (eye + 0.5j * a @ m_up_inv_a), eye + s),
        "I+S*": (0.5 * (eye - 0.5j * a @ m_dn_inv_a), eye + s_refl),
        "I+chi-(S-I)": (eye - 1j * ext.chi_minus @ a @ bk_up, eye + ext.chi_minus @ (s - eye)),
        "I+chi+(S*-I)": (eye + 1j * ext.chi_plus @ a @ bk_dn, eye + ext.chi_plus @ (s_refl - eye)),
    }


def inverse_residual(closed_form, target):
    """Worst of ``max|X T - I|`` and ``max|T X - I|``."""
    eye = np.eye(closed_form.shape[-1])
    left = kernel.max_norm(closed_form @ target - eye)
    right = kernel.max_norm(target @ closed_form - eye)
    return np.maximum(left, right)


def cauchy_riemann_residual(ext, model, z, h=1e-4):
    """Central-difference ``max|dS/dx + i dS/dy|`` at interior points of the upper half-plane."""
    z = _upper(z)

    def s(w):
        return char_function(ext, model, w)

    dx = (s(z + h) - s(z - h)) / (2 * h)
    dy = (s(z + 1j * h) - s(z - 1j * h)) / (2 * h)
    return kernel.max_norm(dx + 1j * dy)


def s_boundary_value(ext, model, k, eps_ladder=EPS_LADDER, tol=TOL_BV):
    """``S(k + i0)`` by extrapolating the full ``S`` formula down the epsilon ladder.

    Returns
    -------
    value, estimate : ndarray

    Raises
    ------
    NonConvergent
    """

    def s(w):
        return _s_formula(ext, model(w))

    value, estimate = richardson_to_axis(s, k, pole_scaled_ladder(model, k, eps_ladder))
    if np.any(estimate > tol):
        raise NonConvergent(f"S boundary value estimate {np.max(estimate):.3g} exceeds {tol:g}")
    return value, estimate


def s_on_axis(ext, model, k, pole_margin=1e-6):
    """``S(k + i0)`` from the upper-rim formula, without extrapolation.

    Points within ``pole_margin`` of a pole of ``M`` fall back to the
    epsilon-ladder limit of ``S`` (which stays finite there).
    """
    k = np.asarray(k, dtype=float)
    near = model.distance_to_pole(k) < max(pole_margin, POLE_FLOOR)
    out = np.empty(k.shape + (ext.dim, ext.dim), dtype=complex)
    if np.any(~near):
        out[~near] = _s_formula(ext, model(k[~near] + 0j, side=+1))
    if np.any(near):
        out[near] = s_boundary_value(ext, model, k[near])[0]
    return out


def m_on_axis(model, k):
    """``M(k + i0)`` from the upper-rim formula (no pole handling)."""
    return model(np.asarray(k, dtype=float) + 0j, side=+1)
