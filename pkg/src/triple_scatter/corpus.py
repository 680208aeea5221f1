"""Test vectors for the discretized model space.

Seeds are rational functions and modulated Gaussians. Their poles and
centres sit well to the right of ``k = 0``, where the catalog symbols have a
square-root branch point, so that sampling errors from that point stay small.
Vectors that must be smooth for ``A_kappa`` are completed pointwise from a
free component.
"""

import numpy as np

from . import kernel
from .hardy import ModelVector, PoleTerm, _apply

SEED_POLES = (6.0 - 0.8j, 8.0 - 1.2j, 10.0 - 0.6j, 7.0 + 0.9j)
SEED_ORDER = 3
# a fast-decaying H^2_+ bump placed next to the branch point
BUMP_POINT = 0.3 - 0.7j
BUMP_ORDER = 6
D_POINTS = (-1j, 3.0 - 0.5j, 1j, 5.0 + 2j)


def _coefficients(rng, count, n):
    return rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))


def rational_seed(x, n, rng, poles=SEED_POLES, order=SEED_ORDER):
    """``sum_j c_j (|Im p_j| / (x - p_j))^order`` with random vectors ``c_j``."""
    x = np.asarray(x, dtype=float)
    coef = _coefficients(rng, len(poles), n)
    out = np.zeros((x.size, n), complex)
    for p, c in zip(poles, coef):
        out += ((abs(p.imag) / (x - p)) ** order)[:, None] * c
    return out


def gaussian_seed(x, n, rng, centers=(5.0, 7.0), width=1.0, omega0=5.0):
    """Gaussians at ``centers`` modulated by ``exp(i omega0 x)``, random vector weights."""
    x = np.asarray(x, dtype=float)
    coef = _coefficients(rng, len(centers), n)
    out = np.zeros((x.size, n), complex)
    for c0, c in zip(centers, coef):
        out += (np.exp(-0.5 * ((x - c0) / width) ** 2 + 1j * omega0 * x))[:, None] * c
    return out


def _chi(kappa):
    kappa = np.atleast_2d(np.asarray(kappa, dtype=complex))
    eye = np.eye(kappa.shape[0])
    return 0.5 * (eye + 1j * kappa), 0.5 * (eye - 1j * kappa)


def smooth_vector(track, kappa, g_tilde):
    """Complete ``g_tilde`` to a vector that is smooth for ``A_kappa``.

    Solves ``chi+(g_tilde + S^*g) + chi-(S g_tilde + g) = 0`` for ``g``
    pointwise. Points where the system is singular are zeroed in both
    components and left out of ``mask``.
    """
    chi_p, chi_m = _chi(kappa)
    g_tilde = np.asarray(g_tilde, dtype=complex).reshape(track.grid.N, track.n)
    lhs = chi_p @ track.S_star + chi_m
    rhs = -_apply(chi_p + chi_m @ track.S, g_tilde)
    g, singular = kernel.solve_masked(lhs, rhs)
    keep = ~singular
    return ModelVector(track, np.where(keep[:, None], g_tilde, 0.0), g, keep)


def partner_vector(track, kappa, g):
    """The vector with second component ``g`` that is smooth for ``A_kappa``."""
    chi_p, chi_m = _chi(kappa)
    g = np.asarray(g, dtype=complex).reshape(track.grid.N, track.n)
    lhs = chi_p + chi_m @ track.S
    rhs = -_apply(chi_p @ track.S_star + chi_m, g)
    g_tilde, singular = kernel.solve_masked(lhs, rhs)
    keep = ~singular
    return ModelVector(track, g_tilde, np.where(keep[:, None], g, 0.0), keep)


def paired_vectors(track, kappa, g):
    """``(v_kappa, v_0)``: smooth vectors for ``A_kappa`` and ``A_0`` sharing ``g``."""
    zero = np.zeros((track.n, track.n))
    return partner_vector(track, kappa, g), partner_vector(track, zero, g)


def bump(grid, n, point=BUMP_POINT, order=BUMP_ORDER):
    """``(|Im p| / (x - p))^order`` in every channel with phases ``i^c``; lies in ``H^2_+``."""
    r = (abs(point.imag) / (grid.x - point)) ** order
    return r[:, None] * (1j ** np.arange(n))[None, :]


def minus_smooth_vector(track, kappa, g_tilde):
    """A vector smooth from below only: a smooth vector plus ``(h, 0)`` with ``h`` in ``H^2_+``."""
    v = smooth_vector(track, kappa, g_tilde)
    h = bump(track.grid, track.n)
    return v + ModelVector(track, h, np.zeros_like(h))


def k_member(track, h_minus, h_plus):
    """Solve ``g_tilde + S^*g = h_minus``, ``S g_tilde + g = h_plus`` pointwise.

    With ``h_minus`` in ``H^2_-`` and ``h_plus`` in ``H^2_+`` the result lies
    in ``K``. Points where ``I - S^*S`` is singular are zeroed.
    """
    n = track.n
    eye = np.eye(n)
    s, ss = track.S, track.S_star
    block = np.block([[np.broadcast_to(eye, s.shape), ss], [s, np.broadcast_to(eye, s.shape)]])
    rhs = np.concatenate([np.asarray(h_minus, complex), np.asarray(h_plus, complex)], axis=1)
    sol, singular = kernel.solve_masked(block, rhs)
    keep = ~singular
    return ModelVector(track, sol[:, :n], sol[:, n:], keep)


def d_vectors(track, points=D_POINTS):
    """Unit-coefficient elements of ``D+`` (points below the axis) and ``D-`` (above).

    ``(e_c / (x - w), 0)`` for ``w`` in the lower half-plane and
    ``(0, e_c / (x - w))`` for ``w`` in the upper one, kept in closed form.
    """
    n = track.n
    zero = np.zeros((track.grid.N, n))
    out = []
    for w in points:
        for c in np.eye(n):
            term = PoleTerm(w, c, 0 * c) if complex(w).imag < 0 else PoleTerm(w, 0 * c, c)
            out.append(ModelVector(track, zero, zero, poles=(term,)))
    return out


def rational_corpus(track, kappa, count=3, seed=0):
    """``count`` smooth vectors for ``A_kappa`` built from independent rational seeds."""
    rng = np.random.default_rng(seed)
    return [smooth_vector(track, kappa, rational_seed(track.grid.x, track.n, rng)) for _ in range(count)]


def gaussian_corpus(track, kappa, count=2, seed=0):
    """``count`` smooth vectors for ``A_kappa`` from modulated Gaussian seeds."""
    rng = np.random.default_rng(seed)
    return [smooth_vector(track, kappa, gaussian_seed(track.grid.x, track.n, rng)) for _ in range(count)]
