"""Small dense complex linear algebra and the branched square root.

Every routine accepts stacks of matrices with shape ``(..., n, n)`` so that
whole grids of evaluation points are handled in one call.
"""

import numpy as np

from .errors import NotHermitian, OnCutWithoutSide, SingularMatrix

PIVOT_FLOOR = 1e-13
TOL_SOLVE = 1e-10
TOL_HERM = 1e-9

PLUS_I0 = "+i0"
MINUS_I0 = "-i0"


def max_norm(a, axis=(-2, -1)):
    """Largest absolute entry, taken over the trailing matrix axes."""
    a = np.asarray(a)
    if a.size == 0:
        return np.zeros(a.shape[:-2]) if a.ndim >= 2 else 0.0
    return np.max(np.abs(a), axis=axis)


def lu_factor(a):
    """Row-pivoted LU factorization of a stack of square matrices.

    Parameters
    ----------
    a : array_like, shape (..., n, n)

    Returns
    -------
    lu : ndarray, shape (..., n, n)
        Unit lower factor below the diagonal, upper factor on and above it.
    perm : ndarray of int, shape (..., n)
        Row permutation, ``a[perm] = L @ U`` for each stacked matrix.
    pivot_ratio : ndarray, shape (...)
        Smallest pivot magnitude divided by ``max|a|`` (``inf`` for a zero matrix
        of size 0).
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    batch = a.shape[:-2]
    n = a.shape[-1]
    lu = a.reshape(-1, n, n).copy()
    m = lu.shape[0]
    perm = np.tile(np.arange(n), (m, 1))
    rows = np.arange(m)
    scale = max_norm(lu)
    min_pivot = np.full(m, np.inf)
    for k in range(n):
        p = k + np.argmax(np.abs(lu[:, k:, k]), axis=1)
        swap = p != k
        if np.any(swap):
            r = rows[swap]
            pk = p[swap]
            tmp = lu[r, k, :].copy()
            lu[r, k, :] = lu[r, pk, :]
            lu[r, pk, :] = tmp
            tmp = perm[r, k].copy()
            perm[r, k] = perm[r, pk]
            perm[r, pk] = tmp
        pivot = lu[:, k, k]
        min_pivot = np.minimum(min_pivot, np.abs(pivot))
        safe = np.where(pivot == 0, 1.0, pivot)
        lu[:, k + 1:, k] /= safe[:, None]
        lu[:, k + 1:, k + 1:] -= lu[:, k + 1:, k, None] * lu[:, k, None, k + 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(scale > 0, min_pivot / np.where(scale > 0, scale, 1.0), 0.0)
    return lu.reshape(a.shape), perm.reshape(batch + (n,)), ratio.reshape(batch)


def lu_solve(lu, perm, b):
    """Solve with factors from :func:`lu_factor`. ``b`` has shape (..., n, k)."""
    n = lu.shape[-1]
    lu2 = lu.reshape(-1, n, n)
    m = lu2.shape[0]
    b = np.asarray(b, dtype=complex)
    x = np.take_along_axis(b.reshape(m, n, -1), perm.reshape(m, n, 1), axis=1).copy()
    for i in range(n):
        x[:, i, :] -= np.einsum("mj,mjk->mk", lu2[:, i, :i], x[:, :i, :])
    for i in range(n - 1, -1, -1):
        x[:, i, :] -= np.einsum("mj,mjk->mk", lu2[:, i, i + 1:], x[:, i + 1:, :])
        diag = lu2[:, i, i]
        x[:, i, :] /= np.where(diag == 0, 1.0, diag)[:, None]
    return x.reshape(b.shape)


def _as_stack(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    n = a.shape[-1]
    vector = True
    if b.ndim >= 2 and b.shape[-2] == n:
        try:
            np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
            vector = False
        except ValueError:
            pass
    if vector:
        b = b[..., None]
    if b.shape[-2] != a.shape[-1]:
        raise ValueError(f"row count mismatch: a {a.shape}, b {b.shape}")
    shape = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    a = np.broadcast_to(a, shape + a.shape[-2:])
    b = np.broadcast_to(b, shape + b.shape[-2:])
    return a, b, vector


def solve_masked(a, b, pivot_floor=PIVOT_FLOOR):
    """Solve ``a x = b`` for a stack, reporting singular members instead of raising.

    Returns
    -------
    x : ndarray
        Solutions; entries belonging to singular members are set to zero.
    singular : ndarray of bool
        Which stacked systems had a pivot below ``pivot_floor * max|a|``.
    """
    a, b, vector = _as_stack(a, b)
    lu, perm, ratio = lu_factor(a)
    singular = ratio < pivot_floor
    x = lu_solve(lu, perm, b)
    # one step of iterative refinement
    r = b - a @ x
    x = x + lu_solve(lu, perm, r)
    x[singular] = 0.0
    if vector:
        x = x[..., 0]
    return x, singular


def solve(a, b, pivot_floor=PIVOT_FLOOR, factor=None):
    """Solve ``a x = b`` by row-pivoted elimination plus one refinement step.

    Parameters
    ----------
    a : array_like, shape (..., n, n)
    b : array_like, shape (..., n, k) or (..., n)
    pivot_floor : float
        Relative pivot threshold; a pivot below ``pivot_floor * max|a|`` is fatal.
    factor : str, optional
        Label attached to :class:`SingularMatrix` for diagnostics.

    Raises
    ------
    SingularMatrix
    """
    x, singular = solve_masked(a, b, pivot_floor)
    if np.any(singular):
        count = int(np.count_nonzero(singular))
        raise SingularMatrix(f"{count} singular system(s)", factor=factor)
    return x


def inv(a, pivot_floor=PIVOT_FLOOR, factor=None):
    """Inverse of a stack of square matrices via :func:`solve`."""
    a = np.asarray(a, dtype=complex)
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=complex), a.shape)
    return solve(a, eye, pivot_floor, factor=factor)


def adjoint(a):
    """Conjugate transpose over the trailing two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def sqrt_branch(z, side=None):
    """Square root with ``arg z`` taken in ``(0, 2*pi)``.

    The image is the closed upper half-plane. Points on the cut ``[0, inf)``
    need ``side``: ``"+i0"`` gives ``+sqrt(x)``, ``"-i0"`` gives ``-sqrt(x)``.

    Parameters
    ----------
    z : complex or array_like
    side : {None, "+i0", "-i0"}

    Raises
    ------
    OnCutWithoutSide
    """
    z = np.asarray(z, dtype=complex)
    on_cut = (z.imag == 0) & (z.real >= 0)
    if side is None and np.any(on_cut):
        raise OnCutWithoutSide("z lies on [0, inf); pass side='+i0' or '-i0'")
    if side not in (None, PLUS_I0, MINUS_I0):
        raise ValueError(f"unknown side {side!r}")
    w = np.sqrt(z)
    w = np.where(w.imag < 0, -w, w)
    # numpy maps -x - 0j to -i*sqrt(x); the flip above repairs it, but
    # purely real negative inputs still need Re w = 0 to stay exact
    w = np.where((z.imag == 0) & (z.real < 0), 1j * np.sqrt(np.abs(z.real)), w)
    if side is not None:
        cut_value = np.sqrt(np.maximum(z.real, 0.0)) * (1.0 if side == PLUS_I0 else -1.0)
        w = np.where(on_cut, cut_value + 0j, w)
    return w[()] if w.ndim == 0 else w


def herm_defect(a):
    """``max|a - a^*|`` over the trailing matrix axes."""
    a = np.asarray(a, dtype=complex)
    return max_norm(a - adjoint(a))


def psd_defect(a, tol_herm=TOL_HERM):
    """``max(0, -lambda_min(a))`` for Hermitian ``a``.

    Raises
    ------
    NotHermitian
        If ``herm_defect(a)`` exceeds ``tol_herm * max(1, max|a|)``.
    """
    a = np.asarray(a, dtype=complex)
    scale = np.maximum(1.0, max_norm(a))
    if np.any(herm_defect(a) > tol_herm * scale):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    lam = np.linalg.eigvalsh(0.5 * (a + adjoint(a)))
    return np.maximum(0.0, -lam[..., 0])


def op_norm(a):
    """Spectral norm over the trailing matrix axes."""
    return np.linalg.norm(np.asarray(a, dtype=complex), ord=2, axis=(-2, -1))
