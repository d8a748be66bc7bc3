"""Dense linear-algebra and probability kernels used by the detector and trainers.

Everything here operates on float64 numpy arrays and is a pure function of
its inputs.
"""

from typing import NamedTuple

import numpy as np

MAX_JACOBI_SWEEPS = 100
JACOBI_TOL = 1e-12


class SvdError(RuntimeError):
    pass


class SvdFactors(NamedTuple):
    """Factorization a = u @ S @ v with S = diag(singular_values) padded to shape.

    ``u`` and ``v`` are square orthogonal matrices; ``v`` multiplies on the
    right directly (it is not transposed again during reconstruction).
    Singular values are sorted descending and nonnegative.
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        m, n = self.u.shape[0], self.v.shape[0]
        s = np.zeros((m, n))
        r = len(self.singular_values)
        s[:r, :r] = np.diag(self.singular_values)
        return self.u @ s @ self.v


def _jacobi_orthogonalize(b: np.ndarray, vacc: np.ndarray) -> None:
    """One-sided Jacobi: rotate columns of ``b`` until mutually orthogonal.

    ``vacc`` accumulates the applied rotations (b_final = b_input @ vacc).
    Both arrays are modified in place.
    """

    n = b.shape[1]
    for sweep in range(MAX_JACOBI_SWEEPS):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                alpha = b[:, i] @ b[:, i]
                beta = b[:, j] @ b[:, j]
                gamma = b[:, i] @ b[:, j]
                if alpha * beta == 0.0:
                    continue
                rel = abs(gamma) / np.sqrt(alpha * beta)
                off = max(off, rel)
                if rel <= JACOBI_TOL:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                bi = b[:, i].copy()
                b[:, i] = cs * bi - sn * b[:, j]
                b[:, j] = sn * bi + cs * b[:, j]
                vi = vacc[:, i].copy()
                vacc[:, i] = cs * vi - sn * vacc[:, j]
                vacc[:, j] = sn * vi + cs * vacc[:, j]
        if off <= JACOBI_TOL:
            return
    raise SvdError(
        f"Jacobi SVD did not converge for a {b.shape[0]}x{b.shape[1]} matrix "
        f"after {MAX_JACOBI_SWEEPS} sweeps (off-diagonal residual {off:.3e})"
    )


def _complete_basis(u_thin: np.ndarray, n_have: int) -> np.ndarray:
    """Extend ``n_have`` orthonormal columns of a square matrix to a full basis.

    Deterministic: candidate directions are the identity columns, twice
    re-orthogonalized against everything accepted so far.
    """

    m = u_thin.shape[0]
    u = u_thin.copy()
    col = n_have
    for k in range(m):
        if col == m:
            break
        cand = np.zeros(m)
        cand[k] = 1.0
        for _ in range(2):
            cand -= u[:, :col] @ (u[:, :col].T @ cand)
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            u[:, col] = cand / norm
            col += 1
    if col != m:
        raise SvdError(f"could not complete an orthonormal basis ({col} of {m})")
    return u


def svd(a: np.ndarray) -> SvdFactors:
    """One-sided Jacobi SVD of a real matrix: a = u @ diag(s) @ v.

    Deterministic for a fixed input.  Raises SvdError on non-convergence.
    """

    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"svd expects a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("svd input contains non-finite entries")

    m, n = a.shape
    if m < n:
        f = svd(a.T)
        return SvdFactors(f.v.T, f.singular_values, f.u.T)

    b = a.copy()
    vacc = np.eye(n)
    _jacobi_orthogonalize(b, vacc)

    norms = np.sqrt(np.sum(b * b, axis=0))
    order = np.argsort(-norms, kind="stable")
    norms = norms[order]
    b = b[:, order]
    vacc = vacc[:, order]

    scale = np.max(norms) if n else 0.0
    cutoff = scale * 1e-14
    u_work = np.zeros((m, m))
    rank = 0
    for j in range(n):
        # zero norms sort last, so valid columns stay contiguous
        if norms[j] > cutoff:
            u_work[:, j] = b[:, j] / norms[j]
            rank = j + 1
        else:
            norms[j] = 0.0
    u = _complete_basis(u_work, rank)
    return SvdFactors(u, norms, vacc.T)


def gaussian_product(m1: float, v1: float, m2: float, v2: float):
    """Mean and variance of the (normalized) product of two Gaussian densities.

    variance = (1/v1 + 1/v2)^-1, mean = variance * (m1/v1 + m2/v2).
    Infinite input variances are allowed and behave as uninformative factors.
    """

    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    if np.any(v1 <= 0) or np.any(v2 <= 0):
        raise ValueError("gaussian_product requires positive variances")
    p1 = np.where(np.isinf(v1), 0.0, 1.0 / v1)
    p2 = np.where(np.isinf(v2), 0.0, 1.0 / v2)
    psum = p1 + p2
    var = np.where(psum > 0, 1.0 / np.where(psum > 0, psum, 1.0), np.inf)
    mean = np.where(psum > 0, (m1 * p1 + m2 * p2) / np.where(psum > 0, psum, 1.0), 0.0)
    if mean.ndim == 0:
        return float(mean), float(var)
    return mean, var


def logsumexp(logw: np.ndarray, axis=None):
    """log(sum(exp(logw))), stabilized by the usual shift-by-max."""

    logw = np.asarray(logw, dtype=np.float64)
    mx = np.max(logw, axis=axis, keepdims=True)
    mx_safe = np.where(np.isfinite(mx), mx, 0.0)
    out = np.log(np.sum(np.exp(logw - mx_safe), axis=axis, keepdims=True)) + mx_safe
    out = np.where(np.isfinite(mx), out, mx)
    if axis is None:
        return float(out)
    return np.squeeze(out, axis=axis)


def normalized_exp(log_weights: np.ndarray, axis=-1) -> np.ndarray:
    """exp(log_weights) normalized to sum to 1, computed without overflow.

    Invariant under adding a constant to all inputs.  Entries may be -inf;
    raising everything -inf is an error (no mass to normalize).
    """

    logw = np.asarray(log_weights, dtype=np.float64)
    if logw.size == 0:
        raise ValueError("normalized_exp requires a nonempty input")
    mx = np.max(logw, axis=axis, keepdims=True)
    if np.any(mx == -np.inf):
        raise ValueError("normalized_exp: all log-weights are -inf")
    w = np.exp(logw - mx)
    return w / np.sum(w, axis=axis, keepdims=True)
