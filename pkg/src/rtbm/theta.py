"""Truncated lattice sums for the real-argument tilde-theta function.

The central quantity is

    log sum_{n in L} exp(-1/2 n^T Omega n + n^T z)

for a symmetric positive definite Omega, where the lattice L is either all
integer vectors or the nonnegative orthant.  The summand is a displaced
Gaussian on the lattice, so the sum is truncated by walking max-norm shells
outward from the (rounded) continuous maximizer Omega^{-1} z and stopping
once a whole shell is negligible *and* a certified Gaussian tail bound
confirms the omitted mass is below the requested relative tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.linalg as la
from scipy.special import logsumexp

from .errors import NotPositiveDefiniteError, ThetaTruncationError

DEFAULT_EPS = 1e-12
MAX_SHELL_RADIUS = 64
_REFERENCE_POINT_CAP = 10**8


class Lattice(str, Enum):
    """Summation lattice for the hidden units."""

    FULL = "full"      # all integer vectors
    NONNEG = "nonneg"  # vectors with nonnegative integer entries


@dataclass(frozen=True)
class ThetaQuery:
    """Argument pair (z, Omega) for a tilde-theta evaluation.

    ``eps`` is the relative truncation tolerance: the omitted lattice mass
    is certified to be below ``eps`` times the returned sum.
    """

    z: np.ndarray
    omega: np.ndarray
    lattice: Lattice = Lattice.FULL
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        h = z.shape[0]
        if z.ndim != 1 or omega.shape != (h, h):
            raise ValueError(f"shape mismatch: z {z.shape}, omega {omega.shape}")
        if not np.isfinite(z).all() or not np.isfinite(omega).all():
            raise ValueError("z and omega must be finite")
        if np.abs(omega - omega.T).max() > 1e-10:
            raise ValueError("omega must be symmetric")
        if not (0.0 < self.eps <= 1e-3):
            raise ValueError(f"eps must lie in (0, 1e-3], got {self.eps}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "lattice", Lattice(self.lattice))


@lru_cache(maxsize=None)
def _shell_offsets(dim: int, radius: int) -> np.ndarray:
    """Integer vectors with max-norm exactly ``radius``, each listed once.

    Points are generated segment-wise by the first coordinate index that
    attains +-radius; earlier coordinates stay strictly inside, later ones
    range over the full cube.
    """
    if radius == 0:
        pts = np.zeros((1, dim), dtype=np.int64)
    else:
        inner = np.arange(-(radius - 1), radius, dtype=np.int64)
        full = np.arange(-radius, radius + 1, dtype=np.int64)
        edge = np.array([-radius, radius], dtype=np.int64)
        segments = []
        for i in range(dim):
            axes = [inner] * i + [edge] + [full] * (dim - 1 - i)
            mesh = np.meshgrid(*axes, indexing="ij")
            segments.append(np.stack([m.ravel() for m in mesh], axis=1))
        pts = np.concatenate(segments, axis=0)
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=None)
def _eulerian(k: int) -> tuple:
    """Coefficients of the k-th Eulerian polynomial A_k(q)."""
    row = [1]
    for deg in range(1, k + 1):
        prev = row
        row = [0] * deg
        for m in range(deg):
            left = (m + 1) * (prev[m] if m < len(prev) else 0)
            right = (deg - m) * (prev[m - 1] if m >= 1 else 0)
            row[m] = left + right
    return tuple(row)


def _log_tail_bound(dim, radius, lam_min, f_peak, delta):
    """Certified log upper bound on the lattice mass beyond ``radius``.

    Uses f(n) <= f_peak - lam_min/2 * (s - delta)^2 on the shell at
    max-norm distance s from the rounded center, the exact shell counts
    (2s+1)^dim - (2s-1)^dim, and the closed form
    sum_j (j+1)^k q^j = A_k(q) / (1-q)^(k+1).  Valid for radius >= delta.
    """
    t = radius + 1.0 - delta
    out = np.full(np.shape(t), np.inf)
    ok = t > 0
    if not np.any(ok):
        return out
    t = np.where(ok, t, 1.0)
    q = np.exp(-lam_min * t)
    coeffs = _eulerian(dim - 1)
    a = np.zeros_like(q)
    for c in reversed(coeffs):
        a = a * q + c
    val = (
        np.log(2.0 * dim)
        + (dim - 1) * np.log(2.0 * radius + 3.0)
        + f_peak
        - 0.5 * lam_min * t * t
        + np.log(a)
        - dim * np.log1p(-q)
    )
    return np.where(ok, val, np.inf)


def _spd_cholesky(omega, name="omega"):
    """Lower Cholesky factor, raising NotPositiveDefiniteError on failure."""
    try:
        return la.cholesky(omega, lower=True)
    except la.LinAlgError:
        lam = float(la.eigvalsh(omega)[0])
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (min eigenvalue ~ {lam:.6g})",
            min_eigenvalue=lam,
        ) from None


def log_theta_many(zs, omega, lattice=Lattice.FULL, eps=DEFAULT_EPS,
                   max_radius=MAX_SHELL_RADIUS, collect_terms=False):
    """Evaluate log tilde-theta for a batch of arguments sharing one Omega.

    Parameters
    ----------
    zs : (B, h) array of argument vectors.
    omega : (h, h) symmetric positive definite matrix.
    lattice : which lattice to sum over.
    eps : relative truncation tolerance.
    collect_terms : if True (batch size 1 only), also return the enumerated
        lattice points and their log-terms, for mixture-weight extraction.

    Returns
    -------
    (B,) array of log-sums, or ``(logsum, points, logterms)`` when
    ``collect_terms`` is set.

    Raises
    ------
    NotPositiveDefiniteError
        If omega is not positive definite.
    ThetaTruncationError
        If the tolerance cannot be certified within ``max_radius`` shells;
        the sum is never silently truncated.
    """
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    omega = np.asarray(omega, dtype=float)
    nb, h = zs.shape
    lattice = Lattice(lattice)
    if collect_terms and nb != 1:
        raise ValueError("collect_terms requires a single argument vector")

    chol = _spd_cholesky(omega)
    lam_min = float(la.eigvalsh(omega)[0])
    if lam_min <= 0.0:
        raise NotPositiveDefiniteError(
            f"omega has min eigenvalue {lam_min:.6g}", min_eigenvalue=lam_min)

    nhat = la.cho_solve((chol, True), zs.T).T           # continuous maximizer
    f_peak = 0.5 * np.einsum("bh,bh->b", zs, nhat)      # value at the maximizer
    n0 = np.rint(nhat)
    if lattice is Lattice.NONNEG:
        n0 = np.maximum(n0, 0.0)
    delta = np.abs(n0 - nhat).max(axis=1)
    n0 = n0.astype(np.int64)

    # f(n0 + k) = f0 + k.(z - Omega n0) - k^T Omega k / 2
    g = zs - n0 @ omega
    f0 = -0.5 * np.einsum("bh,bh->b", n0 @ omega, n0.astype(float)) \
        + np.einsum("bh,bh->b", n0.astype(float), zs)

    anchor = np.full(nb, -np.inf)   # running max exponent per row
    scaled = np.zeros(nb)           # sum exp(f - anchor) per row
    active = np.arange(nb)
    log_eps = np.log(eps)
    points_acc, terms_acc = [], []

    for radius in range(max_radius + 1):
        offs = _shell_offsets(h, radius)
        quad = 0.5 * np.einsum("kh,hl,kl->k", offs, omega, offs)
        f = g[active] @ offs.T - quad[None, :] + f0[active, None]
        if lattice is Lattice.NONNEG:
            inside = np.all(n0[active, None, :] + offs[None, :, :] >= 0, axis=2)
            f = np.where(inside, f, -np.inf)
        # row-wise log-sum-exp, tolerating rows masked to -inf entirely
        row_max = f.max(axis=1)
        finite = np.isfinite(row_max)
        safe_max = np.where(finite, row_max, 0.0)
        sums = np.exp(f - safe_max[:, None]).sum(axis=1)
        shell_log = np.where(finite, safe_max + np.log(sums), -np.inf)

        new_anchor = np.maximum(anchor[active], shell_log)
        scaled[active] = scaled[active] * np.exp(anchor[active] - new_anchor) \
            + np.exp(shell_log - new_anchor)
        anchor[active] = new_anchor

        if collect_terms:
            pts = n0[0] + offs
            keep = np.isfinite(f[0])
            points_acc.append(pts[keep])
            terms_acc.append(f[0][keep])

        total = anchor[active] + np.log(scaled[active])
        if radius >= 1:
            with np.errstate(divide="ignore"):
                tail = _log_tail_bound(h, radius, lam_min, f_peak[active],
                                       delta[active])
            done = (shell_log <= log_eps + total) & (tail <= log_eps + total)
            active = active[~done]
            if active.size == 0:
                break
    if active.size:
        raise ThetaTruncationError(
            f"{active.size} of {nb} lattice sums not converged within "
            f"max-norm radius {max_radius} (eps={eps:g}, "
            f"min eigenvalue {lam_min:.6g})")

    result = anchor + np.log(scaled)
    if collect_terms:
        return result, np.concatenate(points_acc), np.concatenate(terms_acc)
    return result


def log_theta(query: ThetaQuery) -> float:
    """Log of the tilde-theta lattice sum for a single argument."""
    return float(log_theta_many(query.z[None, :], query.omega,
                                query.lattice, query.eps)[0])


def log_theta_reference(z, omega, lattice=Lattice.FULL, radius=10) -> float:
    """Brute-force tilde-theta over all lattice points with max-norm <= radius.

    Exhaustive summation in a fixed naive order with log-sum-exp
    accumulation; intended as a test oracle only.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    lattice = Lattice(lattice)
    h = z.shape[0]
    if radius < 0:
        raise ValueError("radius must be >= 0")
    side = radius + 1 if lattice is Lattice.NONNEG else 2 * radius + 1
    if h * side**h > _REFERENCE_POINT_CAP:
        raise ValueError(
            f"enumeration of {h * side**h} points exceeds the "
            f"{_REFERENCE_POINT_CAP} cap")
    lo = 0 if lattice is Lattice.NONNEG else -radius
    axis = np.arange(lo, radius + 1, dtype=np.int64)
    chunks = []
    if h == 1:
        blocks = [axis[:, None]]
    else:
        tail = np.meshgrid(*([axis] * (h - 1)), indexing="ij")
        tail = np.stack([m.ravel() for m in tail], axis=1)
        blocks = (np.concatenate(
            [np.full((tail.shape[0], 1), first, dtype=np.int64), tail], axis=1)
            for first in axis)
    for pts in blocks:
        f = -0.5 * np.einsum("kh,hl,kl->k", pts, omega, pts) + pts @ z
        chunks.append(logsumexp(f))
    return float(logsumexp(np.array(chunks)))
