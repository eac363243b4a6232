"""Joint, marginal and conditional densities of an RTBM.

All densities live in log space; theta arguments routinely produce
exponents far outside double range, so linear-space values exist only at
the CLI boundary.

The visible log-density is

    log P(v) = 1/2 log det T - n_v/2 log 2pi
             - 1/2 (v + T^-1 bv)^T T (v + T^-1 bv)
             + log theta(bh + W^T v | Q)
             - log theta(bh - W^T T^-1 bv | Q - W^T T^-1 W).

Marginalizing the trailing block d of v = (y, d) with the generalized
Gaussian integral gives a closed-form log P(d), and the ratio
P(v)/P(d) is itself an RTBM density over y with the reparameterized
quintuple produced by :func:`condition`.  Note the marginal's exponent
carries the factor 1/2 in (bv0 + T1^T d)^T T0^-1 (bv0 + T1^T d)/2: the
Gaussian integral forces it, and the product-rule identity
log P(v) = log P(y|d) + log P(d) holds exactly with it.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .errors import RtbmError
from .model import RtbmParams, block_split, permute, spd_cholesky, sym, validate
from .theta import DEFAULT_EPS, log_theta_many

_LOG_2PI = np.log(2.0 * np.pi)


def _logdet_from_chol(chol):
    return 2.0 * float(np.log(np.diag(chol)).sum())


def log_pdf_many(params: RtbmParams, vs, eps=DEFAULT_EPS) -> np.ndarray:
    """Visible-sector log-density at each row of ``vs`` (shape (B, n_v))."""
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    if vs.shape[1] != params.n_v:
        raise ValueError(f"points have width {vs.shape[1]}, expected {params.n_v}")
    chol_t = spd_cholesky(params.t, "T")
    tinv_bv = la.cho_solve((chol_t, True), params.bv)
    tinv_w = la.cho_solve((chol_t, True), params.w)

    u = vs + tinv_bv
    half_quad = 0.5 * np.square(u @ chol_t).sum(axis=1)  # u^T T u / 2

    z_num = vs @ params.w + params.bh
    log_num = log_theta_many(z_num, sym(params.q), params.lattice, eps)
    z_den = params.bh - params.w.T @ tinv_bv
    omega_den = sym(params.q - params.w.T @ tinv_w)
    log_den = log_theta_many(z_den[None, :], omega_den, params.lattice, eps)[0]

    return (0.5 * _logdet_from_chol(chol_t) - 0.5 * params.n_v * _LOG_2PI
            - half_quad + log_num - log_den)


def log_pdf(params: RtbmParams, v, eps=DEFAULT_EPS) -> float:
    """Visible-sector log-density at a single point."""
    return float(log_pdf_many(params, np.asarray(v, dtype=float)[None, :], eps)[0])


def log_marginal(params: RtbmParams, m: int, d, eps=DEFAULT_EPS) -> float:
    """Closed-form log P(d): the leading m coordinates integrated out.

    ``d`` holds the trailing n_v - m coordinates.  Requires 0 < m < n_v;
    an empty free block is not a marginalization.
    """
    if not 0 < m < params.n_v:
        raise ValueError(f"m must be in (0, {params.n_v}), got {m}")
    d = np.asarray(d, dtype=float).reshape(params.n_v - m)

    bd = block_split(params, m)
    chol_t = spd_cholesky(params.t, "T")
    chol_t0 = spd_cholesky(bd.t0_bar, "T0 block")
    tinv_bv = la.cho_solve((chol_t, True), params.bv)
    tinv_w = la.cho_solve((chol_t, True), params.w)

    c = bd.bv0 + bd.t1_bar.T @ d
    t0inv_c = la.cho_solve((chol_t0, True), c)
    t0inv_w0 = la.cho_solve((chol_t0, True), bd.w0)

    z_num = params.bh + bd.w1.T @ d - bd.w0.T @ t0inv_c
    omega_num = sym(params.q - bd.w0.T @ t0inv_w0)
    log_num = log_theta_many(z_num[None, :], omega_num, params.lattice, eps)[0]
    z_den = params.bh - params.w.T @ tinv_bv
    omega_den = sym(params.q - params.w.T @ tinv_w)
    log_den = log_theta_many(z_den[None, :], omega_den, params.lattice, eps)[0]

    return (0.5 * _logdet_from_chol(chol_t)
            - 0.5 * (params.n_v - m) * _LOG_2PI
            - 0.5 * _logdet_from_chol(chol_t0)
            - 0.5 * float(d @ bd.t_tilde @ d) - float(bd.bv1 @ d)
            - 0.5 * float(params.bv @ tinv_bv)
            + 0.5 * float(c @ t0inv_c)
            + log_num - log_den)


def condition(params: RtbmParams, m: int, d) -> RtbmParams:
    """Child RTBM over the leading m coordinates given trailing values ``d``.

    The child has the same hidden sector (Q, lattice) and the
    reparameterization T -> T0, W -> W0, bv -> bv0 + T1^T d,
    bh -> bh + W1^T d; its density is the parent's conditional P(y|d).
    """
    if not 0 < m < params.n_v:
        raise ValueError(f"m must be in (0, {params.n_v}), got {m}")
    d = np.asarray(d, dtype=float).reshape(params.n_v - m)
    bd = block_split(params, m)
    child = RtbmParams(
        t=bd.t0_bar, q=params.q, w=bd.w0,
        bv=bd.bv0 + bd.t1_bar.T @ d,
        bh=params.bh + bd.w1.T @ d,
        lattice=params.lattice)
    report = validate(child)
    if not report.valid:
        # cannot happen for a valid parent (the child Schur matrix dominates
        # the parent's); reaching this indicates an invalid parent upstream
        raise RtbmError(f"conditioned model failed validation: {report}")
    return child


def condition_on(params: RtbmParams, indices, values) -> tuple[RtbmParams, list]:
    """Condition on an arbitrary coordinate subset.

    Permutes the chosen ``indices`` to the trailing block (free coordinates
    keep their original relative order up front) and conditions there.
    Returns the child and the list of free coordinate indices, in the order
    of the child's coordinates.
    """
    indices = [int(i) for i in indices]
    values = np.asarray(values, dtype=float).reshape(len(indices))
    if len(set(indices)) != len(indices):
        raise ValueError("conditioned indices must be distinct")
    if not all(0 <= i < params.n_v for i in indices):
        raise ValueError(f"conditioned indices must be in [0, {params.n_v})")
    free = [i for i in range(params.n_v) if i not in indices]
    if not free:
        raise ValueError("cannot condition on every coordinate")
    child = condition(permute(params, free + indices), len(free), values)
    return child, free
