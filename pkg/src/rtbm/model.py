"""RTBM parameter records: validity, block splitting, permutation, model files.

An RTBM over ``n_v`` continuous visible units and ``n_h`` lattice-valued
hidden units is the quintuple (T, Q, W, bv, bh) plus a lattice convention.
T and Q must be symmetric positive definite, and so must the Schur-type
matrix Q - W^T T^{-1} W, which normalizes the visible density.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import NotPositiveDefiniteError
from .theta import Lattice

SYMMETRY_ATOL = 1e-10


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def sym(a):
    """Average a square matrix with its transpose."""
    return 0.5 * (a + a.T)


def try_cholesky(a):
    """(lower factor, None) on success, (None, min eigenvalue) on failure.

    The matrix is symmetrized first so downstream factorizations are
    deterministic regardless of sub-tolerance asymmetry in the input.
    """
    s = sym(np.asarray(a, dtype=float))
    try:
        return la.cholesky(s, lower=True), None
    except la.LinAlgError:
        return None, float(la.eigvalsh(s)[0])


def spd_cholesky(a, name):
    """Lower Cholesky factor of a symmetrized matrix; loud failure."""
    chol, lam = try_cholesky(a)
    if chol is None:
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (min eigenvalue ~ {lam:.6g})",
            min_eigenvalue=lam)
    return chol


@dataclass(frozen=True)
class RtbmParams:
    """Parameters of one RTBM. Immutable after construction."""

    t: np.ndarray
    q: np.ndarray
    w: np.ndarray
    bv: np.ndarray
    bh: np.ndarray
    lattice: Lattice = Lattice.FULL

    def __post_init__(self):
        t = _freeze(np.atleast_2d(self.t))
        q = _freeze(np.atleast_2d(self.q))
        n_v, n_h = t.shape[0], q.shape[0]
        w = _freeze(np.asarray(self.w, dtype=float).reshape(n_v, n_h))
        bv = _freeze(np.asarray(self.bv, dtype=float).reshape(n_v))
        bh = _freeze(np.asarray(self.bh, dtype=float).reshape(n_h))
        if t.shape != (n_v, n_v) or q.shape != (n_h, n_h):
            raise ValueError("t and q must be square")
        for name, a in (("t", t), ("q", q), ("w", w), ("bv", bv), ("bh", bh)):
            if not np.isfinite(a).all():
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "bv", bv)
        object.__setattr__(self, "bh", bh)
        object.__setattr__(self, "lattice", Lattice(self.lattice))

    @property
    def n_v(self) -> int:
        return self.t.shape[0]

    @property
    def n_h(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    value: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.valid:
            return "valid"
        return "; ".join(v.message for v in self.violations)


def validate(params: RtbmParams) -> ValidationReport:
    """Check symmetry and the three positive-definiteness conditions.

    Every failed rule is reported; nothing is thrown.  The Schur condition
    on Q - W^T T^{-1} W can only be evaluated once T factors, so it is
    skipped (with T already reported invalid) otherwise.
    """
    bad = []
    asym_t = float(np.abs(params.t - params.t.T).max())
    if asym_t > SYMMETRY_ATOL:
        bad.append(Violation("t-asymmetric",
                             f"T asymmetry {asym_t:.3g} exceeds {SYMMETRY_ATOL}",
                             asym_t))
    asym_q = float(np.abs(params.q - params.q.T).max())
    if asym_q > SYMMETRY_ATOL:
        bad.append(Violation("q-asymmetric",
                             f"Q asymmetry {asym_q:.3g} exceeds {SYMMETRY_ATOL}",
                             asym_q))

    chol_t, lam = try_cholesky(params.t)
    if chol_t is None:
        bad.append(Violation("t-not-positive-definite",
                             f"T not positive definite (min eigenvalue ~ {lam:.6g})",
                             lam))
    chol_q, lam = try_cholesky(params.q)
    if chol_q is None:
        bad.append(Violation("q-not-positive-definite",
                             f"Q not positive definite (min eigenvalue ~ {lam:.6g})",
                             lam))
    if chol_t is not None:
        schur = params.q - params.w.T @ la.cho_solve((chol_t, True), params.w)
        chol_s, lam = try_cholesky(schur)
        if chol_s is None:
            bad.append(Violation(
                "schur-not-positive-definite",
                f"Q - W^T T^-1 W not positive definite (min eigenvalue ~ {lam:.6g})",
                lam))
    return ValidationReport(tuple(bad))


@dataclass(frozen=True)
class BlockDecomposition:
    """Split of (T, W, bv) into a leading m-block and trailing n-block."""

    m: int
    n: int
    t0_bar: np.ndarray   # m x m
    t1_bar: np.ndarray   # n x m, lower-left block of T
    t_tilde: np.ndarray  # n x n
    w0: np.ndarray       # m x n_h
    w1: np.ndarray       # n x n_h
    bv0: np.ndarray      # m
    bv1: np.ndarray      # n

    def reassemble(self):
        """Recompose (T, W, bv); inverse of block_split, bit-exact."""
        top = np.hstack([self.t0_bar, self.t1_bar.T])
        bottom = np.hstack([self.t1_bar, self.t_tilde])
        t = np.vstack([top, bottom])
        w = np.vstack([self.w0, self.w1])
        bv = np.concatenate([self.bv0, self.bv1])
        return t, w, bv


def block_split(params: RtbmParams, m: int) -> BlockDecomposition:
    """Split the parameter matrices at ``m`` leading free coordinates.

    The trailing block holds the coordinates to be conditioned on or kept
    in a marginal; ``m = n_v`` yields an empty trailing block.
    """
    if not 1 <= m <= params.n_v:
        raise ValueError(f"m must be in [1, {params.n_v}], got {m}")
    t, w, bv = params.t, params.w, params.bv
    return BlockDecomposition(
        m=m, n=params.n_v - m,
        t0_bar=_freeze(t[:m, :m]), t1_bar=_freeze(t[m:, :m]),
        t_tilde=_freeze(t[m:, m:]),
        w0=_freeze(w[:m, :]), w1=_freeze(w[m:, :]),
        bv0=_freeze(bv[:m]), bv1=_freeze(bv[m:]))


def permute(params: RtbmParams, perm) -> RtbmParams:
    """Relabel visible coordinates: new coordinate i is old coordinate perm[i].

    Rows/columns of T, rows of W and entries of bv move together, so the
    returned model satisfies P'(v[perm]) = P(v) pointwise.  Q and bh are
    untouched.
    """
    idx = np.asarray(perm, dtype=np.int64)
    if sorted(idx.tolist()) != list(range(params.n_v)):
        raise ValueError(f"perm must be a bijection on 0..{params.n_v - 1}")
    return RtbmParams(
        t=params.t[np.ix_(idx, idx)], q=params.q, w=params.w[idx, :],
        bv=params.bv[idx], bh=params.bh, lattice=params.lattice)


def to_dict(params: RtbmParams) -> dict:
    return {
        "nv": params.n_v,
        "nh": params.n_h,
        "lattice": params.lattice.value,
        "T": params.t.tolist(),
        "Q": params.q.tolist(),
        "W": params.w.tolist(),
        "bv": params.bv.tolist(),
        "bh": params.bh.tolist(),
    }


def from_dict(doc: dict) -> RtbmParams:
    params = RtbmParams(
        t=np.array(doc["T"], dtype=float),
        q=np.array(doc["Q"], dtype=float),
        w=np.array(doc["W"], dtype=float).reshape(doc["nv"], doc["nh"]),
        bv=np.array(doc["bv"], dtype=float),
        bh=np.array(doc["bh"], dtype=float),
        lattice=Lattice(doc.get("lattice", "full")))
    if params.n_v != doc["nv"] or params.n_h != doc["nh"]:
        raise ValueError("declared nv/nh disagree with matrix shapes")
    return params


def save_model(params: RtbmParams, path):
    """Write a model file atomically (temp file + rename).

    Python's repr-based JSON floats round-trip at full binary precision.
    """
    doc = to_dict(params)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_model(path) -> RtbmParams:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
