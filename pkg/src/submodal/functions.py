"""Submodular information measures as incremental acquisition oracles.

Every function kind is defined over a ground set of n selectable points
and sees only the kernel blocks it declares:

===========  =====================================  =======================
kind         closed form (selection A)              blocks read
===========  =====================================  =======================
fl           sum_i max_{j in A} S_ij                uu
gc           sum_{i,j in A..} S - lam * quad        uu
logdet       log det(S_A + eps I)                   uu
flvmi        sum_i min(max_A S_i, max_Q S_i)        uu, uq
flqmi        sum_Q max_A + sum_A max_Q              uq
gcmi         2 lam sum_{A x Q} S                    uq
logdetmi     logdet(S_A) - logdet(S_A|Q)            uu, uq, qq
flcg         sum_i max(max_A S_i - max_P S_i, 0)    uu, up
gccg         gc(A) - 2 lam sum_{A x P} S            uu, up
logdetcg     logdet(S_A|P)                          uu, up, pp
flcmi        sum_i max(min(max_A,max_Q)-max_P, 0)   uu, uq, up
logdetcmi    logdet(S_A|P) - logdet(S_A|Q,P)        uu, uq, up, qq, pp, qp
div_gcmi     gcmi + eta * fl   (heuristic)          uu, uq
===========  =====================================  =======================

``S_A|X`` denotes the Schur complement of the regularized X-block in the
joint kernel.  Empty query/conditioning blocks degrade gracefully: an
empty Q sends every mutual-information kind to 0, an empty P reduces
each conditional kind to its unconditional counterpart, and evaluating
the empty selection yields 0 for every kind.

A ``SelectionState`` memoizes whatever its kind needs (running maxima
for the facility-location family, incremental Cholesky factors for the
log-determinant family, running cross sums for graph cut) so that
marginal gains are cheap and a commit sequence reproduces the
from-scratch value within 1e-8 absolute (1e-6 relative for log-det).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .similarity import DEFAULT_LOGDET_EPS

SF_KINDS = ("fl", "gc", "logdet")
SMI_KINDS = ("flvmi", "flqmi", "gcmi", "logdetmi")
SCG_KINDS = ("flcg", "gccg", "logdetcg")
SCMI_KINDS = ("flcmi", "logdetcmi")
HEURISTIC_KINDS = ("div_gcmi",)
ALL_KINDS = SF_KINDS + SMI_KINDS + SCG_KINDS + SCMI_KINDS + HEURISTIC_KINDS

LOGDET_FAMILY = frozenset({"logdet", "logdetmi", "logdetcg", "logdetcmi"})

# Kinds whose selection objective only ever needs the rectangular U x Q block.
RECTANGULAR_ONLY = frozenset({"flqmi", "gcmi"})

_NEEDS_UQ = frozenset({"flvmi", "flqmi", "gcmi", "logdetmi", "flcmi", "logdetcmi", "div_gcmi"})
_NEEDS_UP = frozenset({"flcg", "gccg", "logdetcg", "flcmi", "logdetcmi"})
_NEEDS_QQ = frozenset({"logdetmi", "logdetcmi"})
_NEEDS_PP = frozenset({"logdetcg", "logdetcmi"})
_NEEDS_QP = frozenset({"logdetcmi"})

_PIVOT_FLOOR = 1e-12


class NumericalError(RuntimeError):
    """Raised when a kernel block is numerically singular."""


def canonical_kind(name: str) -> str:
    kind = name.strip().lower().replace("-", "_")
    if kind not in ALL_KINDS:
        raise ValueError(f"unknown function kind {name!r}; expected one of {ALL_KINDS}")
    return kind


def _empty_block(n: int) -> np.ndarray:
    return np.zeros((n, 0))


def _as_block(arr, n_rows: int | None = None) -> np.ndarray:
    out = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    if out.ndim != 2:
        raise ValueError(f"kernel block must be 2-D, got shape {out.shape}")
    if n_rows is not None and out.shape[0] != n_rows:
        raise ValueError(f"kernel block has {out.shape[0]} rows, expected {n_rows}")
    return out


@dataclass(frozen=True)
class InfoFunction:
    """Immutable acquisition function over a fixed ground set.

    Kernel blocks are the raw rescaled similarities; the log-determinant
    regularization ``eps`` is applied internally to the diagonals of the
    square blocks, so callers never pre-regularize.
    """

    kind: str
    uu: np.ndarray | None = None
    uq: np.ndarray | None = None
    up: np.ndarray | None = None
    qq: np.ndarray | None = None
    pp: np.ndarray | None = None
    qp: np.ndarray | None = None
    gc_lambda: float = 1.0
    eta: float = 1.0
    eps: float | None = None

    def __post_init__(self):
        kind = canonical_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.eps is None:
            object.__setattr__(self, "eps", DEFAULT_LOGDET_EPS if kind in LOGDET_FAMILY else 0.0)

        if kind in RECTANGULAR_ONLY:
            if self.uq is None:
                raise ValueError(f"{kind} requires the U x Q block")
            uq = _as_block(self.uq)
            n = uq.shape[0]
            object.__setattr__(self, "uq", uq)
            object.__setattr__(self, "uu", None)
        else:
            if self.uu is None:
                raise ValueError(f"{kind} requires the square U x U block")
            uu = _as_block(self.uu)
            if uu.shape[0] != uu.shape[1]:
                raise ValueError(f"U x U block must be square, got {uu.shape}")
            _check_symmetric(uu)
            n = uu.shape[0]
            object.__setattr__(self, "uu", uu)

        def norm(name, needed, square_of=None):
            val = getattr(self, name)
            if name == "uq" and kind in RECTANGULAR_ONLY:
                return
            if not needed:
                object.__setattr__(self, name, None)
                return
            if val is None:
                val = _empty_block(n) if square_of is None else np.zeros((0, 0))
            rows = n if square_of is None else getattr(self, square_of).shape[1]
            object.__setattr__(self, name, _as_block(val, rows))

        norm("uq", kind in _NEEDS_UQ)
        norm("up", kind in _NEEDS_UP)
        norm("qq", kind in _NEEDS_QQ, square_of="uq")
        norm("pp", kind in _NEEDS_PP, square_of="up")
        if kind in _NEEDS_QP:
            qp = self.qp
            if qp is None:
                qp = np.zeros((self.uq.shape[1], self.up.shape[1]))
            object.__setattr__(self, "qp", _as_block(qp, self.uq.shape[1]))
        else:
            object.__setattr__(self, "qp", None)

        # Fail fast on singular query/conditioning blocks.
        if kind in LOGDET_FAMILY:
            for name in ("qq", "pp"):
                blk = getattr(self, name)
                if blk is not None and blk.shape[0] > 0:
                    _chol_or_raise(blk + self.eps * np.eye(blk.shape[0]), name)

    @property
    def n(self) -> int:
        return self.uu.shape[0] if self.uu is not None else self.uq.shape[0]

    @property
    def metadata(self) -> dict:
        meta = {
            "kind": self.kind,
            "eps": self.eps,
            "gc_lambda": self.gc_lambda,
            "ground_size": self.n,
        }
        if self.kind == "div_gcmi":
            meta["eta"] = self.eta
            meta["heuristic_reconstruction"] = True
        return meta


def _check_symmetric(uu: np.ndarray, tol: float = 1e-10) -> None:
    """Selection states read rows of the ground kernel where the formulas
    say columns, which requires symmetry.  Full check up to n=2048, a
    seeded spot check above (BLAS kernels are symmetric to ulps)."""
    n = uu.shape[0]
    if n <= 2048:
        bad = np.abs(uu - uu.T).max() if n else 0.0
    else:
        rng = np.random.default_rng(0)
        i = rng.integers(0, n, size=512)
        j = rng.integers(0, n, size=512)
        bad = np.abs(uu[i, j] - uu[j, i]).max()
    if bad > tol:
        raise ValueError(f"U x U kernel block must be symmetric (max asymmetry {bad:.3e})")


def _chol_or_raise(mat: np.ndarray, label: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.cond(mat))
        raise NumericalError(
            f"singular {label} block after regularization (condition number {cond:.3e})"
        ) from exc


def _slogdet_pd(mat: np.ndarray, label: str) -> float:
    if mat.shape[0] == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(mat)
    if sign <= 0:
        cond = float(np.linalg.cond(mat))
        raise NumericalError(
            f"non-positive-definite {label} matrix (condition number {cond:.3e})"
        )
    return float(logdet)


def _reg(square: np.ndarray, eps: float) -> np.ndarray:
    if eps == 0.0 or square.shape[0] == 0:
        return square
    out = square.copy()
    out[np.diag_indices_from(out)] += eps
    return out


# ---------------------------------------------------------------------------
# From-scratch evaluation (direct closed forms)
# ---------------------------------------------------------------------------


def evaluate(f: InfoFunction, selection: Sequence[int]) -> float:
    """Value of the closed-form expression at selection A, from scratch."""
    A = np.asarray(sorted(set(int(i) for i in selection)), dtype=np.intp)
    if len(A) != len(list(selection)):
        raise ValueError("selection contains duplicate indices")
    if A.size and (A.min() < 0 or A.max() >= f.n):
        raise IndexError(f"selection index out of range for ground set of size {f.n}")
    if A.size == 0:
        return 0.0
    kind = f.kind

    if kind in ("fl", "flvmi", "flcg", "flcmi"):
        m = f.uu[:, A].max(axis=1)
        if kind == "fl":
            return float(m.sum())
        if kind == "flvmi":
            return float(np.minimum(m, _col_max(f.uq)).sum())
        if kind == "flcg":
            return float(np.maximum(m - _col_max(f.up), 0.0).sum())
        return float(np.maximum(np.minimum(m, _col_max(f.uq)) - _col_max(f.up), 0.0).sum())

    if kind == "flqmi":
        if f.uq.shape[1] == 0:
            return 0.0
        sub = f.uq[A, :]
        return float(sub.max(axis=0).sum() + sub.max(axis=1).sum())

    if kind == "gcmi":
        return float(2.0 * f.gc_lambda * f.uq[A, :].sum())

    if kind in ("gc", "gccg"):
        val = float(f.uu[:, A].sum() - f.gc_lambda * f.uu[np.ix_(A, A)].sum())
        if kind == "gccg":
            val -= float(2.0 * f.gc_lambda * f.up[A, :].sum())
        return val

    if kind == "div_gcmi":
        gcmi = 2.0 * f.gc_lambda * f.uq[A, :].sum()
        return float(gcmi + f.eta * f.uu[:, A].max(axis=1).sum())

    eps = f.eps
    sa = _reg(f.uu[np.ix_(A, A)], eps)
    if kind == "logdet":
        return _slogdet_pd(sa, "selection")
    if kind == "logdetmi":
        cond = _conditioned_square(sa, f.uq[A, :], f.qq, eps)
        return _slogdet_pd(sa, "selection") - _slogdet_pd(cond, "conditioned selection")
    if kind == "logdetcg":
        return _slogdet_pd(_conditioned_square(sa, f.up[A, :], f.pp, eps), "conditioned selection")
    if kind == "logdetcmi":
        return _logdetcmi_ratio(f, A, sa)
    raise AssertionError(f"unhandled kind {kind}")


def _col_max(block: np.ndarray) -> np.ndarray:
    if block.shape[1] == 0:
        return np.zeros(block.shape[0])
    return block.max(axis=1)


def _conditioned_square(sa, cross, square, eps) -> np.ndarray:
    """Schur complement S_A - S_AX (S_X + eps I)^-1 S_XA."""
    if square.shape[0] == 0:
        return sa
    cf = cho_factor(_reg(square, eps), lower=True)
    return sa - cross @ cho_solve(cf, cross.T)


def _logdetcmi_ratio(f: InfoFunction, A: np.ndarray, sa: np.ndarray) -> float:
    """Literal contraction-ratio form of the conditional mutual information.

    log det(I - S_P^-1 S_PQ S_Q^-1 S_QP)
      - log det(I - S_AP^-1 S_{AP,Q} S_Q^-1 S_{Q,AP})
    with AP the block matrix over A followed by P.
    """
    eps = f.eps
    q = f.uq.shape[1]
    p = f.up.shape[1]
    if q == 0:
        return 0.0
    qf = cho_factor(_reg(f.qq, eps), lower=True)

    def contraction_logdet(square_reg, cross_q):
        # det(I - square^-1 cross Sq^-1 cross^T), sizes: square m x m, cross m x q
        m = square_reg.shape[0]
        if m == 0:
            return 0.0
        inner = cross_q @ cho_solve(qf, cross_q.T)
        mf = cho_factor(square_reg, lower=True)
        return _slogdet_pd(np.eye(m) - cho_solve(mf, inner), "contraction")

    num = contraction_logdet(_reg(f.pp, eps), f.qp.T) if p else 0.0
    ap_square = np.block(
        [[sa, f.up[A, :]], [f.up[A, :].T, _reg(f.pp, eps)]]
    ) if p else sa
    ap_cross = np.vstack([f.uq[A, :], f.qp.T]) if p else f.uq[A, :]
    den = contraction_logdet(ap_square, ap_cross)
    return num - den


# ---------------------------------------------------------------------------
# Incremental selection state
# ---------------------------------------------------------------------------


class _ShiftedKernel:
    """Column provider for M = (uu + eps I) - W^T W (W optional)."""

    def __init__(self, uu: np.ndarray, eps: float, w: np.ndarray | None):
        self.uu = uu
        self.eps = eps
        self.w = w

    def diag(self) -> np.ndarray:
        d = self.uu.diagonal() + self.eps
        if self.w is not None:
            d = d - np.einsum("ij,ij->j", self.w, self.w)
        return d

    def col(self, j: int) -> np.ndarray:
        c = self.uu[j].copy()  # row of a symmetric kernel
        c[j] += self.eps
        if self.w is not None:
            c -= self.w.T @ self.w[:, j]
        return c


def _whitened_cross(cross: np.ndarray, square: np.ndarray, eps: float, label: str):
    """W = L^-1 cross^T for square + eps I = L L^T; None when X is empty."""
    m = square.shape[0] if square is not None else 0
    if m == 0:
        return None
    lo = _chol_or_raise(_reg(square, eps), label)
    return solve_triangular(lo, cross.T, lower=True)


class _LogDetTerm:
    """Incremental log det over a (possibly conditioned) kernel.

    Maintains, for every ground point x, the Cholesky coefficient vector
    against the committed set and the squared residual pivot, so a gain
    is an O(1) lookup and a commit costs O(n |A|).
    """

    def __init__(self, kernel: _ShiftedKernel):
        self.kernel = kernel
        self.dsq = kernel.diag().copy()
        n = self.dsq.shape[0]
        self.cof = np.zeros((n, 8))
        self.k = 0
        self.warnings = 0

    def gain(self, x) -> float | np.ndarray:
        return np.log(np.maximum(self.dsq[x], _PIVOT_FLOOR))

    def commit(self, j: int) -> None:
        dj2 = self.dsq[j]
        if dj2 < _PIVOT_FLOOR:
            dj2 = _PIVOT_FLOOR
            self.warnings += 1
        if self.k == self.cof.shape[1]:
            self.cof = np.concatenate([self.cof, np.zeros_like(self.cof)], axis=1)
        e = self.kernel.col(j)
        if self.k:
            e = e - self.cof[:, : self.k] @ self.cof[j, : self.k]
        e /= math.sqrt(dj2)
        self.cof[:, self.k] = e
        self.k += 1
        self.dsq -= e * e


class SelectionState:
    """Single-owner mutable companion of an InfoFunction.

    Tracks the ordered selection, the memoization payload of its kind,
    and the running objective value (sum of committed gains).
    """

    def __init__(self, f: InfoFunction):
        self.f = f
        self.chosen: list[int] = []
        self.value = 0.0
        self._mask = np.zeros(f.n, dtype=bool)
        kind = f.kind
        n = f.n
        eps = f.eps

        if kind in ("fl", "flvmi", "flcg", "flcmi", "div_gcmi"):
            self._cur_max = np.zeros(n)
            self._qmax = _col_max(f.uq) if f.uq is not None else None
            self._pmax = _col_max(f.up) if f.up is not None else None
            self._cur_contrib = self._contrib(self._cur_max)
            self._scratch = np.empty(n)
        if kind == "flqmi":
            self._best_q = np.zeros(f.uq.shape[1])
            self._qrow = _col_max(f.uq)
        if kind in ("gcmi", "div_gcmi"):
            self._w = 2.0 * f.gc_lambda * f.uq.sum(axis=1)
        if kind in ("gc", "gccg"):
            self._colsum = f.uu.sum(axis=0)
            self._cross = np.zeros(n)
            if kind == "gccg":
                self._colsum = self._colsum - 2.0 * f.gc_lambda * f.up.sum(axis=1)
        if kind in LOGDET_FAMILY:
            wq = _whitened_cross(f.uq, f.qq, eps, "query") if f.uq is not None else None
            wp = _whitened_cross(f.up, f.pp, eps, "conditioning") if f.up is not None else None
            plain = _ShiftedKernel(f.uu, eps, None)
            if kind == "logdet":
                self._terms = [(1.0, _LogDetTerm(plain))]
            elif kind == "logdetmi":
                self._terms = [
                    (1.0, _LogDetTerm(plain)),
                    (-1.0, _LogDetTerm(_ShiftedKernel(f.uu, eps, wq))),
                ]
            elif kind == "logdetcg":
                self._terms = [(1.0, _LogDetTerm(_ShiftedKernel(f.uu, eps, wp)))]
            else:  # logdetcmi: condition on P, and on Q union P
                wqp = _whitened_cross(
                    np.hstack([f.uq, f.up]),
                    np.block([[f.qq, f.qp], [f.qp.T, f.pp]]),
                    eps,
                    "query+conditioning",
                )
                self._terms = [
                    (1.0, _LogDetTerm(_ShiftedKernel(f.uu, eps, wp))),
                    (-1.0, _LogDetTerm(_ShiftedKernel(f.uu, eps, wqp))),
                ]

    # -- facility-location helpers -------------------------------------

    def _contrib(self, m: np.ndarray) -> np.ndarray:
        kind = self.f.kind
        if kind in ("fl", "div_gcmi"):
            return m
        if kind == "flvmi":
            return np.minimum(m, self._qmax)
        if kind == "flcg":
            return np.maximum(m - self._pmax, 0.0)
        return np.maximum(np.minimum(m, self._qmax) - self._pmax, 0.0)  # flcmi

    def _contrib_inplace(self, buf: np.ndarray) -> np.ndarray:
        # Same operation sequence as _contrib, aliased into the scratch
        # buffer, so both paths produce identical floats.
        kind = self.f.kind
        if kind in ("fl", "div_gcmi"):
            return buf
        if kind == "flvmi":
            return np.minimum(buf, self._qmax, out=buf)
        if kind == "flcg":
            np.subtract(buf, self._pmax, out=buf)
            return np.maximum(buf, 0.0, out=buf)
        np.minimum(buf, self._qmax, out=buf)
        np.subtract(buf, self._pmax, out=buf)
        return np.maximum(buf, 0.0, out=buf)

    # -- public API -----------------------------------------------------

    @property
    def numerical_warnings(self) -> int:
        if self.f.kind in LOGDET_FAMILY:
            return sum(t.warnings for _, t in self._terms)
        return 0

    def gain(self, x: int) -> float:
        """Marginal gain of adding x to the current selection.

        Facility-location gains are pointwise differences summed, which
        keeps them a pure function of the running maxima and numerically
        nonincreasing as the selection grows (both needed for the lazy
        and naive variants to agree bit for bit).
        """
        if self._mask[x]:
            raise ValueError(f"index {x} already selected")
        kind = self.f.kind
        if kind in ("fl", "flvmi", "flcg", "flcmi"):
            buf = np.maximum(self._cur_max, self.f.uu[x], out=self._scratch)
            buf = self._contrib_inplace(buf)
            np.subtract(buf, self._cur_contrib, out=buf)
            return float(buf.sum())
        if kind == "flqmi":
            rise = np.maximum(self._best_q, self.f.uq[x, :]) - self._best_q
            return float(rise.sum() + self._qrow[x])
        if kind == "gcmi":
            return float(self._w[x])
        if kind in ("gc", "gccg"):
            lam = self.f.gc_lambda
            return float(self._colsum[x] - lam * (self.f.uu[x, x] + 2.0 * self._cross[x]))
        if kind == "div_gcmi":
            buf = np.maximum(self._cur_max, self.f.uu[x], out=self._scratch)
            np.subtract(buf, self._cur_max, out=buf)
            return float(self._w[x] + self.f.eta * buf.sum())
        return float(sum(sign * term.gain(x) for sign, term in self._terms))

    def gains(self, candidates: np.ndarray) -> np.ndarray:
        """Marginal gains for a batch of unchosen candidates.

        Deliberately a loop over the scalar path: every greedy variant
        then sees exactly the same float for the same (selection, x).
        """
        candidates = np.asarray(candidates, dtype=np.intp)
        return np.array([self.gain(int(x)) for x in candidates])

    def commit(self, x: int) -> float:
        """Add x to the selection; returns the realized gain."""
        g = self.gain(x)
        kind = self.f.kind
        if kind in ("fl", "flvmi", "flcg", "flcmi", "div_gcmi"):
            np.maximum(self._cur_max, self.f.uu[x], out=self._cur_max)
            self._cur_contrib = self._contrib(self._cur_max)
        if kind == "flqmi":
            np.maximum(self._best_q, self.f.uq[x, :], out=self._best_q)
        if kind in ("gc", "gccg"):
            self._cross += self.f.uu[x]
        if kind in LOGDET_FAMILY:
            for _, term in self._terms:
                term.commit(x)
        self._mask[x] = True
        self.chosen.append(int(x))
        self.value += g
        return g


def new_state(f: InfoFunction) -> SelectionState:
    return SelectionState(f)


# ---------------------------------------------------------------------------
# Definitional composites (test oracle) and Table-1 reductions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruthOracle:
    """Set-arithmetic composites over a base submodular function.

    Evaluates f, I_f(A;Q) = f(A) + f(Q) - f(A u Q),
    f(A|P) = f(A u P) - f(P), and
    I_f(A;Q|P) = f(A u P) + f(Q u P) - f(A u Q u P) - f(P)
    directly on a joint kernel, independently of the closed forms.
    """

    base_kind: str
    joint: np.ndarray
    eps: float = 0.0
    gc_lambda: float = 1.0

    def __post_init__(self):
        if self.base_kind not in SF_KINDS:
            raise ValueError(f"base kind must be one of {SF_KINDS}")
        object.__setattr__(self, "joint", _as_block(self.joint))

    def sf(self, subset: Sequence[int]) -> float:
        X = np.asarray(sorted(set(subset)), dtype=np.intp)
        if X.size == 0:
            return 0.0
        if self.base_kind == "fl":
            return float(self.joint[:, X].max(axis=1).sum())
        if self.base_kind == "gc":
            return float(
                self.joint[:, X].sum() - self.gc_lambda * self.joint[np.ix_(X, X)].sum()
            )
        block = _reg(self.joint[np.ix_(X, X)], self.eps)
        return _slogdet_pd(block, "oracle subset")

    def smi(self, A, Q) -> float:
        return self.sf(A) + self.sf(Q) - self.sf(set(A) | set(Q))

    def scg(self, A, P) -> float:
        return self.sf(set(A) | set(P)) - self.sf(P)

    def scmi(self, A, Q, P) -> float:
        ap = set(A) | set(P)
        qp = set(Q) | set(P)
        return self.sf(ap) + self.sf(qp) - self.sf(ap | set(Q)) - self.sf(P)


GROUND = "ground"

_SCMI_REDUCTIONS = {
    "flcmi": {"sf": "fl", "smi": "flvmi", "scg": "flcg"},
    "logdetcmi": {"sf": "logdet", "smi": "logdetmi", "scg": "logdetcg"},
}


def from_joint(
    kind: str,
    joint: np.ndarray,
    query: Sequence[int] | None = None,
    conditioning: Sequence[int] | None = None,
    **kwargs,
) -> InfoFunction:
    """Instantiate a function kind on blocks cut from one joint kernel.

    The selectable ground set is the full index range of ``joint``; Q and
    P are index lists into it.  Used by the definitional-identity tests
    and by the Table-1 reductions.
    """
    kind = canonical_kind(kind)
    joint = _as_block(joint)
    Q = np.asarray(query if query is not None else [], dtype=np.intp)
    P = np.asarray(conditioning if conditioning is not None else [], dtype=np.intp)
    blocks = {}
    if kind not in RECTANGULAR_ONLY:
        blocks["uu"] = joint
    if kind in _NEEDS_UQ or kind in RECTANGULAR_ONLY:
        blocks["uq"] = joint[:, Q]
    if kind in _NEEDS_UP:
        blocks["up"] = joint[:, P]
    if kind in _NEEDS_QQ:
        blocks["qq"] = joint[np.ix_(Q, Q)]
    if kind in _NEEDS_PP:
        blocks["pp"] = joint[np.ix_(P, P)]
    if kind in _NEEDS_QP:
        blocks["qp"] = joint[np.ix_(Q, P)]
    return InfoFunction(kind=kind, **blocks, **kwargs)


def reduce_scmi(
    kind: str,
    joint: np.ndarray,
    query,
    conditioning,
    **kwargs,
) -> InfoFunction:
    """Reduce a conditional-mutual-information kind per its Q/P choices.

    query may be GROUND (the whole unlabeled set) or an index list;
    conditioning may be None/empty or an index list.  Q = ground with
    empty P yields the plain submodular function, a proper Q with empty
    P yields the mutual-information instantiation, Q = ground with a
    proper P yields the conditional-gain instantiation, and anything
    else keeps the full conditional form.
    """
    kind = canonical_kind(kind)
    if kind not in _SCMI_REDUCTIONS:
        raise ValueError(f"reduce_scmi expects a conditional-MI kind, got {kind!r}")
    joint = _as_block(joint)
    n = joint.shape[0]
    table = _SCMI_REDUCTIONS[kind]

    is_ground = isinstance(query, str) and query == GROUND
    if not is_ground and query is not None:
        q_idx = np.asarray(query, dtype=np.intp)
        is_ground = q_idx.size == n and np.array_equal(np.sort(q_idx), np.arange(n))
    p_empty = conditioning is None or len(conditioning) == 0

    if is_ground and p_empty:
        return from_joint(table["sf"], joint, **kwargs)
    if p_empty:
        return from_joint(table["smi"], joint, query=query, **kwargs)
    if is_ground:
        return from_joint(table["scg"], joint, conditioning=conditioning, **kwargs)
    return from_joint(kind, joint, query=query, conditioning=conditioning, **kwargs)
