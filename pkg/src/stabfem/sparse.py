"""Triplet assembly, CSR conversion and linear solvers.

CSR storage is scipy's ``csr_matrix``; the direct path is SuperLU.  The
iterative path (BiCGSTAB with Jacobi or ILU(0) preconditioning) is written
out here so that breakdown and stagnation can be told apart.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

_EPS2 = np.finfo(float).eps ** 2


class SolverError(RuntimeError):
    """Base class for linear solver failures."""


class SingularMatrixError(SolverError):
    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class NotConvergedError(SolverError):
    """Iteration budget exhausted; carries the best iterate seen."""

    def __init__(self, message: str, x: np.ndarray, residual: float, iterations: int):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


class BreakdownError(NotConvergedError):
    """BiCGSTAB scalar (rho or omega) collapsed to zero."""


class TripletBuffer:
    """Growable (row, col, value) store; duplicates are summed by :func:`to_csr`."""

    def __init__(self, n: int | None = None):
        self.n = n
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []

    def add(self, rows, cols, values) -> None:
        r = np.asarray(rows, dtype=np.int64).ravel()
        c = np.asarray(cols, dtype=np.int64).ravel()
        v = np.asarray(values, dtype=float).ravel()
        if not (len(r) == len(c) == len(v)):
            raise ValueError("rows, cols and values must have equal length")
        self._rows.append(r)
        self._cols.append(c)
        self._vals.append(v)

    def add_block(self, row_dofs: np.ndarray, col_dofs: np.ndarray, local: np.ndarray) -> None:
        """Scatter per-element blocks: row_dofs (ne, a), col_dofs (ne, b), local (ne, a, b)."""
        ne, a = row_dofs.shape
        b = col_dofs.shape[1]
        self.add(np.broadcast_to(row_dofs[:, :, None], (ne, a, b)),
                 np.broadcast_to(col_dofs[:, None, :], (ne, a, b)), local)

    def extend(self, other: "TripletBuffer") -> None:
        self._rows += other._rows
        self._cols += other._cols
        self._vals += other._vals

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self._rows:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        return np.concatenate(self._rows), np.concatenate(self._cols), np.concatenate(self._vals)

    def __len__(self) -> int:
        return sum(len(r) for r in self._rows)


def to_csr(buf: TripletBuffer, n: int | None = None) -> sp.csr_matrix:
    """Sum duplicates and return a square CSR matrix with sorted column indices.

    Entries that sum to exactly zero are dropped, so adding zero-valued
    contributions never changes the sparsity pattern.
    """
    n = buf.n if n is None else n
    if n is None:
        raise ValueError("matrix dimension not given")
    rows, cols, vals = buf.arrays()
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise IndexError(f"triplet index out of range for dimension {n}")
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


@dataclass
class SparseSystem:
    """Square system ``matrix @ x = rhs`` with named contiguous DOF blocks."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    blocks: dict[str, slice] = field(default_factory=dict)
    # optional node position per unknown (NaN rows for non-geometric unknowns)
    # and elimination priority inside each nested-dissection part
    coords: np.ndarray | None = None
    priority: np.ndarray | None = None

    def __post_init__(self):
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n) or self.rhs.shape != (n,):
            raise ValueError(f"matrix {self.matrix.shape} and rhs {self.rhs.shape} disagree")
        if self.blocks:
            covered = sum(s.stop - s.start for s in self.blocks.values())
            if covered != n:
                raise ValueError(f"blocks cover {covered} of {n} unknowns")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return {name: x[s] for name, s in self.blocks.items()}

    def residual(self, x: np.ndarray) -> float:
        """Relative residual ||Ax - b|| / max(1, ||b||)."""
        return float(np.linalg.norm(self.matrix @ x - self.rhs) / max(1.0, np.linalg.norm(self.rhs)))


def nested_dissection(A: sp.csr_matrix, coords: np.ndarray, priority: np.ndarray | None = None,
                      leaf_size: int = 64) -> np.ndarray:
    """Fill-reducing symmetric ordering by recursive coordinate bisection.

    Each part is split near the median of its longer coordinate extent (the
    nearby cut giving the smallest separator wins); the unknowns on the low
    side that couple to the high side form the separator, which is numbered
    after both halves.  Unknowns without coordinates (NaN) go last.  Within
    a leaf or separator, unknowns are sorted by ``priority`` so that e.g.
    pressures follow velocities.
    """
    n = A.shape[0]
    G = sp.csr_matrix(A, copy=False)
    G = (abs(G) + abs(G).T).tocsr()
    prio = np.zeros(n) if priority is None else np.asarray(priority, dtype=float)
    geometric = np.all(np.isfinite(coords), axis=1)
    chunks: list[np.ndarray] = []

    def emit(idx):
        chunks.append(idx[np.argsort(prio[idx], kind="stable")])

    stack = [("split", np.flatnonzero(geometric))]
    while stack:
        action, idx = stack.pop()
        if action == "emit":
            emit(idx)
            continue
        if len(idx) <= leaf_size:
            emit(idx)
            continue
        pts = coords[idx]
        ext = pts.max(axis=0) - pts.min(axis=0)
        ax = int(np.argmax(ext))
        best = None
        for cut in _cut_candidates(pts[:, ax]):
            low = pts[:, ax] <= cut
            lo, hi = idx[low], idx[~low]
            touching = np.diff(G[lo][:, hi].indptr) > 0
            if best is None or touching.sum() < best[0].sum():
                best = (touching, lo, hi)
        if best is None:
            emit(idx)
            continue
        touching, lo, hi = best
        separator, lo = lo[touching], lo[~touching]
        # popped as: lo subtree, hi subtree, separator
        stack += [("emit", separator), ("split", hi), ("split", lo)]
    rest = np.flatnonzero(~geometric)
    if rest.size:
        emit(rest)
    return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)


def _cut_candidates(values: np.ndarray, spread: int = 2) -> np.ndarray:
    """Distinct coordinate values around the median that leave both sides nonempty."""
    u = np.unique(values)
    if len(u) < 2:
        return u[:0]
    k = int(np.searchsorted(u, np.median(values)))
    return u[max(0, k - spread):min(len(u) - 1, k + spread + 1)]


_DENSE_PIVOT_SEARCH_LIMIT = 4000


def _locate_singular_pivot(A: sp.csr_matrix) -> int | None:
    """Unknown at which elimination breaks down, for the error report.

    SuperLU does not expose the failing column, so look for an empty row or
    column first and fall back to dense partial-pivoting LU on small systems.
    """
    A = sp.csr_matrix(A)
    row = np.abs(A).sum(axis=1).A1
    col = np.abs(A).sum(axis=0).A1
    bad = np.flatnonzero((row == 0) | (col == 0))
    if bad.size:
        return int(bad[0])
    if A.shape[0] <= _DENSE_PIVOT_SEARCH_LIMIT:
        # row pivoting only, so U's column k is unknown k
        u = np.abs(np.diag(scipy.linalg.lu(A.toarray(), permute_l=True)[1]))
        small = np.flatnonzero(u <= 1e-13 * max(u.max(initial=0.0), 1e-300))
        if small.size:
            return int(small[0])
    return None


def solve_sparse_lu(sys: SparseSystem) -> np.ndarray:
    """Direct solve with SuperLU and threshold partial pivoting.

    With node coordinates attached, the unknowns are first permuted by
    :func:`nested_dissection` and SuperLU keeps that order; otherwise
    SuperLU's COLAMD column ordering is used.
    """
    A = sys.matrix
    if sys.coords is not None:
        perm = nested_dissection(A, sys.coords, sys.priority)
        Ap = A[perm][:, perm].tocsc()
        kwargs = dict(permc_spec="NATURAL", diag_pivot_thresh=1e-3,
                      options=dict(SymmetricMode=True))
    else:
        perm = None
        Ap = A.tocsc()
        kwargs = dict(permc_spec="COLAMD")
    try:
        lu = spla.splu(Ap, **kwargs)
    except RuntimeError as exc:
        piv = _locate_singular_pivot(A)
        where = f" at unknown {piv}" if piv is not None else ""
        raise SingularMatrixError(f"LU factorization failed: {exc}{where}", pivot=piv) from exc
    udiag = np.abs(lu.U.diagonal())
    scale = max(udiag.max(initial=0.0), 1e-300)
    small = np.flatnonzero(udiag <= 1e-13 * scale)
    if small.size:
        col = int(lu.perm_c[small[0]])
        piv = int(perm[col]) if perm is not None else col
        raise SingularMatrixError(f"numerically singular: pivot {small[0]} (unknown {piv}) "
                                  f"is {udiag[small[0]]:.3e}", pivot=piv)

    def lu_solve(b):
        if perm is None:
            return lu.solve(b)
        y = np.empty_like(b)
        y[perm] = lu.solve(b[perm])
        return y

    x = lu_solve(sys.rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("LU solve produced non-finite values")
    res = sys.residual(x)
    if res > 1e-10:
        # one step of iterative refinement usually recovers the lost digits
        x = x + lu_solve(sys.rhs - sys.matrix @ x)
        res = sys.residual(x)
    if res > 1e-10:
        log.warning("direct solve residual %.3e above 1e-10", res)
    return x


@numba.njit(cache=True)
def _ilu0_factor(indptr, indices, data, n):
    vals = data.copy()
    diag = np.full(n, -1, dtype=np.int64)
    work = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        start, stop = indptr[i], indptr[i + 1]
        for p in range(start, stop):
            work[indices[p]] = p
        for p in range(start, stop):
            k = indices[p]
            if k >= i:
                break
            dk = diag[k]
            if vals[dk] == 0.0:
                return vals, diag, k
            lik = vals[p] / vals[dk]
            vals[p] = lik
            for q in range(dk + 1, indptr[k + 1]):
                w = work[indices[q]]
                if w >= 0:
                    vals[w] -= lik * vals[q]
        for p in range(start, stop):
            if indices[p] == i:
                diag[i] = p
            work[indices[p]] = -1
        if diag[i] < 0 or vals[diag[i]] == 0.0:
            return vals, diag, i
    return vals, diag, -1


@numba.njit(cache=True)
def _ilu0_apply(indptr, indices, vals, diag, b):
    n = b.shape[0]
    y = b.copy()
    for i in range(n):
        s = y[i]
        for p in range(indptr[i], diag[i]):
            s -= vals[p] * y[indices[p]]
        y[i] = s
    for i in range(n - 1, -1, -1):
        s = y[i]
        for p in range(diag[i] + 1, indptr[i + 1]):
            s -= vals[p] * y[indices[p]]
        y[i] = s / vals[diag[i]]
    return y


class ILU0:
    """Incomplete LU with the sparsity pattern of A (no fill)."""

    def __init__(self, A: sp.csr_matrix):
        # The diagonal is always part of the pattern; a structurally empty
        # pivot (saddle-point blocks) then fills from the off-diagonal updates.
        A = sp.coo_matrix(A)
        n = A.shape[0]
        diag = np.arange(n)
        A = sp.csr_matrix((np.r_[A.data, np.zeros(n)], (np.r_[A.row, diag], np.r_[A.col, diag])),
                          shape=A.shape)
        A.sum_duplicates()
        A.sort_indices()
        self.indptr = A.indptr.astype(np.int64)
        self.indices = A.indices.astype(np.int64)
        vals, diag, bad = _ilu0_factor(self.indptr, self.indices, A.data.astype(float), A.shape[0])
        if bad >= 0:
            raise SingularMatrixError(f"ILU(0) zero pivot at row {bad}", pivot=int(bad))
        self.vals, self.diag = vals, diag
        self.shape = A.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        return _ilu0_apply(self.indptr, self.indices, self.vals, self.diag, np.asarray(b, dtype=float))

    def L(self) -> sp.csr_matrix:
        A = sp.csr_matrix((self.vals, self.indices, self.indptr), shape=self.shape)
        return sp.tril(A, -1, format="csr") + sp.eye(self.shape[0], format="csr")

    def U(self) -> sp.csr_matrix:
        A = sp.csr_matrix((self.vals, self.indices, self.indptr), shape=self.shape)
        return sp.triu(A, 0, format="csr")


def _preconditioner(A: sp.csr_matrix, kind: str):
    if kind == "none":
        return lambda r: r
    if kind == "jacobi":
        d = A.diagonal()
        if np.any(d == 0.0):
            raise SingularMatrixError("Jacobi preconditioner: zero diagonal",
                                      pivot=int(np.flatnonzero(d == 0.0)[0]))
        inv = 1.0 / d
        return lambda r: inv * r
    if kind == "ilu0":
        return ILU0(A).solve
    raise ValueError(f"unknown preconditioner {kind!r}")


def solve_bicgstab(sys: SparseSystem, tol: float = 1e-10, max_iter: int = 1000,
                   preconditioner: str = "ilu0", x0: np.ndarray | None = None
                   ) -> tuple[np.ndarray, int]:
    """Right-preconditioned BiCGSTAB.

    Converged means ||b - Ax|| <= tol * ||b||.  Raises BreakdownError or
    NotConvergedError (both carry the best iterate) otherwise.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, b = sys.matrix, sys.rhs
    M = _preconditioner(A, preconditioner)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    r = b - A @ x
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return x, 0
    best_x, best_res = x.copy(), rel
    r_hat = r.copy()
    rho_old = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)

    for it in range(1, max_iter + 1):
        rho = r_hat @ r
        if abs(rho) <= _EPS2 * np.linalg.norm(r_hat) * np.linalg.norm(r):
            raise BreakdownError(f"BiCGSTAB breakdown (rho = {rho:.3e}) at iteration {it}",
                                 best_x, best_res, it)
        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = M(p)
        v = A @ p_hat
        denom = r_hat @ v
        if denom == 0.0:
            raise BreakdownError(f"BiCGSTAB breakdown (r_hat.v = 0) at iteration {it}",
                                 best_x, best_res, it)
        alpha = rho / denom
        s = r - alpha * v
        s_rel = np.linalg.norm(s) / bnorm
        if s_rel <= tol:
            x = x + alpha * p_hat
            return x, it
        s_hat = M(s)
        t = A @ s_hat
        tt = t @ t
        if tt == 0.0:
            raise BreakdownError(f"BiCGSTAB breakdown (t = 0) at iteration {it}",
                                 best_x, best_res, it)
        omega = (t @ s) / tt
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        rel = np.linalg.norm(r) / bnorm
        if rel < best_res:
            best_x, best_res = x.copy(), rel
        if rel <= tol:
            return x, it
        if omega == 0.0:
            raise BreakdownError(f"BiCGSTAB breakdown (omega = 0) at iteration {it}",
                                 best_x, best_res, it)
        rho_old = rho

    raise NotConvergedError(f"BiCGSTAB did not reach tol {tol:g} in {max_iter} iterations "
                            f"(best residual {best_res:.3e})", best_x, best_res, max_iter)


def write_matrix_market(matrix, path, comment: str = "") -> None:
    """Coordinate-format MatrixMarket dump (1-based indices)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment, field="real", symmetry="general")


@dataclass(frozen=True)
class SolverOptions:
    solver: str = "lu"  # "lu" or "bicgstab"
    tol: float = 1e-10
    max_iter: int = 2000
    preconditioner: str = "ilu0"

    def __post_init__(self):
        if self.solver not in ("lu", "bicgstab"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def solve(sys: SparseSystem, opts: SolverOptions | None = None) -> tuple[np.ndarray, int]:
    """Dispatch to the direct or iterative solver; returns (x, iterations)."""
    opts = opts or SolverOptions()
    if opts.solver == "lu":
        return solve_sparse_lu(sys), 0
    return solve_bicgstab(sys, opts.tol, opts.max_iter, opts.preconditioner)
