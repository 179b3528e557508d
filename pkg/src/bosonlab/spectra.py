"""Ground states, gaps, and spectral projectors for sparse Hermitian operators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import SparseOperator

DENSE_THRESHOLD = 2000
DENSE_PROJECTOR_BUDGET = 4000
DEGENERACY_RTOL = 1e-10


class NonHermitianError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass
class SpectralData:
    E0: float
    gap: float
    ground_vector: np.ndarray
    low_eigs: list = field(default_factory=list)  # (eigenvalue, residual)
    degenerate: bool = False
    solver_meta: dict = field(default_factory=dict)

    @property
    def E1(self):
        return self.low_eigs[1][0] if len(self.low_eigs) > 1 else None


def _residual(H, val, vec):
    r = H @ vec - val * vec
    return float(np.linalg.norm(r))


def _band_width(mat: sp.csr_matrix, limit=64):
    """Half-bandwidth of a sparse matrix, or None above `limit`."""
    coo = mat.tocoo()
    if coo.nnz == 0:
        return 0
    width = int(np.abs(coo.row - coo.col).max())
    return width if width <= limit else None


def ground_state(H: SparseOperator, n_eigs=2, tol=0.0, seed=0,
                 dense_threshold=DENSE_THRESHOLD, maxiter=None) -> SpectralData:
    """Lowest eigenpairs of a Hermitian sparse operator.

    Dense solve below ``dense_threshold``; banded LAPACK path for small
    bandwidth real matrices; otherwise an implicitly-restarted Lanczos
    solve (ARPACK) with a seeded start vector so repeated runs are
    reproducible.  The gap is E1 - E0, set to zero (with the
    ``degenerate`` flag) below a relative degeneracy tolerance.
    """
    if not H.hermitian:
        raise NonHermitianError("ground_state requires a Hermitian-flagged operator")
    if n_eigs < 2:
        raise ValueError("n_eigs >= 2 required to resolve the gap")
    dim = H.dim
    n_eigs = min(n_eigs, dim)
    mat = H.matrix

    meta = {"dim": dim, "tol": tol, "n_eigs": n_eigs}
    if dim <= dense_threshold:
        dense = mat.toarray()
        vals, vecs = np.linalg.eigh(dense)
        vals, vecs = vals[:n_eigs], vecs[:, :n_eigs]
        meta["method"] = "dense"
    else:
        width = _band_width(mat)
        diag = mat.diagonal().real
        stiff = width is not None and diag.max() > 1e4 * max(1.0, abs(diag.min()))
        if stiff:
            # narrow band with a huge diagonal spread (high single-site
            # cutoffs): plain Lanczos stalls, so use the preconditioned
            # block solver with a diagonal preconditioner
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((dim, n_eigs))
            X[:, 0] = np.exp(-0.5 * np.arange(dim) / max(1, width))
            precond = sp.diags(1.0 / (diag - diag.min() + 1.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                vals, vecs = spla.lobpcg(
                    mat, X, M=precond, tol=tol if tol > 0 else 1e-8,
                    maxiter=maxiter or 3000, largest=False,
                )
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order].astype(np.complex128)
            meta["method"] = f"lobpcg(width={width})"
        else:
            rng = np.random.default_rng(seed)
            v0 = rng.standard_normal(dim)
            try:
                vals, vecs = spla.eigsh(
                    mat, k=n_eigs, which="SA", tol=tol, v0=v0, maxiter=maxiter
                )
            except spla.ArpackNoConvergence as exc:
                raise ConvergenceError(
                    f"Lanczos failed to converge: {exc}"
                ) from exc
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            meta["method"] = "lanczos"

    resid_tol = (tol if tol > 0 else 1e-8) * max(1.0, abs(float(vals[0])))
    low = []
    for j in range(n_eigs):
        v = vecs[:, j]
        v = v / np.linalg.norm(v)
        vecs[:, j] = v
        low.append((float(vals[j]), _residual(mat, vals[j], v)))
    meta["residual_tol"] = resid_tol
    meta["residual_ok"] = bool(all(r <= resid_tol for _, r in low))

    E0 = float(vals[0])
    scale = max(1.0, max(abs(float(v)) for v in vals))
    gap = float(vals[1] - vals[0]) if n_eigs >= 2 else 0.0
    degenerate = gap < DEGENERACY_RTOL * scale
    if degenerate:
        gap = 0.0

    ground = vecs[:, 0].astype(np.complex128)
    # fix the global phase: largest-magnitude entry real positive
    pivot = int(np.argmax(np.abs(ground)))
    phase = ground[pivot] / abs(ground[pivot])
    ground = ground / phase

    return SpectralData(
        E0=E0,
        gap=gap,
        ground_vector=ground,
        low_eigs=low,
        degenerate=degenerate,
        solver_meta=meta,
    )


def spectral_projector(h: SparseOperator, threshold, side="<=",
                       budget=DENSE_PROJECTOR_BUDGET):
    """Projector onto the eigenspace with eigenvalues <= (or >) threshold.

    Requires a full dense diagonalization, so ``h`` must be small (block
    Hamiltonians in the filter pipeline).
    """
    if not h.hermitian:
        raise NonHermitianError("spectral_projector requires Hermitian input")
    if h.dim > budget:
        raise ValueError(f"dim {h.dim} exceeds dense-diagonalization budget {budget}")
    if side not in ("<=", ">"):
        raise ValueError("side must be '<=' or '>'")
    vals, vecs = np.linalg.eigh(h.matrix.toarray())
    keep = vals <= threshold if side == "<=" else vals > threshold
    V = vecs[:, keep]
    proj = V @ V.conj().T
    return SparseOperator(sp.csr_matrix(proj), hermitian=True,
                          name=f"Pi({side}{threshold:g})")


def number_sector_indices(space, N_total):
    """Basis indices with total occupation N_total."""
    return np.flatnonzero(space.total_number_diagonal() == N_total)


def ground_state_in_number_sector(H: SparseOperator, space, N_total,
                                  n_eigs=2, **kw) -> SpectralData:
    """Diagnostic solve restricted to a fixed total-boson-number sector.

    Only meaningful when the Hamiltonian commutes with the total number
    operator; the returned ground vector is embedded in the full space.
    """
    idx = number_sector_indices(space, N_total)
    if idx.size == 0:
        raise ValueError(f"no basis states with total occupation {N_total}")
    sub = H.matrix[np.ix_(idx, idx)]
    sub_op = SparseOperator(sp.csr_matrix(sub), hermitian=True,
                            name=f"{H.name}|N={N_total}")
    n_eigs = min(n_eigs, idx.size)
    if idx.size == 1:
        val = float(sub_op.matrix[0, 0].real)
        vec = np.zeros(H.dim, dtype=np.complex128)
        vec[idx[0]] = 1.0
        return SpectralData(val, 0.0, vec, [(val, 0.0)], True,
                            {"method": "trivial", "sector": N_total})
    data = ground_state(sub_op, n_eigs=n_eigs, **kw)
    full = np.zeros(H.dim, dtype=np.complex128)
    full[idx] = data.ground_vector
    data.ground_vector = full
    data.solver_meta["sector"] = int(N_total)
    return data


def variational_check(H: SparseOperator, data: SpectralData, trials=100, seed=0):
    """E0 <= <psi|H|psi> for random unit vectors; returns the worst margin."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        v = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
        v /= np.linalg.norm(v)
        worst = min(worst, float(H.expectation(v).real) - data.E0)
    return worst


def operator_norm(mat, tol=1e-6, maxiter=5000, seed=0, dense_threshold=DENSE_THRESHOLD):
    """Spectral norm, dense below the threshold, else power iteration on A^H A."""
    if sp.issparse(mat):
        dim = mat.shape[0]
        if mat.nnz == 0:
            return 0.0
        if dim <= dense_threshold:
            return float(np.linalg.norm(mat.toarray(), 2))
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(mat.shape[1]) + 1j * rng.standard_normal(mat.shape[1])
        v /= np.linalg.norm(v)
        prev = 0.0
        ah = mat.getH()
        for _ in range(maxiter):
            w = ah @ (mat @ v)
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                return 0.0
            v = w / nrm
            est = np.sqrt(nrm)
            if abs(est - prev) <= tol * max(est, 1e-300):
                return float(est)
            prev = est
        raise ConvergenceError("power iteration for operator norm did not converge")
    return float(np.linalg.norm(np.asarray(mat), 2))
