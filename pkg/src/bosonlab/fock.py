"""Truncated bosonic Fock spaces, site operators, and sparse operator algebra.

Conventions
-----------
* Per-site occupation cutoffs ``N_x``; the local dimension is ``N_x + 1``.
* Mixed-radix basis ordering with **site 0 as the fastest-varying digit**:
  ``index = n_0 + (N_0+1) * (n_1 + (N_1+1) * (n_2 + ...))``.  The ordering
  is a convention of this package (serialized vectors depend on it).
* Hard truncation: matrix elements that reference occupations above the
  cutoff are dropped, so identities like the canonical commutation
  relation hold exactly only away from the cutoff boundary (see
  :func:`FockSpace.interior_projector`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import backend

HERMITIAN_ATOL = 1e-12


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FockSpace:
    """Finite mixed-radix Hilbert space with per-site boson cutoffs."""

    cutoffs: tuple

    def __post_init__(self):
        cut = tuple(int(c) for c in self.cutoffs)
        if len(cut) == 0 or any(c < 0 for c in cut):
            raise ValueError("cutoffs must be a non-empty list of non-negative ints")
        object.__setattr__(self, "cutoffs", cut)

    @property
    def n_sites(self):
        return len(self.cutoffs)

    @property
    def local_dims(self):
        return np.array([c + 1 for c in self.cutoffs], dtype=np.int64)

    @property
    def strides(self):
        dims = self.local_dims
        strides = np.ones(self.n_sites, dtype=np.int64)
        strides[1:] = np.cumprod(dims[:-1])
        return strides

    @property
    def dim(self):
        return int(np.prod(self.local_dims))

    def encode(self, occupations):
        """Basis index of one occupation tuple (or array of tuples)."""
        occ = np.asarray(occupations, dtype=np.int64)
        if occ.shape[-1] != self.n_sites:
            raise DimensionMismatchError("occupation length != n_sites")
        if np.any(occ < 0) or np.any(occ > np.array(self.cutoffs)):
            raise ValueError("occupation outside cutoffs")
        return occ @ self.strides

    def decode(self, indices):
        """Occupations for basis indices; shape (n_sites,) or (len, n_sites)."""
        scalar = np.isscalar(indices)
        idx = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        if np.any(idx < 0) or np.any(idx >= self.dim):
            raise ValueError("basis index out of range")
        occ = backend.decode_indices(idx, self.strides, self.local_dims).T
        return occ[0] if scalar else occ

    def occupations_at(self, site, indices=None):
        """Occupation of one site for all (or the given) basis indices."""
        self._check_site(site)
        if indices is None:
            indices = np.arange(self.dim, dtype=np.int64)
        stride = int(self.strides[site])
        return (np.asarray(indices, dtype=np.int64) // stride) % (self.cutoffs[site] + 1)

    def basis_vector(self, occupations):
        vec = np.zeros(self.dim, dtype=np.complex128)
        vec[int(self.encode(occupations))] = 1.0
        return vec

    def vacuum(self):
        return self.basis_vector([0] * self.n_sites)

    def _check_site(self, site):
        if not (0 <= site < self.n_sites):
            raise ValueError(f"site {site} out of range for {self.n_sites} sites")

    def total_number_diagonal(self):
        """Total-occupation value for every basis index."""
        total = np.zeros(self.dim, dtype=np.int64)
        for x in range(self.n_sites):
            total += self.occupations_at(x)
        return total


@dataclass
class SparseOperator:
    """Hermitian-flagged sparse complex matrix with provenance metadata."""

    matrix: sp.csr_matrix
    hermitian: bool = False
    name: str = ""

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix, dtype=np.complex128)
        if self.hermitian:
            dev = self.hermiticity_deviation()
            if dev > HERMITIAN_ATOL:
                raise ValueError(
                    f"operator {self.name!r} flagged hermitian but deviates by {dev:.3e}"
                )

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def nnz(self):
        return self.matrix.nnz

    def hermiticity_deviation(self):
        delta = self.matrix - self.matrix.getH()
        return 0.0 if delta.nnz == 0 else float(np.abs(delta.data).max())

    def dagger(self):
        return SparseOperator(self.matrix.getH().tocsr(), self.hermitian, self.name + "^+")

    def to_dense(self):
        return self.matrix.toarray()

    def apply(self, vec):
        return self.matrix @ vec

    def expectation(self, vec):
        return complex(np.vdot(vec, self.matrix @ vec))

    def __matmul__(self, other):
        _check_same_dim(self, other)
        return SparseOperator(self.matrix @ other.matrix, False, f"({self.name}@{other.name})")

    def __add__(self, other):
        _check_same_dim(self, other)
        return SparseOperator(
            self.matrix + other.matrix,
            self.hermitian and other.hermitian,
            f"({self.name}+{other.name})",
        )

    def __sub__(self, other):
        _check_same_dim(self, other)
        return SparseOperator(
            self.matrix - other.matrix,
            self.hermitian and other.hermitian,
            f"({self.name}-{other.name})",
        )

    def __mul__(self, scalar):
        herm = self.hermitian and abs(complex(scalar).imag) == 0.0
        return SparseOperator(self.matrix * scalar, herm, self.name)

    __rmul__ = __mul__

    def max_abs_diff(self, other):
        delta = self.matrix - other.matrix
        return 0.0 if delta.nnz == 0 else float(np.abs(delta.data).max())


def _check_same_dim(a, b):
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


# ---------------------------------------------------------------------------
# ladder walks: amplitude tables for strings of per-site primitive ops
# ---------------------------------------------------------------------------

# opcode: ("b",), ("bdag",) or ("npow", p).  A walk applies opcodes in the
# given order (first element acts first on the ket) and returns the
# amplitude table over source occupations plus the net occupation shift.


def walk_ladder_ops(cutoff, opcodes):
    dim = cutoff + 1
    amp = np.ones(dim, dtype=np.float64)
    cur = np.arange(dim, dtype=np.float64)
    for op in opcodes:
        if op[0] == "b":
            amp *= np.sqrt(np.maximum(cur, 0.0))
            cur -= 1.0
            amp[cur < 0] = 0.0
            cur = np.maximum(cur, 0.0)
        elif op[0] == "bdag":
            cur += 1.0
            amp *= np.sqrt(cur)
            amp[cur > cutoff] = 0.0
            cur = np.minimum(cur, float(cutoff))
        elif op[0] == "npow":
            amp *= cur ** op[1]
        else:
            raise ValueError(f"unknown opcode {op!r}")
    shift = sum(+1 if op[0] == "bdag" else -1 if op[0] == "b" else 0 for op in opcodes)
    return amp, shift


def assemble_ladder_terms(space: FockSpace, terms, name="", hermitian=False):
    """Sparse operator from ladder-monomial terms.

    Each term is ``(coeff, [(site, opcodes), ...])`` with per-site opcode
    strings in order of application (rightmost factor first).  Sites may
    repeat across terms, not within one term's list.
    """
    all_rows, all_cols, all_vals = [], [], []
    for coeff, site_ops in terms:
        sites = [s for s, _ in site_ops]
        if len(set(sites)) != len(sites):
            raise ValueError("duplicate site in one term; merge its opcode strings")
        for s in sites:
            space._check_site(s)
        tables, shifts = [], []
        ok = True
        for s, ops in site_ops:
            amp, shift = walk_ladder_ops(space.cutoffs[s], ops)
            if not np.any(amp):
                ok = False
                break
            tables.append(amp)
            shifts.append(shift)
        if not ok:
            continue
        strides = space.strides[list(sites)]
        dims = space.local_dims[list(sites)]
        rows, cols, vals = backend.ladder_term_entries(
            space.dim,
            np.ascontiguousarray(strides),
            np.ascontiguousarray(dims),
            tables,
            np.array(shifts, dtype=np.int64),
            complex(coeff),
        )
        all_rows.append(rows)
        all_cols.append(cols)
        all_vals.append(vals)
    if not all_rows:
        mat = sp.csr_matrix((space.dim, space.dim), dtype=np.complex128)
    else:
        mat = sp.coo_matrix(
            (np.concatenate(all_vals), (np.concatenate(all_rows), np.concatenate(all_cols))),
            shape=(space.dim, space.dim),
        ).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
    return SparseOperator(mat, hermitian=hermitian, name=name)


# ---------------------------------------------------------------------------
# site operators
# ---------------------------------------------------------------------------


def annihilation_op(space: FockSpace, site):
    """b at a site: <n-1|b|n> = sqrt(n), entries above the cutoff absent."""
    return assemble_ladder_terms(space, [(1.0, [(site, [("b",)])])], name=f"b[{site}]")


def creation_op(space: FockSpace, site):
    return assemble_ladder_terms(space, [(1.0, [(site, [("bdag",)])])], name=f"bdag[{site}]")


def number_op(space: FockSpace, site, power=1):
    return assemble_ladder_terms(
        space,
        [(1.0, [(site, [("npow", power)])])],
        name=f"n[{site}]^{power}",
        hermitian=True,
    )


def phi_op(space: FockSpace, site):
    """phi = (b + bdag)/sqrt(2); real symmetric."""
    terms = [
        (1 / np.sqrt(2), [(site, [("b",)])]),
        (1 / np.sqrt(2), [(site, [("bdag",)])]),
    ]
    return assemble_ladder_terms(space, terms, name=f"phi[{site}]", hermitian=True)


def pi_op(space: FockSpace, site):
    """pi = -i (b - bdag)/sqrt(2); Hermitian with imaginary entries."""
    terms = [
        (-1j / np.sqrt(2), [(site, [("b",)])]),
        (1j / np.sqrt(2), [(site, [("bdag",)])]),
    ]
    return assemble_ladder_terms(space, terms, name=f"pi[{site}]", hermitian=True)


def total_number_op(space: FockSpace):
    diag = space.total_number_diagonal().astype(np.complex128)
    return SparseOperator(sp.diags(diag).tocsr(), hermitian=True, name="N_total")


def identity_op(space: FockSpace):
    return SparseOperator(sp.identity(space.dim, dtype=np.complex128, format="csr"),
                          hermitian=True, name="I")


def compose(ops):
    """Exact sparse product of operators, leftmost applied last."""
    if not ops:
        raise ValueError("compose() needs at least one operator")
    result = ops[0].matrix
    for op in ops[1:]:
        if op.matrix.shape[0] != result.shape[1]:
            raise DimensionMismatchError("dimension mismatch in compose")
        result = result @ op.matrix
    return SparseOperator(result, False, "*".join(op.name for op in ops))


def commutator(a: SparseOperator, b: SparseOperator):
    _check_same_dim(a, b)
    return SparseOperator(a.matrix @ b.matrix - b.matrix @ a.matrix, False,
                          f"[{a.name},{b.name}]")


def embed(site_op, space: FockSpace, site):
    """Lift a single-site matrix into the full space via identity padding.

    Respects the site-0-fastest ordering: faster sites sit in the right
    Kronecker factor.
    """
    space._check_site(site)
    mat = site_op.matrix if isinstance(site_op, SparseOperator) else sp.csr_matrix(site_op)
    d = space.cutoffs[site] + 1
    if mat.shape != (d, d):
        raise DimensionMismatchError(
            f"site operator is {mat.shape}, site {site} has local dim {d}"
        )
    dims = space.local_dims
    d_fast = int(np.prod(dims[:site])) if site > 0 else 1
    d_slow = int(np.prod(dims[site + 1:])) if site + 1 < space.n_sites else 1
    full = sp.kron(sp.identity(d_slow, format="csr"),
                   sp.kron(mat, sp.identity(d_fast, format="csr"), format="csr"),
                   format="csr")
    herm = isinstance(site_op, SparseOperator) and site_op.hermitian
    name = getattr(site_op, "name", "op")
    return SparseOperator(full, hermitian=herm, name=f"embed({name},{site})")


def interior_projector(space: FockSpace, margin):
    """Projector onto occupations <= N_x - margin at every site.

    The canonical domain for operator-identity checks: with margin at
    least the degree of the identity, no truncated matrix element
    participates.
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    keep = np.ones(space.dim, dtype=bool)
    for x in range(space.n_sites):
        keep &= space.occupations_at(x) <= space.cutoffs[x] - margin
    diag = keep.astype(np.complex128)
    return SparseOperator(sp.diags(diag).tocsr(), hermitian=True,
                          name=f"Pi_int(margin={margin})")


def tensor_product_state(space: FockSpace, local_states):
    """Full-space vector from per-site local vectors (site 0 fastest)."""
    if len(local_states) != space.n_sites:
        raise DimensionMismatchError("need one local state per site")
    vec = np.array([1.0], dtype=np.complex128)
    for x, local in enumerate(local_states):
        local = np.asarray(local, dtype=np.complex128)
        if local.shape != (space.cutoffs[x] + 1,):
            raise DimensionMismatchError(f"local state at site {x} has wrong length")
        vec = np.kron(local, vec)  # site x varies slower than sites < x
    return vec
