"""Vectorized numpy fallback for the operator-assembly kernel.

Semantics are identical to the compiled version in ``_kernels_cy.pyx``;
tests assert entrywise equality between the two backends.
"""

import numpy as np


def ladder_term_entries(total_dim, strides, dims, tables, shifts, coeff):
    """COO entries of a single ladder-monomial term on a mixed-radix space.

    A term acts on a few "involved" sites; on involved site j it maps an
    occupation ``n`` to ``n + shifts[j]`` with amplitude ``tables[j][n]``
    (zero amplitude encodes transitions forbidden by the hard cutoff).
    The full-space matrix element is the product of the per-site
    amplitudes times ``coeff``, and all column indices shift by the fixed
    offset ``sum(shifts[j] * strides[j])``.

    Parameters
    ----------
    total_dim : int
    strides, dims, shifts : int64 arrays over involved sites
    tables : list of float64 arrays, ``len(tables[j]) == dims[j]``
    coeff : complex

    Returns
    -------
    rows, cols : int64 arrays;  vals : complex128 array
    """
    idx = np.arange(total_dim, dtype=np.int64)
    amp = None
    offset = 0
    for stride, dim, table, shift in zip(strides, dims, tables, shifts):
        occ = (idx // stride) % dim
        factor = table[occ]
        amp = factor if amp is None else amp * factor
        offset += int(shift) * int(stride)
    if amp is None:  # identity term
        vals = np.full(total_dim, coeff, dtype=np.complex128)
        return idx, idx.copy(), vals
    mask = amp != 0.0
    cols = idx[mask]
    rows = cols + offset
    vals = coeff * amp[mask].astype(np.complex128)
    return rows, cols, vals


def decode_indices(indices, strides, dims):
    """Occupations at the given sites for an array of basis indices."""
    indices = np.asarray(indices, dtype=np.int64)
    out = np.empty((len(strides), indices.size), dtype=np.int64)
    for j, (stride, dim) in enumerate(zip(strides, dims)):
        out[j] = (indices // stride) % dim
    return out
