"""Declarative Hamiltonian specifications and builders for the two model
families (hopping-plus-repulsion chains and anharmonic-oscillator chains),
plus extraction of the coupling constants used by the bound checkers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import (
    FockSpace,
    SparseOperator,
    assemble_ladder_terms,
)

FAMILY_BOSE_HUBBARD = "bose_hubbard"
FAMILY_PHI4 = "phi4"
FAMILY_EXPLICIT = "explicit"

FACTOR_KINDS = ("b", "bdag", "n", "phi", "pi")


@dataclass(frozen=True)
class Factor:
    """One operator factor at a site: kind in {b, bdag, n, phi, pi}."""

    site: int
    kind: str
    power: int = 1

    def __post_init__(self):
        if self.kind not in FACTOR_KINDS:
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.power < 1:
            raise ValueError("factor power must be >= 1")

    @property
    def ladder_degree(self):
        # b/bdag/phi/pi count 1 per power, n counts 2 per power
        return self.power * (2 if self.kind == "n" else 1)


@dataclass(frozen=True)
class TermSpec:
    """coefficient * ordered product of factors (+ h.c. when flagged)."""

    coefficient: complex
    factors: tuple
    hermitian_conjugate_included: bool = False

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "coefficient", complex(self.coefficient))

    @property
    def degree(self):
        return sum(f.ladder_degree for f in self.factors)

    @property
    def sites(self):
        return tuple(sorted({f.site for f in self.factors}))

    def conjugate(self):
        """The h.c. term: reversed factor order, b <-> bdag, conj coefficient."""
        swap = {"b": "bdag", "bdag": "b", "n": "n", "phi": "phi", "pi": "pi"}
        factors = tuple(
            Factor(f.site, swap[f.kind], f.power) for f in reversed(self.factors)
        )
        return TermSpec(np.conj(self.coefficient), factors, False)

    def is_number_conserving(self):
        raising = sum(f.power for f in self.factors if f.kind == "bdag")
        lowering = sum(f.power for f in self.factors if f.kind == "b")
        mixes = any(f.kind in ("phi", "pi") for f in self.factors)
        return not mixes and raising == lowering


@dataclass
class ModelSpec:
    """Declarative Hamiltonian: term list plus per-site on-site channels.

    ``onsite_repulsion`` holds the positive U_i of the repulsion channel
    (assembled as ``U_i * n(n-1)`` or ``U_i * n^(k/2)`` per
    ``repulsion_form``); ``mu`` holds per-site coefficients of pi^2 for
    the anharmonic family.  These channels are kept out of ``terms`` so
    the coupling-sum constants can be computed from the bare term list.
    """

    family: str
    n_sites: int
    k: int
    terms: list = field(default_factory=list)
    onsite_repulsion: np.ndarray | None = None
    repulsion_form: str = "n(n-1)"  # or "n^(k/2)"
    mu: np.ndarray | None = None
    long_range: tuple | None = None  # (alpha, J0)
    boundary: str = "open"

    def __post_init__(self):
        if self.family not in (FAMILY_BOSE_HUBBARD, FAMILY_PHI4, FAMILY_EXPLICIT):
            raise ValueError(f"unknown family {self.family!r}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError("boundary must be 'open' or 'periodic'")
        if self.k < 2 or self.k % 2:
            raise ValueError("k must be an even integer >= 2")
        if self.onsite_repulsion is not None:
            self.onsite_repulsion = np.asarray(self.onsite_repulsion, dtype=float)
            if self.onsite_repulsion.shape != (self.n_sites,):
                raise ValueError("onsite_repulsion must have one entry per site")
        if self.mu is not None:
            self.mu = np.asarray(self.mu, dtype=float)
            if self.mu.shape != (self.n_sites,):
                raise ValueError("mu must have one entry per site")
        self.validate()

    def validate(self):
        for t in self.terms:
            if t.degree > self.k:
                raise ValueError(
                    f"term of degree {t.degree} exceeds interaction degree k={self.k}"
                )
            for f in t.factors:
                if not (0 <= f.site < self.n_sites):
                    raise ValueError(f"site {f.site} out of range")
        if self.family == FAMILY_BOSE_HUBBARD:
            if self.onsite_repulsion is None or np.any(self.onsite_repulsion <= 0):
                raise ValueError("Bose-Hubbard class requires U_i > 0 at every site")
        if self.family == FAMILY_PHI4:
            self._validate_parity()

    def _validate_parity(self):
        # every phi-monomial must have even total degree (phi -> -phi symmetry)
        for t in self.terms:
            phi_deg = sum(f.power for f in t.factors if f.kind == "phi")
            other = [f for f in t.factors if f.kind not in ("phi", "pi")]
            pi_deg = sum(f.power for f in t.factors if f.kind == "pi")
            if other:
                raise ValueError("phi4-class terms may contain only phi/pi factors")
            if (phi_deg + pi_deg) % 2:
                raise ValueError("phi4-class terms must have even total degree")

    def all_terms_with_hc(self):
        out = []
        for t in self.terms:
            out.append(t)
            if t.hermitian_conjugate_included:
                out.append(t.conjugate())
        return out

    def is_number_conserving(self):
        if self.mu is not None and np.any(self.mu != 0):
            return False
        return all(t.is_number_conserving() for t in self.all_terms_with_hc())

    def distance(self, i, j):
        r = abs(i - j)
        if self.boundary == "periodic":
            r = min(r, self.n_sites - r)
        return r

    def repulsive_condition(self):
        """U_i > 5 * Jbar_{i,k} at every site (trivially U_i > 0 when no
        degree-k ladder terms touch the site)."""
        if self.onsite_repulsion is None:
            return False
        consts = extract_constants(self)
        return bool(np.all(self.onsite_repulsion > 5.0 * consts.J_bar_site_k))


# ---------------------------------------------------------------------------
# expansion of factors into ladder-monomial strings
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def _factor_choices(factor: Factor):
    """Expansion of one factor into (coeff, opcode) alternatives.

    phi -> (b + bdag)/sqrt(2); pi -> (-i b + i bdag)/sqrt(2); powers
    expand multiplicatively.
    """
    if factor.kind == "b":
        alts = [[(1.0, ("b",))]] * factor.power
    elif factor.kind == "bdag":
        alts = [[(1.0, ("bdag",))]] * factor.power
    elif factor.kind == "n":
        return [(1.0, [("npow", factor.power)])]
    elif factor.kind == "phi":
        alts = [[(1 / _SQRT2, ("b",)), (1 / _SQRT2, ("bdag",))]] * factor.power
    else:  # pi
        alts = [[(-1j / _SQRT2, ("b",)), (1j / _SQRT2, ("bdag",))]] * factor.power
    expanded = [(1.0, [])]
    for alt in alts:
        expanded = [
            (c0 * c1, ops0 + [op1]) for c0, ops0 in expanded for c1, op1 in alt
        ]
    return expanded


def expand_term(term: TermSpec):
    """Ladder-monomial strings of a term: list of (coeff, [(site, opcodes)]).

    Factor order is preserved; opcode strings are emitted in order of
    application (rightmost factor acts first).
    """
    strings = [(term.coefficient, [])]
    for factor in term.factors:
        choices = _factor_choices(factor)
        strings = [
            (c0 * c1, ops0 + [(factor.site, list(ops1))])
            for c0, ops0 in strings
            for c1, ops1 in choices
        ]
    out = []
    for coeff, flat in strings:
        per_site = {}
        for site, ops in reversed(flat):  # rightmost factor first
            per_site.setdefault(site, []).extend(ops)
        out.append((coeff, sorted(per_site.items())))
    return out


def ladder_monomials(spec: ModelSpec):
    """All b/bdag/n-monomial strings of the spec's term list, h.c. included."""
    strings = []
    for term in spec.all_terms_with_hc():
        strings.extend(expand_term(term))
    return strings


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_hamiltonian(spec: ModelSpec, space: FockSpace, region=None, name="H"):
    """Assemble the sparse Hamiltonian of a model spec on a Fock space.

    ``region`` keeps only contributions supported entirely inside the
    given site set (the subset Hamiltonian); on-site channels are kept
    for member sites.
    """
    if spec.n_sites != space.n_sites:
        raise ValueError("spec.n_sites != space.n_sites")
    keep = set(range(spec.n_sites)) if region is None else set(region)
    if region is not None and not keep:
        raise ValueError("empty region")

    kernel_terms = []
    for term in spec.all_terms_with_hc():
        if set(term.sites) <= keep:
            kernel_terms.extend(expand_term(term))
    if spec.onsite_repulsion is not None:
        for i, u in enumerate(spec.onsite_repulsion):
            if u == 0.0 or i not in keep:
                continue
            if spec.repulsion_form == "n(n-1)":
                kernel_terms.append((u, [(i, [("npow", 2)])]))
                kernel_terms.append((-u, [(i, [("npow", 1)])]))
            elif spec.repulsion_form == "n^(k/2)":
                kernel_terms.append((u, [(i, [("npow", spec.k // 2)])]))
            else:
                raise ValueError(f"unknown repulsion_form {spec.repulsion_form!r}")
    if spec.mu is not None:
        for i, m in enumerate(spec.mu):
            if m == 0.0 or i not in keep:
                continue
            kernel_terms.extend(expand_term(TermSpec(m, [Factor(i, "pi", 2)])))

    op = assemble_ladder_terms(space, kernel_terms, name=name)
    # duplicate-accumulation order differs between transposed entries, so the
    # raw deviation is float noise scaled by the largest entry; validate
    # relative, then symmetrize exactly
    dev = op.hermiticity_deviation()
    scale = max(1.0, float(np.abs(op.matrix.data).max()) if op.nnz else 1.0)
    if dev > 1e-12 * scale:
        raise ValueError(f"assembled Hamiltonian deviates from Hermitian by {dev:.3e}")
    sym = (op.matrix + op.matrix.getH()) * 0.5
    return SparseOperator(sym.tocsr(), hermitian=True, name=name)


def subset_hamiltonian(spec: ModelSpec, space: FockSpace, region):
    """Terms fully inside ``region``, acting on the full space."""
    region = sorted(set(region))
    if not region:
        raise ValueError("empty region")
    for i in region:
        if not (0 <= i < spec.n_sites):
            raise ValueError(f"region site {i} out of range")
    return build_hamiltonian(spec, space, region=region, name=f"H_{region}")


def standard_bose_hubbard(L, J, U, boundary="open"):
    """Hopping chain with on-site repulsion U * n(n-1); k = 4, p = 2."""
    if L < 1:
        raise ValueError("L >= 1 required")
    terms = []
    bonds = [(i, i + 1) for i in range(L - 1)]
    if boundary == "periodic" and L > 2:
        bonds.append((L - 1, 0))
    for i, j in bonds:
        terms.append(TermSpec(J, [Factor(i, "b"), Factor(j, "bdag")],
                              hermitian_conjugate_included=True))
    return ModelSpec(
        family=FAMILY_BOSE_HUBBARD,
        n_sites=L,
        k=4,
        terms=terms,
        onsite_repulsion=np.full(L, float(U)),
        repulsion_form="n(n-1)",
        boundary=boundary,
    )


def standard_phi4(L, lam, gamma, boundary="open"):
    """Chain of anharmonic oscillators: sum_i (pi^2 + phi^2 + lam*phi^4)
    plus gamma * phi_i phi_{i+1}; k = 4, even parity."""
    if L < 1:
        raise ValueError("L >= 1 required")
    terms = []
    for i in range(L):
        terms.append(TermSpec(1.0, [Factor(i, "phi", 2)]))
        if lam != 0.0:
            terms.append(TermSpec(lam, [Factor(i, "phi", 4)]))
    bonds = [(i, i + 1) for i in range(L - 1)]
    if boundary == "periodic" and L > 2:
        bonds.append((L - 1, 0))
    if gamma != 0.0:
        for i, j in bonds:
            terms.append(TermSpec(gamma, [Factor(i, "phi"), Factor(j, "phi")]))
    return ModelSpec(
        family=FAMILY_PHI4,
        n_sites=L,
        k=4,
        terms=terms,
        mu=np.ones(L),
        boundary=boundary,
    )


def long_range_coupling(r, alpha, J0=1.0):
    """Canonical power-law hopping profile J0 / ((r^2+1) (r^(alpha-2)+1)).

    Satisfies the decay requirement (r^2+1)*J(r)/J0 <= 1/(r^abar + 1)
    with abar = alpha - 2 by construction.
    """
    if r < 1:
        raise ValueError("r >= 1 required")
    abar = alpha - 2.0
    return J0 / ((r * r + 1.0) * (r ** abar + 1.0))


def long_range_bose_hubbard(L, alpha, J0, U, boundary="open"):
    """All-pairs hopping with the canonical power-law profile; alpha > 2."""
    if L < 1:
        raise ValueError("L >= 1 required")
    if alpha <= 2:
        raise ValueError("alpha > 2 required (interaction must decay faster than r^-2)")
    terms = []
    spec_stub = ModelSpec(FAMILY_EXPLICIT, L, 4, [], boundary=boundary)
    for i in range(L):
        for j in range(i + 1, L):
            r = spec_stub.distance(i, j)
            terms.append(
                TermSpec(
                    long_range_coupling(r, alpha, J0),
                    [Factor(i, "b"), Factor(j, "bdag")],
                    hermitian_conjugate_included=True,
                )
            )
    return ModelSpec(
        family=FAMILY_BOSE_HUBBARD,
        n_sites=L,
        k=4,
        terms=terms,
        onsite_repulsion=np.full(L, float(U)),
        repulsion_form="n(n-1)",
        long_range=(float(alpha), float(J0)),
        boundary=boundary,
    )


# ---------------------------------------------------------------------------
# model constants
# ---------------------------------------------------------------------------


@dataclass
class ModelConstants:
    """Coupling sums entering the concentration/moment bounds.

    ``J_bar[i][k1]`` sums |coefficient| of all degree-k1 b/bdag monomials
    touching site i (h.c. partners counted separately; the on-site
    repulsion channel is excluded by construction).  ``script_J`` is the
    weighted aggregate max_i sum_k1 J_bar[i][k1] * (1 + (2 k1)^k1).
    """

    k: int
    n_sites: int
    J_bar: np.ndarray  # shape (n_sites, k+1), index by k1
    v_bar: np.ndarray  # shape (k//2 + 1,), positive n-polynomial sums
    f_bar: float  # phi-monomial coupling sum (phi4 class)
    mu_bar: float  # max_i mu_i
    U: np.ndarray | None
    g: float  # interaction-norm constant
    g_probe_max: int  # truncation range certified for g and J_Z

    @property
    def J_bar_site_k(self):
        return self.J_bar[:, self.k]

    @property
    def script_J(self):
        weights = np.array(
            [0.0] + [1.0 + (2.0 * k1) ** k1 for k1 in range(1, self.k + 1)]
        )
        return float(np.max(self.J_bar @ weights)) if self.n_sites else 0.0

    @property
    def v_bar_total(self):
        return float(self.v_bar.sum())

    @property
    def f_bar_prime(self):
        return max(self.f_bar, self.mu_bar / 2.0)

    def U_tilde(self):
        """min_i (U_i - Jbar_{i,k}); the effective repulsion floor."""
        if self.U is None:
            return 0.0
        return float(np.min(self.U - self.J_bar_site_k))

    def check_J(self, conserving, z=0.0):
        """Energy-vs-moment constant: 2*script_J, plus the one-boson energy
        increment delta_z when the total boson number is conserved."""
        base = 2.0 * self.script_J
        if conserving:
            base += self.delta_energy_increment(z)
        return base

    def delta_energy_increment(self, z):
        """Upper bound on E_0(N+1) - E_0(N) at filling parameter z."""
        if self.U is None:
            return 0.0
        u_top = float(np.max(self.U + self.J_bar_site_k))
        sj = self.script_J
        vb = self.v_bar_total
        j1 = 2.0 * sj + vb + u_top
        j2 = 2.0 ** (self.k / 2.0) * (sj + vb + u_top)
        ut = self.U_tilde()
        if ut <= 0:
            return math.inf
        return 2.0 * j1 + (4.0 * j2 / ut) * (
            self.g * z ** (self.k / 2.0) + sj + sj * (2.0 * sj / ut) ** (self.k - 1)
        )


def _term_operator_norm(term: TermSpec, n_cut, margin):
    """|| h_Z Pi_{<=N} || on a probe space with cutoff n_cut + margin.

    The probe keeps the image of the N-truncated sector inside range, so
    the column-restricted norm equals the untruncated one.
    """
    sites = term.sites
    relabel = {s: j for j, s in enumerate(sites)}
    probe = FockSpace(tuple([n_cut + margin] * len(sites)))
    strings = []
    for t in (term, term.conjugate()) if term.hermitian_conjugate_included else (term,):
        for coeff, site_ops in expand_term(t):
            strings.append((coeff, [(relabel[s], ops) for s, ops in site_ops]))
    op = assemble_ladder_terms(probe, strings)
    dense = op.to_dense()
    sector = np.ones(probe.dim, dtype=bool)
    for j in range(probe.n_sites):
        sector &= probe.occupations_at(j) <= n_cut
    cols = dense[:, sector]
    if cols.size == 0:
        return 0.0
    return float(np.linalg.norm(cols, 2))


def term_norm_coefficient(term: TermSpec, k, n_probe_max=16):
    """J_Z: the smallest constant with ||h_Z Pi_{<=N}|| <= J_Z N^(k/2),
    certified over truncations N = 1..n_probe_max."""
    margin = sum(f.ladder_degree for f in term.factors)
    best = 0.0
    for n_cut in range(1, n_probe_max + 1):
        nrm = _term_operator_norm(term, n_cut, margin)
        best = max(best, nrm / n_cut ** (k / 2.0))
    return best


def _onsite_channel_terms(spec: ModelSpec):
    """On-site repulsion and pi^2 channels as TermSpecs (for norm sums)."""
    chans = []
    if spec.onsite_repulsion is not None:
        for i, u in enumerate(spec.onsite_repulsion):
            if u:
                chans.append(TermSpec(u, [Factor(i, "n", 2)]))
                if spec.repulsion_form == "n(n-1)":
                    chans.append(TermSpec(-u, [Factor(i, "n", 1)]))
    if spec.mu is not None:
        for i, m in enumerate(spec.mu):
            if m:
                chans.append(TermSpec(m, [Factor(i, "pi", 2)]))
    return chans


def extract_constants(spec: ModelSpec, n_probe_max=16):
    """Compute all coupling sums of a model spec exactly from its term list."""
    # positive n-monomial terms form the V_+ sector; everything else is
    # counted in the J_bar ladder sums
    def _is_positive_n_monomial(term):
        return (
            bool(term.factors)
            and all(f.kind == "n" for f in term.factors)
            and term.coefficient.imag == 0
            and term.coefficient.real > 0
        )

    J_bar = np.zeros((spec.n_sites, spec.k + 1))
    for term in spec.all_terms_with_hc():
        if _is_positive_n_monomial(term):
            continue
        for coeff, site_ops in expand_term(term):
            if abs(coeff) == 0.0:
                continue
            degree = 0
            sites = set()
            for site, ops in site_ops:
                sites.add(site)
                for op in ops:
                    degree += 2 * op[1] if op[0] == "npow" else 1
            if degree == 0:
                continue
            if degree > spec.k:
                raise ValueError("monomial degree exceeds k")
            for i in sites:
                J_bar[i, degree] += abs(coeff)

    v_bar_site = np.zeros((spec.n_sites, spec.k // 2 + 1))
    for term in spec.terms:
        if _is_positive_n_monomial(term):
            k1 = sum(f.power for f in term.factors)
            if k1 > spec.k // 2:
                raise ValueError("positive n-monomial degree exceeds k/2")
            for i in {f.site for f in term.factors}:
                v_bar_site[i, k1] += term.coefficient.real
    v_bar = v_bar_site.max(axis=0) if spec.n_sites else np.zeros(spec.k // 2 + 1)

    f_bar = 0.0
    if spec.family == FAMILY_PHI4 or spec.mu is not None:
        per_site = np.zeros(spec.n_sites)
        for term in spec.all_terms_with_hc():
            if term.factors and all(f.kind == "phi" for f in term.factors):
                for i in {f.site for f in term.factors}:
                    per_site[i] += abs(term.coefficient)
        f_bar = float(per_site.max()) if spec.n_sites else 0.0

    mu_bar = float(np.max(spec.mu)) if spec.mu is not None else 0.0

    # g: per-site sum of certified J_Z coefficients, on-site channels included
    per_site_g = np.zeros(spec.n_sites)
    cache = {}
    for term in list(spec.terms) + _onsite_channel_terms(spec):
        key = _term_shape_key(term)
        if key not in cache:
            unit = TermSpec(1.0, term.factors, term.hermitian_conjugate_included)
            cache[key] = term_norm_coefficient(unit, spec.k, n_probe_max)
        jz = cache[key] * abs(term.coefficient)
        for i in term.sites:
            per_site_g[i] += jz
    g = float(per_site_g.max()) if spec.n_sites else 0.0

    return ModelConstants(
        k=spec.k,
        n_sites=spec.n_sites,
        J_bar=J_bar,
        v_bar=v_bar,
        f_bar=f_bar,
        mu_bar=mu_bar,
        U=None if spec.onsite_repulsion is None else spec.onsite_repulsion.copy(),
        g=g,
        g_probe_max=n_probe_max,
    )


def _term_shape_key(term: TermSpec):
    """Norm scaling is linear in |coeff| and independent of site labels."""
    relabel = {s: j for j, s in enumerate(term.sites)}
    return (
        tuple((relabel[f.site], f.kind, f.power) for f in term.factors),
        term.hermitian_conjugate_included,
    )


def pair_coupling_sums(spec: ModelSpec, n_probe_max=16):
    """sum_{Z containing {i,j}} J_Z for every site pair (incl. i == j)."""
    sums = np.zeros((spec.n_sites, spec.n_sites))
    cache = {}
    for term in list(spec.terms) + _onsite_channel_terms(spec):
        key = _term_shape_key(term)
        if key not in cache:
            unit = TermSpec(1.0, term.factors, term.hermitian_conjugate_included)
            cache[key] = term_norm_coefficient(unit, spec.k, n_probe_max)
        jz = cache[key] * abs(term.coefficient)
        sites = term.sites
        for a in sites:
            for b in sites:
                sums[a, b] += jz
    return sums
