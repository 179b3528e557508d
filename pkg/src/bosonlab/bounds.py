"""Executable checkers for the concentration bounds, moment bounds, the
variance-gap trade-off, operator-reordering identities, and the
elementary combinatorial lemmas.

Every checker separates *hypothesis failures* (the inequality's
preconditions do not hold, so nothing is claimed) from *bound
violations* (preconditions hold but the measured value exceeds the
bound).  Only the latter are test failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares

from . import coeffs
from .fock import FockSpace, SparseOperator, interior_projector, phi_op, pi_op
from .models import ModelSpec, FAMILY_BOSE_HUBBARD, FAMILY_PHI4, extract_constants
from .report import CheckReport
from .spectra import SpectralData

PROBABILITY_FLOOR = 1e-13


# ---------------------------------------------------------------------------
# site-local expectation helpers
# ---------------------------------------------------------------------------


def reduced_density(state, space: FockSpace, site):
    """Single-site reduced density matrix of a pure state."""
    space._check_site(site)
    dims = space.local_dims
    d_fast = int(np.prod(dims[:site])) if site > 0 else 1
    d_site = int(dims[site])
    d_slow = space.dim // (d_fast * d_site)
    T = np.asarray(state, dtype=np.complex128).reshape(d_slow, d_site, d_fast)
    return np.einsum("asf,abf->sb", T, T.conj())


def local_op_matrix(cutoff, kind):
    """Dense single-site operator on a (cutoff+1)-dim truncated space."""
    d = cutoff + 1
    if kind == "n":
        return np.diag(np.arange(d, dtype=float)).astype(complex)
    lower = np.diag(np.sqrt(np.arange(1, d)), 1)  # <n-1|b|n>
    if kind == "b":
        return lower.astype(complex)
    if kind == "bdag":
        return lower.T.astype(complex)
    if kind == "phi":
        return ((lower + lower.T) / math.sqrt(2)).astype(complex)
    if kind == "pi":
        return (-1j * (lower - lower.T) / math.sqrt(2)).astype(complex)
    raise ValueError(f"unknown kind {kind!r}")


def site_moment(state, space, site, kind, power):
    """<state| O_site^power |state> for O in {n, phi, pi}; exact on the
    truncated space (matrix power of the truncated operator)."""
    rho = reduced_density(state, space, site)
    op = np.linalg.matrix_power(local_op_matrix(space.cutoffs[site], kind), power)
    return complex(np.trace(rho @ op))


def occupation_distribution(state, space, site):
    """p(n) = sum of |amplitude|^2 over basis states with occupation n."""
    amps2 = np.abs(np.asarray(state)) ** 2
    occ = space.occupations_at(site)
    return np.bincount(occ, weights=amps2, minlength=space.cutoffs[site] + 1)


def tail_probability(state, space, site, N):
    """P(occupation at site >= N); N must be representable (<= cutoff)."""
    if N < 0 or N > space.cutoffs[site]:
        raise ValueError(f"N={N} beyond cutoff {space.cutoffs[site]}")
    dist = occupation_distribution(state, space, site)
    return float(dist[N:].sum())


def tail_curve(state, space, site, strict=False):
    """[(N, tail)] for all representable N; ``strict`` uses P(occ > N)."""
    dist = occupation_distribution(state, space, site)
    cum = np.cumsum(dist[::-1])[::-1]
    if strict:
        return [(N, float(cum[N + 1]) if N + 1 <= space.cutoffs[site] else 0.0)
                for N in range(space.cutoffs[site] + 1)]
    return [(N, float(cum[N])) for N in range(space.cutoffs[site] + 1)]


# ---------------------------------------------------------------------------
# concentration fit
# ---------------------------------------------------------------------------


@dataclass
class ConcentrationFit:
    """Stretched-exponential tail fit  p(N) ~ c * exp(-b * N^(1/a))."""

    a: float
    b: float
    c: float
    fit_window: tuple
    residual: float  # RMS of log-space residuals
    floor: float
    n_points: int

    @property
    def stretch(self):
        return 1.0 / self.a

    def predict(self, N):
        return self.c * np.exp(-self.b * np.asarray(N, dtype=float) ** (1.0 / self.a))


class FitError(ValueError):
    pass


def fit_concentration(points, floor=PROBABILITY_FLOOR, n_min=0):
    """Three-parameter log-space least squares on a tail curve.

    ``points`` is a list of (N, p).  Points at or below the probability
    floor are dropped (below double-precision tail resolution), as are
    points with N < n_min.  Requires at least 5 usable points and a
    non-increasing tail.
    """
    pts = [(int(N), float(p)) for N, p in points if p > floor and N >= n_min]
    pts.sort()
    if len(pts) < 5:
        raise FitError(f"only {len(pts)} points above the floor; need >= 5")
    p_vals = np.array([p for _, p in pts])
    if np.any(np.diff(p_vals) > 1e-12 * p_vals[:-1] + 1e-300):
        raise FitError("tail is not non-increasing (not a ground-state tail?)")
    N = np.array([n for n, _ in pts], dtype=float)
    logp = np.log(p_vals)

    def residuals(theta):
        logc, b, s = theta
        return logc - b * np.power(np.maximum(N, 1e-12), s) - logp

    # two-point slope heuristics for the stretch exponent, then refine
    c0 = p_vals.max()
    mask = N >= 1
    y = np.log(np.maximum(np.log(c0) - logp[mask], 1e-12))
    x = np.log(N[mask])
    A = np.vstack([x, np.ones_like(x)]).T
    slope, intercept = np.linalg.lstsq(A, y, rcond=None)[0]
    inits = [(math.log(c0), math.exp(intercept), float(np.clip(slope, 0.05, 3.0)))]
    inits += [(math.log(c0), 1.0, s0) for s0 in (0.5, 1.0, 2.0)]

    best = None
    for theta0 in inits:
        sol = least_squares(residuals, theta0, method="lm", max_nfev=20000)
        cost = float(np.sqrt(np.mean(sol.fun**2)))
        if best is None or cost < best[1]:
            best = (sol.x, cost)
    (logc, b, s), rms = best
    if s <= 0 or b <= 0:
        raise FitError(f"fit collapsed to non-decaying parameters b={b:.3g}, s={s:.3g}")
    return ConcentrationFit(
        a=1.0 / s,
        b=float(b),
        c=float(math.exp(logc)),
        fit_window=(int(N.min()), int(N.max())),
        residual=rms,
        floor=floor,
        n_points=len(pts),
    )


# ---------------------------------------------------------------------------
# concentration checkers
# ---------------------------------------------------------------------------


@dataclass
class BhBoundConstants:
    """Per-site constants of the exponential concentration bound."""

    zeta: float  # 0 when no degree-k ladder terms touch the site
    M0: float
    u_i: float
    check_J: float
    decay_base: float


def _bh_site_constants(U_i, Jk_i, script_J, check_J, k, u_frac=0.5):
    if Jk_i == 0.0:
        M0 = max(
            2.0 ** (2.0 / k) * (check_J / U_i) ** 2,
            ((16.0 * script_J + check_J) / U_i) ** 2,
        )
        return BhBoundConstants(0.0, M0, 0.0, check_J, math.exp(-1.0))
    delta_U = U_i - 5.0 * Jk_i
    u_i = u_frac * delta_U  # the free positive parameter; Delta U_i / 2 default
    zeta = Jk_i / (U_i - u_i - Jk_i)
    if zeta >= 0.25:
        raise ValueError("zeta >= 1/4; repulsive margin too small for this u_i")
    base = (1.0 - math.sqrt(1.0 - 16.0 * zeta**2)) / (4.0 * zeta)
    M0 = max(
        2.0 ** (2.0 / k) * (check_J / (U_i - Jk_i)) ** 2,
        ((check_J * Jk_i + 2.0 * script_J * (U_i - u_i - Jk_i)) / (u_i * Jk_i)) ** 2,
    )
    return BhBoundConstants(zeta, M0, u_i, check_J, base)


def bh_concentration_check(spec: ModelSpec, spectral: SpectralData, space: FockSpace,
                           u_frac=0.5, constants=None) -> CheckReport:
    """Exponential tail bound for the repulsive hopping-plus-repulsion class.

    Measured P(occ_i >= x) is compared against base^(2(x - M_i0)/k) at
    every representable x.  Sites without degree-k ladder terms use the
    parameter-free branch with base 1/e.  A violated repulsive condition
    is a hypothesis failure, not a bound failure.
    """
    rep = CheckReport(check="bh_concentration")
    if spec.family != FAMILY_BOSE_HUBBARD:
        rep.hypothesis_ok = False
        rep.hypothesis_note = "not a Bose-Hubbard-class spec"
        return rep
    consts = constants if constants is not None else extract_constants(spec)
    U = spec.onsite_repulsion
    Jk = consts.J_bar_site_k
    if not np.all(U > 5.0 * Jk):
        rep.hypothesis_ok = False
        rep.hypothesis_note = "repulsive condition U_i > 5 Jbar_{i,k} violated"
        return rep

    conserving = spec.is_number_conserving()
    n_total = sum(
        site_moment(spectral.ground_vector, space, i, "n", 1).real
        for i in range(space.n_sites)
    )
    z = 2.0 * n_total / spec.n_sites
    check_J = consts.check_J(conserving, z)
    rep.extra["conserving"] = conserving
    rep.extra["check_J"] = check_J
    rep.extra["script_J"] = consts.script_J
    rep.extra["sites"] = {}

    for i in range(space.n_sites):
        sc = _bh_site_constants(U[i], Jk[i], consts.script_J, check_J, spec.k, u_frac)
        rep.extra["sites"][i] = vars(sc)
        dist = occupation_distribution(spectral.ground_vector, space, i)
        cum = np.cumsum(dist[::-1])[::-1]
        worst_x, worst_margin = None, np.inf
        for x in range(space.cutoffs[i] + 1):
            bound = sc.decay_base ** (2.0 * (x - sc.M0) / spec.k)
            margin = bound - cum[x]
            if margin < worst_margin:
                worst_x, worst_margin = x, margin
        bound_at_worst = sc.decay_base ** (2.0 * (worst_x - sc.M0) / spec.k)
        rep.add(f"site {i} tail(x={worst_x})", float(cum[worst_x]), bound_at_worst,
                tolerance=1e-12)
    return rep


@dataclass
class Phi4BoundConstants:
    """Gap-dependent constants of the sub-exponential concentration bound."""

    c_check1: float  # 2 max|<phi>| + 4 sqrt(mu_bar/gap) + 1
    C_tilde: float  # c_check1 * k^2 * (f_bar'/mu_bar)^(1/k)
    mu_bar: float
    f_bar_prime: float
    gap: float

    @classmethod
    def from_measured(cls, consts, gap, max_abs_phi):
        c1 = 2.0 * max_abs_phi + 4.0 * math.sqrt(consts.mu_bar / gap) + 1.0
        Ct = c1 * consts.k**2 * (consts.f_bar_prime / consts.mu_bar) ** (1.0 / consts.k)
        return cls(c1, Ct, consts.mu_bar, consts.f_bar_prime, gap)


def phi4_concentration_check(spec: ModelSpec, spectral: SpectralData, space: FockSpace,
                             parity_tol=1e-8, constants=None) -> CheckReport:
    """Sub-exponential tail bound for the parity-symmetric oscillator class:
    P(occ_i > x) <= 4 e^k exp(-k x^(1/k) / (8 e C~))."""
    rep = CheckReport(check="phi4_concentration")
    if spec.family != FAMILY_PHI4:
        rep.hypothesis_ok = False
        rep.hypothesis_note = "not a phi4-class spec"
        return rep
    if spectral.degenerate or spectral.gap <= 0:
        rep.hypothesis_ok = False
        rep.hypothesis_note = "degenerate ground state (gap = 0)"
        return rep
    phis = [abs(site_moment(spectral.ground_vector, space, i, "phi", 1))
            for i in range(space.n_sites)]
    max_phi = max(phis)
    rep.extra["max_abs_phi"] = max_phi
    if max_phi > parity_tol:
        rep.hypothesis_ok = False
        rep.hypothesis_note = f"parity violated: max |<phi_i>| = {max_phi:.3e}"
        return rep

    consts = constants if constants is not None else extract_constants(spec)
    bc = Phi4BoundConstants.from_measured(consts, spectral.gap, max_phi)
    rep.extra["constants"] = vars(bc)
    k = spec.k
    prefac = 4.0 * math.exp(k)
    for i in range(space.n_sites):
        dist = occupation_distribution(spectral.ground_vector, space, i)
        cum = np.cumsum(dist[::-1])[::-1]
        worst_x, worst_margin = None, np.inf
        for x in range(space.cutoffs[i] + 1):
            # strict tail P(occ > x)
            measured = float(cum[x + 1]) if x + 1 <= space.cutoffs[i] else 0.0
            bound = prefac * math.exp(-k * x ** (1.0 / k) / (8.0 * math.e * bc.C_tilde))
            if bound - measured < worst_margin:
                worst_x, worst_margin = x, bound - measured
        measured = float(cum[worst_x + 1]) if worst_x + 1 <= space.cutoffs[i] else 0.0
        bound = prefac * math.exp(-k * worst_x ** (1.0 / k) / (8.0 * math.e * bc.C_tilde))
        rep.add(f"site {i} tail(x={worst_x})", measured, bound, tolerance=1e-12)
    return rep


# ---------------------------------------------------------------------------
# trade-off relation and moments
# ---------------------------------------------------------------------------


def tradeoff_check(H: SparseOperator, spectral: SpectralData, O: SparseOperator,
                   rtol=1e-8) -> CheckReport:
    """Var(O) * gap <= |<[[H,O],O]>| / 2 on the ground state."""
    rep = CheckReport(check="tradeoff")
    if spectral.degenerate or spectral.gap <= 0:
        rep.hypothesis_ok = False
        rep.hypothesis_note = "degenerate ground state"
        return rep
    if not O.hermitian:
        rep.hypothesis_ok = False
        rep.hypothesis_note = "observable not Hermitian"
        return rep
    psi = spectral.ground_vector
    Ov = O.matrix @ psi
    mean = np.vdot(psi, Ov)
    var = float(np.real(np.vdot(Ov, Ov) - abs(mean) ** 2))
    HO = H.matrix @ O.matrix - O.matrix @ H.matrix
    HOO = HO @ O.matrix - O.matrix @ HO
    double = abs(complex(np.vdot(psi, HOO @ psi)))
    lhs = var * spectral.gap
    rhs = 0.5 * double
    rep.add("Var(O)*gap vs |<[[H,O],O]>|/2", lhs, rhs, tolerance=rtol)
    rep.extra.update({"variance": var, "gap": spectral.gap, "double_commutator": double})
    return rep


def moment_suite(spec: ModelSpec, spectral: SpectralData, space: FockSpace,
                 s_max=8, constants=None) -> CheckReport:
    """Measured site moments against the closed-form bounds.

    phi4 class: |<phi^s>| <= (C s)^s with C = |<phi>| + 2 sqrt(mu_bar/gap);
    <pi^s>, <n^s> against the gap-dependent sub-exponential constants.
    Hopping-plus-repulsion class: <n_i^(k/2)> <= (cJ/(U_i - Jbar_ik))^k.
    """
    rep = CheckReport(check="moment_suite")
    consts = constants if constants is not None else extract_constants(spec)
    psi = spectral.ground_vector

    if spec.family == FAMILY_PHI4:
        if spectral.degenerate or spectral.gap <= 0:
            rep.hypothesis_ok = False
            rep.hypothesis_note = "degenerate ground state"
            return rep
        max_phi = max(abs(site_moment(psi, space, i, "phi", 1))
                      for i in range(space.n_sites))
        C = max_phi + 2.0 * math.sqrt(consts.mu_bar / spectral.gap)
        bc = Phi4BoundConstants.from_measured(consts, spectral.gap, max_phi)
        k = spec.k
        rep.extra["C_phi"] = C
        rep.extra["C_tilde"] = bc.C_tilde
        for i in range(space.n_sites):
            for s in range(1, s_max + 1):
                phi_s = site_moment(psi, space, i, "phi", s)
                rep.add(f"|<phi_{i}^{s}>|", abs(phi_s), (C * s) ** s, tolerance=1e-10)
                pi_s = site_moment(psi, space, i, "pi", s)
                if s % 2 == 0:
                    rep.add(f"<pi_{i}^{s}>", pi_s.real, (bc.C_tilde * s) ** (k * s / 2.0),
                            tolerance=1e-10)
                n_s = site_moment(psi, space, i, "n", s).real
                rep.add(f"<n_{i}^{s}>", n_s, 4.0 * (8.0 * bc.C_tilde * s) ** (k * s / 2.0),
                        tolerance=1e-10)
    elif spec.family == FAMILY_BOSE_HUBBARD:
        U = spec.onsite_repulsion
        Jk = consts.J_bar_site_k
        if not np.all(U > 5.0 * Jk):
            rep.hypothesis_ok = False
            rep.hypothesis_note = "repulsive condition violated"
            return rep
        conserving = spec.is_number_conserving()
        n_total = sum(site_moment(psi, space, i, "n", 1).real
                      for i in range(space.n_sites))
        check_J = consts.check_J(conserving, 2.0 * n_total / spec.n_sites)
        rep.extra["check_J"] = check_J
        for i in range(space.n_sites):
            m = site_moment(psi, space, i, "n", spec.k // 2).real
            rep.add(f"<n_{i}^(k/2)>", m, (check_J / (U[i] - Jk[i])) ** spec.k,
                    tolerance=1e-10)
    else:
        rep.hypothesis_ok = False
        rep.hypothesis_note = "moment bounds defined for the two named families"
    return rep


# ---------------------------------------------------------------------------
# operator-reordering identities (checked on interior projectors)
# ---------------------------------------------------------------------------

commutator_coefficients = coeffs.commutator_coefficients
lambda_coefficients = coeffs.lambda_coefficients


def commutator_identity_deviation(m, n, cutoff=None):
    """max |[phi^m, pi^n] - sum_k i^k C_{k,m,n} pi^(n-k) phi^(m-k)| on the
    interior projector with margin m+n."""
    cutoff = cutoff if cutoff is not None else 2 * (m + n) + 4
    space = FockSpace((cutoff,))
    phi = phi_op(space, 0).to_dense()
    pi = pi_op(space, 0).to_dense()
    phi_pow = [np.linalg.matrix_power(phi, j) for j in range(m + 1)]
    pi_pow = [np.linalg.matrix_power(pi, j) for j in range(n + 1)]
    lhs = phi_pow[m] @ pi_pow[n] - pi_pow[n] @ phi_pow[m]
    rhs = np.zeros_like(lhs)
    for k_, c in coeffs.commutator_coefficients(m, n).items():
        rhs += (1j ** k_) * c * (pi_pow[n - k_] @ phi_pow[m - k_])
    P = interior_projector(space, m + n).to_dense().real
    diff = P @ (lhs - rhs) @ P
    return float(np.abs(diff).max())


def lambda_expansion_deviation(s, cutoff=None):
    """max |(phi^2+pi^2)^s - sum lambda_{m1,m2} phi^m1 pi^m2| on the
    interior projector with margin 2s."""
    cutoff = cutoff if cutoff is not None else 4 * s + 8
    space = FockSpace((cutoff,))
    phi = phi_op(space, 0).to_dense()
    pi = pi_op(space, 0).to_dense()
    base = phi @ phi + pi @ pi
    lhs = np.linalg.matrix_power(base, s)
    rhs = np.zeros_like(lhs)
    maxdeg = 2 * s
    phi_pow = [np.linalg.matrix_power(phi, j) for j in range(maxdeg + 1)]
    pi_pow = [np.linalg.matrix_power(pi, j) for j in range(maxdeg + 1)]
    for (m1, m2), val in coeffs.lambda_coefficients(s).items():
        rhs += val.to_complex() * (phi_pow[m1] @ pi_pow[m2])
    P = interior_projector(space, 2 * s).to_dense().real
    diff = P @ (lhs - rhs) @ P
    return float(np.abs(diff).max())


def double_commutator_phi_deviation(m, cutoff=None):
    """max |[[pi^2, phi^m], phi^m] + 2 m^2 phi^(2m-2)| on the interior."""
    cutoff = cutoff if cutoff is not None else 4 * m + 8
    space = FockSpace((cutoff,))
    phi = phi_op(space, 0).to_dense()
    pi = pi_op(space, 0).to_dense()
    phim = np.linalg.matrix_power(phi, m)
    pi2 = pi @ pi
    inner = pi2 @ phim - phim @ pi2
    outer = inner @ phim - phim @ inner
    rhs = -2.0 * m * m * np.linalg.matrix_power(phi, 2 * m - 2)
    P = interior_projector(space, 2 * m + 2).to_dense().real
    return float(np.abs(P @ (outer - rhs) @ P).max())


# ---------------------------------------------------------------------------
# hopping-string operator inequality
# ---------------------------------------------------------------------------


def hopping_inequality_check(space: FockSpace, multiset, split,
                             budget=4000) -> CheckReport:
    """|B| <= prod_j (n_{i_j} + k)^(1/2) for the ladder string
    B = bdag_{i_k} ... bdag_{i_split} b_{i_(split-1)} ... b_{i_1}.

    |B| = sqrt(B^dag B) by dense eigendecomposition; the report row is the
    minimum eigenvalue of the difference (>= -1e-8 required).
    """
    rep = CheckReport(check="hopping_inequality")
    k = len(multiset)
    if not (1 <= split <= k + 1):
        rep.hypothesis_ok = False
        rep.hypothesis_note = "split must lie in 1..k+1"
        return rep
    if space.dim > budget:
        raise ValueError(f"space dim {space.dim} exceeds dense budget {budget}")
    from .fock import assemble_ladder_terms

    # factors left to right: bdag at i_k..i_split, then b at i_(split-1)..i_1;
    # the kernel applies rightmost first
    factors = [(multiset[j - 1], "bdag") for j in range(k, split - 1, -1)]
    factors += [(multiset[j - 1], "b") for j in range(split - 1, 0, -1)]
    per_site = {}
    for site, kind in reversed(factors):
        per_site.setdefault(site, []).append((kind,))
    B = assemble_ladder_terms(space, [(1.0, sorted(per_site.items()))], name="B")
    Bd = B.to_dense()
    gram = Bd.conj().T @ Bd
    vals, vecs = np.linalg.eigh((gram + gram.conj().T) / 2)
    absB = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T

    dom = np.ones(space.dim)
    for i in multiset:
        dom = dom * np.sqrt(space.occupations_at(i) + k)
    diff = np.diag(dom) - absB
    min_eig = float(np.linalg.eigvalsh((diff + diff.conj().T) / 2).min())
    rep.add("min eig of dominator - |B|", -min_eig, 0.0, tolerance=1e-8)
    rep.extra.update({"multiset": list(multiset), "split": split, "min_eig": min_eig})
    return rep


# ---------------------------------------------------------------------------
# combinatorial lemmas (wrapped as reports)
# ---------------------------------------------------------------------------


def sequence_lemma_report(x, zeta, **kw) -> CheckReport:
    rep = CheckReport(check="sequence_lemma")
    res = coeffs.sequence_lemma_check(x, zeta, **kw)
    rep.add("max a_m / bound_m ratio", res.max_ratio, 1.0, tolerance=1e-9)
    rep.extra.update({"zeta": res.zeta, "a_max": res.a_max.tolist(),
                      "bound": res.bound.tolist()})
    return rep


def binomial_lemma_report(max_m) -> CheckReport:
    rep = CheckReport(check="binomial_lemma")
    res = coeffs.binomial_lemma_check(max_m)
    rep.add("violations", float(len(res["failures"])), 0.0)
    rep.extra.update(res)
    return rep
