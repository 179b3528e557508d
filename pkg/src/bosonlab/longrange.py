"""Constants for the long-range truncation pipeline: interaction-decay
profiles, the log-growing local-energy schedule, summation constants
eta_p, the commutator-growth constants, and the sub-exponential energy
distribution function with its quadrature prefactors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .spectra import operator_norm


@dataclass(frozen=True)
class DecayProfile:
    """Normalized coupling decay J(r) = 1 / ((r^2+1)(r^abar + 1)), J(0) = 1.

    Satisfies (r^2+1) J(r) <= 1/(r^abar + 1) with equality, which is the
    decay hypothesis of the pipeline bounds (abar = alpha - 2 > 0).
    """

    alpha_bar: float

    def __post_init__(self):
        if self.alpha_bar <= 0:
            raise ValueError("alpha_bar > 0 required")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r == 0, 1.0, 1.0 / ((r**2 + 1.0) * (r**self.alpha_bar + 1.0)))


@dataclass(frozen=True)
class GbarSchedule:
    """Distance-dependent local energy scale gbar(x) = g0 + g1 log^chi(x+1)."""

    g0: float
    g1: float
    chi: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.g0 + self.g1 * np.log(x + 1.0) ** self.chi

    @classmethod
    def from_truncation(cls, g, k, a, b, eps0):
        """Schedule induced by cutoffs N_x = b^-a [log(1/eps0) + log(|x|^3+1)]^a:
        g N_x^(k/2) <= g0 + g1 log^chi(|x|+1) with chi = a k / 2."""
        chi = a * k / 2.0
        g0 = g * b ** (-chi) * 2.0**chi * math.log(1.0 / eps0) ** chi
        g1 = g * b ** (-chi) * 6.0**chi
        return cls(g0, g1, chi)


def eta_p(profile: DecayProfile, gbar: GbarSchedule, p, y0_max=64, quad_tol=1e-10):
    """Smallest constant with
    sum_{y >= y0} gbar(r+y) (y^(p-1)+1) J(y) <= eta_p gbar(r+y0) (y0^p+1) J(y0)
    for all r >= 0, y0 >= 1 (clamped below by 1).

    The ratio is maximal at r = 0 (the gbar ratio decreases in r), so the
    supremum is taken over y0 with the infinite sum evaluated directly up
    to a cut plus an integral tail bound (the summand is decreasing).
    """
    if p >= profile.alpha_bar + 2:
        raise ValueError("eta_p requires p < alpha (= alpha_bar + 2)")

    def summand(y, r=0.0):
        return gbar(r + y) * (y ** (p - 1) + 1.0) * profile(y)

    sup = 1.0
    y_cut = 4096
    ys = np.arange(1, y_cut + 1, dtype=float)
    vals = summand(ys)
    cum_from = np.cumsum(vals[::-1])[::-1]
    tail_int, _ = integrate.quad(summand, y_cut, np.inf, epsrel=quad_tol, limit=400)
    for y0 in range(1, y0_max + 1):
        total = float(cum_from[y0 - 1]) + tail_int
        denom = gbar(y0) * (float(y0) ** p + 1.0) * profile(y0)
        sup = max(sup, total / denom)
    return float(sup * (1.0 + 1e-12))


def _quad_with_check(f, tol=1e-9):
    """Integral over [0, inf) with an independent panel-sum cross-check."""
    val, err = integrate.quad(f, 0.0, np.inf, epsrel=tol, limit=800)
    # cross-check: log-spaced panel summation
    edges = np.concatenate([[0.0], np.logspace(-3, 9, 400)])
    panels = sum(
        integrate.fixed_quad(lambda z: np.vectorize(f)(z), a, b, n=24)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )
    rel_dev = abs(val - panels) / max(abs(val), 1e-300)
    return float(val), float(rel_dev)


@dataclass
class PipelineConstants:
    """Everything needed for the interaction/energy-truncation bounds.

    Derived from a decay profile, a gbar schedule, the interaction degree
    k, and the block layout (q blocks of length l around the cut).
    """

    profile: DecayProfile
    gbar: GbarSchedule
    k: int
    q: int
    block_len: int
    eta1: float = field(init=False)
    eta2: float = field(init=False)
    c0: float = field(init=False)
    ct1: float = field(init=False)
    ct2: float = field(init=False)
    ct3: float = field(init=False)
    mu1: float = field(init=False)
    mu2: float = field(init=False)
    quad_rel_error: float = field(init=False)

    def __post_init__(self):
        ab = self.profile.alpha_bar
        chi = self.gbar.chi
        self.eta1 = eta_p(self.profile, self.gbar, 1)
        self.eta2 = eta_p(self.profile, self.gbar, 2)
        self.c0 = 4.0 * self.eta1 * self.eta2 * float(self.profile(1))
        self.ct1 = 2.0 ** (chi + 3.0) * 4.0 * self.k * self.eta1 / (1.0 - 2.0 ** (-ab))
        self.ct2 = self.ct1 * (2.0 * chi * (2.0 + ab) / ab) ** chi
        self.ct3 = 2.0**ab + 2.0 * (2.0 + ab) / ab

        def mu1_integrand(z):
            return (z + 3.0) * math.exp(
                -z / (4.0 * math.e * (1.0 + math.log(z + 3.0) ** chi))
            )

        ratio = (2.0 * self.c0 * self.ct3 + self.ct1) / (4.0 * math.e * self.ct2)

        def mu2_integrand(z):
            return (z + 3.0) * math.exp(-((ratio * z) ** (1.0 / (1.0 + chi))))

        v1, d1 = _quad_with_check(mu1_integrand)
        v2, d2 = _quad_with_check(mu2_integrand)
        self.mu1 = 1.0 + v1
        self.mu2 = 1.0 + v2
        self.quad_rel_error = max(d1, d2)

    @property
    def ql(self):
        return self.q * self.block_len

    @property
    def T0(self):
        return (2.0 * self.c0 * self.ct3 + self.ct1) * float(self.gbar(self.ql))

    def T_tilde(self, z):
        return (2.0 * self.c0 * self.ct3 + self.ct1) * float(self.gbar(z + self.ql))

    def T_m(self, m):
        """Commutator-growth rate for operators commuting with their block."""
        base = (2.0 * self.c0 * self.ct3 + self.ct1) * float(self.gbar(m + self.ql))
        if m > 0:
            base += self.ct2 * self.gbar.g1 * float(m) ** self.gbar.chi
        return base

    def energy_distribution(self, y):
        """Sub-exponential decay envelope E_y of out-of-band weight; +inf
        for y <= 0 (the bound is vacuous there)."""
        if y <= 0:
            return math.inf
        chi = self.gbar.chi
        term1 = self.mu1 * math.exp(-y / (4.0 * math.e * self.T_tilde(y / self.T0)))
        term2 = self.mu2 * math.exp(
            -((y / (4.0 * math.e * self.ct2 * self.gbar.g1)) ** (1.0 / (1.0 + chi)))
        )
        return term1 + term2

    def epsilon_pair(self, tau):
        """(eps1, eps2) of the energy-cutoff theorem at offset tau."""
        y = tau - 4.0 * self.c0 * float(self.gbar(self.ql)) - 8.0 * self.T0
        eps1 = 2.0 * self.q * self.energy_distribution(y)
        if not math.isfinite(eps1) or eps1 >= 1.0:
            return eps1, math.inf
        eps2 = math.sqrt(
            eps1 / (1.0 - eps1) * 2.0 * self.q
            * (tau + 2.0 * self.c0 * float(self.gbar(self.ql)))
        )
        return eps1, eps2

    def interaction_truncation_bound(self):
        """Norm bound on the dropped non-adjacent-block interactions:
        4 eta1 eta2 q gbar(ql) (l^2+1) J(l)."""
        l = self.block_len
        return (
            4.0 * self.eta1 * self.eta2 * self.q * float(self.gbar(self.ql))
            * (l * l + 1.0) * float(self.profile(l))
        )

    def block_coupling_bound(self):
        """||h_{s,s+1}|| <= c0 * gbar(ql)."""
        return self.c0 * float(self.gbar(self.ql))


def multicommutator_bound_general(pc: PipelineConstants, m, ell):
    """Growth bound for m-fold commutators with a local unit-norm operator
    supported within distance ell of the cut (0^0 = 1 at m = 0)."""
    if m == 0:
        return 1.0
    ab = pc.profile.alpha_bar
    g1 = pc.gbar.g1
    chi = pc.gbar.chi
    t1 = 2.0**ab * (pc.ct1 * m * float(pc.gbar(m + ell))) ** m
    t2 = 2.0 * ((2.0 + ab) / ab) * (pc.ct2 * g1 * m ** (chi + 1.0)) ** m
    return t1 + t2


def multicommutator_norm_check(H_t, O, pc: PipelineConstants, m_max,
                               norm_tol=1e-6):
    """Measured ||ad_{H_t}^m(O)|| against (T_m m)^m ||O|| for m = 0..m_max.

    ``O`` must commute with its own block Hamiltonian for the bound to
    apply; the caller guarantees that.  Norms via power iteration (dense
    below the threshold).  Returns a CheckReport with a log-log growth
    slope in ``extra``.
    """
    from .report import CheckReport

    rep = CheckReport(check="multicommutator_norm")
    norm_O = operator_norm(O.matrix, tol=norm_tol)
    cur = O.matrix
    measured = [norm_O]
    for m in range(1, m_max + 1):
        cur = H_t.matrix @ cur - cur @ H_t.matrix
        measured.append(operator_norm(cur, tol=norm_tol))
    for m, nm in enumerate(measured):
        bound = (pc.T_m(m) * m) ** m * norm_O if m > 0 else norm_O
        rep.add(f"||ad^{m}(O)||", nm, bound, tolerance=1e-9)
    pos = [(m, nm) for m, nm in enumerate(measured) if m >= 1 and nm > 0]
    if len(pos) >= 2:
        xs = np.log([m for m, _ in pos])
        ys = np.log([nm for _, nm in pos])
        slope = float(np.polyfit(xs, ys, 1)[0])
        rep.extra["loglog_slope"] = slope
    rep.extra["measured"] = measured
    return rep
