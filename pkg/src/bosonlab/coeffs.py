"""Exact integer coefficient tables and elementary combinatorial checks.

Everything here uses exact (Gaussian-)integer arithmetic; floating point
only enters when the tables are compared against assembled operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def commutator_coefficient(k, m, n):
    """C_{k,m,n} = k! * binom(m,k) * binom(n,k) as an exact integer.

    These drive the reordering identity
    [A^m, B^n] = sum_k C_{k,m,n} B^{n-k} A^{m-k} for [A, B] = 1; with
    A = -i*phi, B = pi it gives
    [phi^m, pi^n] = sum_k i^k C_{k,m,n} pi^{n-k} phi^{m-k}.
    """
    if k < 0 or m < 0 or n < 0:
        raise ValueError("indices must be non-negative")
    return math.factorial(k) * math.comb(m, k) * math.comb(n, k)


def commutator_coefficients(m, n):
    """Table {k: C_{k,m,n}} for k = 1..min(m, n)."""
    if m < 1 or n < 1:
        raise ValueError("m, n >= 1 required")
    return {k: commutator_coefficient(k, m, n) for k in range(1, min(m, n) + 1)}


class GaussInt(tuple):
    """Gaussian integer (re, im) with exact arithmetic."""

    __slots__ = ()

    def __new__(cls, re=0, im=0):
        return super().__new__(cls, (int(re), int(im)))

    @property
    def re(self):
        return self[0]

    @property
    def im(self):
        return self[1]

    def __add__(self, other):
        return GaussInt(self.re + other.re, self.im + other.im)

    def __mul__(self, other):
        if isinstance(other, GaussInt):
            return GaussInt(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
            )
        return GaussInt(self.re * other, self.im * other)

    __rmul__ = __mul__

    def abs2(self):
        return self.re * self.re + self.im * self.im

    def to_complex(self):
        return complex(self.re, self.im)

    def __bool__(self):
        return self.re != 0 or self.im != 0


def lambda_coefficients(s):
    """Exact expansion coefficients of (phi^2 + pi^2)^s over phi^m1 pi^m2.

    Returns {(m1, m2): GaussInt} with (phi^2+pi^2)^s =
    sum lambda_{m1,m2} phi^m1 pi^m2.  Seeded at s=1 with
    lambda_{2,0} = lambda_{0,2} = 1 and grown by multiplying one more
    (phi^2 + pi^2) from the left, reordering pi^2 phi^m1 =
    phi^m1 pi^2 - 2i m1 phi^(m1-1) pi - m1(m1-1) phi^(m1-2):

        lambda^(s+1)_{a,b} = lambda^(s)_{a-2,b} + lambda^(s)_{a,b-2}
                             - 2i (a+1) lambda^(s)_{a+1,b-1}
                             - (a+2)(a+1) lambda^(s)_{a+2,b}
    """
    if s < 1:
        raise ValueError("s >= 1 required")
    table = {(2, 0): GaussInt(1, 0), (0, 2): GaussInt(1, 0)}
    for step in range(1, s):
        limit = 2 * (step + 1)
        new = {}
        for a in range(0, limit + 1):
            for b in range(0, limit + 1 - a):
                acc = GaussInt(0, 0)
                prev = table.get((a - 2, b))
                if prev:
                    acc = acc + prev
                prev = table.get((a, b - 2))
                if prev:
                    acc = acc + prev
                prev = table.get((a + 1, b - 1))
                if prev:
                    acc = acc + GaussInt(0, -2 * (a + 1)) * prev
                prev = table.get((a + 2, b))
                if prev:
                    acc = acc + GaussInt(-(a + 2) * (a + 1), 0) * prev
                if acc:
                    new[(a, b)] = acc
        table = new
    return table


def lambda_bound_holds(s, table=None):
    """Exact check of |lambda^(s)_{m1,m2}| <= 4^s s^(2s-m1-m2) for all entries."""
    if table is None:
        table = lambda_coefficients(s)
    for (m1, m2), val in table.items():
        if m1 > 2 * s or m2 > 2 * s or m1 + m2 > 2 * s:
            return False
        bound = 4**s * s ** (2 * s - m1 - m2)
        if val.abs2() > bound * bound:
            return False
    return True


def binomial_bound_holds(m1, m2):
    """binom(m1+m2, m1) <= (m1+m2)^(m1+m2) / (m1^m1 m2^m2), with 0^0 = 1.

    Checked exactly: binom * m1^m1 * m2^m2 <= (m1+m2)^(m1+m2).
    """
    lhs = math.comb(m1 + m2, m1) * m1**m1 * m2**m2
    return lhs <= (m1 + m2) ** (m1 + m2)


def binomial_lemma_check(max_m):
    """Exhaustive binomial bound check for 0 <= m1, m2 <= max_m."""
    failures = [
        (m1, m2)
        for m1 in range(max_m + 1)
        for m2 in range(max_m + 1)
        if not binomial_bound_holds(m1, m2)
    ]
    return {"max_m": max_m, "failures": failures, "passed": not failures}


# ---------------------------------------------------------------------------
# number-sequence lemma
# ---------------------------------------------------------------------------


@dataclass
class SequenceLemmaResult:
    zeta: float
    x: np.ndarray
    a_max: np.ndarray  # saturated sequence (oracle maximum), a_0 = 1
    bound: np.ndarray  # closed form ((1 - sqrt(1-4 zeta^2))/(2 zeta))^m x_0/x_m
    passed: bool
    max_ratio: float


def sequence_lemma_bound(zeta, x, a0=1.0):
    """Closed-form cap a_m <= base^m * x_0 a_0 / x_m, base from zeta."""
    x = np.asarray(x, dtype=float)
    base = (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * zeta**2))) / (2.0 * zeta)
    m = np.arange(len(x))
    return base**m * x[0] * a0 / x


def sequence_lemma_check(x, zeta, sweeps=10000, seeds=8, rng=None) -> SequenceLemmaResult:
    """Saturate a_m <= zeta (x_{m-1} a_{m-1} + x_{m+1} a_{m+1}) / x_m.

    The feasible maximum of each a_m (with a_0 fixed) is the fixpoint of
    iterating the constraints as equalities from above; random feasible
    seeds guard against spuriously settling on a smaller fixpoint.  The
    top index m_bar has no upper neighbour, so its constraint drops the
    a_{m+1} term.
    """
    if not (0.0 < zeta <= 0.5):
        raise ValueError("zeta must lie in (0, 1/2]")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive")
    mbar = len(x) - 1
    if mbar < 1:
        raise ValueError("need at least two entries")
    rng = rng or np.random.default_rng(0)

    def saturate(a):
        a = a.copy()
        for _ in range(sweeps):
            prev = a.copy()
            for m in range(1, mbar + 1):
                up = zeta * x[m - 1] * a[m - 1] / x[m]
                if m < mbar:
                    up += zeta * x[m + 1] * a[m + 1] / x[m]
                a[m] = up
            if np.allclose(a, prev, rtol=1e-14, atol=0.0):
                break
        return a

    best = np.zeros(mbar + 1)
    best[0] = 1.0
    for trial in range(seeds):
        a = np.zeros(mbar + 1)
        a[0] = 1.0
        if trial:
            a[1:] = rng.uniform(0.0, 1.0, mbar)
        best = np.maximum(best, saturate(a))

    bound = sequence_lemma_bound(zeta, x)
    ratios = best[1:] / bound[1:]
    return SequenceLemmaResult(
        zeta=float(zeta),
        x=x,
        a_max=best,
        bound=bound,
        passed=bool(np.all(best <= bound * (1 + 1e-9))),
        max_ratio=float(ratios.max()),
    )
