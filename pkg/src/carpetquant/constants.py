"""Quantization dimension and the constants that drive the certificates.

The dimension s_r of order r is the unique root of

    lhs(s) = (sum_G (p_ij m^-r)^(s/(s+r)))^theta
             * (sum_{G_y} (q_j m^-r)^(s/(s+r)))^(1-theta) = 1,

strictly decreasing in s from lhs(0) = card(G)^theta card(G_y)^(1-theta) > 1
down to m^-r < 1.  All the derived constants below are explicit functions of
the root; they bound the certificate inequalities checked in antichain.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .carpet import CarpetSpec, derive_indices

__all__ = ["NoBracket", "SpectralConstants", "lhs", "solve_sr", "constants"]


class NoBracket(ArithmeticError):
    """lhs(0) <= 1, so no root exists; impossible for a validated carpet."""


@dataclass(frozen=True)
class SpectralConstants:
    """Solved dimension and the explicit constants used by every certificate.

    t_r = s_r/(s_r+r) is the moment exponent.  P and Q are the cell and row
    spectral sums at t_r (P >= 1 >= Q > 0, with P^theta Q^(1-theta) = 1).
    eta_lo = min p_ij q_k m^-r bounds one refinement step of a weight from
    below, eta_hi = (max_j q_j m^-r)^t_r bounds one step of an energy from
    above.  H1 is the minimal power with eta_hi^H1 < eta_lo; it caps both the
    depth and the mass of the overlap families.  xi bounds the one-level
    energy sum of a subtree, H2 the energy spread inside one construction
    level, M the depth of the comparable-descendant family, H3 its total
    energy, and H4/H5 the upper/lower coefficients of the codeword-count band.
    """

    r: float
    s_r: float
    t_r: float
    P: float
    Q: float
    eta_lo: float
    eta_hi: float
    H1: int
    xi: float
    H2: float
    M: int
    H3: float
    H4: float
    H5: float


def lhs(spec: CarpetSpec, r: float, s: float) -> float:
    """Left side of the dimension equation at candidate dimension s >= 0."""
    if r <= 0:
        raise ValueError(f"order exponent must be > 0, got {r}")
    if s < 0:
        raise ValueError(f"candidate dimension must be >= 0, got {s}")
    idx = derive_indices(spec)
    t = s / (s + r)
    log_mr = -r * math.log(spec.m)
    cell_sum = math.fsum(math.exp(t * (math.log(p) + log_mr)) for _, _, p in spec.entries)
    row_sum = math.fsum(math.exp(t * (math.log(qj) + log_mr)) for _, qj in idx.q)
    return math.exp(idx.theta * math.log(cell_sum) + (1.0 - idx.theta) * math.log(row_sum))


def solve_sr(spec: CarpetSpec, r: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Solve lhs(s) = 1 by bracketing and bisection.

    The bracket [0, S] is grown by doubling until lhs(S) < 1; bisection then
    runs until the residual |lhs(s)-1| falls within tol (at most max_iter
    halvings).  Bisection is deliberate: every iterate is certified by a sign,
    so no smoothness assumptions enter the solver.
    """
    if lhs(spec, r, 0.0) <= 1.0:
        raise NoBracket("lhs(0) <= 1: carpet admits no positive dimension root")
    lo, hi = 0.0, 2.0
    while lhs(spec, r, hi) >= 1.0:
        lo, hi = hi, 2.0 * hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        value = lhs(spec, r, mid)
        if abs(value - 1.0) <= tol:
            return mid
        if value > 1.0:
            lo = mid
        else:
            hi = mid
    raise ArithmeticError(
        f"bisection did not reach residual {tol} in {max_iter} iterations (bracket [{lo}, {hi}])"
    )


def constants(spec: CarpetSpec, r: float, tol: float = 1e-12) -> SpectralConstants:
    """Solve for s_r and evaluate every derived constant at the root."""
    idx = derive_indices(spec)
    s = solve_sr(spec, r, tol=tol)
    t = s / (s + r)
    log_mr = -r * math.log(spec.m)

    P = math.fsum(math.exp(t * (math.log(p) + log_mr)) for _, _, p in spec.entries)
    Q = math.fsum(math.exp(t * (math.log(qj) + log_mr)) for _, qj in idx.q)

    q_of = dict(idx.q)
    eta_lo = min(p * q_of[k] * spec.m ** -r for _, _, p in spec.entries for k in idx.g_y)
    q_bar = max(q_of.values())
    eta_hi = math.exp(t * (math.log(q_bar) + log_mr))

    log_eta_lo = math.log(eta_lo)
    log_eta_hi = math.log(eta_hi)
    H1 = 1
    while H1 * log_eta_hi >= log_eta_lo:
        H1 += 1

    xi = max(
        math.fsum((p / q_of[j]) ** t for i, jj, p in spec.entries if jj == j)
        for j in idx.g_y
    )
    H2 = P**3 * Q**-2 * math.exp(-t * log_eta_lo)
    M = 1
    while M * log_eta_hi >= -math.log(H2):
        M += 1
    H3 = math.fsum(xi**h for h in range(M + 1))
    H4 = P * P / Q
    H5 = (1.0 / H3) * Q * Q / (P * P)

    return SpectralConstants(
        r=r, s_r=s, t_r=t, P=P, Q=Q,
        eta_lo=eta_lo, eta_hi=eta_hi,
        H1=H1, xi=xi, H2=H2, M=M, H3=H3, H4=H4, H5=H5,
    )
