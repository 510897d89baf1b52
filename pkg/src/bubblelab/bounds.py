"""Closed-form mean-curvature, area and slope bounds, plus checks against surfaces.

All evaluators are pure functions of their arguments.  Inequalities are
reported with a signed margin (positive means satisfied) instead of raising.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, UndefinedBoundError

REL_TOL = 1e-10


def unit_ball_volume(n: int) -> float:
    """omega_n via omega_n = 2 pi / n * omega_{n-2}, omega_0 = 1, omega_1 = 2."""
    if n < 0 or int(n) != n:
        raise InvalidInputError(f"dimension must be a non-negative integer, got {n}")
    n = int(n)
    w = 1.0 if n % 2 == 0 else 2.0
    for m in range(2 + n % 2, n + 1, 2):
        w *= 2.0 * math.pi / m
    return w


@dataclass(frozen=True)
class BoundsInput:
    """Statistics of a surface S in X^k x R^n (ambient dimension d = k + n).

    ``isoperimetric`` and ``soap_bubble`` select which inequalities apply.
    ``x0_measure`` is |X_0|, the measure of the region under the graph (n = 1).
    """

    d: int
    n: int
    v: float
    H: float
    rho0: float = 0.0
    rho1: float = float("nan")
    R0: float = 0.0
    C: float = float("nan")
    vol_X: float = float("nan")
    x0_measure: float = float("nan")
    isoperimetric: bool = False
    soap_bubble: bool = True

    def __post_init__(self):
        if self.n < 1 or self.d <= self.n:
            raise InvalidInputError(f"need 1 <= n < d, got d={self.d}, n={self.n}")
        if self.rho0 > self.rho1:
            raise InvalidInputError("rho0 must not exceed rho1")
        if self.R0 < 0:
            raise InvalidInputError("R0 is a max of a negative part and must be >= 0")

    @property
    def k(self) -> int:
        return self.d - self.n

    @property
    def omega_n(self) -> float:
        return unit_ball_volume(self.n)


def isop_H_bound(n: int, vol_X: float, v: float, obstacle: bool = False) -> float:
    """n (omega_n |X|)^(1/n) v^(-1/n); doubled for regions in X x closed ball."""
    if min(vol_X, v) <= 0 or n < 1:
        raise InvalidInputError("n, |X| and v must be positive")
    b = n * (unit_ball_volume(n) * vol_X) ** (1.0 / n) * v ** (-1.0 / n)
    return 2.0 * b if obstacle else b


@dataclass(frozen=True)
class H0Result:
    H0: float
    residual: float
    ric_nonneg: bool = False


def H0_large_bubble(d: int, n: int, R0: float) -> H0Result:
    """Positive root of H/(d-1) - d R0/H - (n-1) d/H = 0.

    For n = 1 and R0 = 0 there is no positive root; 0 is returned with the
    Ric >= 0 flag set (the sharper ric_nonneg_H_bound applies there).
    """
    if d < 2 or n < 1 or R0 < 0:
        raise InvalidInputError("need d >= 2, n >= 1, R0 >= 0")
    if n == 1 and R0 == 0:
        return H0Result(0.0, 0.0, ric_nonneg=True)
    # group the integer part first so a tiny R0 is not absorbed by rounding
    h = math.sqrt(d * (d - 1) * (R0 + (n - 1)))
    res = h / (d - 1) - (d * R0 + (n - 1) * d) / h
    return H0Result(h, abs(res), ric_nonneg=(R0 == 0))


def ric_nonneg_H_bound(d: int, n: int, rho1: float) -> float:
    if not rho1 > 0:
        raise InvalidInputError("rho1 must be positive")
    return (4.0 if n == 1 else 8.0) * (d - 1) / rho1


@dataclass(frozen=True)
class InequalityResult:
    name: str
    applicable: bool
    margin: float = float("nan")
    passed: Optional[bool] = None


def _result(name, lhs, rhs):
    # lhs <= rhs wanted; tolerance scales with the larger side
    margin = rhs - lhs
    ok = margin >= -REL_TOL * max(abs(lhs), abs(rhs), 1.0)
    return InequalityResult(name, True, margin, ok)


def check_area_H_volume(inp: BoundsInput, area: float) -> list:
    """Signed margins for the four area inequalities.

    area >= vH, area <= nHv/(n-1), area <= vH + 2|X0| and area below the
    cylinder of the same volume, each gated by its hypotheses.
    """
    out = []
    if inp.soap_bubble or inp.isoperimetric:
        out.append(_result("area-ge-vH", inp.v * inp.H, area))
    else:
        out.append(InequalityResult("area-ge-vH", False))
    if inp.n >= 2:
        out.append(_result("area-le-nHv/(n-1)", area, inp.n / (inp.n - 1) * inp.H * inp.v))
    else:
        out.append(InequalityResult("area-le-nHv/(n-1)", False))
    if inp.n == 1 and inp.x0_measure == inp.x0_measure:
        out.append(_result("area-le-vH+2X0", area, inp.v * inp.H + 2.0 * inp.x0_measure))
    else:
        out.append(InequalityResult("area-le-vH+2X0", False))
    if inp.isoperimetric and inp.vol_X == inp.vol_X:
        cyl = inp.n * (inp.omega_n * inp.vol_X) ** (1.0 / inp.n) * inp.v ** ((inp.n - 1) / inp.n)
        out.append(_result("area-le-cylinder", area, cyl))
    else:
        out.append(InequalityResult("area-le-cylinder", False))
    return out


def cylinder_stats(n: int, k: int, vol_X: float, r: float, isoperimetric: bool = False):
    """(BoundsInput, area) for the cylinder X x S(r) with H = (n-1)/r."""
    w = unit_ball_volume(n)
    v = vol_X * w * r**n
    area = vol_X * n * w * r ** (n - 1)
    inp = BoundsInput(d=k + n, n=n, v=v, H=(n - 1) / r, rho0=r, rho1=r, C=0.0,
                      vol_X=vol_X, isoperimetric=isoperimetric, soap_bubble=True)
    return inp, area


def bubble_stats(bp, g):
    """(BoundsInput, area) for a family member S_{s1} in Y x R (d = 3, n = 1)."""
    return BoundsInput(d=3, n=1, v=bp.V, H=bp.H, rho0=0.0, rho1=bp.u_max, C=bp.u_max,
                       x0_measure=bp.x0_measure, soap_bubble=True), bp.A_lat


@dataclass(frozen=True)
class SlopeConstants:
    C1: float
    log_C_prime: float

    @property
    def C_prime(self) -> float:
        return math.exp(self.log_C_prime) if self.log_C_prime < 709 else math.inf


def _log_expm1(x: float) -> float:
    return math.log(math.expm1(x)) if x < 30 else x + math.log1p(-math.exp(-x))


def slope_bound_constants(n: int, H: float, C: float, R0: float) -> SlopeConstants:
    """C1 and C' = e^C1 / (e^(C1/2) - 1) (1 + 20 C), with C' kept in log form."""
    if n < 1 or H < 0 or C < 0 or R0 < 0:
        raise InvalidInputError("need n >= 1 and non-negative H, C, R0")
    if n >= 2:
        c1 = max((18 * n + 27 * H) * C**2, R0)
    else:
        c1 = max(9 * (2 + H) * C**2, R0)
    if c1 == 0:
        raise UndefinedBoundError("C1 = 0 (C = 0 and R0 = 0): e^C1/(e^(C1/2) - 1) is undefined")
    return SlopeConstants(c1, c1 - _log_expm1(c1 / 2) + math.log1p(20 * C))


@dataclass(frozen=True)
class SlopeCheck:
    applicable: bool
    max_gradient: float
    passed: Optional[bool]


def verify_slope_bound(u, domain, C_prime: float) -> SlopeCheck:
    """Discrete max |grad u| against C'; requires min u > 1."""
    from .flow import grad_sq

    u = np.asarray(u, dtype=float)
    gmax = float(np.sqrt(np.max(grad_sq(u, domain))))
    if not np.min(u) > 1:
        return SlopeCheck(False, gmax, None)
    return SlopeCheck(True, gmax, gmax <= C_prime)


@dataclass(frozen=True)
class EnvelopeReport:
    """Empirical constants along a family sweep; only the H floor is asserted."""

    H_floor: float
    H_min: float
    floor_ok: bool
    osc_const: float
    H_times_max_u: float
    max_u_over_v: np.ndarray
    growth_guard_ok: bool


def sweep_envelopes(rows: Sequence, phi_s0: float, n: int = 1) -> EnvelopeReport:
    """Envelope constants from successful SweepRow entries.

    ``osc_const`` is max u - min u (min u = 0 on a closed bubble),
    ``H_times_max_u`` the smallest const with H <= const / max u, and
    max u / v^(1/n) is guarded to stay within 10x its first value.
    """
    good = [r for r in rows if r.ok]
    if not good:
        raise InvalidInputError("sweep has no successful members")
    H = np.array([r.H for r in good])
    v = np.array([r.V for r in good])
    um = np.array([r.u_max for r in good])
    floor = 1.0 / phi_s0
    ratio = um / v ** (1.0 / n)
    return EnvelopeReport(
        H_floor=floor, H_min=float(H.min()), floor_ok=bool(H.min() >= floor - 1e-12),
        osc_const=float(um.max()), H_times_max_u=float(np.max(H * um)),
        max_u_over_v=ratio, growth_guard_ok=bool(np.all(ratio <= 10 * ratio[0])))


REPORT_HEADER = ("inequality", "applicable", "margin", "pass")


def write_report_csv(results: Sequence[InequalityResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in results:
            margin = "" if not r.applicable else f"{r.margin:.17g}"
            passed = "" if r.passed is None else str(bool(r.passed)).lower()
            w.writerow((r.name, str(r.applicable).lower(), margin, passed))
