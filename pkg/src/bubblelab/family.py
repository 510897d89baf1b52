"""The CMC tori S_{s1} in Y x R, built in the tilt-angle parametrisation.

Along the quarter profile from the top point (s = 0) to the fold (s = s1,
y = 0) the tilt angle alpha runs over [0, pi/2] and satisfies the exact first
integral sin(alpha) = H phi(s) with H = 1/phi(s1).  In alpha the profile ODE

    ds/dalpha = cos(alpha) / (H phi_s),   du/dalpha = -sin(alpha) / (H phi_s)

is smooth up to the fold, so no improper integral ever has to be taken.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq

from ._parallel import pmap
from .errors import BubbleLabError, InvalidInputError, NumericalFailure
from .profile import WarpedGeometry

DEFAULT_NODES = 1000
MIN_NODES = 64


@dataclass(frozen=True)
class BubbleProfile:
    """Quarter profile of S_{s1} sampled on a uniform tilt-angle grid.

    ``u`` is the shifted height (zero at the fold), ``t`` the arclength from
    the top point, measured in the flat (s, y) plane.
    """

    s1: float
    H: float
    alpha: np.ndarray
    s: np.ndarray
    u: np.ndarray
    t: np.ndarray
    c: float
    V: float = float("nan")
    A_lat: float = float("nan")
    x0_measure: float = float("nan")

    @property
    def n_nodes(self) -> int:
        return len(self.alpha)

    @property
    def u_max(self) -> float:
        return float(self.u[0])

    def ds_dalpha(self, g: WarpedGeometry) -> np.ndarray:
        return np.cos(self.alpha) / (self.H * g.profile.phi_s(self.s))

    def dt_dalpha(self, g: WarpedGeometry) -> np.ndarray:
        return 1.0 / (self.H * g.profile.phi_s(self.s))

    def closed_curve(self):
        """The full closed profile C_u as (s, y), counter-clockwise from (s1, 0)."""
        s, u = self.s[::-1], self.u[::-1]
        q1 = (s, u)
        q2 = (-self.s[1:], self.u[1:])
        q3 = (-s[1:], -u[1:])
        q4 = (self.s[1:], -self.u[1:])
        xs = np.concatenate([q1[0], q2[0], q3[0], q4[0]])
        ys = np.concatenate([q1[1], q2[1], q3[1], q4[1]])
        return xs, ys


def _check_s1(g: WarpedGeometry, s1: float):
    p = g.profile
    if not s1 > 0:
        raise InvalidInputError(f"s1 must be positive, got {s1}")
    if p.s0 is not None and s1 >= p.s0:
        raise InvalidInputError(
            f"s1 = {s1:.6g} >= s0 = {p.s0:.6g}: at s1 = s0 the height integral "
            "tends to -infinity at least at a logarithmic rate, so no closed "
            "bubble exists")
    if s1 >= p.s_max:
        raise InvalidInputError(f"s1 = {s1:.6g} outside I = (-{p.s_max:.6g}, {p.s_max:.6g})")


def solve_profile(g: WarpedGeometry, s1: float, n_nodes: int = DEFAULT_NODES) -> BubbleProfile:
    """Integrate the tilt-angle system for S_{s1} on ``n_nodes`` uniform angles."""
    _check_s1(g, s1)
    if n_nodes < MIN_NODES:
        raise InvalidInputError(f"n_nodes must be >= {MIN_NODES}, got {n_nodes}")
    p = g.profile
    H = 1.0 / float(p.phi(s1))

    def rhs(a, y):
        d = H * float(p.phi_s(y[0]))
        return [math.cos(a) / d, -math.sin(a) / d, 1.0 / d]

    def slope_lost(a, y):
        return float(p.phi_s(y[0]))

    slope_lost.terminal = True
    slope_lost.direction = -1

    alpha = np.linspace(0.0, math.pi / 2, n_nodes)
    sol = solve_ivp(rhs, (0.0, math.pi / 2), [0.0, 0.0, 0.0], method="DOP853",
                    t_eval=alpha, events=slope_lost, rtol=1e-13, atol=1e-15)
    if sol.status != 0 or sol.y.shape[1] != n_nodes:
        raise NumericalFailure(f"profile integration for s1 = {s1:.6g} failed: "
                               f"phi_s <= 0 reached or {sol.message}")
    s, u, t = sol.y
    u = u - u[-1]
    bp = BubbleProfile(s1=float(s1), H=H, alpha=alpha, s=s, u=u, t=t, c=g.c)
    return BubbleProfile(
        s1=bp.s1, H=H, alpha=alpha, s=s, u=u, t=t, c=g.c,
        V=enclosed_volume(bp, g), A_lat=lateral_area(bp, g),
        x0_measure=4.0 * math.pi * g.c * float(g.F(s1)))


def mean_curvature_residual(bp: BubbleProfile, g: WarpedGeometry, skip_end: int = 3) -> float:
    """max |H(s) - 1/phi(s1)| from centred differences of the node sequence.

    u' and u'' are taken through the alpha parametrisation; the graph formula
    is then evaluated in the algebraically equal form that stays bounded at
    the fold, and the ``skip_end`` nodes nearest alpha = pi/2 are dropped.
    """
    da = bp.alpha[1] - bp.alpha[0]
    s, u = bp.s, bp.u
    sa = (s[2:] - s[:-2]) / (2 * da)
    ua = (u[2:] - u[:-2]) / (2 * da)
    saa = (s[2:] - 2 * s[1:-1] + s[:-2]) / da**2
    uaa = (u[2:] - 2 * u[1:-1] + u[:-2]) / da**2
    q = sa**2 + ua**2
    h_local = -(uaa * sa - ua * saa) / q**1.5 - ua / np.sqrt(q) * g.dlog_f(s[1:-1])
    res = np.abs(h_local - 1.0 / float(g.profile.phi(bp.s1)))
    if skip_end > 1:
        res = res[: -(skip_end - 1)]
    return float(np.max(res))


def enclosed_volume(bp: BubbleProfile, g: WarpedGeometry) -> float:
    """V = 8 pi c int_0^{s1} f u ds, by Simpson in alpha."""
    integrand = g.f(bp.s) * bp.u * bp.ds_dalpha(g)
    return 8.0 * math.pi * g.c * float(simpson(integrand, x=bp.alpha))


def lateral_area(bp: BubbleProfile, g: WarpedGeometry) -> float:
    """Total area of S_{s1}: 2 pi c times the f-weighted length of C_u.

    In alpha the integrand f sqrt(1+u'^2) ds becomes f / (H phi_s) dalpha.
    """
    integrand = g.f(bp.s) * bp.dt_dalpha(g)
    return 8.0 * math.pi * g.c * float(simpson(integrand, x=bp.alpha))


def volume_to_s1(g: WarpedGeometry, v: float, n_nodes: int = 400) -> float:
    """Invert the increasing map s1 -> V(s1)."""
    if not v > 0:
        raise InvalidInputError(f"volume must be positive, got {v}")
    p = g.profile
    top = p.s0 if p.s0 is not None else p.s_max
    # V grows only like log(1/(s0 - s1)); closer than 1e-7 the fold is unresolvable
    hi = top * (1.0 - 1e-7)

    def vol(s1):
        return solve_profile(g, s1, n_nodes).V

    v_hi = vol(hi)
    if v > v_hi:
        raise NumericalFailure(f"volume {v:.6g} exceeds the largest resolvable member "
                               f"(V = {v_hi:.6g} at s1 = s0(1 - 1e-7))")
    lo = top * 1e-6
    if v < vol(lo):
        lo = top * 1e-12
    return float(brentq(lambda x: vol(x) - v, lo, hi, xtol=1e-14, rtol=1e-12))


@dataclass(frozen=True)
class SweepRow:
    s1: float
    H: float = float("nan")
    V: float = float("nan")
    A_lat: float = float("nan")
    u_max: float = float("nan")
    beta_margin: float = float("nan")
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


SWEEP_HEADER = ("s1", "H", "V", "A_lat", "u_max", "beta_margin")


def family_sweep(g: WarpedGeometry, s1_list: Sequence[float],
                 n_nodes: int = DEFAULT_NODES, beta: Optional[float] = None) -> list:
    """One row per s1 (sorted); failed members keep their error code."""
    from .stability import beta as compute_beta

    s1_sorted = sorted(float(x) for x in s1_list)
    if not s1_sorted:
        return []
    if beta is None and g.profile.s0 is not None:
        beta = compute_beta(g)

    def member(s1):
        try:
            bp = solve_profile(g, s1, n_nodes)
        except BubbleLabError as exc:
            return SweepRow(s1=s1, error=exc.code)
        margin = float(g.profile.phi(s1)) / g.c - beta if beta is not None else float("nan")
        return SweepRow(s1=s1, H=bp.H, V=bp.V, A_lat=bp.A_lat, u_max=bp.u_max,
                        beta_margin=margin)

    return pmap(member, s1_sorted)


def _fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.17g}"


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([_fmt(r.s1), _fmt(r.H), _fmt(r.V), _fmt(r.A_lat),
                        _fmt(r.u_max), _fmt(r.beta_margin)])


def write_profile_csv(bp: BubbleProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("alpha", "s", "u", "t"))
        for row in zip(bp.alpha, bp.s, bp.u, bp.t):
            w.writerow([_fmt(float(x)) for x in row])
