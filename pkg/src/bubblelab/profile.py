"""Generating function phi and the warped metric ds^2 + c^2 f(s)^2 dtheta^2 + dy^2.

The warp factor is never supplied directly: it is rebuilt from ``phi`` through
the regularised exponential-integral formula and normalised so that
``f(0) = 1``.  The constant ``c`` only enters metric level quantities, so the
:class:`WarpedGeometry` keeps it alongside ``f`` instead of folding it in.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import InvalidInputError, NumericalFailure

DEFAULT_EPS = 0.05
# Half-width of the symmetric stencil used for the phi-tilde limit at s = 0.
TILDE_H = 1e-4
# Below this |s| the ratios (1 - phi_s)/phi and its derivative are replaced
# by low order even/odd interpolants to dodge cancellation.
ORIGIN_BAND = 1e-3

CLOSED_FORM_TOL = 1e-8
SAMPLED_TOL = 1e-4

Func = Callable[[np.ndarray], np.ndarray]


class S0PatternWarning(UserWarning):
    """phi_s vanishes at s0 without turning negative right after it."""


@dataclass(frozen=True)
class PhiProfile:
    """Odd generating function on the interval (-s_max, s_max)."""

    kind: str
    s_max: float
    phi: Func
    phi_s: Func
    phi_ss: Func
    s0: Optional[float] = None
    name: str = ""

    def tilde(self, s):
        """(phi(s) - s)/s^2, continued linearly through the origin."""
        s = np.asarray(s, dtype=float)
        h = TILDE_H
        tp = (float(self.phi(h)) - h) / h**2
        tm = (float(self.phi(-h)) + h) / h**2
        mid = 0.5 * (tp + tm)
        slope = (tp - tm) / (2 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            direct = (self.phi(s) - s) / s**2
        return np.where(np.abs(s) < h, mid + slope * s, direct)


def _profile_from_callables(kind, s_max, phi, phi_s, phi_ss, s0, name):
    return PhiProfile(kind=kind, s_max=float(s_max), phi=phi, phi_s=phi_s,
                      phi_ss=phi_ss, s0=s0, name=name)


def make_builtin_profile(name: str, eps: float = DEFAULT_EPS) -> PhiProfile:
    """Return ``ex1`` (phi = sin s) or ``ex2`` (phi = s - s^3)."""
    if name == "ex1":
        return _profile_from_callables(
            "builtin-ex1", math.pi - eps,
            lambda s: np.sin(s), lambda s: np.cos(s), lambda s: -np.sin(s),
            math.pi / 2, "ex1")
    if name == "ex2":
        return _profile_from_callables(
            "builtin-ex2", 1.0 - eps,
            lambda s: s - s**3, lambda s: 1.0 - 3.0 * s**2, lambda s: -6.0 * s,
            1.0 / math.sqrt(3.0), "ex2")
    raise InvalidInputError(f"unknown builtin profile {name!r}; expected ex1 or ex2")


def profile_from_functions(phi: Func, phi_s: Func, phi_ss: Func, s_max: float,
                           name: str = "user", detect: bool = True) -> PhiProfile:
    p = _profile_from_callables("user-closed-form", s_max, phi, phi_s, phi_ss,
                                None, name)
    if detect:
        s0 = detect_s0(p)
        if s0 is not None:
            p = _profile_from_callables(p.kind, s_max, phi, phi_s, phi_ss, s0, name)
    return p


def profile_from_samples(s, phi, name: str = "sampled") -> PhiProfile:
    """Cubic-spline profile from samples; one-sided data is mirrored oddly."""
    s = np.asarray(s, dtype=float)
    phi = np.asarray(phi, dtype=float)
    order = np.argsort(s)
    s, phi = s[order], phi[order]
    if not np.any(s == 0.0):
        raise InvalidInputError("sampled profile must contain s = 0")
    if s[0] >= 0.0:
        s = np.concatenate([-s[:0:-1], s])
        phi = np.concatenate([-phi[:0:-1], phi])
    if len(s) < 5:
        raise InvalidInputError("sampled profile needs at least 3 samples in s >= 0")
    spline = CubicSpline(s, phi)
    d1, d2 = spline.derivative(1), spline.derivative(2)
    s_max = min(s[-1], -s[0])
    p = _profile_from_callables(
        "user-sampled", s_max,
        lambda x: spline(x), lambda x: d1(x), lambda x: d2(x), None, name)
    s0 = detect_s0(p)
    if s0 is not None:
        p = _profile_from_callables(p.kind, s_max, p.phi, p.phi_s, p.phi_ss, s0, name)
    return p


def load_profile_csv(path) -> PhiProfile:
    """Read a two-column ``s,phi`` CSV."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["s", "phi"]:
            raise InvalidInputError(f"{path}: expected header 's,phi', got {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    if not rows:
        raise InvalidInputError(f"{path}: no samples")
    s, phi = zip(*rows)
    return profile_from_samples(s, phi, name=path.stem)


def resolve_profile(selector: str, eps: float = DEFAULT_EPS) -> PhiProfile:
    if selector in ("ex1", "ex2"):
        return make_builtin_profile(selector, eps)
    if not Path(selector).is_file():
        raise InvalidInputError(f"profile {selector!r} is not ex1, ex2 or an existing CSV file")
    return load_profile_csv(selector)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    detail: str


def validate_profile(p: PhiProfile, n_grid: int = 2001) -> list:
    """Check oddness, phi(0)=0 with phi'(0)=1, and the sign pattern.

    Oddness is a gate: an even or lopsided function is reported as
    ``not-odd`` alone, since the slope and sign criteria presuppose it.
    """
    tol = SAMPLED_TOL if p.kind == "user-sampled" else CLOSED_FORM_TOL
    s = np.linspace(0.0, p.s_max, n_grid)[1:]
    scale = max(1.0, float(np.max(np.abs(p.phi(s)))))
    odd_defect = float(np.max(np.abs(p.phi(-s) + p.phi(s))))
    if odd_defect > tol * scale or abs(float(p.phi(0.0))) > tol:
        return [Diagnostic("not-odd", f"max |phi(-s)+phi(s)| = {odd_defect:.3g}")]
    out = []
    slope = float(p.phi_s(0.0))
    if abs(slope - 1.0) > tol:
        out.append(Diagnostic("wrong-slope-at-zero", f"phi'(0) = {slope:.6g}"))
    bad = []
    vals = p.phi(s)
    if np.any(vals <= 0.0):
        bad.append(f"phi <= 0 at s = {s[np.argmax(vals <= 0.0)]:.6g}")
    if p.s0 is not None:
        inner = s[s < p.s0]
        ds = p.phi_s(np.concatenate([[0.0], inner]))
        if np.any(ds <= 0.0):
            bad.append("phi_s <= 0 before s0")
    if bad:
        out.append(Diagnostic("sign-violation", "; ".join(bad)))
    return out


def detect_s0(p: PhiProfile, n_grid: int = 4001) -> Optional[float]:
    """First local maximum of phi on (0, s_max), or None."""
    s = np.linspace(0.0, p.s_max, n_grid)[1:]
    ds = p.phi_s(s)
    nonpos = np.flatnonzero(ds <= 0.0)
    if nonpos.size == 0:
        return None
    i = int(nonpos[0])
    if ds[i] == 0.0:
        s0 = float(s[i])
    else:
        lo = s[i - 1] if i > 0 else 0.0
        s0 = float(brentq(lambda x: float(p.phi_s(x)), lo, s[i], xtol=1e-13))
    after = s[(s > s0) & (s <= min(p.s_max, s0 + 0.05 * p.s_max))][:5]
    if after.size == 0 or np.any(p.phi_s(after) >= 0.0):
        warnings.warn(f"phi_s does not turn negative right after s0 = {s0:.6g}",
                      S0PatternWarning, stacklevel=2)
    return s0


class WarpedGeometry:
    """Warp factor f rebuilt from phi, its antiderivative F, and the constant c.

    ``f`` is even and ``F`` odd; both are integrated once over [0, s_max]
    with an 8th-order dense-output integrator and reflected on demand.
    """

    def __init__(self, profile: PhiProfile, c: float = 1.0, _solution=None):
        if not c > 0:
            raise InvalidInputError(f"warp constant c must be positive, got {c}")
        self.profile = profile
        self.c = float(c)
        self._sol = _solution if _solution is not None else self._integrate()

    def _integrate(self):
        p = self.profile
        tilde = p.tilde

        def rhs(s, y):
            t = float(tilde(s))
            den = 1.0 + s * t
            return [-t / den, math.exp(y[0]) / den]

        sol = solve_ivp(rhs, (0.0, p.s_max), [0.0, 0.0], method="DOP853",
                        rtol=1e-13, atol=1e-15, dense_output=True)
        if not sol.success:
            raise NumericalFailure(f"warp-factor quadrature failed: {sol.message}")
        return sol.sol

    def with_c(self, c: float) -> "WarpedGeometry":
        return WarpedGeometry(self.profile, c, _solution=self._sol)

    def _eval(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        if np.any(a > self.profile.s_max * (1 + 1e-12)):
            raise InvalidInputError(f"s outside I = (-{self.profile.s_max}, {self.profile.s_max})")
        y = self._sol(np.minimum(a.ravel(), self.profile.s_max))
        return s, y[0].reshape(s.shape), y[1].reshape(s.shape)

    def f(self, s):
        s, integral, _ = self._eval(s)
        return np.exp(integral) / (1.0 + s * self.profile.tilde(s))

    def F(self, s):
        s, _, big_f = self._eval(s)
        return np.sign(s) * big_f

    def dlog_f(self, s):
        """f_s/f = (1 - phi_s)/phi, odd."""
        return _origin_regular(self._w_raw, s, odd=True)

    def d2log_f(self, s):
        """(log f)_ss, even."""
        return _origin_regular(self._ws_raw, s, odd=False)

    def f_s(self, s):
        return self.f(s) * self.dlog_f(s)

    def f_ss(self, s):
        w = self.dlog_f(s)
        return self.f(s) * (self.d2log_f(s) + w * w)

    def _w_raw(self, s):
        p = self.profile
        return (1.0 - p.phi_s(s)) / p.phi(s)

    def _ws_raw(self, s):
        p = self.profile
        phi, dphi = p.phi(s), p.phi_s(s)
        return -p.phi_ss(s) / phi - (1.0 - dphi) * dphi / phi**2


def _origin_regular(fn, s, odd: bool):
    """Evaluate fn, swapping in a two-term parity interpolant near s = 0."""
    s = np.asarray(s, dtype=float)
    d = ORIGIN_BAND
    out = np.empty_like(s)
    near = np.abs(s) < d
    if np.any(~near):
        out[~near] = fn(s[~near])
    if np.any(near):
        v1, v2 = float(fn(d)), float(fn(2 * d))
        x = s[near]
        if odd:
            # v = a1 x + a3 x^3 through (d, v1), (2d, v2)
            a3 = (v2 - 2 * v1) / (6 * d**3)
            a1 = v1 / d - a3 * d**2
            out[near] = a1 * x + a3 * x**3
        else:
            b2 = (v2 - v1) / (3 * d**2)
            b0 = v1 - b2 * d**2
            out[near] = b0 + b2 * x**2
    return out


def f_from_phi(p: PhiProfile, c: float = 1.0) -> WarpedGeometry:
    return WarpedGeometry(p, c)


def gauss_curvature(g: WarpedGeometry, s):
    """Gaussian curvature -f_ss/f of (Y, G_c); independent of c."""
    w = g.dlog_f(s)
    return -(g.d2log_f(s) + w * w)


def _grid(interval, n):
    a, b = interval
    return np.linspace(a, b, n)


def log_f_convexity(g: WarpedGeometry, interval, n_grid: int = 20001) -> float:
    """Minimum of (log f)_ss over ``interval`` on a dense grid."""
    return float(np.min(g.d2log_f(_grid(interval, n_grid))))


def ricci_bound_R0(g: WarpedGeometry, interval, n_grid: int = 20001) -> float:
    """R0 = max (f_ss/f)^+ : the most negative Ricci direction is tangent to Y."""
    s = _grid(interval, n_grid)
    w = g.dlog_f(s)
    return float(max(0.0, np.max(g.d2log_f(s) + w * w)))
