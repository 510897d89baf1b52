"""Index form, Jacobi operator spectra and the stability verdict for S_{s1}.

The surface is C_u x S^1 with induced metric dt^2 + c^2 f^2 dtheta^2, t the
arclength of the closed profile C_u.  A Fourier mode a(t) cos(k theta) has
index form proportional to

    int (a_t^2 + (P + k^2 / (c^2 f^2)) a^2) c f dt,

so each (k, parity in s, parity in y) sector is a Sturm-Liouville problem on
the quarter curve from the top point (s = 0) to the fold (y = 0).  Parity in
s sets the boundary condition at the top point and parity in y the one at
the fold: Neumann when even, Dirichlet when odd.

The discretisation is the usual symmetric finite-volume one (midpoint
conductances, lumped half-cell masses at the ends), which turns every
sector into a symmetric tridiagonal pencil.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq, minimize_scalar

from ._parallel import pmap
from .errors import InvalidInputError, NumericalFailure
from .family import BubbleProfile
from .profile import WarpedGeometry

PARITIES = ("even", "odd")


@dataclass(frozen=True)
class IndexCoefficients:
    """Per-node coefficients of the index form in (s, theta) coordinates.

    ``B`` is infinite at the fold node, where the s coordinate degenerates.
    """

    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    II2: np.ndarray
    ric_nn: np.ndarray


def _cos_alpha(bp: BubbleProfile) -> np.ndarray:
    # sin(pi/2 - alpha) is exactly zero at the fold node, cos(alpha) is not
    return np.sin(math.pi / 2 - bp.alpha)


def index_coefficients(bp: BubbleProfile, g: WarpedGeometry) -> IndexCoefficients:
    p = g.profile
    s = bp.s
    H = bp.H
    phi, dphi, ddphi = p.phi(s), p.phi_s(s), p.phi_ss(s)
    f = g.f(s)
    cos_a = _cos_alpha(bp)
    core = -phi * ddphi - dphi
    A = g.c * f * cos_a
    with np.errstate(divide="ignore"):
        B = g.c * f * H**2 * core / cos_a
    P = H**2 * core
    II2 = H**2 * (dphi**2 + (dphi - 1.0) ** 2)
    w = g.dlog_f(s)
    ric_nn = -(g.d2log_f(s) + w * w) * H**2 * phi**2
    return IndexCoefficients(A=A, B=B, P=P, II2=II2, ric_nn=ric_nn)


def _beta_integrand(g: WarpedGeometry, s, s1: Optional[float] = None):
    p = g.profile
    dphi = p.phi_s(s) if s1 is None else float(p.phi_s(s1))
    return g.f(s) ** 2 * np.abs(-p.phi(s) * p.phi_ss(s) - dphi)


def beta(g: WarpedGeometry, literal_s1: Optional[float] = None, n_grid: int = 10_000) -> float:
    """Stability threshold: beta^2 = max over [0, s0] of f^2 |-phi phi_ss - phi_s|.

    ``literal_s1`` switches to the variant with the constant phi_s(s1) in
    place of phi_s, for comparison only.
    """
    p = g.profile
    if p.s0 is None:
        raise InvalidInputError("beta needs s0: phi has no first local maximum")
    s = np.linspace(0.0, p.s0, n_grid)
    vals = _beta_integrand(g, s, literal_s1)
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, n_grid - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: -float(_beta_integrand(g, x, literal_s1)),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        best = max(best, -float(res.fun))
    return math.sqrt(best)


def inverse_A_plus_B_min(bp: BubbleProfile, g: WarpedGeometry) -> float:
    """min of 1/A + B over the nodes off the fold (the k = 1 potential in s, theta)."""
    co = index_coefficients(bp, g)
    return float(np.min(1.0 / co.A[:-1] + co.B[:-1]))


def critical_ratio(g: WarpedGeometry, s1: float, n_grid: int = 10_000) -> float:
    """Smallest phi(s1)/c above which 1/A + B > 0 on S_{s1}.

    1/A + B has the sign of 1 - c^2 f^2 (phi phi_ss + phi_s) / phi(s1)^2, so
    the cutoff is the max over [0, s1] of f^2 (phi phi_ss + phi_s)^+.  This is
    at most beta: beta maximises |.| over the longer interval [0, s0].
    """
    p = g.profile
    s = np.linspace(0.0, s1, n_grid)
    val = g.f(s) ** 2 * np.maximum(p.phi(s) * p.phi_ss(s) + p.phi_s(s), 0.0)
    return math.sqrt(float(np.max(val)))


@dataclass(frozen=True)
class Sector:
    """Symmetric tridiagonal form of one sector: D^-1/2 K D^-1/2."""

    k: int
    s_parity: str
    y_parity: str
    nodes: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    mass: np.ndarray

    def apply(self, a: np.ndarray) -> np.ndarray:
        """Discrete L_k a = M^-1 K a on the sector's free nodes."""
        sq = np.sqrt(self.mass)
        b = a * sq
        out = self.diag * b
        out[:-1] += self.offdiag * b[1:]
        out[1:] += self.offdiag * b[:-1]
        return out / sq

    def eigen(self, m: Optional[int] = None, vectors: bool = False):
        n = len(self.diag)
        kw = {}
        if m is not None and m < n:
            kw = dict(select="i", select_range=(0, m - 1))
        try:
            return eigh_tridiagonal(self.diag, self.offdiag, eigvals_only=not vectors,
                                    lapack_driver="stemr" if vectors else "auto", **kw)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"tridiagonal eigensolver failed: {exc}") from exc


def assemble_sector(t, w, potential, left: str, right: str, k: int = 0,
                    s_parity: str = "", y_parity: str = "") -> Sector:
    """Finite-volume pencil for -(w a_t)_t / w + potential * a on nodes ``t``.

    ``left``/``right`` are 'even' (Neumann) or 'odd' (Dirichlet).
    """
    t = np.asarray(t, dtype=float)
    h = np.diff(t)
    if np.any(h <= 0):
        h = -h
        if np.any(h <= 0):
            raise NumericalFailure("sector nodes are not strictly monotone")
    w_half = 0.5 * (w[1:] + w[:-1])
    cond = w_half / h
    n = len(t)
    mass = np.empty(n)
    mass[1:-1] = w[1:-1] * 0.5 * (h[1:] + h[:-1])
    mass[0] = w[0] * 0.5 * h[0]
    mass[-1] = w[-1] * 0.5 * h[-1]
    stiff = mass * potential
    stiff[:-1] += cond
    stiff[1:] += cond
    off = -cond
    lo = 1 if left == "odd" else 0
    hi = n - 1 if right == "odd" else n
    idx = np.arange(lo, hi)
    m = mass[lo:hi]
    d = stiff[lo:hi] / m
    e = off[lo:hi - 1] / np.sqrt(m[:-1] * m[1:])
    return Sector(k=k, s_parity=s_parity, y_parity=y_parity, nodes=idx,
                  diag=d, offdiag=e, mass=m)


def _sector_data(bp: BubbleProfile, g: WarpedGeometry):
    p = g.profile
    f = g.f(bp.s)
    P = bp.H**2 * (-p.phi(bp.s) * p.phi_ss(bp.s) - p.phi_s(bp.s))
    return bp.t, g.c * f, P, f


def build_sector(bp: BubbleProfile, g: WarpedGeometry, k: int, s_parity: str,
                 y_parity: str, _data=None) -> Sector:
    t, w, P, f = _data if _data is not None else _sector_data(bp, g)
    pot = P + k**2 / (g.c**2 * f**2)
    return assemble_sector(t, w, pot, s_parity, y_parity, k, s_parity, y_parity)


def jacobi_spectrum(bp: BubbleProfile, g: WarpedGeometry, k_max: int = 16, m: int = 6) -> dict:
    """Lowest ``m`` eigenvalues of every (k, s-parity, y-parity) sector, k <= k_max."""
    if k_max < 1:
        raise InvalidInputError(f"k_max must be >= 1, got {k_max}")
    data = _sector_data(bp, g)
    keys = [(k, sp, yp) for k in range(k_max + 1) for sp in PARITIES for yp in PARITIES]

    def one(key):
        sec = build_sector(bp, g, *key, _data=data)
        return sec.eigen(m)

    return dict(zip(keys, pmap(one, keys)))


def constrained_lowest(sector: Sector, v_nodes: np.ndarray) -> float:
    """Lowest eigenvalue on the mass-orthogonal complement of ``v_nodes``.

    Roots of the secular equation sum z_i^2 / (lambda_i - mu) = 0 interlace
    the unconstrained spectrum; eigenvectors already orthogonal to the
    constraint stay admissible as they are.
    """
    lam, q = sector.eigen(vectors=True)
    v = v_nodes * np.sqrt(sector.mass)
    v = v / np.linalg.norm(v)
    z = q.T @ v
    tiny = 1e-13
    live = np.flatnonzero(np.abs(z) > tiny)
    free = [lam[i] for i in range(len(lam)) if abs(z[i]) <= tiny]
    candidates = list(free[:1])
    if len(live) >= 2:
        a, b = lam[live[0]], lam[live[1]]
        zz = z[live] ** 2
        ll = lam[live]

        def secular(mu):
            return float(np.sum(zz / (ll - mu)))

        gap = b - a
        if gap > 0:
            lo, hi = a + gap * 1e-12, b - gap * 1e-12
            if secular(lo) < 0 < secular(hi):
                candidates.append(brentq(secular, lo, hi, xtol=1e-15 * max(1.0, abs(b)),
                                         rtol=1e-15))
            else:
                candidates.append(b)
        else:
            candidates.append(a)
    elif len(live) == 1 and len(lam) > 1:
        candidates.append(min(lam[i] for i in range(len(lam)) if i != live[0]))
    if not candidates:
        raise NumericalFailure("constraint leaves no admissible direction")
    return float(min(candidates))


def jacobi_field(bp: BubbleProfile) -> np.ndarray:
    """psi = sqrt(phi(s1)^2 - phi^2) = cos(alpha)/H on the quarter (y > 0)."""
    return _cos_alpha(bp) / bp.H


def jacobi_field_residual(bp: BubbleProfile, g: WarpedGeometry) -> float:
    sec = build_sector(bp, g, 0, "even", "odd")
    psi = jacobi_field(bp)[sec.nodes]
    return float(np.max(np.abs(sec.apply(psi))))


def translation_mode(bp: BubbleProfile, g: WarpedGeometry):
    """Lowest (k=0, s-even, y-odd) eigenpair and its mass-weighted correlation with psi."""
    sec = build_sector(bp, g, 0, "even", "odd")
    lam, q = sec.eigen(m=1, vectors=True)
    psi = jacobi_field(bp)[sec.nodes] * np.sqrt(sec.mass)
    vec = q[:, 0]
    corr = abs(float(vec @ psi)) / (np.linalg.norm(vec) * np.linalg.norm(psi))
    return float(lam[0]), corr


def verify_case2_identity(bp: BubbleProfile, g: WarpedGeometry) -> float:
    """Max defect of (A phi_s)_s = B phi - (c f phi(s1)/sqrt(D)) phi (log f)_ss.

    Evaluated at every node but the fold, with D = phi(s1)^2 - phi^2 formed
    from the node's s value so the check is independent of the angle data.
    """
    p = g.profile
    s = bp.s[:-1]
    c, H = g.c, bp.H
    phi1 = 1.0 / H
    phi, dphi, ddphi = p.phi(s), p.phi_s(s), p.phi_ss(s)
    f = g.f(s)
    fs = g.f_s(s)
    root = np.sqrt((phi1 - phi) * (phi1 + phi))
    A = H * c * f * root
    A_s = H * c * (fs * root - f * phi * dphi / root)
    lhs = A_s * dphi + A * ddphi
    B = H * c * f * (-phi * ddphi - dphi) / root
    rhs = B * phi - c * f * phi1 / root * phi * g.d2log_f(s)
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class SectorSpectrum:
    k: int
    s_parity: str
    y_parity: str
    eigenvalues: list


@dataclass
class StabilityReport:
    beta: float
    ratio: float
    sectors: list
    translation_residual: float
    verdict: str
    s1: float = float("nan")
    c: float = float("nan")
    n_nodes: int = 0
    zero_mean_lowest: float = float("nan")
    deflated_lowest: float = float("nan")
    tail_bound: float = float("nan")
    tail_certified: bool = False
    tol_abs: float = float("nan")
    beta_reading: str = "phi_s"

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=2, sort_keys=False, allow_nan=True)

    def lowest(self, k: int, s_parity: str, y_parity: str) -> float:
        for sec in self.sectors:
            if (sec.k, sec.s_parity, sec.y_parity) == (k, s_parity, y_parity):
                return sec.eigenvalues[0]
        raise KeyError((k, s_parity, y_parity))


def stability_verdict(bp: BubbleProfile, g: WarpedGeometry, tol: float = 1e-7,
                      k_max: int = 16, m: int = 6, literal_beta: bool = False) -> StabilityReport:
    """Decide stability of S_{s1} from the sector spectra.

    Admissible lowest values: the zero-mean-constrained (k=0, even, even)
    eigenvalue, the (k=0, even, odd) eigenvalue after deflating the
    translation field, and the plain lowest eigenvalue of every other sector.
    Modes beyond k_max are covered by min P + (k_max+1)^2 / (c^2 max f^2).
    """
    spectra = jacobi_spectrum(bp, g, k_max, m)
    data = _sector_data(bp, g)
    ee = build_sector(bp, g, 0, "even", "even", _data=data)
    zero_mean = constrained_lowest(ee, np.ones(len(ee.nodes)))
    eo = build_sector(bp, g, 0, "even", "odd", _data=data)
    deflated = constrained_lowest(eo, jacobi_field(bp)[eo.nodes])

    admissible = [zero_mean, deflated]
    for key, lam in spectra.items():
        if key not in ((0, "even", "even"), (0, "even", "odd")):
            admissible.append(float(lam[0]))

    scale = max(float(np.max(np.abs(lam))) for lam in spectra.values())
    tol_abs = tol * scale
    _, _, P, f = data
    tail = float(np.min(P) + (k_max + 1) ** 2 / (g.c**2 * float(np.max(f)) ** 2))
    certified = tail > 0

    lowest = min(admissible)
    if lowest < -tol_abs:
        verdict = "unstable"
    elif lowest > tol_abs and certified:
        verdict = "stable"
    else:
        verdict = "marginal"

    b = beta(g, literal_s1=bp.s1 if literal_beta else None)
    sectors = [SectorSpectrum(k, sp, yp, [float(x) for x in lam])
               for (k, sp, yp), lam in spectra.items()]
    return StabilityReport(
        beta=b, ratio=float(g.profile.phi(bp.s1)) / g.c, sectors=sectors,
        translation_residual=jacobi_field_residual(bp, g), verdict=verdict,
        s1=bp.s1, c=g.c, n_nodes=bp.n_nodes, zero_mean_lowest=zero_mean,
        deflated_lowest=deflated, tail_bound=tail, tail_certified=certified,
        tol_abs=tol_abs, beta_reading="phi_s(s1)" if literal_beta else "phi_s")


def full_curve_sector(bp: BubbleProfile, g: WarpedGeometry, k: int):
    """Periodic pencil on the whole closed profile (4(N-1) nodes).

    Only used to cross-check that the four parity sectors split its spectrum.
    Returns (dense symmetric matrix, mass vector).
    """
    t, w, P, f = _sector_data(bp, g)
    pot = P + k**2 / (g.c**2 * f**2)
    # quarter orders: top->fold, fold->bottom, bottom->fold', fold'->top
    h = np.diff(t)
    hq = np.concatenate([h, h[::-1], h, h[::-1]])
    wq = np.concatenate([w[:-1], w[::-1][:-1], w[:-1], w[::-1][:-1]])
    pq = np.concatenate([pot[:-1], pot[::-1][:-1], pot[:-1], pot[::-1][:-1]])
    n = len(wq)
    nxt = np.roll(np.arange(n), -1)
    w_half = 0.5 * (wq + wq[nxt])
    cond = w_half / hq
    h_prev = np.roll(hq, 1)
    mass = wq * 0.5 * (hq + h_prev)
    K = np.zeros((n, n))
    idx = np.arange(n)
    K[idx, idx] = mass * pq + cond + np.roll(cond, 1)
    K[idx, nxt] -= cond
    K[nxt, idx] -= cond
    sq = np.sqrt(mass)
    return K / np.outer(sq, sq), mass
