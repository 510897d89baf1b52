"""Slice-volume area functional on a flat torus and its volume-constrained descent.

A rotated graph {rho = u(x)} over X is encoded by sigma = (u/n)^n, which
makes the enclosed volume linear.  X is a flat torus of dimension 1 or 2,
so |X| and the first Laplace eigenvalue are available in closed form.

Squared gradients use the average of the forward and backward difference
quotients per axis.  The plain two-cell centred quotient would leave the
grid-scale checkerboard mode without any gradient penalty, and the constant
field would then not be a discrete local minimum of the area.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import unit_ball_volume
from .errors import InvalidInputError, NumericalFailure, PreconditionError


@dataclass(frozen=True)
class TorusDomain:
    k: int
    lengths: tuple
    resolution: int

    def __post_init__(self):
        if self.k not in (1, 2):
            raise InvalidInputError("torus dimension must be 1 or 2")
        if len(self.lengths) != self.k:
            raise InvalidInputError("need one period per axis")
        if self.resolution < 16:
            raise InvalidInputError("resolution must be >= 16 nodes per axis")

    @classmethod
    def circle(cls, length: float = 1.0, resolution: int = 64) -> "TorusDomain":
        return cls(1, (float(length),), resolution)

    @classmethod
    def square(cls, length: float = 1.0, resolution: int = 32) -> "TorusDomain":
        return cls(2, (float(length), float(length)), resolution)

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * self.k

    @property
    def spacing(self) -> tuple:
        return tuple(L / self.resolution for L in self.lengths)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def total_volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def lambda1(self) -> float:
        return (2 * math.pi / max(self.lengths)) ** 2

    def coords(self):
        axes = [np.arange(self.resolution) * h for h in self.spacing]
        return np.meshgrid(*axes, indexing="ij")


@dataclass(frozen=True)
class SigmaField:
    domain: TorusDomain
    values: np.ndarray
    n: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.domain.shape:
            raise InvalidInputError(f"field shape {vals.shape} != domain {self.domain.shape}")
        if self.n < 1:
            raise InvalidInputError("ball dimension n must be >= 1")
        if not np.all(vals > 0):
            raise InvalidInputError("slice volume sigma must be positive everywhere")
        object.__setattr__(self, "values", vals)

    @property
    def alpha_exp(self) -> float:
        return (self.n - 1) / self.n

    @property
    def a(self) -> float:
        return float(np.mean(self.values))

    @property
    def tau(self) -> np.ndarray:
        return self.values - self.a

    def with_values(self, values) -> "SigmaField":
        return SigmaField(self.domain, values, self.n)

    @classmethod
    def from_radius(cls, domain: TorusDomain, u, n: int) -> "SigmaField":
        return cls(domain, (np.asarray(u, dtype=float) / n) ** n, n)

    def radius(self) -> np.ndarray:
        return self.n * self.values ** (1.0 / self.n)


def _fwd(x, axis, h):
    return (np.roll(x, -1, axis=axis) - x) / h


def _bwd(x, axis, h):
    return (x - np.roll(x, 1, axis=axis)) / h


def grad_sq(x: np.ndarray, domain: TorusDomain) -> np.ndarray:
    """Per-node |grad x|^2 as the mean of forward and backward squares."""
    out = np.zeros_like(x)
    for ax, h in enumerate(domain.spacing):
        out += 0.5 * (_fwd(x, ax, h) ** 2 + _bwd(x, ax, h) ** 2)
    return out


def grad_dot(x: np.ndarray, y: np.ndarray, domain: TorusDomain) -> np.ndarray:
    out = np.zeros_like(x)
    for ax, h in enumerate(domain.spacing):
        out += 0.5 * (_fwd(x, ax, h) * _fwd(y, ax, h) + _bwd(x, ax, h) * _bwd(y, ax, h))
    return out


def _prefactor(n: int) -> float:
    return n**n * unit_ball_volume(n)


def _w(field: SigmaField) -> np.ndarray:
    return np.sqrt(field.values ** (2 * field.alpha_exp) + grad_sq(field.values, field.domain))


def area_functional(field: SigmaField) -> float:
    return _prefactor(field.n) * float(np.sum(_w(field))) * field.domain.cell_volume


def volume_functional(field: SigmaField) -> float:
    return _prefactor(field.n) * float(np.sum(field.values)) * field.domain.cell_volume


def first_variation(field: SigmaField, direction) -> float:
    direction = np.asarray(direction, dtype=float)
    if abs(float(np.mean(direction))) > 1e-12 * max(1.0, float(np.max(np.abs(direction)))):
        raise PreconditionError("variation direction must have zero mean")
    al = field.alpha_exp
    sig = field.values
    num = al * sig ** (2 * al - 1) * direction + grad_dot(direction, sig, field.domain)
    return _prefactor(field.n) * float(np.sum(num / _w(field))) * field.domain.cell_volume


def must_integrand(field: SigmaField) -> np.ndarray:
    """Per-node integrand of the variation along sigma_t = a + e^t tau at t = 0."""
    al = field.alpha_exp
    sig = field.values
    tau = field.tau
    g2 = grad_sq(tau, field.domain)
    return (al * sig ** (2 * al - 1) * tau + g2) / np.sqrt(sig ** (2 * al) + g2)


def area_gradient(field: SigmaField) -> np.ndarray:
    """L2 gradient of the discrete area (derivative per unit cell volume)."""
    al = field.alpha_exp
    sig = field.values
    w = _w(field)
    g = al * sig ** (2 * al - 1) / w
    for ax, h in enumerate(field.domain.spacing):
        g -= 0.5 * (_bwd(_fwd(sig, ax, h) / w, ax, h) + _fwd(_bwd(sig, ax, h) / w, ax, h))
    return _prefactor(field.n) * g


def stable_step(field: SigmaField) -> float:
    """Explicit step below the linearised stiffness of the area gradient."""
    al = field.alpha_exp
    stiff = sum(4.0 / h**2 for h in field.domain.spacing)
    top = _prefactor(field.n) * float(np.min(field.values)) ** (-al) * stiff
    return 1.0 / top


@dataclass
class DescentResult:
    field: SigmaField
    converged: bool
    steps: int
    step: np.ndarray
    area: np.ndarray
    volume: np.ndarray
    tau_inf_over_a: np.ndarray
    halvings: int = 0

    @property
    def volume_drift(self) -> float:
        return float(np.max(np.abs(self.volume - self.volume[0])) / abs(self.volume[0]))


def _tau_ratio(values) -> float:
    a = float(np.mean(values))
    return float(np.max(np.abs(values - a))) / a


def constrained_descent(field0: SigmaField, max_steps: int = 100_000,
                        step_size: Optional[float] = None, target: float = 1e-6) -> DescentResult:
    """Projected L2 descent: sigma <- sigma - h (G - mean G), halving h if area grows.

    Mean subtraction keeps the (linear) volume fixed.  Stops once
    ||tau||_inf / a < target or after ``max_steps`` accepted steps.
    """
    h = stable_step(field0) if step_size is None else float(step_size)
    sig = field0.values.copy()
    cur = field0
    area = area_functional(cur)
    rec_step, rec_area, rec_vol, rec_tau = [0], [area], [volume_functional(cur)], [_tau_ratio(sig)]
    halvings = 0
    steps = 0
    while rec_tau[-1] >= target and steps < max_steps:
        g = area_gradient(cur)
        g -= np.mean(g)
        for _ in range(60):
            trial = sig - h * g
            if not np.all(trial > 0):
                raise NumericalFailure(f"step {steps + 1} drove sigma <= 0 (h = {h:.3g}); "
                                       "reduce the step size")
            nxt = cur.with_values(trial)
            new_area = area_functional(nxt)
            # slack of a few ulps: near convergence decreases hit rounding
            if new_area <= area * (1 + 4e-16):
                break
            h *= 0.5
            halvings += 1
        else:
            raise NumericalFailure("backtracking could not decrease the area")
        sig, cur, area = trial, nxt, new_area
        steps += 1
        rec_step.append(steps)
        rec_area.append(area)
        rec_vol.append(volume_functional(cur))
        rec_tau.append(_tau_ratio(sig))
    return DescentResult(field=cur, converged=rec_tau[-1] < target, steps=steps,
                         step=np.array(rec_step), area=np.array(rec_area),
                         volume=np.array(rec_vol), tau_inf_over_a=np.array(rec_tau),
                         halvings=halvings)


def random_field(domain: TorusDomain, a: float, amplitude: float, n: int,
                 rng: np.random.Generator, smooth_modes: Optional[int] = None) -> SigmaField:
    """a + tau with mean-free tau scaled to ||tau||_inf = amplitude.

    White noise by default; ``smooth_modes`` restricts tau to low Fourier modes.
    """
    if smooth_modes is None:
        tau = rng.uniform(-1.0, 1.0, domain.shape)
    else:
        coords = domain.coords()
        tau = np.zeros(domain.shape)
        for _ in range(smooth_modes):
            phase = rng.uniform(0, 2 * math.pi)
            wave = np.zeros(domain.k, dtype=int)
            while not wave.any():
                wave = rng.integers(-3, 4, domain.k)
            arg = sum(2 * math.pi * m * x / L
                      for m, x, L in zip(wave, coords, domain.lengths))
            tau += rng.normal() * np.cos(arg + phase)
    tau = tau - np.mean(tau)
    peak = float(np.max(np.abs(tau)))
    if peak > 0:
        tau *= amplitude / peak
    return SigmaField(domain, a + tau, n)


def positivity_threshold(a: float, n: int, lambda1: float, c_doubleprime: float) -> float:
    """C'' - 4/(n lambda1 a^(2/n)); positive once the positivity argument closes."""
    if min(a, lambda1, c_doubleprime) <= 0 or n < 1:
        raise InvalidInputError("a, n, lambda1 and C'' must be positive")
    return c_doubleprime - 4.0 / (n * lambda1 * a ** (2.0 / n))


def positivity_root(n: int, lambda1: float, c_doubleprime: float) -> float:
    """Average a* at which the threshold margin vanishes."""
    return (4.0 / (n * lambda1 * c_doubleprime)) ** (n / 2.0)


def c_doubleprime(n: int, c_prime: float) -> float:
    """Proof-extracted witness 2^-alpha / (sqrt(1 + C'^2) + 1)."""
    al = (n - 1) / n
    return 2.0 ** (-al) / (math.sqrt(1.0 + c_prime**2) + 1.0)


def discrete_slope(field: SigmaField) -> np.ndarray:
    """|grad u| via |grad sigma| = sigma^alpha |grad u| for sigma = (u/n)^n."""
    return np.sqrt(grad_sq(field.values, field.domain)) / field.values ** field.alpha_exp


@dataclass(frozen=True)
class PositivityCheck:
    holds: bool
    margin: float
    lhs: float
    rhs: float
    c_doubleprime: float
    c_prime: float


def positivity_inequality_check(field: SigmaField, C: float,
                             c_prime: Optional[float] = None) -> PositivityCheck:
    """Evaluate both sides of the large-volume positivity inequality.

    LHS is the integral of (sigma^(2 alpha - 1) tau + |grad tau|^2) / W and RHS
    is a^-alpha times the integral of C'' |grad tau|^2 - (4/n) a^(2 alpha - 2) tau^2.

    Admissible: a/2 <= sigma <= 2a, |tau| <= 2 C a^alpha and discrete
    |grad u| <= C'.  ``c_prime=None`` uses the field's own maximal slope.
    """
    a = field.a
    al = field.alpha_exp
    sig = field.values
    tau = field.tau
    if np.any(sig < 0.5 * a) or np.any(sig > 2.0 * a):
        raise PreconditionError("sigma leaves the window [a/2, 2a]")
    if np.any(np.abs(tau) > 2.0 * C * a**al * (1 + 1e-12)):
        raise PreconditionError("|tau| exceeds 2 C a^alpha")
    slope = float(np.max(discrete_slope(field)))
    if c_prime is None:
        c_prime = slope
    elif slope > c_prime * (1 + 1e-12):
        raise PreconditionError(f"discrete |grad u| = {slope:.6g} exceeds C' = {c_prime:.6g}")
    cdd = c_doubleprime(field.n, c_prime)
    g2 = grad_sq(tau, field.domain)
    vol = field.domain.cell_volume
    lhs = float(np.sum((sig ** (2 * al - 1) * tau + g2) / np.sqrt(sig ** (2 * al) + g2))) * vol
    rhs = a ** (-al) * float(np.sum(cdd * g2 - (4.0 / field.n) * a ** (2 * al - 2) * tau**2)) * vol
    margin = lhs - rhs
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return PositivityCheck(holds=margin >= -1e-12 * scale, margin=margin, lhs=lhs, rhs=rhs,
                        c_doubleprime=cdd, c_prime=c_prime)


def positivity_random_check(domain: TorusDomain, a: float, n: int, C: float, count: int,
                         rng: np.random.Generator):
    """Run the check on ``count`` random admissible fields; return (violations, min margin)."""
    al = (n - 1) / n
    cap = min(2.0 * C * a**al, 0.5 * a)
    worst = math.inf
    bad = 0
    for _ in range(count):
        amp = rng.uniform(0.05, 1.0) * cap
        fld = random_field(domain, a, amp, n, rng, smooth_modes=int(rng.integers(1, 6)))
        res = positivity_inequality_check(fld, C)
        worst = min(worst, res.margin)
        bad += not res.holds
    return bad, worst


def write_trajectory_csv(result: DescentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "area", "volume", "tau_inf_over_a"))
        for row in zip(result.step, result.area, result.volume, result.tau_inf_over_a):
            w.writerow([int(row[0])] + [f"{float(x):.17g}" for x in row[1:]])


def read_grid_csv(path) -> np.ndarray:
    """Header-less numeric grid; a single row or column is read as 1-D."""
    grid = np.loadtxt(path, delimiter=",", ndmin=2)
    if 1 in grid.shape:
        return grid.ravel()
    return grid
