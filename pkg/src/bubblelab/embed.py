"""Surface-of-revolution realisation of (Y, ds^2 + c^2 f^2 dtheta^2) in R^3 and OBJ export.

The profile (r, x3) = (c f(s), int sqrt(1 - c^2 f'^2) ds) is unit speed, so
the revolved surface carries exactly the warped metric.  Bubbles live in
Y x R and have no embedding in R^3; they are drawn as the profile curve
pushed off the embedded Y along its unit normal, y units per unit height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import InvalidInputError
from .profile import WarpedGeometry


def _check_interval(g: WarpedGeometry, interval):
    lo, hi = map(float, interval)
    if not lo < hi:
        raise InvalidInputError(f"empty interval [{lo}, {hi}]")
    if max(abs(lo), abs(hi)) >= g.profile.s_max:
        raise InvalidInputError(f"interval [{lo}, {hi}] not inside I = "
                                f"(-{g.profile.s_max:.6g}, {g.profile.s_max:.6g})")
    return lo, hi


def max_c_for_embedding(g: WarpedGeometry, interval, n_grid: int = 20001) -> float:
    """1 / max |f'| over a dense grid; math.inf when f is constant (no bound)."""
    lo, hi = _check_interval(g, interval)
    top = float(np.max(np.abs(g.f_s(np.linspace(lo, hi, n_grid)))))
    return math.inf if top == 0 else 1.0 / top


@dataclass(frozen=True)
class RevolutionCurve:
    s: np.ndarray
    r: np.ndarray
    x3: np.ndarray
    c: float
    interval: tuple

    @property
    def n_samples(self) -> int:
        return len(self.s)

    def unit_speed_defect(self) -> float:
        """max |r'^2 + x3'^2 - 1| from 4th-order differences of the samples."""
        rp = _diff4(self.r, self.s)
        xp = _diff4(self.x3, self.s)
        return float(np.max(np.abs(rp**2 + xp**2 - 1.0)))


def _diff4(y, x):
    """Fourth-order derivative on a uniform grid, one-sided at the ends."""
    h = x[1] - x[0]
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    for i in (0, 1):
        d[i] = (-25 * y[i] + 48 * y[i + 1] - 36 * y[i + 2] + 16 * y[i + 3] - 3 * y[i + 4]) / (12 * h)
        j = -1 - i
        d[j] = (25 * y[j] - 48 * y[j - 1] + 36 * y[j - 2] - 16 * y[j - 3] + 3 * y[j - 4]) / (12 * h)
    return d


def _violation_point(g: WarpedGeometry, s: np.ndarray, slope: np.ndarray) -> float:
    bad = np.flatnonzero(slope >= 1.0)
    # crossing closest to the centre of the interval
    i = bad[np.argmin(np.abs(s[bad] - 0.5 * (s[0] + s[-1])))]
    for j in (i - 1, i + 1):
        if 0 <= j < len(s) and slope[j] < 1.0:
            return float(brentq(lambda x: g.c * abs(float(g.f_s(x))) - 1.0,
                                min(s[i], s[j]), max(s[i], s[j]), xtol=1e-14))
    return float(s[i])


def embed_revolution(g: WarpedGeometry, interval, n_samples: int = 2001) -> RevolutionCurve:
    lo, hi = _check_interval(g, interval)
    if n_samples < 5:
        raise InvalidInputError("need at least 5 samples")
    s = np.linspace(lo, hi, n_samples)
    slope = g.c * np.abs(g.f_s(s))
    c_max = max_c_for_embedding(g, (lo, hi))
    if np.any(slope >= 1.0) or g.c >= c_max:
        if not np.any(slope >= 1.0):
            slope = g.c * np.abs(g.f_s(np.linspace(lo, hi, 20001)))
            s = np.linspace(lo, hi, 20001)
        s_bad = _violation_point(g, s, slope)
        raise InvalidInputError(
            f"c = {g.c:.6g} >= c_max = {c_max:.6g}: c|f'(s)| reaches 1 at s = {s_bad:.10g}, "
            "so no surface of revolution realises the metric there")
    # Simpson on a 4x refined grid: its node-to-node error pattern would otherwise
    # show up at the 1e-8 level in differentiated samples
    fine = np.linspace(lo, hi, 4 * (n_samples - 1) + 1)
    x3 = cumulative_simpson(np.sqrt(1.0 - (g.c * g.f_s(fine)) ** 2), x=fine, initial=0.0)[::4]
    return RevolutionCurve(s=s, r=g.c * g.f(s), x3=x3, c=g.c, interval=(lo, hi))


def revolution_vertices(curve: RevolutionCurve, n_theta: int) -> np.ndarray:
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    r = curve.r[:, None]
    return np.stack([r * np.cos(th), r * np.sin(th),
                     np.broadcast_to(curve.x3[:, None], (len(curve.s), n_theta))],
                    axis=-1).reshape(-1, 3)


def _faces(n_rings: int, n_theta: int, closed: bool) -> np.ndarray:
    i = np.arange(n_rings if closed else n_rings - 1)[:, None]
    j = np.arange(n_theta)[None, :]
    a = i * n_theta + j
    b = i * n_theta + (j + 1) % n_theta
    c = ((i + 1) % n_rings) * n_theta + (j + 1) % n_theta
    d = ((i + 1) % n_rings) * n_theta + j
    tri = np.stack([np.stack([a, b, c], -1), np.stack([a, c, d], -1)], axis=2)
    return tri.reshape(-1, 3)


def signed_volume(vertices: np.ndarray, faces: np.ndarray) -> float:
    p = vertices[faces]
    return float(np.sum(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])))) / 6.0


def revolution_mesh(curve: RevolutionCurve, n_theta: int):
    """Open band over the sampled interval, normals pointing away from the axis."""
    if n_theta < 3:
        raise InvalidInputError("n_theta must be >= 3")
    return revolution_vertices(curve, n_theta), _faces(curve.n_samples, n_theta, closed=False)


def bubble_mesh(bp, g: WarpedGeometry, n_theta: int, n_profile: int = 200):
    """Closed torus: C_u offset along the unit normal of the embedded Y."""
    if n_theta < 3:
        raise InvalidInputError("n_theta must be >= 3")
    curve = embed_revolution(g, (-bp.s1, bp.s1), 2001)
    xs, ys = bp.closed_curve()
    xs, ys = xs[:-1], ys[:-1]  # drop the repeated start point
    if len(xs) > n_profile:
        idx = np.unique(np.linspace(0, len(xs) - 1, n_profile).astype(int))
        xs, ys = xs[idx], ys[idx]
    x3 = CubicSpline(curve.s, curve.x3)(xs)
    r = g.c * g.f(xs)
    rp = g.c * g.f_s(xs)
    x3p = np.sqrt(1.0 - rp**2)
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    ct, st = np.cos(th)[None, :], np.sin(th)[None, :]
    rr = (r + ys * x3p)[:, None]
    z = np.broadcast_to((x3 - ys * rp)[:, None], (len(xs), n_theta))
    verts = np.stack([rr * ct, rr * st, z], axis=-1).reshape(-1, 3)
    faces = _faces(len(xs), n_theta, closed=True)
    if signed_volume(verts, faces) < 0:
        faces = faces[:, ::-1].copy()
    return verts, faces


def torus_mesh(n_s: int, n_theta: int, R: float = 2.0, rho: float = 0.5):
    """Standard closed torus grid, used for topology checks."""
    phi = 2 * math.pi * np.arange(n_s) / n_s
    curve_r = R + rho * np.cos(phi)
    curve_z = rho * np.sin(phi)
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    verts = np.stack([curve_r[:, None] * np.cos(th), curve_r[:, None] * np.sin(th),
                      np.broadcast_to(curve_z[:, None], (n_s, n_theta))], -1).reshape(-1, 3)
    faces = _faces(n_s, n_theta, closed=True)
    if signed_volume(verts, faces) < 0:
        faces = faces[:, ::-1].copy()
    return verts, faces


def euler_characteristic(n_vertices: int, faces: np.ndarray) -> int:
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    n_edges = len(np.unique(edges, axis=0))
    return n_vertices - n_edges + len(faces)


def theta_metric_from_mesh(vertices: np.ndarray, n_theta: int) -> np.ndarray:
    """|d/dtheta X|^2 per ring, by spectral differentiation around each ring."""
    ring = vertices.reshape(-1, n_theta, 3)
    k = np.fft.fftfreq(n_theta, d=1.0 / n_theta)
    if n_theta % 2 == 0:
        k[n_theta // 2] = 0.0
    dx = np.real(np.fft.ifft(1j * k[None, :, None] * np.fft.fft(ring, axis=1), axis=1))
    return np.mean(np.sum(dx**2, axis=-1), axis=1)


def write_obj(path, vertices: np.ndarray, faces: np.ndarray) -> None:
    with open(path, "w") as fh:
        for v in vertices:
            fh.write("v {!r} {!r} {!r}\n".format(*map(float, v)))
        for f in faces:
            fh.write("f {} {} {}\n".format(*(int(i) + 1 for i in f)))


def read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=int).reshape(-1, 3)


def export_mesh(obj, path, n_theta: int = 64, g: WarpedGeometry = None):
    """Write a RevolutionCurve (open band) or BubbleProfile (closed torus) as OBJ."""
    if isinstance(obj, RevolutionCurve):
        verts, faces = revolution_mesh(obj, n_theta)
    else:
        if g is None:
            raise InvalidInputError("bubble export needs the warped geometry")
        verts, faces = bubble_mesh(obj, g, n_theta)
    write_obj(path, verts, faces)
    return verts, faces
