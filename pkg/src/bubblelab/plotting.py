"""Deterministic SVG figures (800 x 600 viewBox) for the CLI report paths."""

from __future__ import annotations

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

WIDTH_PT, HEIGHT_PT = 800, 600


def _figure():
    # 72 pt per inch so the SVG viewBox is exactly 800 x 600
    return Figure(figsize=(WIDTH_PT / 72, HEIGHT_PT / 72), dpi=72)


def _save(fig, path):
    # fixed id salt and no timestamp so repeated runs emit identical bytes
    with rc_context({"svg.hashsalt": "bubblelab"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def plot_profile(bp, path) -> None:
    xs, ys = bp.closed_curve()
    fig = _figure()
    ax = fig.add_subplot()
    ax.plot(xs, ys, lw=1.5)
    ax.axhline(0, color="0.7", lw=0.6)
    ax.axvline(0, color="0.7", lw=0.6)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("s")
    ax.set_ylabel("y")
    ax.set_title(f"profile curve, s1 = {bp.s1:.6g}, H = {bp.H:.6g}")
    _save(fig, path)


def plot_sweep(rows, path) -> None:
    good = [r for r in rows if r.ok]
    s1 = np.array([r.s1 for r in good])
    fig = _figure()
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    ax1.semilogy(s1, [r.V for r in good], "o-", ms=3)
    ax1.set_ylabel("enclosed volume V")
    ax2.plot(s1, [r.H for r in good], "o-", ms=3)
    ax2.set_ylabel("mean curvature H")
    ax2.set_xlabel("s1")
    _save(fig, path)


def plot_spectra(report, path) -> None:
    fig = _figure()
    ax = fig.add_subplot()
    for sp in ("even", "odd"):
        for yp in ("even", "odd"):
            ks = sorted({s.k for s in report.sectors if s.s_parity == sp and s.y_parity == yp})
            low = [report.lowest(k, sp, yp) for k in ks]
            ax.plot(ks, low, "o-", ms=3, label=f"s-{sp}, y-{yp}")
    ax.axhline(0, color="k", lw=0.6)
    ax.set_yscale("symlog", linthresh=1.0)
    ax.set_xlabel("Fourier mode k")
    ax.set_ylabel("lowest eigenvalue")
    ax.set_title(f"verdict: {report.verdict}")
    ax.legend()
    _save(fig, path)


def plot_trajectory(result, path) -> None:
    fig = _figure()
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    ax1.plot(result.step, result.area - result.area[-1])
    ax1.set_ylabel("area - final area")
    ax2.semilogy(result.step, result.tau_inf_over_a)
    ax2.set_ylabel("|tau|_inf / a")
    ax2.set_xlabel("step")
    _save(fig, path)


def plot_embedding(curve, path) -> None:
    fig = _figure()
    ax = fig.add_subplot()
    ax.plot(curve.r, curve.x3, lw=1.5)
    ax.plot(-curve.r, curve.x3, lw=1.5, color="C0")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("r")
    ax.set_ylabel("x3")
    ax.set_title(f"meridian of Y, c = {curve.c:.6g}")
    _save(fig, path)
