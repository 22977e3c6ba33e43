"""Small numerical helpers shared across modules."""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    """Stable logistic function.

    Computed so that ``sigmoid(x) + sigmoid(-x) == 1.0`` exactly in floating
    point (the positive branch lands in [0.5, 1), making ``1 - p`` exact).
    """
    x = np.asarray(x, dtype=float)
    t = np.exp(-np.abs(x))
    pos = 1.0 / (1.0 + t)
    out = np.where(x >= 0.0, pos, 1.0 - pos)
    return float(out) if out.ndim == 0 else out


def log_sigmoid(x):
    """log(sigmoid(x)) without overflow for large negative x."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))
    return float(out) if out.ndim == 0 else out


def softmax(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    v = v - v.max()
    e = np.exp(v)
    return e / e.sum()


_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section_maximize(fn, lo: float, hi: float, tol: float) -> float:
    """Golden-section search for the maximizer of a unimodal function on [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def average_ranks(x: np.ndarray) -> np.ndarray:
    """Zero-based ranks with ties assigned the average of their positions."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j)
        i = j + 1
    return ranks
