"""Adaptive Simpson quadrature for vector-valued integrands."""

from __future__ import annotations

from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    pass


def adaptive_simpson(
    f: Callable[[float], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-8,
    max_depth: int = 40,
    initial_panels: int = 8,
) -> tuple[np.ndarray, int]:
    """Integrate ``f`` over ``[a, b]`` componentwise.

    The tolerance is relative to a coarse estimate of each component's
    integral; components whose coarse integral is zero get an absolute
    tolerance scaled by the largest component. Returns ``(integral, evals)``.
    """
    cache: dict[float, np.ndarray] = {}

    def ev(t: float) -> np.ndarray:
        if t not in cache:
            cache[t] = np.atleast_1d(np.asarray(f(t), dtype=np.float64))
        return cache[t]

    edges = np.linspace(a, b, initial_panels + 1)
    panels = []
    coarse = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        fl, fm, fh = ev(lo), ev(mid), ev(hi)
        whole = (hi - lo) / 6.0 * (fl + 4.0 * fm + fh)
        coarse = coarse + whole
        panels.append((lo, hi, fl, fm, fh, whole))
    scale = np.abs(coarse)
    floor = scale.max() if scale.max() > 0 else 1.0
    abs_tol = rtol * np.where(scale > 0, scale, floor)

    total = np.zeros_like(abs_tol)
    stack = [(p, abs_tol / initial_panels, 0) for p in panels]
    while stack:
        (lo, hi, fl, fm, fh, whole), tol, depth = stack.pop()
        m1, m2 = 0.5 * (lo + 0.5 * (lo + hi)), 0.5 * (0.5 * (lo + hi) + hi)
        mid = 0.5 * (lo + hi)
        f1, f2 = ev(m1), ev(m2)
        left = (mid - lo) / 6.0 * (fl + 4.0 * f1 + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * f2 + fh)
        err = left + right - whole
        if np.all(np.abs(err) <= 15.0 * tol):
            total = total + left + right + err / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson did not reach rtol={rtol} on [{lo}, {hi}]"
            )
        stack.append(((mid, hi, fm, f2, fh, right), tol / 2.0, depth + 1))
        stack.append(((lo, mid, fl, f1, fm, left), tol / 2.0, depth + 1))
    return total, len(cache)
