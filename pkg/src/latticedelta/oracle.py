"""Finite Fourier-grid discretisation of H_v, used as an independent check.

On N points per axis the operator becomes diag(g_k) + (v / N^d) * ones, whose
eigenvalues solve the secular equation 1 = (v / N^d) sum_k 1 / (E - g_k).
The secular sum is the Riemann sum of the continuum coupling formula, so the
extremal root tends to the continuum eigenvalue as N grows.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .multiplier import MultiplierSpec
from .spectral import energy_for_coupling
from .torus_quadrature import DEFAULT_OPTIONS, QuadratureOptions, TorusDomain, half_angle_terms

MAX_GRID = 10**7
MAX_DENSE = 4000


class GridSizeError(ValueError):
    pass


@dataclass(frozen=True)
class GridOperator:
    d: int
    N: int
    g_values: np.ndarray
    v: float

    @property
    def size(self) -> int:
        return self.g_values.size


@dataclass(frozen=True)
class SecularSolution:
    top_eigenvalue: float | None
    bottom_eigenvalue: float | None
    residual: float


def build_grid_operator(spec: MultiplierSpec, d: int, N: int, v: float) -> GridOperator:
    d = TorusDomain(int(d)).d
    if N < 2 or N % 2:
        raise GridSizeError(f"N must be even and >= 2, got {N}")
    if N**d > MAX_GRID:
        raise GridSizeError(f"N^d = {N**d} exceeds {MAX_GRID}")
    c, _ = half_angle_terms(N)
    u = np.zeros(())
    for axis in range(d):
        shape = [1] * d
        shape[axis] = N
        u = u + c.reshape(shape)
    u = np.clip(u.ravel() / d, 0.0, 2.0)
    return GridOperator(d=d, N=N, g_values=spec(u), v=float(v))


def secular_function(op: GridOperator, E: float) -> float:
    return 1.0 - op.v / op.size * float(np.sum(1.0 / (E - op.g_values)))


def secular_eigenvalue(op: GridOperator) -> SecularSolution:
    """Extremal root outside [min g, max g]; top for v > 0, bottom for v < 0.

    The root is found in the offset t = |E - edge sample| so that the
    residual is resolved even when the root hugs the band.
    """
    g, v, M = op.g_values, op.v, op.size
    if v == 0.0:
        return SecularSolution(float(g.max()), float(g.min()), 0.0)
    if v > 0:
        edge = g.max()
        gaps = edge - g  # >= 0, exact
    else:
        edge = g.min()
        gaps = g - edge
    scale = abs(v) / M

    def f(t):
        # 1 - (v/M) sum 1/(E - g) with E = edge + sign(v) t
        return 1.0 - scale * float(np.sum(1.0 / (t + gaps)))

    hi = abs(v)
    lo = hi
    while f(lo) > 0.0 and lo > 1e-300:
        lo *= 1e-3
    t = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = abs(f(t))
    E = float(edge + math.copysign(t, v))
    if v > 0:
        return SecularSolution(E, None, residual)
    return SecularSolution(None, E, residual)


def dense_check(op: GridOperator) -> np.ndarray:
    """All eigenvalues of diag(g) + (v/M) ones, ascending."""
    M = op.size
    if M > MAX_DENSE:
        raise GridSizeError(f"dense check needs N^d <= {MAX_DENSE}, got {M}")
    A = np.diag(op.g_values) + (op.v / M) * np.ones((M, M))
    return np.linalg.eigvalsh(A)


def interlaces(eigs: np.ndarray, g_values: np.ndarray, v: float, atol: float = 1e-12) -> bool:
    lam = np.sort(eigs)
    g = np.sort(g_values)
    if v >= 0:
        lower_ok = np.all(lam >= g - atol)
        upper_ok = np.all(lam[:-1] <= g[1:] + atol)
    else:
        lower_ok = np.all(lam[1:] >= g[:-1] - atol)
        upper_ok = np.all(lam <= g + atol)
    return bool(lower_ok and upper_ok)


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    E_N: float
    abs_error: float


@dataclass
class ConvergenceStudy:
    reference: float
    absorbed: bool
    rows: list[ConvergenceRow]

    @property
    def monotone(self) -> bool:
        """Errors strictly decrease until they reach the roundoff floor."""
        floor = 1e-12 * max(1.0, abs(self.reference))
        errs = [r.abs_error for r in self.rows]
        return all(b < a or (a <= floor and b <= floor) for a, b in zip(errs, errs[1:]))

    @property
    def final_error(self) -> float:
        return self.rows[-1].abs_error

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "E_N", "abs_error"])
        for r in self.rows:
            w.writerow([r.N, repr(r.E_N), repr(r.abs_error)])
        return buf.getvalue()


def convergence_study(
    spec: MultiplierSpec,
    d: int,
    v: float,
    N_list: Sequence[int],
    opts: QuadratureOptions = DEFAULT_OPTIONS,
) -> ConvergenceStudy:
    """Extremal grid eigenvalue against the continuum one for growing N.

    On the no-eigenvalue side the reference is the band edge itself: the grid
    root is then expected to be absorbed into the band as N grows.
    """
    if v == 0.0:
        ref, absorbed = spec.top, True
    else:
        point = energy_for_coupling(spec, d, v, opts)
        absorbed = point is None
        if point is None:
            ref = spec.top if v > 0 else spec.bottom
        else:
            ref = point.E
    rows = []
    for N in N_list:
        sol = secular_eigenvalue(build_grid_operator(spec, d, N, v))
        E_N = sol.top_eigenvalue if v >= 0 else sol.bottom_eigenvalue
        rows.append(ConvergenceRow(int(N), E_N, abs(E_N - ref)))
    return ConvergenceStudy(reference=ref, absorbed=absorbed, rows=rows)
