"""Integrals of the resolvent symbol over the d-torus.

Two quantities are needed for every energy E:

    J(E) = int_T d theta / (E - g(theta))
    I(E) = int_T d theta / (E - g(theta))**2

with g(theta) = Psi(mean_j(cos theta_j + 1)).

Away from the band [Psi(0), Psi(2)] the integrand is periodic and bounded, and
the periodic rectangle rule is used with per-axis doubling.  The integrand
depends on theta only through the multiset of per-axis node values, so the
N**d tensor sum collapses to a sum over multisets of the N/2 + 1 distinct
cosine values.  That is what makes d = 6..8 affordable.

At a band edge the integrand has a single point singularity (theta = 0 for
the top edge, the corner (pi, ..., pi) for the bottom edge).  After shifting
that point to the origin the cube is cut into dyadic shells
[0, R]^d minus [0, R/2]^d (times 2^d sign copies), each shell integrated with a
symmetric-reduced product Gauss-Legendre rule.  Shell contributions decay
geometrically with the ratio known from the edge exponent, which also gives
the tail correction.  Finiteness itself is decided by ``edge_finiteness``.

Exterior energies a distance t << 1 from an edge have an integrand that is
bounded but varies on the scale of t, which a uniform grid cannot resolve.
Those use the same shells on 1/(t + gap)**power; once the shell radius is
inside the flat core the contributions shrink by 2^-d per shell.

When d = 2 * power * e the edge integral diverges like A log(1/t) with a
closed-form A.  Offsets below what the shells can evaluate in float64 (or
below what a double can hold at all) are then reached through log t: the
integral is continued linearly in log t from the smallest reliable offset.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np

from .multiplier import MultiplierSpec

logger = logging.getLogger(__name__)

MAX_DIM = 8
TWO_PI = 2.0 * math.pi

Edge = Literal["top", "bottom"]


class InteriorEnergyError(ValueError):
    """The energy lies strictly inside the continuous spectrum."""


@dataclass(frozen=True)
class TorusDomain:
    d: int

    def __post_init__(self):
        if not (isinstance(self.d, (int, np.integer)) and 1 <= self.d <= MAX_DIM):
            raise ValueError(f"dimension must be an integer in 1..{MAX_DIM}, got {self.d!r}")

    @property
    def volume(self) -> float:
        return TWO_PI**self.d


def _dim(dom: TorusDomain | int) -> int:
    return dom.d if isinstance(dom, TorusDomain) else TorusDomain(int(dom)).d


@dataclass(frozen=True)
class QuadratureOptions:
    """Knobs shared by the exterior and the edge rules.

    ``budget`` caps the number of reduced nodes per rectangle-rule level; the
    per-axis cap for dimension d is the largest power of two that fits.
    """

    tol_int: float = 1e-8
    tol_edge: float = 1e-4
    min_points: int = 8
    max_points: int = 2**16
    budget: int = 3_000_000
    gauss_order: int = 8
    min_shells: int = 6
    max_shells: int = 200
    divergent_shells: int = 12
    near_edge: float = 1e-3
    near_gauss_order: int = 12
    near_max_shells: int = 1100
    min_offset: float = 1e-300
    max_log_offset: float = 1e6


DEFAULT_OPTIONS = QuadratureOptions()


@dataclass
class IntegralEstimate:
    finite: bool
    value: float | None
    abs_error: float
    refinement_trace: list[float] = field(default_factory=list)
    converged: bool = True
    method: str = ""
    cross_check: float | None = None

    def to_dict(self) -> dict:
        return {
            "finite": self.finite,
            "value": self.value,
            "abs_error": self.abs_error if math.isfinite(self.abs_error) else None,
            "trace": list(self.refinement_trace),
            "converged": self.converged,
        }


@dataclass(frozen=True)
class FinitenessVerdict:
    I_finite: bool
    J_finite: bool
    exponent_used: float
    criterion: str = "J: d > 2e, I: d > 4e"


def edge_finiteness(e: float, d: int) -> FinitenessVerdict:
    """Integrability of 1/gap and 1/gap**2 when gap ~ |theta|**(2e) near the edge point.

    In polar coordinates the radial integrands are r**(d-1-2e) and r**(d-1-4e);
    equality is a logarithmic divergence.
    """
    if not e > 0:
        raise ValueError("edge exponent must be positive")
    _dim(d)
    return FinitenessVerdict(I_finite=d > 4 * e, J_finite=d > 2 * e, exponent_used=float(e))


def symbol_g(spec: MultiplierSpec, theta) -> np.ndarray | float:
    """g(theta) for theta of shape (..., d)."""
    th = np.asarray(theta, dtype=float)
    if th.ndim == 0:
        th = th[None]
    u = np.mean(2.0 * np.cos(th / 2.0) ** 2, axis=-1)
    out = spec(np.clip(u, 0.0, 2.0))
    return float(out) if np.ndim(out) == 0 else out


def locate(spec: MultiplierSpec, E: float) -> str:
    """One of 'below', 'bottom', 'interior', 'top', 'above'."""
    lo, hi = spec.bottom, spec.top
    scale = max(1.0, abs(lo), abs(hi))
    if math.isclose(E, hi, rel_tol=0.0, abs_tol=1e-13 * scale):
        return "top"
    if math.isclose(E, lo, rel_tol=0.0, abs_tol=1e-13 * scale):
        return "bottom"
    if E > hi:
        return "above"
    if E < lo:
        return "below"
    return "interior"


# ---------------------------------------------------------------------------
# multiset reduction


@lru_cache(maxsize=64)
def multisets(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """All non-decreasing index tuples of length k over range(n) and their
    multinomial multiplicities k! / prod(m_i!)."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64), np.ones(1)
    idx = np.arange(n, dtype=np.int64)[:, None]
    run = np.ones(n)
    coef = np.ones(n)
    for _ in range(k - 1):
        last = idx[:, -1]
        counts = n - last
        rep = np.repeat(np.arange(len(last)), counts)
        starts = np.cumsum(counts) - counts
        offset = np.arange(int(counts.sum())) - np.repeat(starts, counts)
        run = np.where(offset == 0, run[rep] + 1.0, 1.0)
        coef = coef[rep] / run
        idx = np.column_stack([idx[rep], last[rep] + offset])
    return idx, coef * math.factorial(k)


def reduced_size(N: int, d: int) -> int:
    return math.comb(N // 2 + d, d)


def max_points_per_axis(d: int, opts: QuadratureOptions = DEFAULT_OPTIONS) -> int:
    N = opts.min_points
    while 2 * N <= opts.max_points and reduced_size(2 * N, d) <= opts.budget:
        N *= 2
    return N


@lru_cache(maxsize=24)
def periodic_nodes(N: int, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduced rectangle-rule nodes on theta_k = -pi + 2 pi k / N.

    Returns (u, w, weight) with u = mean(1 + cos theta_j), w = 2 - u (both
    computed without cancellation) and integer multiplicities summing to N**d.
    """
    c, s = half_angle_terms(N)
    c, s = c[: N // 2 + 1], s[: N // 2 + 1]
    mult = np.full(N // 2 + 1, 2.0)
    mult[0] = mult[-1] = 1.0
    idx, coef = multisets(N // 2 + 1, d)
    u = c[idx].sum(axis=1) / d
    w = s[idx].sum(axis=1) / d
    weight = coef * np.prod(mult[idx], axis=1)
    return u, w, weight


def half_angle_terms(N: int) -> tuple[np.ndarray, np.ndarray]:
    """1 + cos(theta_k) and 1 - cos(theta_k) on theta_k = -pi + 2 pi k / N.

    Written as squared sines so both vanish exactly at theta = -pi and 0.
    """
    k = np.arange(N)
    return 2.0 * np.sin(math.pi * k / N) ** 2, 2.0 * np.sin(math.pi * (k - N / 2) / N) ** 2


# Irrational shift keeps interior level sets off the nodes.
_OFFSET = (math.sqrt(5.0) - 1.0) / 2.0


@lru_cache(maxsize=8)
def offset_nodes(N: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    theta = -math.pi + TWO_PI * (np.arange(N) + _OFFSET) / N
    c = 2.0 * np.cos(theta / 2.0) ** 2
    idx, coef = multisets(N, d)
    return c[idx].sum(axis=1) / d, coef


@lru_cache(maxsize=8)
def _level_gaps(spec: MultiplierSpec, N: int, d: int):
    u, w, weight = periodic_nodes(N, d)
    return spec.drop(w), spec.rise(u), weight


def _rectangle_sum(spec, d, E, power, N, where):
    drop, rise, weight = _level_gaps(spec, N, d)
    if where == "above":
        gap = (E - spec.top) + drop
    else:
        gap = (E - spec.bottom) - rise
    return (TWO_PI / N) ** d * float(np.sum(weight / gap**power))


def _exterior(spec, d, E, power, opts: QuadratureOptions, where) -> IntegralEstimate:
    t = E - spec.top if where == "above" else spec.bottom - E
    if t <= opts.near_edge * (spec.top - spec.bottom):
        return _near_edge(spec, d, t, power, opts, where)
    est = _rectangle(spec, d, E, power, opts, where)
    if not est.converged:
        logger.debug("falling back to graded shells: d=%d E=%r", d, E)
        return _near_edge(spec, d, t, power, opts, where)
    return est


def _rectangle(spec, d, E, power, opts: QuadratureOptions, where) -> IntegralEstimate:
    N = opts.min_points
    n_max = max_points_per_axis(d, opts)
    trace = [_rectangle_sum(spec, d, E, power, N, where)]
    converged = False
    while N < n_max:
        N *= 2
        trace.append(_rectangle_sum(spec, d, E, power, N, where))
        if abs(trace[-1] - trace[-2]) <= opts.tol_int * abs(trace[-1]):
            converged = True
            break
    err = abs(trace[-1] - trace[-2]) if len(trace) > 1 else math.inf
    if not converged:
        logger.debug("rectangle rule not converged: d=%d E=%r N=%d err=%g", d, E, N, err)
    return IntegralEstimate(
        finite=True,
        value=trace[-1],
        abs_error=err,
        refinement_trace=trace,
        converged=converged,
        method=f"periodic rectangle, N={N}",
    )


# ---------------------------------------------------------------------------
# edge shells


@lru_cache(maxsize=16)
def _shell_types(q: int, d: int):
    out = []
    for m in range(1, d + 1):
        iu, cu = multisets(q, m)
        il, cl = multisets(q, d - m)
        out.append((math.comb(d, m), iu, cu, il, cl))
    return tuple(out)


@lru_cache(maxsize=4)
def _gauss(q: int):
    x, wt = np.polynomial.legendre.leggauss(q)
    return (x + 1.0) / 2.0, wt / 2.0


def shell_contribution(h, d: int, R: float, q: int = 8) -> float:
    """Integral of h(mean_j 2 sin^2(phi_j / 2)) over [-R, R]^d minus [-R/2, R/2]^d."""
    t, gw = _gauss(q)
    half = R / 2.0
    s_up = 2.0 * np.sin((half + half * t) / 2.0) ** 2
    s_lo = 2.0 * np.sin((half * t) / 2.0) ** 2
    logw = np.log(half * gw)
    total = 0.0
    for mult, iu, cu, il, cl in _shell_types(q, d):
        su = s_up[iu].sum(axis=1)
        wu = cu * np.exp(logw[iu].sum(axis=1))
        sl = s_lo[il].sum(axis=1)
        wl = cl * np.exp(logw[il].sum(axis=1))
        W = (su[:, None] + sl[None, :]) / d
        total += mult * float(np.sum(wu[:, None] * wl[None, :] * h(W)))
    return 2.0**d * total


def _edge_gap(spec: MultiplierSpec, edge: Edge):
    return spec.drop if edge == "top" else spec.rise


def edge_exponent(spec: MultiplierSpec, edge: Edge) -> float:
    ex = spec.exponents()
    return ex.b if edge == "top" else ex.a


def _near_edge(spec, d, t: float, power: int, opts: QuadratureOptions, where) -> IntegralEstimate:
    """Graded shells for an exterior energy at distance t from the nearest edge."""
    edge: Edge = "top" if where == "above" else "bottom"
    gap = _edge_gap(spec, edge)
    sign = -1.0 if (edge == "bottom" and power == 1) else 1.0

    def h(W):
        return 1.0 / (t + gap(W)) ** power

    q = opts.near_gauss_order
    rho = 2.0**-d
    partial = 0.0
    trace: list[float] = []
    converged = False
    for k in range(opts.near_max_shells):
        R = math.pi * 2.0**-k
        c = sign * shell_contribution(h, d, R, q)
        partial += c
        trace.append(partial + c * rho / (1.0 - rho))
        flat = float(gap(np.array(2.0 * math.sin(R / 2.0) ** 2))) <= 1e-3 * t
        if flat and abs(c) * rho / (1.0 - rho) <= 1e-3 * opts.tol_int * abs(partial):
            converged = True
            break
    err = abs(trace[-1] - trace[-2]) if len(trace) > 1 else math.inf
    return IntegralEstimate(
        finite=True,
        value=trace[-1],
        abs_error=err,
        refinement_trace=trace,
        converged=converged,
        method=f"graded shells, q={q}, {len(trace)} shells",
    )


def _edge(spec, d, edge: Edge, power: int, opts: QuadratureOptions) -> IntegralEstimate:
    e = edge_exponent(spec, edge)
    verdict = edge_finiteness(e, d)
    finite = verdict.I_finite if power == 2 else verdict.J_finite
    gap = _edge_gap(spec, edge)
    sign = -1.0 if (edge == "bottom" and power == 1) else 1.0

    def h(W):
        return 1.0 / gap(W) ** power

    q = opts.gauss_order
    rho = 2.0 ** -(d - 2 * power * e)
    partial = 0.0
    trace: list[float] = []
    if not finite:
        for k in range(opts.divergent_shells):
            partial += sign * shell_contribution(h, d, math.pi * 2.0**-k, q)
            trace.append(partial)
        return IntegralEstimate(
            finite=False,
            value=None,
            abs_error=math.inf,
            refinement_trace=trace,
            converged=False,
            method="dyadic shells (divergent)",
        )
    converged = False
    for k in range(opts.max_shells):
        c = sign * shell_contribution(h, d, math.pi * 2.0**-k, q)
        partial += c
        trace.append(partial + c * rho / (1.0 - rho))
        if k + 1 >= opts.min_shells and abs(c) / (1.0 - rho) <= opts.tol_edge * abs(partial):
            converged = True
            break
    err = abs(trace[-1] - trace[-2])
    if not converged:
        logger.warning("edge quadrature hit max_shells for %s d=%d", spec.label, d)
    return IntegralEstimate(
        finite=True,
        value=trace[-1],
        abs_error=err,
        refinement_trace=trace,
        converged=converged,
        method=f"dyadic shells, q={q}, {len(trace)} shells",
    )


# ---------------------------------------------------------------------------
# public integrals


def _integral(spec, dom, E, power, opts, allow_interior=False, cross_check=False):
    d = _dim(dom)
    where = locate(spec, float(E))
    if where == "interior":
        if allow_interior:
            return _interior_trace(spec, d, float(E), power, opts)
        raise InteriorEnergyError(
            f"E={E} lies inside the band [{spec.bottom}, {spec.top}] of {spec.label}"
        )
    if where in ("top", "bottom"):
        est = _edge(spec, d, where, power, opts)
        if cross_check and est.finite:
            est.cross_check = edge_limit(spec, d, where, power, opts)
        return est
    return _exterior(spec, d, float(E), power, opts, where)


def integral_offset(
    spec: MultiplierSpec,
    dom: TorusDomain | int,
    edge: Edge,
    t: float,
    power: int = 1,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
) -> IntegralEstimate:
    """J (power=1) or I (power=2) at the exterior energy a distance t > 0 beyond ``edge``.

    Energies closer to an edge than float64 can resolve in E itself (offsets
    far below 1e-16 * |edge|) are still meaningful here, because t enters the
    integrand directly instead of through E - edge.
    """
    d = _dim(dom)
    t = float(t)
    if not (t > 0.0 and math.isfinite(t)):
        raise ValueError(f"offset must be positive and finite, got {t}")
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    floor = offset_floor(spec, edge, power, opts)
    if t < floor:
        raise ValueError(f"offset {t:g} is below the reliable floor {floor:g}; use integral_log_offset")
    where = "above" if edge == "top" else "below"
    if t <= opts.near_edge * (spec.top - spec.bottom):
        return _near_edge(spec, d, t, power, opts, where)
    E = spec.top + t if edge == "top" else spec.bottom - t
    return _exterior(spec, d, E, power, opts, where)


def offset_floor(
    spec: MultiplierSpec, edge: Edge, power: int = 1, opts: QuadratureOptions = DEFAULT_OPTIONS
) -> float:
    """Smallest offset the shell rule evaluates reliably in float64.

    The shells must reach W ~ t**(1/e) without underflow and (t + gap)**power
    must not underflow; the factor 1e6 keeps clear of both limits.
    """
    e = edge_exponent(spec, edge)
    m = opts.min_offset
    return 1e6 * max(m ** (1.0 / power), m ** min(e, 1.0))


def log_coefficient(spec: MultiplierSpec, d: int, edge: Edge, power: int = 1) -> float | None:
    """A in |F(t)| = A log(1/t) + B + o(1) when d = 2 * power * e, else None.

    Near the edge gap ~ kappa W**e with W ~ |theta|**2 / (2d).  Integrating
    radially with u = |theta|**2 / (2d) and then w = u**e gives
    A = |S^(d-1)| (2d)**(d/2) / (2 e kappa**power).
    """
    e = edge_exponent(spec, edge)
    if abs(d - 2.0 * power * e) > 1e-12:
        return None
    ka, kb = spec.edge_coefficients()
    kappa = kb if edge == "top" else ka
    sphere = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    return sphere * (2.0 * d) ** (d / 2.0) / (2.0 * e * kappa**power)


def integral_log_offset(
    spec: MultiplierSpec,
    dom: TorusDomain | int,
    edge: Edge,
    log_t: float,
    power: int = 1,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
) -> IntegralEstimate:
    """Like ``integral_offset`` but parameterised by log t.

    Below ``offset_floor`` only log-critical edges (d = 2 * power * e) are
    supported: there F(t) = F(t0) + A log(t0 / t) up to O(t0 log t0), which is
    far below the quadrature error.  Other edges raise ValueError; a power-law
    divergence at such offsets exceeds any coupling resolvable in float64.
    """
    d = _dim(dom)
    log_t = float(log_t)
    if not math.isfinite(log_t):
        raise ValueError(f"log offset must be finite, got {log_t}")
    floor = offset_floor(spec, edge, power, opts)
    log_floor = math.log(floor)
    if log_t >= log_floor:
        return integral_offset(spec, d, edge, math.exp(log_t), power, opts)
    A = log_coefficient(spec, d, edge, power)
    if A is None:
        raise ValueError(
            f"offset exp({log_t:g}) is below the floor {floor:g} and the {edge} edge is not log-critical in d={d}"
        )
    base = integral_offset(spec, d, edge, floor, power, opts)
    sign = -1.0 if (edge == "bottom" and power == 1) else 1.0
    value = base.value + sign * A * (log_floor - log_t)
    return IntegralEstimate(
        finite=True,
        value=value,
        abs_error=base.abs_error + A * floor * abs(log_t),
        refinement_trace=[base.value, value],
        converged=base.converged,
        method=f"log continuation from t={floor:g}",
    )


def integral_J(
    spec: MultiplierSpec,
    dom: TorusDomain | int,
    E: float,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
    *,
    cross_check: bool = False,
) -> IntegralEstimate:
    """J(E) = int_T 1/(E - g).  Raises InteriorEnergyError inside the band."""
    return _integral(spec, dom, E, 1, opts, cross_check=cross_check)


def integral_I(
    spec: MultiplierSpec,
    dom: TorusDomain | int,
    E: float,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
    *,
    allow_interior: bool = False,
    cross_check: bool = False,
) -> IntegralEstimate:
    """I(E) = int_T 1/(E - g)^2.

    With ``allow_interior`` an interior energy yields ``finite=False`` and the
    rectangle sums on an offset grid as the refinement trace, which keep
    growing with N.
    """
    return _integral(spec, dom, E, 2, opts, allow_interior=allow_interior, cross_check=cross_check)


def _interior_trace(spec, d, E, power, opts, levels: int | None = None) -> IntegralEstimate:
    """Rectangle sums of |E - g|^-power for an energy inside the band.

    The level set g = E is a hypersurface and grid nodes can land on it
    exactly (identity symbol, E = 1: nodes k and k + N/2 cancel), so |E - g|
    is floored at width / N, the typical node-to-surface distance.  The sums
    then grow with N instead of settling.
    """
    trace = []
    N = opts.min_points
    width = spec.top - spec.bottom
    while math.comb(N + d - 1, d) <= opts.budget and (levels is None or len(trace) < levels):
        u, coef = offset_nodes(N, d)
        dist = np.maximum(np.abs(E - spec(u)), width / N)
        trace.append((TWO_PI / N) ** d * float(np.sum(coef / dist**power)))
        N *= 2
    return IntegralEstimate(
        finite=False,
        value=None,
        abs_error=math.inf,
        refinement_trace=trace,
        converged=False,
        method="offset rectangle (interior)",
    )


def edge_limit(
    spec: MultiplierSpec,
    d: int,
    edge: Edge,
    power: int = 1,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
    n_eps: int = 7,
) -> float:
    """Extrapolate the exterior integral to the edge as eps -> 0.

    Fits F(edge +- eps) = F0 + sum_j c_j eps**p_j by least squares, where the
    exponents p_j are the leading ones of the small-eps expansion
    (gamma = d/(2e) - power, 1, 2 gamma, gamma + 1, ...).
    """
    e = edge_exponent(spec, edge)
    gamma = d / (2.0 * e) - power
    if gamma <= 0:
        raise ValueError("edge integral diverges; nothing to extrapolate")
    width = spec.top - spec.bottom
    eps = 0.05 * width * 4.0 ** -np.arange(n_eps)
    direction = 1.0 if edge == "top" else -1.0
    base = spec.top if edge == "top" else spec.bottom
    vals = np.array(
        [_integral(spec, d, base + direction * x, power, opts).value for x in eps]
    )
    powers: list[float] = []
    for p in sorted({gamma, 1.0, 2 * gamma, gamma + 1.0, 2.0, 3 * gamma}):
        if all(abs(p - q) > 1e-9 for q in powers):
            powers.append(p)
    powers = powers[: n_eps - 3]
    cols = [np.ones_like(eps)]
    for p in powers:
        cols.append(eps**p)
        if abs(p - round(p)) < 1e-9 and abs(gamma - round(gamma)) < 1e-9:
            cols.append(eps**p * np.log(eps))
    A = np.column_stack(cols[: n_eps - 1])
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return float(coef[0])
