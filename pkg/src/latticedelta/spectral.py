"""Eigenvalues of H_v = g(theta) + v (Omega, .) Omega and its edge behaviour.

E outside the band is an eigenvalue for exactly one coupling,
v(E) = (2 pi)^d / J(E).  The band edges are classified by integrability of
J and I there: J infinite means eigenvalues for every coupling of that sign,
J finite with I infinite is a resonance at the threshold coupling, and I
finite is an edge mode.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .multiplier import MultiplierSpec
from .torus_quadrature import (
    DEFAULT_OPTIONS,
    TWO_PI,
    Edge,
    IntegralEstimate,
    QuadratureOptions,
    TorusDomain,
    edge_exponent,
    edge_finiteness,
    integral_I,
    integral_J,
    integral_log_offset,
    integral_offset,
    locate,
)

logger = logging.getLogger(__name__)


class NoCouplingError(ValueError):
    """No coupling makes E an eigenvalue (interior energy or divergent J)."""


class BracketError(RuntimeError):
    """Root bracket for the coupling-to-energy inversion failed."""


class Reason(str, enum.Enum):
    OK = "OK"
    I_DIVERGENT = "I_divergent"
    J_ZERO = "J_zero"
    INTERIOR = "InteriorEnergy"


class Behavior(str, enum.Enum):
    UNCONDITIONAL = "Unconditional"
    RESONANCE = "Resonance"
    MODE = "Mode"


@dataclass(frozen=True)
class EigenvalueVerdict:
    is_eigenvalue: bool
    reason: Reason
    coupling: float | None = None


@dataclass
class ThresholdReport:
    v0: float
    v2: float
    bottom: IntegralEstimate
    top: IntegralEstimate

    def to_dict(self) -> dict:
        return {
            "v0": self.v0,
            "v2": self.v2,
            "bottom_J": self.bottom.to_dict(),
            "top_J": self.top.to_dict(),
        }


@dataclass(frozen=True)
class EdgeBehavior:
    edge: Edge
    energy: float
    behavior: Behavior
    threshold: float | None

    def to_dict(self) -> dict:
        return {
            "edge": self.edge,
            "energy": self.energy,
            "behavior": self.behavior.value,
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class EigencurvePoint:
    """One point of an eigenvalue branch.

    ``offset`` is the exact distance |E - edge|, which stays meaningful when
    it is too small to be resolved in E (E may then round to the edge).
    ``log_offset`` is its logarithm and remains exact when the offset itself
    underflows.  ``resolved`` is False only when no root could be located;
    E, offset and log_offset then describe the closest point evaluated, where
    the coupling still exceeds |v|.
    """

    v: float
    E: float
    at_edge: bool = False
    offset: float = 0.0
    resolved: bool = True
    log_offset: float = -math.inf


@dataclass(frozen=True)
class BehaviorRow:
    d: int
    top_mode: bool
    top_resonance: bool
    bottom_mode: bool
    bottom_resonance: bool


TABLE_HEADER = ("d", "top_mode", "top_resonance", "bottom_mode", "bottom_resonance")


def _check_dim(d: int) -> int:
    return TorusDomain(int(d)).d


def _edge_energy(spec: MultiplierSpec, edge: Edge) -> float:
    return spec.top if edge == "top" else spec.bottom


def is_eigenvalue(
    spec: MultiplierSpec, d: int, E: float, opts: QuadratureOptions = DEFAULT_OPTIONS
) -> EigenvalueVerdict:
    d = _check_dim(d)
    where = locate(spec, E)
    if where == "interior":
        return EigenvalueVerdict(False, Reason.INTERIOR)
    if where in ("top", "bottom"):
        if not edge_finiteness(edge_exponent(spec, where), d).I_finite:
            return EigenvalueVerdict(False, Reason.I_DIVERGENT)
    J = integral_J(spec, d, E, opts)
    if not J.finite:
        return EigenvalueVerdict(False, Reason.I_DIVERGENT)
    if J.value == 0.0:
        return EigenvalueVerdict(False, Reason.J_ZERO)
    return EigenvalueVerdict(True, Reason.OK, TWO_PI**d / J.value)


def coupling_for_energy(
    spec: MultiplierSpec,
    d: int,
    E: float,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
    *,
    offset: float | None = None,
    log_offset: float | None = None,
) -> float:
    """(2 pi)^d / J(E); defined outside the band and at edges with finite J.

    ``offset`` or ``log_offset`` optionally give the exact distance from E to
    the nearest edge (as carried by EigencurvePoint); they are used instead
    of E - edge.  ``log_offset`` takes precedence.
    """
    d = _check_dim(d)
    where = locate(spec, E)
    if where == "interior":
        raise NoCouplingError(f"E={E} is inside the band of {spec.label}")
    edge: Edge = "top" if where in ("top", "above") else "bottom"
    if log_offset is not None and math.isfinite(log_offset):
        J = integral_log_offset(spec, d, edge, log_offset, 1, opts)
    elif offset is not None and offset > 0.0:
        J = integral_offset(spec, d, edge, offset, 1, opts)
    else:
        J = integral_J(spec, d, E, opts)
    if not J.finite:
        raise NoCouplingError(f"J diverges at the edge E={E} for d={d}")
    if J.value == 0.0:
        raise NoCouplingError("J(E) = 0")
    return TWO_PI**d / J.value


def thresholds(
    spec: MultiplierSpec, d: int, opts: QuadratureOptions = DEFAULT_OPTIONS
) -> ThresholdReport:
    d = _check_dim(d)
    top = integral_J(spec, d, spec.top, opts)
    bottom = integral_J(spec, d, spec.bottom, opts)
    v2 = TWO_PI**d / top.value if top.finite else 0.0
    v0 = TWO_PI**d / bottom.value if bottom.finite else 0.0
    return ThresholdReport(v0=v0, v2=v2, bottom=bottom, top=top)


def _threshold(spec, d, edge: Edge, opts) -> float:
    J = integral_J(spec, d, _edge_energy(spec, edge), opts)
    return TWO_PI**d / J.value if J.finite else 0.0


def behavior_from_exponent(e: float, d: int) -> Behavior:
    verdict = edge_finiteness(e, d)
    if not verdict.J_finite:
        return Behavior.UNCONDITIONAL
    if not verdict.I_finite:
        return Behavior.RESONANCE
    return Behavior.MODE


def classify_edge(
    spec: MultiplierSpec,
    d: int,
    side: float,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
    *,
    with_threshold: bool = True,
) -> EdgeBehavior:
    """Edge behaviour for couplings of sign ``side``: v > 0 probes Psi(2), v < 0 probes Psi(0)."""
    d = _check_dim(d)
    if side == 0:
        raise ValueError("side must be a nonzero coupling sign")
    edge: Edge = "top" if side > 0 else "bottom"
    behavior = behavior_from_exponent(edge_exponent(spec, edge), d)
    threshold = None
    if behavior is Behavior.UNCONDITIONAL:
        threshold = 0.0
    elif with_threshold:
        threshold = _threshold(spec, d, edge, opts)
    return EdgeBehavior(edge, _edge_energy(spec, edge), behavior, threshold)


def _row(d: int, top: Behavior, bottom: Behavior) -> BehaviorRow:
    return BehaviorRow(
        d,
        top_mode=top is Behavior.MODE,
        top_resonance=top is Behavior.RESONANCE,
        bottom_mode=bottom is Behavior.MODE,
        bottom_resonance=bottom is Behavior.RESONANCE,
    )


def behavior_table(spec: MultiplierSpec, d_range: Iterable[int]) -> list[BehaviorRow]:
    rows = []
    for d in d_range:
        d = _check_dim(d)
        top = classify_edge(spec, d, +1, with_threshold=False).behavior
        bottom = classify_edge(spec, d, -1, with_threshold=False).behavior
        rows.append(_row(d, top, bottom))
    return rows


def exponent_table(a: float, b: float, d_range: Iterable[int]) -> list[BehaviorRow]:
    """Behaviour rows for bare edge exponents, no multiplier needed."""
    return [
        _row(_check_dim(d), behavior_from_exponent(b, d), behavior_from_exponent(a, d))
        for d in d_range
    ]


def table_to_csv(rows: Sequence[BehaviorRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for r in rows:
        writer.writerow(
            [r.d]
            + ["yes" if x else "no" for x in (r.top_mode, r.top_resonance, r.bottom_mode, r.bottom_resonance)]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# coupling -> energy


def _bracket_eps(edge_energy: float) -> float:
    return 1e-12 * (1.0 + abs(edge_energy))


def energy_for_coupling(
    spec: MultiplierSpec,
    d: int,
    v: float,
    opts: QuadratureOptions = DEFAULT_OPTIONS,
    *,
    threshold: float | None = None,
    xtol: float = 1e-14,
) -> EigencurvePoint | None:
    """The unique eigenvalue of H_v outside the band, if any.

    ``threshold`` may pass a precomputed v2 (v > 0) or v0 (v < 0) to skip the
    edge quadrature when sweeping many couplings.  Returns None on the
    no-eigenvalue side; at the threshold itself returns the edge energy
    (``at_edge=True``) when the edge carries a mode.
    """
    d = _check_dim(d)
    v = float(v)
    if v == 0.0 or not math.isfinite(v):
        raise ValueError("coupling must be finite and nonzero")
    edge: Edge = "top" if v > 0 else "bottom"
    edge_E = _edge_energy(spec, edge)
    behavior = behavior_from_exponent(edge_exponent(spec, edge), d)
    if behavior is not Behavior.UNCONDITIONAL:
        vt = threshold if threshold is not None else _threshold(spec, d, edge, opts)
        if math.isclose(v, vt, rel_tol=1e-10):
            return EigencurvePoint(v, edge_E, at_edge=True) if behavior is Behavior.MODE else None
        if abs(v) < abs(vt):
            return None

    direction = 1.0 if v > 0 else -1.0
    lo = _bracket_eps(edge_E)
    hi = abs(v)

    def f(t):
        # coupling at offset t beyond the edge, minus v; increasing in t
        J = integral_offset(spec, d, edge, t, 1, opts).value
        return direction * (TWO_PI**d / J - v)

    f_lo, f_hi = f(lo), f(hi)
    if f_hi < 0:
        raise BracketError(
            f"upper bracket failed for {spec.label}, d={d}, v={v}: f({hi})={f_hi}"
        )
    if f_lo > 0:
        # The root is closer to the edge than the bracket floor.  This happens
        # for small |v| when J diverges only logarithmically at the edge, where
        # t ~ exp(-c/|v|).  Continue in s = log t; E then rounds to the edge
        # and the offset (or log_offset) carries the answer.
        def g(s):
            J = integral_log_offset(spec, d, edge, s, 1, opts).value
            return direction * (TWO_PI**d / J - v)

        s_hi = s_lo = s_seen = math.log(lo)
        try:
            while g(s_lo) > 0:
                s_seen = s_lo
                if s_lo < -opts.max_log_offset:
                    raise ValueError("root beyond the largest supported log offset")
                s_lo *= 2.0
        except ValueError as exc:
            # report the closest offset evaluated; the root lies nearer the edge
            logger.info("coupling v=%r: %s", v, exc)
            t = math.exp(s_seen)
            return EigencurvePoint(v, edge_E + direction * t, offset=t, log_offset=s_seen, resolved=False)
        s = optimize.brentq(g, s_lo, s_hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        t = math.exp(s)
        return EigencurvePoint(v, edge_E + direction * t, offset=t, log_offset=s)
    t = optimize.brentq(f, lo, hi, xtol=xtol * lo, rtol=4 * np.finfo(float).eps, maxiter=200)
    return EigencurvePoint(v, edge_E + direction * t, offset=t, log_offset=math.log(t))


def eigencurve(
    spec: MultiplierSpec,
    d: int,
    couplings: Sequence[float],
    opts: QuadratureOptions = DEFAULT_OPTIONS,
) -> list[tuple[float, EigencurvePoint | None]]:
    report = None
    out = []
    for v in couplings:
        if v == 0.0:
            out.append((v, None))
            continue
        if report is None:
            report = thresholds(spec, d, opts)
        vt = report.v2 if v > 0 else report.v0
        out.append((v, energy_for_coupling(spec, d, v, opts, threshold=vt)))
    return out


# ---------------------------------------------------------------------------
# eigenvectors


def _rectangle_fourier(F, d, sites, N, offset=0.0):
    theta1 = -math.pi + TWO_PI * (np.arange(N) + offset) / N
    grids = np.meshgrid(*([theta1] * d), indexing="ij", sparse=True)
    vals = F(grids)
    out = []
    for x in sites:
        phase = sum(xj * g for xj, g in zip(x, grids))
        out.append(float(np.mean(np.cos(phase) * vals)))
    return np.array(out)


def _u_of(grids, d):
    return sum(2.0 * np.cos(g / 2.0) ** 2 for g in grids) / d


def _w_of(grids, d):
    return sum(2.0 * np.sin(g / 2.0) ** 2 for g in grids) / d


def _lattice_green_exterior(spec, d, E, sites, tol=1e-10, max_total=2**22):
    def F(grids):
        return 1.0 / (E - spec(np.clip(_u_of(grids, d), 0.0, 2.0)))

    reach = max((max(abs(c) for c in x) for x in sites), default=0)
    N = 8
    while N <= 2 * reach:
        N *= 2
    prev = _rectangle_fourier(F, d, sites, N)
    while (2 * N) ** d <= max_total:
        N *= 2
        cur = _rectangle_fourier(F, d, sites, N)
        if np.max(np.abs(cur - prev)) <= tol * np.max(np.abs(cur)):
            return cur
        prev = cur
    return prev


def _site_kernel(x, d, e):
    """(2 pi)^-d int e^{i x.phi} W^-e with W = mean(1 - cos phi_j)."""

    def f(t):
        return t ** (e - 1.0) * np.prod([special.ive(abs(xj), t / d) for xj in x])

    val = 0.0
    for a, b in ((0.0, 1.0), (1.0, 100.0), (100.0, np.inf)):
        val += integrate.quad(f, a, b, limit=400, epsabs=0.0, epsrel=1e-12)[0]
    return val / special.gamma(e)


def _lattice_green_edge(spec, d, edge: Edge, sites, N=None):
    """Fourier coefficients of 1/(E_edge - g) at a mode edge.

    The leading singular term c W^-e is transformed exactly with a Bessel
    integral; the bounded remainder uses an offset rectangle rule.
    """
    e = edge_exponent(spec, edge)
    ka, kb = spec.edge_coefficients()
    kappa = kb if edge == "top" else ka
    gap = spec.drop if edge == "top" else spec.rise
    sign = 1.0 if edge == "top" else -1.0
    if N is None:
        N = 16
        while (2 * N) ** d <= 2**21:
            N *= 2

    def remainder(grids):
        # grids are shifted coordinates phi; theta = phi (+ pi at the bottom)
        W = _w_of(grids, d)
        return 1.0 / gap(W) - W ** (-e) / kappa

    shifted = _rectangle_fourier(remainder, d, sites, N, offset=0.5)
    out = []
    for x, r in zip(sites, shifted):
        parity = (-1.0) ** int(sum(x)) if edge == "bottom" else 1.0
        out.append(sign * parity * (_site_kernel(x, d, e) / kappa + r))
    return np.array(out)


def eigenvector_profile(
    spec: MultiplierSpec,
    d: int,
    E: float,
    sites: Sequence[Sequence[int]],
    opts: QuadratureOptions = DEFAULT_OPTIONS,
) -> np.ndarray:
    """Normalised eigenvector amplitudes Phi(x) at the requested lattice sites.

    Phi(x) = (2 pi)^-d int e^{i x.theta} / (E - g), scaled so that
    sum_x |Phi(x)|^2 = 1 and Phi(0) > 0.
    """
    d = _check_dim(d)
    sites = [tuple(int(c) for c in x) for x in sites]
    if any(len(x) != d for x in sites):
        raise ValueError(f"sites must have {d} coordinates")
    verdict = is_eigenvalue(spec, d, E, opts)
    if not verdict.is_eigenvalue:
        raise NoCouplingError(f"E={E} is not an eigenvalue ({verdict.reason.value})")
    where = locate(spec, E)
    if where in ("top", "bottom"):
        amps = _lattice_green_edge(spec, d, where, sites)
    else:
        amps = _lattice_green_exterior(spec, d, E, sites)
    I = integral_I(spec, d, E, opts).value
    norm = math.sqrt(I / TWO_PI**d)
    # 1/(E - g) has the sign of E - g everywhere, so Phi(0) has that sign too
    phase = 1.0 if where in ("above", "top") else -1.0
    return phase * amps / norm
