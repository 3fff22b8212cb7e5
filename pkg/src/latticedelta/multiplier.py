"""Catalogue of multiplier functions Psi acting on the discrete Laplacian.

Each catalogue entry is a frozen dataclass.  Besides pointwise evaluation,
every entry knows how to compute the two edge gaps

    rise(x) = Psi(x) - Psi(0)
    drop(x) = Psi(2) - Psi(2 - x)

without cancellation for small ``x``.  The edge quadrature works with gaps
down to ~1e-20, so the naive differences are not usable there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar, Sequence

import numpy as np

__all__ = [
    "InvalidSpecError",
    "EstimationError",
    "EdgeExponents",
    "SpectralWindow",
    "MultiplierSpec",
    "Identity",
    "Fractional",
    "Relativistic",
    "JumpDiffusion",
    "GeometricStable",
    "HigherOrder",
    "Atom",
    "DiscreteBernstein",
    "eval_psi",
    "spectral_window",
    "edge_exponents",
    "estimate_edge_exponents",
    "spec_from_dict",
    "catalogue",
]


class InvalidSpecError(ValueError):
    """Multiplier parameters outside the admissible range."""


class EstimationError(RuntimeError):
    """Log-log slopes did not settle; ``slopes`` holds the raw pairwise values."""

    def __init__(self, message: str, slopes: dict[str, list[float]]):
        super().__init__(message)
        self.slopes = slopes


@dataclass(frozen=True)
class EdgeExponents:
    a: float  # Psi(x) - Psi(0) ~ x**a
    b: float  # Psi(2) - Psi(2 - x) ~ x**b

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidSpecError(f"edge exponents must be positive, got {self}")


@dataclass(frozen=True)
class SpectralWindow:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidSpecError(f"empty spectral window [{self.lo}, {self.hi}]")

    def contains_interior(self, E: float) -> bool:
        return self.lo < E < self.hi


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 2.0) or not math.isfinite(alpha):
        raise InvalidSpecError(f"alpha must lie in (0, 2), got {alpha}")


def _power_drop(x, p: float, base: float = 2.0):
    """base**p - (base - x)**p, accurate for small x."""
    with np.errstate(divide="ignore"):
        return -(base**p) * np.expm1(p * np.log1p(-np.asarray(x, dtype=float) / base))


class MultiplierSpec:
    """Base class for catalogue entries.

    Subclasses implement ``__call__`` (vectorised Psi), ``rise``, ``drop``,
    ``exponents`` and ``edge_coefficients``.  The last returns the leading
    constants (ka, kb) with rise(x) ~ ka * x**a and drop(x) ~ kb * x**b.
    """

    kind: ClassVar[str]

    def __call__(self, u):
        raise NotImplementedError

    def rise(self, x):
        raise NotImplementedError

    def drop(self, x):
        raise NotImplementedError

    def exponents(self) -> EdgeExponents:
        raise NotImplementedError

    def edge_coefficients(self) -> tuple[float, float]:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    @property
    def bottom(self) -> float:
        return float(self(0.0))

    @property
    def top(self) -> float:
        return float(self(2.0))

    def window(self) -> SpectralWindow:
        return SpectralWindow(self.bottom, self.top)

    @property
    def label(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.to_dict().items() if k != "kind")
        return f"{self.kind}({params})" if params else self.kind


@dataclass(frozen=True)
class Identity(MultiplierSpec):
    kind: ClassVar[str] = "identity"

    def __call__(self, u):
        return np.asarray(u, dtype=float) * 1.0

    def rise(self, x):
        return np.asarray(x, dtype=float) * 1.0

    def drop(self, x):
        return np.asarray(x, dtype=float) * 1.0

    def exponents(self):
        return EdgeExponents(1.0, 1.0)

    def edge_coefficients(self):
        return 1.0, 1.0

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Fractional(MultiplierSpec):
    """Psi(u) = u**(alpha/2)."""

    alpha: float = 1.0
    kind: ClassVar[str] = "fractional"

    def __post_init__(self):
        _check_alpha(self.alpha)

    @property
    def p(self) -> float:
        return self.alpha / 2

    def __call__(self, u):
        return np.power(np.asarray(u, dtype=float), self.p)

    def rise(self, x):
        return self(x)

    def drop(self, x):
        return _power_drop(x, self.p)

    def exponents(self):
        return EdgeExponents(self.p, 1.0)

    def edge_coefficients(self):
        return 1.0, self.p * 2.0 ** (self.p - 1)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class Relativistic(MultiplierSpec):
    """Psi(u) = (u + m**(2/alpha))**(alpha/2) - m; m = 0 is the fractional case."""

    alpha: float = 1.0
    mass: float = 1.0
    kind: ClassVar[str] = "relativistic"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (self.mass >= 0.0) or not math.isfinite(self.mass):
            raise InvalidSpecError(f"mass must be >= 0, got {self.mass}")

    @property
    def p(self) -> float:
        return self.alpha / 2

    @property
    def mu(self) -> float:
        return self.mass ** (1.0 / self.p)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.mass == 0.0:
            return np.power(u, self.p)
        # (u + mu)**p - mu**p with mu**p == m
        return self.mass * np.expm1(self.p * np.log1p(u / self.mu))

    def rise(self, x):
        return self(x)

    def drop(self, x):
        return _power_drop(x, self.p, base=2.0 + self.mu)

    def exponents(self):
        if self.mass == 0.0:
            return EdgeExponents(self.p, 1.0)
        return EdgeExponents(1.0, 1.0)

    def edge_coefficients(self):
        kb = self.p * (2.0 + self.mu) ** (self.p - 1)
        if self.mass == 0.0:
            return 1.0, kb
        return self.p * self.mu ** (self.p - 1), kb

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "mass": self.mass}


@dataclass(frozen=True)
class JumpDiffusion(MultiplierSpec):
    """Psi(u) = u + bcoef * u**(alpha/2)."""

    alpha: float = 1.0
    bcoef: float = 1.0
    kind: ClassVar[str] = "jump_diffusion"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (self.bcoef > 0.0) or not math.isfinite(self.bcoef):
            raise InvalidSpecError(f"bcoef must be > 0, got {self.bcoef}")

    @property
    def p(self) -> float:
        return self.alpha / 2

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return u + self.bcoef * np.power(u, self.p)

    def rise(self, x):
        return self(x)

    def drop(self, x):
        x = np.asarray(x, dtype=float)
        return x + self.bcoef * _power_drop(x, self.p)

    def exponents(self):
        return EdgeExponents(self.p, 1.0)

    def edge_coefficients(self):
        return self.bcoef, 1.0 + self.bcoef * self.p * 2.0 ** (self.p - 1)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "bcoef": self.bcoef}


@dataclass(frozen=True)
class GeometricStable(MultiplierSpec):
    """Psi(u) = log(1 + u**(alpha/2))."""

    alpha: float = 1.0
    kind: ClassVar[str] = "geometric_stable"

    def __post_init__(self):
        _check_alpha(self.alpha)

    @property
    def p(self) -> float:
        return self.alpha / 2

    def __call__(self, u):
        return np.log1p(np.power(np.asarray(u, dtype=float), self.p))

    def rise(self, x):
        return self(x)

    def drop(self, x):
        # log(1+2^p) - log(1+(2-x)^p) = -log1p(-(2^p - (2-x)^p) / (1 + 2^p))
        return -np.log1p(-_power_drop(x, self.p) / (1.0 + 2.0**self.p))

    def exponents(self):
        return EdgeExponents(self.p, 1.0)

    def edge_coefficients(self):
        return 1.0, self.p * 2.0 ** (self.p - 1) / (1.0 + 2.0**self.p)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class HigherOrder(MultiplierSpec):
    """Psi(u) = u**beta with beta > 1."""

    beta: float = 2.0
    kind: ClassVar[str] = "higher_order"

    def __post_init__(self):
        if not (self.beta > 1.0) or not math.isfinite(self.beta):
            raise InvalidSpecError(f"beta must be > 1, got {self.beta}")

    def __call__(self, u):
        return np.power(np.asarray(u, dtype=float), self.beta)

    def rise(self, x):
        return self(x)

    def drop(self, x):
        return _power_drop(x, self.beta)

    def exponents(self):
        return EdgeExponents(self.beta, 1.0)

    def edge_coefficients(self):
        return 1.0, self.beta * 2.0 ** (self.beta - 1)

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta}


@dataclass(frozen=True)
class Atom:
    w: float
    y: float


@dataclass(frozen=True)
class DiscreteBernstein(MultiplierSpec):
    """Psi(u) = drift*u + sum_i w_i (1 - exp(-u y_i)), a finite Levy measure."""

    drift: float = 0.0
    atoms: tuple[Atom, ...] = (Atom(1.0, 2.0),)
    kind: ClassVar[str] = "bernstein"

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not (self.drift >= 0.0) or not math.isfinite(self.drift):
            raise InvalidSpecError(f"drift must be >= 0, got {self.drift}")
        for atom in atoms:
            if not (atom.w > 0.0 and atom.y > 0.0):
                raise InvalidSpecError(f"atom weights and locations must be > 0, got {atom}")
        if self.drift == 0.0 and not atoms:
            raise InvalidSpecError("zero drift with no atoms is not strictly increasing")

    def _w_y(self):
        w = np.array([a.w for a in self.atoms], dtype=float)
        y = np.array([a.y for a in self.atoms], dtype=float)
        return w, y

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        w, y = self._w_y()
        out = self.drift * u
        for wi, yi in zip(w, y):
            out = out - wi * np.expm1(-u * yi)
        return out

    def rise(self, x):
        return self(x)

    def drop(self, x):
        x = np.asarray(x, dtype=float)
        out = self.drift * x
        for atom in self.atoms:
            out = out + atom.w * math.exp(-2.0 * atom.y) * np.expm1(x * atom.y)
        return out

    def exponents(self):
        return EdgeExponents(1.0, 1.0)

    def edge_coefficients(self):
        w, y = self._w_y()
        return (
            self.drift + float(np.sum(w * y)),
            self.drift + float(np.sum(w * y * np.exp(-2.0 * y))),
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "drift": self.drift,
            "atoms": [{"w": a.w, "y": a.y} for a in self.atoms],
        }


_KINDS: dict[str, type[MultiplierSpec]] = {
    cls.kind: cls
    for cls in (
        Identity,
        Fractional,
        Relativistic,
        JumpDiffusion,
        GeometricStable,
        HigherOrder,
        DiscreteBernstein,
    )
}
_ALIASES = {"geometric": "geometric_stable", "jump": "jump_diffusion", "higher": "higher_order"}


def normalize_kind(kind: str) -> str:
    k = kind.strip().lower().replace("-", "_")
    k = _ALIASES.get(k, k)
    if k not in _KINDS:
        raise InvalidSpecError(f"unknown multiplier kind {kind!r}; choose from {sorted(_KINDS)}")
    return k


def spec_from_dict(data: dict[str, Any]) -> MultiplierSpec:
    """Inverse of ``MultiplierSpec.to_dict`` (the canonical JSON encoding)."""
    if "kind" not in data:
        raise InvalidSpecError("multiplier JSON needs a 'kind' field")
    kind = normalize_kind(str(data["kind"]))
    params = {k: v for k, v in data.items() if k != "kind"}
    cls = _KINDS[kind]
    if cls is DiscreteBernstein and "atoms" in params:
        try:
            params["atoms"] = tuple(Atom(float(a["w"]), float(a["y"])) for a in params["atoms"])
        except (KeyError, TypeError) as exc:
            raise InvalidSpecError(f"bad atoms entry: {exc}") from None
    try:
        return cls(**{k: (v if k == "atoms" else float(v)) for k, v in params.items()})
    except TypeError as exc:
        raise InvalidSpecError(str(exc)) from None


def catalogue() -> list[MultiplierSpec]:
    """One instance per catalogue kind, default parameters (plus the massless limit)."""
    return [
        Identity(),
        Fractional(1.0),
        Relativistic(1.0, 1.0),
        Relativistic(1.0, 0.0),
        JumpDiffusion(1.0, 1.0),
        GeometricStable(1.0),
        HigherOrder(2.0),
        DiscreteBernstein(0.0, (Atom(1.0, 2.0),)),
    ]


def eval_psi(spec: MultiplierSpec, u):
    """Psi(u) for u in [0, 2]."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 2.0):
        raise ValueError("u must lie in [0, 2]")
    out = spec(arr)
    return float(out) if out.ndim == 0 else out


def spectral_window(spec: MultiplierSpec) -> SpectralWindow:
    return spec.window()


def edge_exponents(spec: MultiplierSpec) -> EdgeExponents:
    return spec.exponents()


def _slopes(gap, xs: np.ndarray) -> np.ndarray:
    vals = np.log2(gap(xs))
    return -(vals[1:] - vals[:-1])  # xs halve each step


def estimate_edge_exponents(
    spec: MultiplierSpec, samples: int = 40, tol: float = 0.05
) -> EdgeExponents:
    """Fit log-log slopes of the edge gaps on x = 2**-k, k = 1..samples.

    Only the finer half of the samples enters the fit; the spread of the
    pairwise slopes over that half must stay below ``tol``.
    """
    if samples < 4:
        raise ValueError("need at least 4 samples")
    xs = 2.0 ** -np.arange(1, samples + 1, dtype=float)
    fine = xs[samples // 2 :]
    out = {}
    raw = {}
    for name, gap in (("a", spec.rise), ("b", spec.drop)):
        s = _slopes(gap, fine)
        raw[name] = s.tolist()
        if not np.all(np.isfinite(s)) or np.ptp(s) > tol:
            raise EstimationError(f"edge exponent {name} did not settle", raw)
        out[name] = float(np.polyfit(np.log2(fine), np.log2(gap(fine)), 1)[0])
    return EdgeExponents(out["a"], out["b"])


def with_defaults(kind: str, values: Sequence[tuple[str, float | None]]) -> MultiplierSpec:
    """Build a spec from CLI-style keyword values, ignoring ``None`` entries."""
    kind = normalize_kind(kind)
    cls = _KINDS[kind]
    params = {k: v for k, v in values if v is not None}
    allowed = {f for f in getattr(cls, "__dataclass_fields__", {})}
    unknown = set(params) - allowed
    if unknown:
        raise InvalidSpecError(f"{kind} does not take {sorted(unknown)}")
    return cls(**params)
