"""Reference values computed by methods that share no code with the package.

* closed forms for d = 1 and the simple-cubic Green constant;
* Laplace/Bessel representation for the identity symbol,
  1/x = int_0^inf exp(-s x) ds  and  int exp(s cos t) dt = 2 pi I0(s);
* singularity subtraction for general edges: the leading term kappa W^e of the
  edge gap is integrated through the Bessel formula and the bounded remainder
  with a midpoint grid that never touches the singular point.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma, i0e

TWO_PI = 2.0 * math.pi

# 1 / W_3 with W_3 the simple-cubic lattice Green function at the band edge
WATSON_W3 = (
    math.sqrt(6.0) / (32.0 * math.pi**3) * gamma(1 / 24) * gamma(5 / 24) * gamma(7 / 24) * gamma(11 / 24)
)


def identity_d1_J(E: float) -> float:
    """int_{-pi}^{pi} dt / (E - 1 - cos t) for E outside [0, 2]."""
    c = E - 1.0
    return math.copysign(TWO_PI / math.sqrt(c * c - 1.0), c)


def identity_d1_I(E: float) -> float:
    c = abs(E - 1.0)
    return TWO_PI * c / (c * c - 1.0) ** 1.5


def identity_d1_energy(v: float) -> float:
    return 1.0 + math.copysign(math.sqrt(1.0 + v * v), v)


def _half_line(f, S: float = 100.0) -> float:
    """int_0^inf f with an algebraic tail; [S, inf) is mapped by s = S / y^2."""
    head = quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    head += quad(f, 1.0, S, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    tail = quad(lambda y: f(S / (y * y)) * 2.0 * S / y**3, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return head + tail


def identity_bessel(d: int, E: float, power: int = 1) -> float:
    """J (power=1) or I (power=2) for the identity symbol, E >= 2."""
    t = E - 2.0

    def f(s):
        return s ** (power - 1) * math.exp(-s * t) * i0e(s / d) ** d

    return TWO_PI**d * _half_line(f) / math.gamma(power)


def _power_mean_integral(d: int, s: float) -> float:
    """int over the torus of W^-s with W = mean_j (1 - cos phi_j)."""
    f = lambda tau: tau ** (s - 1.0) * i0e(tau / d) ** d  # noqa: E731
    return TWO_PI**d * _half_line(f) / gamma(s)


def subtraction_edge_J(spec, d: int, edge: str, N: int) -> float:
    """J at an edge with finite value, via singular-part subtraction."""
    ka, kb = spec.edge_coefficients()
    ex = spec.exponents()
    e, kappa = (ex.b, kb) if edge == "top" else (ex.a, ka)
    gap = spec.drop if edge == "top" else spec.rise
    singular = _power_mean_integral(d, e) / kappa
    theta = -math.pi + TWO_PI * (np.arange(N) + 0.5) / N
    axis = 2.0 * np.sin(theta / 2.0) ** 2
    W = np.zeros(())
    for j in range(d):
        shape = [1] * d
        shape[j] = N
        W = W + axis.reshape(shape)
    W = W / d
    remainder = 1.0 / gap(W) - W ** (-e) / kappa
    total = singular + (TWO_PI / N) ** d * float(remainder.sum())
    return total if edge == "top" else -total


def identity_green_fft(d: int, E: float, N: int) -> np.ndarray:
    """(2 pi)^-d int e^{i x theta} / (E - g) on an N^d FFT grid; index x mod N."""
    theta = TWO_PI * np.arange(N) / N
    g = np.zeros(())
    for j in range(d):
        shape = [1] * d
        shape[j] = N
        g = g + (1.0 + np.cos(theta)).reshape(shape)
    g = g / d
    return np.real(np.fft.ifftn(1.0 / (E - g)))


def identity_green_bessel(x, E: float) -> float:
    """(2 pi)^-d int e^{i x theta} / (E - g) for the identity symbol, E >= 2."""
    from scipy.special import ive

    d = len(x)
    t = E - 2.0

    def f(s):
        out = math.exp(-s * t)
        for xj in x:
            out *= ive(abs(xj), s / d)
        return out

    return _half_line(f)


def fractional_d1_bottom_J(log_t: float) -> float:
    """J at distance t = exp(log_t) below the band for sqrt(1 + cos theta), d = 1.

    g = sqrt(2) |cos(theta/2)|, so J = -4 int_0^{pi/2} dphi / (t + sqrt(2) cos phi)
    = -8 atanh(c) / (c (t + sqrt(2))) with c^2 = (sqrt(2) - t) / (sqrt(2) + t).
    atanh(c) is evaluated as log((1 + c)^2 (a + b) / (2 a)) / 2 to stay exact
    for t far below double range.
    """
    b = math.sqrt(2.0)
    a = math.exp(log_t)
    c = math.sqrt((b - a) / (b + a))
    atanh_c = 0.5 * (2.0 * math.log1p(c) + math.log(a + b) - math.log(2.0) - log_t)
    return -8.0 * atanh_c / (c * (a + b))
