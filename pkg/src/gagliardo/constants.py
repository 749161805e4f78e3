"""Special functions and closed-form constants.

Gamma is evaluated with a fixed-coefficient Lanczos approximation so that every
constant in the package is bit-stable across platforms and independent of the
installed SciPy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "FracParams",
    "OMEGA_CONVENTIONS",
    "alpha_n",
    "gamma",
    "omega_n",
    "sharp_sobolev_constant",
    "sphere_measure",
]

# Lanczos g = 607/128, 15 terms (Godfrey). Relative error < 2e-14 on [0.1, 30].
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_COEF = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)

OMEGA_CONVENTIONS = ("sphere_n", "sphere_n_minus_1", "ball")
DEFAULT_OMEGA_CONVENTION = "sphere_n"


@dataclass(frozen=True)
class FracParams:
    """Dimension, smoothness and integrability exponent of a Gagliardo energy.

    The kernel is ``|x - y|^-(n + sigma * p)``.
    """

    n: int
    sigma: float
    p: float

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma!r}")
        if not self.p > 0.0 or math.isinf(self.p):
            raise ValueError(f"p must lie in (0, inf), got {self.p!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "p", float(self.p))

    @property
    def sp(self) -> float:
        """Product sigma * p; the tail kernel decays like distance^-sp."""
        return self.sigma * self.p

    @property
    def exponent(self) -> float:
        return self.n + self.sigma * self.p

    def as_dict(self) -> dict:
        return {"n": self.n, "sigma": self.sigma, "p": self.p}


def gamma(x: float) -> float:
    """Gamma function for real ``x > 0``."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"gamma is only defined here for x > 0, got {x!r}")
    if 2.0 * x == int(2.0 * x) and x <= 60.0:
        # integers and half-integers by exact recurrence from 1 and sqrt(pi)
        acc = 1.0 if x == int(x) else math.sqrt(math.pi)
        t = 1.0 if x == int(x) else 0.5
        while t < x:
            acc *= t
            t += 1.0
        return acc
    if x < 0.5:
        # reflection keeps the series in its accurate range
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * acc * math.exp((x + 0.5) * math.log(t) - t)


def alpha_n(n: int) -> float:
    """Volume of the unit ball in R^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


def sphere_measure(n: int) -> float:
    """Surface measure of S^{n-1} in R^n (counting measure for n = 1)."""
    return n * alpha_n(n)


def omega_n(n: int, convention: str = DEFAULT_OMEGA_CONVENTION) -> float:
    """The constant called "volume of the unit n-dimensional sphere".

    ``sphere_n`` is the surface of S^n in R^{n+1}, ``sphere_n_minus_1`` the
    surface of S^{n-1}, ``ball`` the volume of the unit ball of R^n.
    """
    if convention == "sphere_n":
        return sphere_measure(n + 1)
    if convention == "sphere_n_minus_1":
        return sphere_measure(n)
    if convention == "ball":
        return alpha_n(n)
    raise ValueError(f"unknown omega convention {convention!r}; expected one of {OMEGA_CONVENTIONS}")


def sharp_sobolev_constant(
    n: int, sigma: float, convention: str = DEFAULT_OMEGA_CONVENTION
) -> float:
    """Sharp constant of the fractional Sobolev inequality on R^n (p = 2).

    ``2^(1-2s) w^(2s/n) pi^(n/2) Gamma(2-s) / (s (1-s) Gamma((n-2s)/2))`` with
    ``w = omega_n(n, convention)``.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma!r}")
    if not n > 2.0 * sigma:
        raise ValueError(f"need n > 2 sigma, got n={n}, sigma={sigma}")
    w = omega_n(n, convention)
    num = 2.0 ** (1.0 - 2.0 * sigma) * w ** (2.0 * sigma / n) * math.pi ** (n / 2.0) * gamma(2.0 - sigma)
    return num / (sigma * (1.0 - sigma) * gamma((n - 2.0 * sigma) / 2.0))
