"""Hybrid M-estimator losses and their shrinkage operators.

Every loss here is quadratic on ``|x| <= c`` and switches to a scaled robust
function ``a * g(|x|) + b`` outside, with ``a`` and ``b`` chosen so the loss
is C1 at the knot. The knot ``c`` is passed per call because the solver
re-estimates it every iteration.

Supported kinds:

  ``how``   : g is the Welsch function, scale ``sigma``
  ``hoc``   : g is the Cauchy function, scale ``gamma``
  ``hop``   : g(t) = t**p with 0 < p <= 1
  ``huber`` : g(t) = t (same as ``hop`` with p = 1)

When ``sigma`` / ``gamma`` are left unset they follow the knot, i.e.
``sigma = c`` and ``gamma = c``.

All functions are vectorised over ``x`` and are pure.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

KINDS = ("how", "hoc", "hop", "huber")


class ParameterError(ValueError):
    """Raised for loss parameters outside their domain."""


@dataclass(frozen=True)
class LossSpec:
    """Which hybrid loss to use, plus its shape parameter.

    Parameters
    ----------
    kind : {'how', 'hoc', 'hop', 'huber'}
    sigma : float, optional
        Welsch scale for ``how``. ``None`` ties it to the knot ``c``.
    gamma : float, optional
        Cauchy scale for ``hoc``. ``None`` ties it to the knot ``c``.
    p : float, optional
        Exponent for ``hop``, in (0, 1]. Required for ``hop``.
    """

    kind: str
    sigma: Optional[float] = None
    gamma: Optional[float] = None
    p: Optional[float] = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ParameterError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")
        allowed = {"how": "sigma", "hoc": "gamma", "hop": "p", "huber": None}[kind]
        for name in ("sigma", "gamma", "p"):
            if name != allowed and getattr(self, name) is not None:
                raise ParameterError(f"{name} is not a parameter of the {kind} loss")
        if kind == "how" and self.sigma is not None and not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if kind == "hoc" and self.gamma is not None and not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if kind == "hop":
            if self.p is None:
                raise ParameterError("the hop loss needs an exponent p")
            if not 0 < self.p <= 1:
                raise ParameterError(f"p must lie in (0, 1], got {self.p}")

    @property
    def tied_scale(self):
        """True when sigma/gamma follow the knot c."""
        return (self.kind == "how" and self.sigma is None) or (
            self.kind == "hoc" and self.gamma is None
        )

    def scale(self, c):
        """Resolved sigma (how) or gamma (hoc) for knot ``c``; None otherwise."""
        if self.kind == "how":
            return c if self.sigma is None else self.sigma
        if self.kind == "hoc":
            return c if self.gamma is None else self.gamma
        return None

    def label(self):
        if self.kind == "hop":
            return f"hop(p={self.p:g})"
        if self.kind == "how" and self.sigma is not None:
            return f"how(sigma={self.sigma:g})"
        if self.kind == "hoc" and self.gamma is not None:
            return f"hoc(gamma={self.gamma:g})"
        return self.kind


class LossCoefficients(NamedTuple):
    a: float
    b: float


def _check_c(c):
    if not c > 0:
        raise ParameterError(f"threshold c must be positive, got {c}")


def robust_g(spec, c, t):
    """The outer robust function g evaluated at ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    if spec.kind == "how":
        s = spec.scale(c)
        return -0.5 * s**2 * np.expm1(-(t**2) / s**2)
    if spec.kind == "hoc":
        g = spec.scale(c)
        return 0.5 * g**2 * np.log1p((t / g) ** 2)
    if spec.kind == "hop":
        return t**spec.p
    return t.copy()


def robust_g_prime(spec, c, t):
    """Derivative of :func:`robust_g` for ``t > 0``."""
    t = np.asarray(t, dtype=float)
    if spec.kind == "how":
        s = spec.scale(c)
        return t * np.exp(-(t**2) / s**2)
    if spec.kind == "hoc":
        g = spec.scale(c)
        return t * g**2 / (g**2 + t**2)
    if spec.kind == "hop":
        return spec.p * t ** (spec.p - 1)
    return np.ones_like(t)


def coefficients(spec, c):
    """Continuity constants ``a = c / g'(c)`` and ``b = c^2/2 - a g(c)``.

    Only meant for inspection and tests: for ``how`` with a small sigma,
    ``a = exp(c^2 / sigma^2)`` overflows, which is why the loss functions
    below never form ``a`` explicitly.
    """
    _check_c(c)
    a = float(c / robust_g_prime(spec, c, c))
    b = float(c**2 / 2 - a * robust_g(spec, c, c))
    return LossCoefficients(a, b)


def _outer_loss(spec, c, t):
    # a * g(t) + b, written so that nothing overflows
    if spec.kind == "how":
        s = spec.scale(c)
        return 0.5 * c**2 - 0.5 * s**2 * np.expm1(-(t - c) * (t + c) / s**2)
    if spec.kind == "hoc":
        g = spec.scale(c)
        return 0.5 * c**2 + 0.5 * (g**2 + c**2) * (
            np.log1p((t / g) ** 2) - np.log1p((c / g) ** 2)
        )
    if spec.kind == "hop":
        p = spec.p
        return c ** (2 - p) * t**p / p + c**2 / 2 - c**2 / p
    return c * t - 0.5 * c**2


def _outer_psi(spec, c, t):
    # a * g'(t), i.e. the derivative of the loss at |x| = t > c
    if spec.kind == "how":
        s = spec.scale(c)
        return t * np.exp(-(t - c) * (t + c) / s**2)
    if spec.kind == "hoc":
        g = spec.scale(c)
        return (g**2 + c**2) * t / (g**2 + t**2)
    if spec.kind == "hop":
        return c ** (2 - spec.p) * t ** (spec.p - 1)
    return np.full_like(t, c)


def _outer_shrink(spec, c, t):
    # t - a * g'(t), rearranged to keep full relative accuracy near t = c
    if spec.kind == "how":
        s = spec.scale(c)
        return -t * np.expm1(-(t - c) * (t + c) / s**2)
    if spec.kind == "hoc":
        g = spec.scale(c)
        return t * (t - c) * (t + c) / (g**2 + t**2)
    if spec.kind == "hop":
        return -t * np.expm1((2 - spec.p) * np.log(c / t))
    return t - c


def _split(c, x):
    _check_c(c)
    x = np.array(x, dtype=float, ndmin=1)
    t = np.abs(x)
    outer = t > c
    return x, t, outer


def _finish(out, like):
    return out if np.ndim(like) else float(out[0])


def loss_value(spec, c, x):
    """Hybrid loss ``l_{g,c}(x)``."""
    x0 = x
    x, t, outer = _split(c, x)
    out = 0.5 * x**2
    out[outer] = _outer_loss(spec, c, t[outer])
    return _finish(out, x0)


def loss_derivative(spec, c, x):
    """First derivative of :func:`loss_value`."""
    x0 = x
    x, t, outer = _split(c, x)
    out = x.copy()
    out[outer] = np.sign(x[outer]) * _outer_psi(spec, c, t[outer])
    return _finish(out, x0)


def weight(spec, c, x):
    """IRLS weight ``l'(x) / x``; exactly 1 on ``|x| <= c`` (including x = 0)."""
    x0 = x
    x, t, outer = _split(c, x)
    out = np.ones_like(x)
    out[outer] = _outer_psi(spec, c, t[outer]) / t[outer]
    return _finish(out, x0)


def shrink(spec, c, x):
    """Proximity operator of the implicit regulariser.

    ``shrink(x) = max(0, |x| - a g'(|x|)) * sign(x)``, which is zero exactly
    when ``|x| <= c`` and equals ``x - loss_derivative(x)`` everywhere.
    """
    x0 = x
    x, t, outer = _split(c, x)
    out = np.zeros_like(x)
    out[outer] = np.sign(x[outer]) * _outer_shrink(spec, c, t[outer])
    return _finish(out, x0)


def dual_at_image(spec, c, x):
    """Return ``(y, phi)`` with ``y = shrink(x)`` and ``phi`` the implicit
    regulariser evaluated at ``y``.

    The regulariser has no closed form; on the image of the shrinkage map it
    is recovered from ``l(x) = (x - y)^2 / 2 + phi(y)``.
    """
    y = shrink(spec, c, x)
    phi = loss_value(spec, c, x) - 0.5 * (np.asarray(x, dtype=float) - y) ** 2
    if not np.ndim(x):
        phi = float(phi)
    return y, phi
