"""Exponent bookkeeping for sphere interpolation inequalities.

Everything downstream (improvement functions, explicit bounds, flow
certification) is parameterized by the dimension d of the sphere and the
norm exponent p.  This module computes the derived exponents and constants:

* the critical Sobolev exponent 2d/(d-2) (infinite for d <= 2),
* the curvature threshold (2 d^2 + 1)/(d-1)^2 up to which the heat-flow
  argument applies (infinite for d = 1),
* the curvature exponent
      gamma = (p-1) (2 d^2 + 1 - (d-1)^2 p) / (d+2)^2,
  equivalently ((d-1)/(d+2))^2 (p-1) (two_sharp - p) when d >= 2,
* the exponent p_star(d) in (1, 2) where gamma = 2 - p, which switches the
  improvement function onto its logarithmic branch,
* delta(p) = 2d - p(d-2) and the weighted-norm constant
  kappa_p = 2^(delta/p - 2) |S^d|^(1 - 2/p) used on the Euclidean side,
* the sphere surface measure |S^d| = 2 pi^((d+1)/2) / Gamma((d+1)/2).

For the fast diffusion / porous medium flows the relevant data are collected
in FlowSetting: the flow is

    du/dt = u^(2 - 2 beta) (Lap u + kappa |grad u|^2 / u),
    kappa = beta (p - 2) + 1,

whose pressure variable rho = u^(beta p) solves drho/dt = Lap rho^m with
1/beta + p/2 = 1 + m p / 2.  The curvature quantity attached to this flow is
the quadratic

    gamma(beta) = -((d-1)/(d+2))^2 (kappa + beta - 1)^2
                  + kappa (beta - 1) + d/(d+2) (kappa + beta - 1),

and the flow yields an entropy--information inequality exactly when
gamma(beta) >= 0.  beta_roots computes the admissible set
B(p, d) = {beta : gamma(beta) >= 0} exactly (it is cut out by a real
quadratic in beta, degenerating to a linear function on a short list of
exceptional p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

from .errors import ValidationError

__all__ = [
    "ParameterPoint",
    "FlowSetting",
    "BetaRange",
    "make_parameter_point",
    "make_flow_setting",
    "gamma_of_beta",
    "beta_roots",
    "m_range",
    "sphere_surface",
]

# Tolerance below which the quadratic gamma(beta) is treated as linear.
# The exceptional exponents (d=2: p = 9 +- 4 sqrt(3); d=3: p = 9/4, 6;
# d=4: p = 3) land exactly on a vanishing leading coefficient.
_DEGENERATE_TOL = 1e-9


def _log_sphere_surface(d: int) -> float:
    return math.log(2.0) + 0.5 * (d + 1) * math.log(math.pi) - gammaln(0.5 * (d + 1))


def sphere_surface(d: int) -> float:
    """Surface measure of the unit d-sphere, 2 pi^((d+1)/2) / Gamma((d+1)/2).

    Evaluated through log-Gamma so large d does not overflow.
    """
    if d < 1:
        raise ValidationError(f"dimension must be a positive integer, got {d}")
    return math.exp(_log_sphere_surface(d))


@dataclass(frozen=True)
class ParameterPoint:
    """A (d, p) pair together with its derived exponents and range flags."""

    d: int
    p: float
    two_star: float
    two_sharp: float
    p_star: float
    gamma: float
    delta: float
    kappa_p: float
    sphere_volume: float
    is_log_case: bool
    is_critical: bool
    in_bakry_emery_range: bool
    in_nonlinear_range: bool


def _p_star(d: int) -> float:
    # gamma(p) = 2 - p has a unique root in (1, 2); for d = 1 it is exactly
    # 7/4 ((p-1)/3 = 2-p), for d >= 2 the quadratic discriminant simplifies
    # to d (d+2)^2.
    if d == 1:
        return 1.75
    return (3.0 + d + 2.0 * d * d - 2.0 * math.sqrt(4.0 * d + 4.0 * d * d + d**3)) / (d - 1.0) ** 2


def make_parameter_point(d: int, p: float) -> ParameterPoint:
    """Validate (d, p) and compute the derived exponents.

    p may be any real >= 1; for d >= 3 values above the critical exponent
    2d/(d-2) are rejected since none of the inequalities reach past it.
    """
    if not isinstance(d, (int,)) or isinstance(d, bool):
        raise ValidationError(f"dimension must be an integer, got {d!r}")
    if d < 1:
        raise ValidationError(f"dimension must be >= 1, got {d}")
    p = float(p)
    if not math.isfinite(p) or p < 1.0:
        raise ValidationError(f"exponent p must be finite and >= 1, got {p}")

    two_star = 2.0 * d / (d - 2.0) if d >= 3 else math.inf
    two_sharp = (2.0 * d * d + 1.0) / (d - 1.0) ** 2 if d >= 2 else math.inf
    if d >= 3 and p > two_star * (1.0 + 1e-14):
        raise ValidationError(
            f"p = {p} exceeds the critical exponent {two_star} for d = {d}"
        )

    # Expanded form of ((d-1)/(d+2))^2 (p-1)(two_sharp - p); also valid at
    # d = 1 where it reduces to (p-1)/3 and two_sharp is infinite.
    gamma = (p - 1.0) * (2.0 * d * d + 1.0 - (d - 1.0) ** 2 * p) / (d + 2.0) ** 2
    delta = 2.0 * d - p * (d - 2.0)
    surface = sphere_surface(d)
    # 2^(delta/p - 2) |S^d|^(1 - 2/p), in log form since either factor can
    # overflow long before the product does (and it genuinely diverges as
    # d -> infinity at fixed p < 2).
    log_kappa = (delta / p - 2.0) * math.log(2.0) + (1.0 - 2.0 / p) * _log_sphere_surface(d)
    kappa_p = math.inf if log_kappa > 709.0 else math.exp(log_kappa)

    is_log_case = p == 2.0
    is_critical = d >= 3 and abs(p - two_star) <= 1e-14 * two_star
    in_be = p != 2.0 and (d == 1 or p <= two_sharp)
    in_nl = p != 2.0 and (d <= 2 or p <= two_star * (1.0 + 1e-14))

    return ParameterPoint(
        d=d,
        p=p,
        two_star=two_star,
        two_sharp=two_sharp,
        p_star=_p_star(d),
        gamma=gamma,
        delta=delta,
        kappa_p=kappa_p,
        sphere_volume=surface,
        is_log_case=is_log_case,
        is_critical=is_critical,
        in_bakry_emery_range=in_be,
        in_nonlinear_range=in_nl,
    )


# ---------------------------------------------------------------------------
# Flow settings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowSetting:
    """Parameters of the nonlinear diffusion flow attached to (d, p, beta)."""

    pp: ParameterPoint
    beta: float
    kappa: float
    m: float
    zeta: float
    gamma_beta: float
    admissible: bool


def _gamma_quadratic(pp: ParameterPoint) -> tuple[float, float, float]:
    """Coefficients (a, b, c) with gamma(beta) = a beta^2 + b beta + c."""
    d, p = pp.d, pp.p
    a = (p - 2.0) - ((d - 1.0) * (p - 1.0) / (d + 2.0)) ** 2
    b = 2.0 * (d + 3.0 - p) / (d + 2.0)
    return a, b, -1.0


def gamma_of_beta(pp: ParameterPoint, beta: float) -> float:
    """Curvature quantity gamma(beta); gamma(1) recovers pp.gamma."""
    a, b, c = _gamma_quadratic(pp)
    return (a * beta + b) * beta + c


def make_flow_setting(pp: ParameterPoint, beta: float) -> FlowSetting:
    """Build the FlowSetting for exponent beta.

    beta = 0 is rejected (the pressure change of variables divides by beta)
    and so is p = 2 (zeta has a p - 2 denominator).  Inadmissible beta, i.e.
    gamma(beta) < 0, is allowed: flows can still be run for diagnostics, only
    the certified entropy inequalities are then out of reach.
    """
    d, p = pp.d, pp.p
    beta = float(beta)
    if beta == 0.0:
        raise ValidationError("beta = 0 is not a valid flow exponent")
    if p == 2.0:
        raise ValidationError("p = 2 has no associated nonlinear flow setting")
    kappa = beta * (p - 2.0) + 1.0
    m = 1.0 - 2.0 / p + 2.0 / (beta * p)
    zeta = (2.0 - (4.0 - p) * beta) / (2.0 * beta * (p - 2.0))
    g = gamma_of_beta(pp, beta)
    return FlowSetting(
        pp=pp,
        beta=beta,
        kappa=kappa,
        m=m,
        zeta=zeta,
        gamma_beta=g,
        admissible=g >= 0.0,
    )


# ---------------------------------------------------------------------------
# Admissible beta ranges
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaRange:
    """The set {beta : gamma(beta) >= 0} for a fixed (d, p).

    kind is one of "interval", "union-of-two-half-lines",
    "single-half-line-left" (beta <= root) and "single-half-line-right"
    (beta >= root).  components lists the closed components as (lo, hi)
    pairs with infinite endpoints where unbounded.  beta_plus and beta_minus
    carry the root-formula labels

        beta_pm = [(d+2)(d+3-p) +- (d+2) sqrt(d (p-1) delta(p))] / D,
        D = (d-1)^2 (p-1)^2 - (p-2)(d+2)^2,

    which invert their ordering when D < 0; they are NaN on the exceptional
    p where D = 0.  witness_beta records the explicit admissible choice
    4(5-p)/(p^2 - 18p + 33) available for d = 2, p > 9 + 4 sqrt(3).
    """

    pp: ParameterPoint
    kind: str
    components: tuple[tuple[float, float], ...]
    beta_plus: float
    beta_minus: float
    witness_beta: float | None = None

    def contains(self, beta: float) -> bool:
        return any(lo <= beta <= hi for lo, hi in self.components)


def beta_roots(pp: ParameterPoint) -> BetaRange:
    """Admissible flow exponents for (d, p).

    The set is where the downward/upward parabola gamma(beta) is >= 0:
    an interval between the roots when the leading coefficient is negative,
    the complement of the open root interval when it is positive, a single
    half-line when the quadratic degenerates to a linear function, and empty
    only at (d, p) = (3, 6) where gamma(beta) = -1 identically (that point
    is already on the excluded-exponent list and is rejected here).
    """
    d, p = pp.d, pp.p
    if p == 2.0:
        raise ValidationError("p = 2 is excluded from the flow parameter range")
    if not pp.in_nonlinear_range:
        raise ValidationError(f"(d, p) = ({d}, {p}) is outside the flow parameter range")

    a, b, _ = _gamma_quadratic(pp)
    # Root-formula labels; the denominator is -(d+2)^2 a.
    denom = (d - 1.0) ** 2 * (p - 1.0) ** 2 - (p - 2.0) * (d + 2.0) ** 2
    radicand = d * (p - 1.0) * pp.delta
    scale = max(1.0, abs((d - 1.0) ** 2 * (p - 1.0) ** 2), abs((p - 2.0) * (d + 2.0) ** 2))
    degenerate = abs(denom) <= _DEGENERATE_TOL * scale

    if degenerate:
        beta_plus = beta_minus = math.nan
        if abs(b) <= _DEGENERATE_TOL:
            # Only (d, p) = (3, 6): gamma(beta) = -1 for every beta.
            raise ValidationError(
                f"(d, p) = ({d}, {p}) is degenerate: gamma(beta) = -1 identically, "
                "no admissible flow exponent exists"
            )
        root = 1.0 / b
        if b > 0.0:
            kind = "single-half-line-right"
            components: tuple[tuple[float, float], ...] = ((root, math.inf),)
        else:
            kind = "single-half-line-left"
            components = ((-math.inf, root),)
        return BetaRange(pp=pp, kind=kind, components=components,
                         beta_plus=beta_plus, beta_minus=beta_minus)

    if radicand < 0.0:
        # Cannot happen for p in range (delta >= 0 there) but guard anyway.
        raise ValidationError(f"gamma(beta) has no real roots at (d, p) = ({d}, {p})")

    num_base = (d + 2.0) * (d + 3.0 - p)
    num_root = (d + 2.0) * math.sqrt(radicand)
    beta_plus = (num_base + num_root) / denom
    beta_minus = (num_base - num_root) / denom
    lo, hi = min(beta_plus, beta_minus), max(beta_plus, beta_minus)

    witness = None
    if a < 0.0:
        kind = "interval"
        components = ((lo, hi),)
        if d == 2 and p > 9.0 + 4.0 * math.sqrt(3.0):
            witness = 4.0 * (5.0 - p) / (p * p - 18.0 * p + 33.0)
    else:
        kind = "union-of-two-half-lines"
        components = ((-math.inf, lo), (hi, math.inf))
    return BetaRange(pp=pp, kind=kind, components=components,
                     beta_plus=beta_plus, beta_minus=beta_minus,
                     witness_beta=witness)


def m_range(pp: ParameterPoint) -> tuple[float, float]:
    """Closure of the diffusion exponents {m(beta) : beta admissible}.

    m(beta) = 1 - 2/p + 2/(beta p) is monotone on each component of the
    admissible set (beta = 0 is never admissible since gamma(0) = -1), so
    the closure is the interval spanned by the endpoint values, with the
    limit 1 - 2/p standing in for infinite endpoints.
    """
    br = beta_roots(pp)
    p = pp.p
    limit = 1.0 - 2.0 / p
    values = []
    for lo, hi in br.components:
        for endpoint in (lo, hi):
            if math.isinf(endpoint):
                values.append(limit)
            else:
                values.append(limit + 2.0 / (endpoint * p))
    return min(values), max(values)
