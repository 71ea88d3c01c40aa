"""Flat-space counterparts of the sphere inequalities for radial profiles.

A radial profile v on R^d pairs with an axisymmetric sphere function u
through a conformal change of variables along z = 1 - 2/(1 + r^2).  Under
the pairing, weighted Lebesgue integrals of v equal sphere integrals of u
up to explicit powers of two and of the sphere surface area, so every
unbounded-domain integral is evaluated on the compact quadrature grid with
no truncation.  On top of the norm identities the module evaluates the
flat-space deficit inequalities: the plain weighted interpolation bound,
its quadratic-remainder and entropy-power strengthenings, and the
moment-constrained forms with their logarithmic limit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaln, eval_jacobi, gammaln, roots_jacobi

from .bounds import afst_constants, c_dp
from .errors import ValidationError
from .exponents import ParameterPoint, sphere_surface
from .ioutils import atomic_write_text, fmt_float
from .phi_functions import _is_log_branch
from .sphere_calculus import (
    AxiFunction,
    Deficit,
    _check_moment_free,
    _log_entropy,
    dirichlet,
    make_rule,
)

__all__ = [
    "EuclideanNorms",
    "RadialEuclideanFunction",
    "axis_moment_log_constant",
    "equality_profile",
    "equality_profile_second_moment",
    "euclidean_deficit",
    "euclidean_norms",
    "pull_back",
    "push_forward",
    "radial_from_csv",
    "radial_from_json",
    "radial_profile_from_samples",
    "radial_second_moment",
    "radial_to_csv",
    "radial_to_json",
    "write_radial",
]

# Relative slack when the |x|^2-weighted mass must match the equality
# profile, and when a stored radial grid is compared with the regenerated one.
_MOMENT_TOL = 1.0e-8
_GRID_TOL = 1.0e-12


def _require_flat_dimension(d: int) -> None:
    if d < 2:
        raise ValidationError(
            "the radial pairing needs d >= 2: at d = 1 the equality profile "
            "has no square-integrable gradient"
        )


@dataclass(frozen=True)
class RadialEuclideanFunction:
    """Radial profile v(|x|) on R^d sampled on the image of a sphere grid.

    r holds the radii sqrt((1 + z)/(1 - z)) of the quadrature nodes z of the
    paired sphere function, values holds v at those radii, and sphere is the
    paired axisymmetric function u(z) = ((1 + r^2)/2)^((d-2)/2) v(r).
    """

    sphere: AxiFunction
    r: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        n = self.sphere.rule.n
        if r.size != n or vals.size != n:
            raise ValidationError(
                f"expected {n} radial samples to pair with the sphere grid, "
                f"got {r.size} radii and {vals.size} values"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("radial samples must be finite")
        r.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.sphere.rule.d

    @property
    def node_count(self) -> int:
        return self.sphere.rule.n

    def __repr__(self) -> str:
        return f"RadialEuclideanFunction(d={self.d}, n={self.node_count})"


def _grid_radii(nodes: np.ndarray) -> np.ndarray:
    return np.sqrt((1.0 + nodes) / (1.0 - nodes))


def push_forward(u: AxiFunction) -> RadialEuclideanFunction:
    """Radial flat-space profile paired with the sphere function u."""
    _require_flat_dimension(u.rule.d)
    z = u.rule.nodes
    factor = (1.0 - z) ** (0.5 * (u.rule.d - 2.0))
    return RadialEuclideanFunction(
        sphere=u, r=_grid_radii(z), values=u.values * factor
    )


def pull_back(v: RadialEuclideanFunction) -> AxiFunction:
    """Sphere function recomputed from the radial samples.

    Inverse of push_forward on the shared grid: u = ((1 + r^2)/2)^((d-2)/2) v.
    """
    z = v.sphere.rule.nodes
    factor = (1.0 - z) ** (-0.5 * (v.d - 2.0))
    return AxiFunction(v.sphere.rule, values=v.values * factor)


def radial_profile_from_samples(d: int, values) -> RadialEuclideanFunction:
    """Wrap v samples given on the canonical radial grid of an n-point rule."""
    _require_flat_dimension(int(d))
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size < 2:
        raise ValidationError(f"need at least 2 radial samples, got {vals.size}")
    rule = make_rule(int(d), vals.size)
    z = rule.nodes
    sphere = AxiFunction(rule, values=vals * (1.0 - z) ** (-0.5 * (d - 2.0)))
    return RadialEuclideanFunction(sphere=sphere, r=_grid_radii(z), values=vals)


def equality_profile(d: int, node_count: int = 48) -> RadialEuclideanFunction:
    """Profile (1 + r^2)^((2-d)/2) saturating the weighted bound (v = 1 at d = 2)."""
    _require_flat_dimension(int(d))
    rule = make_rule(int(d), int(node_count))
    z = rule.nodes
    vals = (0.5 * (1.0 - z)) ** (0.5 * (d - 2.0))
    sphere = AxiFunction(rule, values=np.full(rule.n, 2.0 ** (-0.5 * (d - 2.0))))
    return RadialEuclideanFunction(sphere=sphere, r=_grid_radii(z), values=vals)


# ---------------------------------------------------------------------------
# Norms and moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EuclideanNorms:
    """The three flat-space integrals entering every weighted inequality."""

    weighted_p: float  # integral of |v|^p (1 + |x|^2)^(-delta(p)/2)
    weighted_2: float  # integral of |v|^2 (1 + |x|^2)^(-2)
    dirichlet: float  # integral of |grad v|^2

    def __iter__(self):
        yield self.weighted_p
        yield self.weighted_2
        yield self.dirichlet


def euclidean_norms(v: RadialEuclideanFunction, p: float) -> EuclideanNorms:
    """Weighted p-integral, weighted mass, and Dirichlet energy of v.

    All three are sphere integrals of the paired function in disguise:
    the p-integral is |S^d| 2^(-delta/2) times the sphere mean of |u|^p
    with delta = 2d - p (d - 2), the weighted mass is |S^d|/4 times the
    sphere mean of u^2, and the Dirichlet energy is |S^d| times the sphere
    gradient term plus d (d - 2)/4 times the sphere mean of u^2.
    """
    p = float(p)
    if not math.isfinite(p) or p < 1.0:
        raise ValidationError(f"exponent p must be finite and >= 1, got {p}")
    u = v.sphere
    d = float(u.rule.d)
    surface = sphere_surface(u.rule.d)
    delta = 2.0 * d - p * (d - 2.0)
    mean_p = u.rule.integrate(np.abs(u.values) ** p)
    mean_2 = u.rule.integrate(u.values**2)
    return EuclideanNorms(
        weighted_p=float(surface * 2.0 ** (-0.5 * delta) * mean_p),
        weighted_2=float(0.25 * surface * mean_2),
        dirichlet=float(surface * (dirichlet(u) + 0.25 * d * (d - 2.0) * mean_2)),
    )


@lru_cache(maxsize=32)
def _second_moment_rule(d: int, n: int):
    # Quadrature for the extra weight (1 + z)/(1 - z): Gauss-Jacobi nodes for
    # (1-z)^(d/2-2) (1+z)^(d/2), plus the orthonormal sphere basis evaluated
    # there so that grid functions transfer exactly (u^2 has degree 2n - 2).
    rule = make_rule(d, n)
    a = 0.5 * d - 1.0
    z_hat, w_hat = roots_jacobi(n, a - 1.0, a + 1.0)
    raw_nodes = np.empty((n, n))
    raw_hat = np.empty((n, n))
    for k in range(n):
        raw_nodes[:, k] = eval_jacobi(k, a, a, rule.nodes)
        raw_hat[:, k] = eval_jacobi(k, a, a, z_hat)
    norms = np.sqrt(np.sum(rule.weights[:, None] * raw_nodes**2, axis=0))
    basis_hat = raw_hat / norms
    log_mass = 0.5 * math.log(math.pi) + gammaln(0.5 * d) - gammaln(0.5 * (d + 1))
    w_hat = w_hat * math.exp(-log_mass)
    w_hat.setflags(write=False)
    basis_hat.setflags(write=False)
    return w_hat, basis_hat


def radial_second_moment(v: RadialEuclideanFunction) -> float:
    """Integral of |x|^2 (1 + |x|^2)^(-2) v^2 over R^d, for d >= 3."""
    d = v.d
    if d < 3:
        raise ValidationError(
            "the |x|^2-weighted mass diverges on the equality profile for "
            f"d < 3, got d = {d}"
        )
    u = v.sphere
    w_hat, basis_hat = _second_moment_rule(d, u.rule.n)
    u_hat = basis_hat @ u.coefficients
    return float(0.25 * sphere_surface(d) * np.dot(w_hat, u_hat**2))


def equality_profile_second_moment(d: int) -> float:
    """Closed form of the |x|^2-weighted mass of (1 + r^2)^((2-d)/2), d >= 3."""
    if d < 3:
        raise ValidationError(
            f"the equality-profile moment is finite only for d >= 3, got d = {d}"
        )
    return float(
        0.5 * sphere_surface(d - 1) * math.exp(betaln(0.5 * d + 1.0, 0.5 * d - 1.0))
    )


def axis_moment_log_constant(d: int) -> float:
    """Explicit improved level in the logarithmic bound under a vanishing axis moment."""
    if d < 2:
        raise ValidationError(f"the explicit log-case level needs d >= 2, got d = {d}")
    dd = float(d)
    return dd + (2.0 / dd) * (4.0 * dd - 1.0) / (
        2.0 * (dd + 3.0) + math.sqrt(2.0 * (dd + 3.0) * (2.0 * dd + 3.0))
    )


# ---------------------------------------------------------------------------
# Deficits
# ---------------------------------------------------------------------------


def _require_pp(v: RadialEuclideanFunction, pp: ParameterPoint | None, what: str) -> ParameterPoint:
    if pp is None:
        raise ValidationError(f"{what} needs a parameter point")
    if pp.d != v.d:
        raise ValidationError(
            f"parameter point dimension {pp.d} does not match profile dimension {v.d}"
        )
    return pp


def _check_matched_moment(v: RadialEuclideanFunction) -> tuple[float, float]:
    moment = radial_second_moment(v)
    target = equality_profile_second_moment(v.d)
    if abs(moment - target) > _MOMENT_TOL * max(target, 1.0):
        raise ValidationError(
            f"|x|^2-weighted mass {moment:.12g} does not match the equality "
            f"profile value {target:.12g}"
        )
    return moment, target


def euclidean_deficit(
    v: RadialEuclideanFunction,
    inequality_id: str,
    pp: ParameterPoint | None = None,
    *,
    lambda_star: float | None = None,
    log_constant: float | None = None,
) -> Deficit:
    """Evaluate lhs, rhs and lhs - rhs of one flat-space inequality on v.

    inequality_id selects the form:
      - "weighted_gns": Dirichlet energy plus d delta/(p-2) times the weighted
        mass against the sharp multiple of the weighted p-integral to the
        power 2/p.
      - "stability": same lhs, with the quadratic remainder in the gap
        between the p-power term and the weighted mass added on the right;
        needs 2 < p < 2#.
      - "sharper_stability": Dirichlet energy minus d (d-2) times the
        weighted mass against the entropy-power remainder, with a
        logarithmic branch exactly where the power exponent degenerates.
      - "moment_constrained": improved multiple of the interpolation gap when
        the paired sphere function has vanishing axis moment of |u|^p and the
        |x|^2-weighted mass matches the equality profile; lambda_star sets
        the spectral level (>= d, default just above d).
      - "moment_constrained_log": logarithmic version of the same under the
        p = 2 moment conditions; log_constant overrides the explicit level.
    """
    if inequality_id == "weighted_gns":
        pp = _require_pp(v, pp, "weighted_gns")
        if pp.p == 2.0:
            raise ValidationError(
                "weighted_gns requires p != 2; use moment_constrained_log or "
                "the sphere-side log form at p = 2"
            )
        weighted_p, weighted_2, diri = euclidean_norms(v, pp.p)
        if weighted_p <= 0.0:
            raise ValidationError("weighted_gns needs a nonzero profile")
        d = float(pp.d)
        pterm = weighted_p ** (2.0 / pp.p)
        lhs = diri + d * pp.delta / (pp.p - 2.0) * weighted_2
        rhs = c_dp(pp) * pterm
        inputs = {"d": pp.d, "p": pp.p}
    elif inequality_id == "stability":
        pp = _require_pp(v, pp, "stability")
        if not (2.0 < pp.p < pp.two_sharp):
            raise ValidationError(
                f"stability requires 2 < p < {pp.two_sharp}, got p = {pp.p}"
            )
        weighted_p, weighted_2, diri = euclidean_norms(v, pp.p)
        if weighted_p <= 0.0:
            raise ValidationError("stability needs a nonzero profile")
        d = float(pp.d)
        surface = pp.sphere_volume
        pterm = weighted_p ** (2.0 / pp.p)
        gap = pterm - 2.0 ** (2.0 - pp.delta / pp.p) * surface ** (
            2.0 / pp.p - 1.0
        ) * weighted_2
        lhs = diri + d * pp.delta / (pp.p - 2.0) * weighted_2
        rhs = (pp.gamma / (pp.p - 2.0)) * 0.5 * c_dp(pp) * gap * gap / pterm
        inputs = {"d": pp.d, "p": pp.p, "gamma": pp.gamma}
    elif inequality_id == "sharper_stability":
        pp = _require_pp(v, pp, "sharper_stability")
        if not pp.in_bakry_emery_range:
            raise ValidationError(
                "sharper_stability requires p != 2 with p <= "
                f"{pp.two_sharp}, got p = {pp.p}"
            )
        weighted_p, weighted_2, diri = euclidean_norms(v, pp.p)
        if weighted_p <= 0.0 or weighted_2 <= 0.0:
            raise ValidationError("sharper_stability needs a nonzero profile")
        d = float(pp.d)
        lhs = diri - d * (d - 2.0) * weighted_2
        pterm = weighted_p ** (2.0 / pp.p)
        if _is_log_branch(pp):
            rhs = (
                4.0
                * d
                / (2.0 - pp.p)
                * weighted_2
                * math.log(weighted_2 / (pp.kappa_p * pterm))
            )
        else:
            theta = pp.gamma / (2.0 - pp.p)
            rhs = (
                4.0
                * d
                / (2.0 - pp.p - pp.gamma)
                * (
                    weighted_2
                    - pp.kappa_p ** (1.0 - theta)
                    * pterm ** (1.0 - theta)
                    * weighted_2**theta
                )
            )
        inputs = {"d": pp.d, "p": pp.p, "gamma": pp.gamma, "kappa_p": pp.kappa_p}
    elif inequality_id == "moment_constrained":
        pp = _require_pp(v, pp, "moment_constrained")
        if pp.d < 3:
            raise ValidationError(
                "moment_constrained needs d >= 3: the matching moment "
                "diverges on the equality profile at d = 2"
            )
        _check_moment_free(v.sphere, pp.p)
        moment, target = _check_matched_moment(v)
        constant, _ = afst_constants(pp, lambda_star)
        weighted_p, weighted_2, diri = euclidean_norms(v, pp.p)
        if weighted_p <= 0.0:
            raise ValidationError("moment_constrained needs a nonzero profile")
        d = float(pp.d)
        surface = pp.sphere_volume
        pterm = weighted_p ** (2.0 / pp.p)
        gap = (
            2.0 ** (pp.delta / pp.p) * surface ** (1.0 - 2.0 / pp.p) * pterm
            - 4.0 * weighted_2
        )
        lhs = (
            diri
            + d * pp.delta / (pp.p - 2.0) * weighted_2
            - c_dp(pp) * pterm
        )
        rhs = (constant - d / (pp.p - 2.0)) * gap
        inputs = {
            "d": pp.d,
            "p": pp.p,
            "lambda_star": lambda_star
            if lambda_star is not None
            else pp.d * (1.0 + 1.0e-6),
            "moment": moment,
            "moment_target": target,
        }
    elif inequality_id == "moment_constrained_log":
        if pp is not None and pp.p != 2.0:
            raise ValidationError("moment_constrained_log requires p = 2")
        if pp is not None and pp.d != v.d:
            raise ValidationError(
                f"parameter point dimension {pp.d} does not match profile "
                f"dimension {v.d}"
            )
        d = float(v.d)
        if v.d < 3:
            raise ValidationError(
                "moment_constrained_log needs d >= 3: the matching moment "
                "diverges on the equality profile at d = 2"
            )
        _check_moment_free(v.sphere, 2.0)
        moment, target = _check_matched_moment(v)
        level = axis_moment_log_constant(v.d) if log_constant is None else float(log_constant)
        if not math.isfinite(level) or level <= 0.0:
            raise ValidationError(f"log_constant must be finite and > 0, got {level}")
        weighted_p, weighted_2, diri = euclidean_norms(v, 2.0)
        if weighted_2 <= 0.0:
            raise ValidationError("moment_constrained_log needs a nonzero profile")
        surface = sphere_surface(v.d)
        log_ent, _ = _log_entropy(v.sphere)
        lhs = diri
        rhs = d * (d - 2.0) * weighted_2 + 0.5 * level * surface * log_ent
        inputs = {
            "d": v.d,
            "p": 2.0,
            "log_constant": level,
            "moment": moment,
            "moment_target": target,
        }
    else:
        raise ValidationError(
            f"unknown inequality_id {inequality_id!r}; choose from "
            "weighted_gns, stability, sharper_stability, moment_constrained, "
            "moment_constrained_log"
        )
    return Deficit(
        lhs=float(lhs),
        rhs=float(rhs),
        deficit=float(lhs - rhs),
        inequality_id=inequality_id,
        inputs=inputs,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def radial_to_csv(v: RadialEuclideanFunction) -> str:
    lines = ["r,v"]
    for radius, value in zip(v.r, v.values):
        lines.append(f"{fmt_float(radius)},{fmt_float(value)}")
    return "\n".join(lines) + "\n"


def radial_from_csv(text: str, d: int) -> RadialEuclideanFunction:
    """Rebuild a profile from CSV; the r column is checked against the grid."""
    lines = [line for line in text.strip().splitlines() if line]
    if not lines or lines[0] != "r,v":
        raise ValidationError("radial CSV must start with the header 'r,v'")
    radii = []
    vals = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 2:
            raise ValidationError(f"malformed radial CSV row: {line!r}")
        radii.append(float(parts[0]))
        vals.append(float(parts[1]))
    profile = radial_profile_from_samples(d, vals)
    if not np.allclose(profile.r, np.asarray(radii), rtol=_GRID_TOL, atol=_GRID_TOL):
        raise ValidationError("stored radii do not match the regenerated grid")
    return profile


def radial_to_json(v: RadialEuclideanFunction) -> str:
    payload = {
        "d": v.d,
        "n": v.node_count,
        "grid": "r = sqrt((1 + z)/(1 - z)) at the quadrature nodes z",
        "r": [float(x) for x in v.r],
        "values": [float(x) for x in v.values],
    }
    return json.dumps(payload) + "\n"


def radial_from_json(text: str) -> RadialEuclideanFunction:
    payload = json.loads(text)
    for key in ("d", "values"):
        if key not in payload:
            raise ValidationError(f"missing field {key!r} in radial profile JSON")
    profile = radial_profile_from_samples(int(payload["d"]), payload["values"])
    if "r" in payload and not np.allclose(
        profile.r, np.asarray(payload["r"], dtype=float), rtol=_GRID_TOL, atol=_GRID_TOL
    ):
        raise ValidationError("stored radii do not match the regenerated grid")
    return profile


def write_radial(v: RadialEuclideanFunction, path, fmt: str = "csv") -> None:
    """Write the profile to path as CSV or JSON through an atomic replace."""
    if fmt == "csv":
        atomic_write_text(path, radial_to_csv(v))
    elif fmt == "json":
        atomic_write_text(path, radial_to_json(v))
    else:
        raise ValidationError(f"unknown radial format {fmt!r}; use csv or json")
