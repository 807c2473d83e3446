"""Semi-wave profiles and the asymptotic spreading speed of the Stefan front.

For 0 <= beta < 2*sqrt(a*d) the problem

    -d U'' + beta U' = a U - delta U^2 on (0, inf),   U(0) = 0

has a unique positive, increasing solution with U -> a/delta. The
spreading speed beta0 is the unique root of g(beta) = mu*U'_beta(0) - beta.

U'_beta(0) is obtained by following the stable manifold of the saddle
(a/delta, 0) backwards in x until U reaches zero.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalFailure, ValidationError

MANIFOLD_OFFSET = 1e-8
UPPER_MARGIN = 1e-6
RTOL = 1e-11
ATOL_FRACTION = 1e-14


@dataclass(frozen=True)
class SemiWaveProblem:
    d: float
    a: float
    delta: float
    mu: float = 1.0

    def __post_init__(self):
        for name in ("d", "a", "delta", "mu"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0):
                raise ValidationError(name, f"must be finite and > 0, got {getattr(self, name)!r}")
            object.__setattr__(self, name, val)

    @property
    def kappa(self):
        return self.a / self.delta

    @property
    def kpp_speed(self):
        return 2.0 * math.sqrt(self.a * self.d)


@dataclass
class SpeedResult:
    beta0: float
    Uprime0: float
    x: np.ndarray
    profile: np.ndarray
    residual: float
    iterations: int
    problem: SemiWaveProblem

    def to_dict(self):
        p = self.problem
        return {"beta0": self.beta0, "uprime0": self.Uprime0, "mu": p.mu, "a": p.a,
                "delta": p.delta, "d": p.d, "residual": self.residual}


def _stable_root(problem, beta):
    d, a = problem.d, problem.a
    return (beta - math.sqrt(beta * beta + 4.0 * a * d)) / (2.0 * d)


def _shoot(problem, beta, dense=False):
    d, a, dl = problem.d, problem.a, problem.delta
    kappa = problem.kappa
    r = _stable_root(problem, beta)
    eps = MANIFOLD_OFFSET * kappa

    # s = -x; along the manifold U = kappa - eps*exp(r x), U' = -eps*r*exp(r x).
    def rhs(_s, y):
        u, p = y
        return [-p, -(beta * p - a * u + dl * u * u) / d]

    def hits_zero(_s, y):
        return y[0]

    hits_zero.terminal = True
    hits_zero.direction = -1

    y0 = [kappa - eps, -eps * r]
    # enough x for the escape from the saddle plus half a turn around the origin
    omega = math.sqrt(max(4.0 * a * d - beta * beta, 1e-300)) / (2.0 * d)
    span = 60.0 / abs(r) + 4.0 * math.pi / omega + 50.0 * math.sqrt(d / a)
    sol = solve_ivp(rhs, (0.0, span), y0, method="RK45", rtol=RTOL,
                    atol=ATOL_FRACTION * kappa * max(1.0, math.sqrt(a / d)),
                    events=hits_zero, dense_output=dense)
    if sol.status != 1 or not sol.t_events[0].size:
        raise NumericalFailure(f"stable manifold did not reach U=0 for beta={beta!r} ({sol.message})")
    s_cross = float(sol.t_events[0][0])
    uprime0 = float(sol.y_events[0][0][1])
    return uprime0, s_cross, sol, r, eps


def solve_profile(problem, beta, *, n_samples=20001, x_profile=None):
    """Return (U'(0), x, U) for the semi-wave with speed ``beta``.

    The profile is sampled on a uniform grid of [0, x_profile]. The default
    is 40*sqrt(d/a), lengthened when the orbit lingers near the origin
    (beta close to 2*sqrt(a*d)) so the last sample is within 1e-6*a/delta of
    a/delta. Past the end of the integrated orbit the profile follows the
    linearised manifold.
    """
    if not (0.0 <= beta < problem.kpp_speed):
        raise DomainError(f"beta must lie in [0, {problem.kpp_speed}), got {beta!r}")
    uprime0, s_cross, sol, r, eps = _shoot(problem, beta, dense=True)
    if x_profile is None:
        x_profile = max(40.0 * math.sqrt(problem.d / problem.a), s_cross)
    x = np.linspace(0.0, x_profile, n_samples)
    u = np.empty_like(x)
    inside = x <= s_cross
    u[inside] = sol.sol(s_cross - x[inside])[0]
    u[~inside] = problem.kappa - eps * np.exp(r * (x[~inside] - s_cross))
    u[0] = 0.0
    return uprime0, x, u


def uprime0(problem, beta):
    """U'_beta(0) alone (no dense output)."""
    if not (0.0 <= beta < problem.kpp_speed):
        raise DomainError(f"beta must lie in [0, {problem.kpp_speed}), got {beta!r}")
    return _shoot(problem, beta)[0]


def speed_gap(problem, beta):
    """g(beta) = mu*U'_beta(0) - beta."""
    return problem.mu * uprime0(problem, beta) - beta


def profile_residual(problem, beta, x, u):
    """Max |-d U'' + beta U' - a U + delta U^2| with centred differences."""
    dx = x[1] - x[0]
    upp = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx ** 2
    up = (u[2:] - u[:-2]) / (2 * dx)
    um = u[1:-1]
    res = -problem.d * upp + beta * up - problem.a * um + problem.delta * um * um
    return float(np.abs(res).max())


def solve_beta0(problem, *, rtol=1e-8, max_iter=200, n_samples=20001):
    """Bisect g on (0, (1 - 1e-6)*2*sqrt(a*d)) for the spreading speed."""
    lo = 0.0
    hi = (1.0 - UPPER_MARGIN) * problem.kpp_speed
    g_lo = speed_gap(problem, lo)
    g_hi = speed_gap(problem, hi)
    if not (g_lo > 0 and g_hi < 0):
        raise NumericalFailure(f"g does not change sign on (0, {hi}): g(0)={g_lo}, g(hi)={g_hi}")
    it = 0
    while hi - lo > rtol * hi and it < max_iter:
        mid = 0.5 * (lo + hi)
        if speed_gap(problem, mid) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    beta0 = 0.5 * (lo + hi)
    up0, x, u = solve_profile(problem, beta0, n_samples=n_samples)
    res = profile_residual(problem, beta0, x, u)
    return SpeedResult(beta0=beta0, Uprime0=up0, x=x, profile=u, residual=res,
                       iterations=it, problem=problem)


def beta0(mu, a, delta, d, **kwargs):
    """Spreading speed beta0(mu, a, delta, d)."""
    return solve_beta0(SemiWaveProblem(d=d, a=a, delta=delta, mu=mu), **kwargs).beta0


def speed_bracket(params, **kwargs):
    """(lower, upper) speeds for constant rates with kappa1 > kappa2.

    Upper: beta0(mu, b1, delta1, d1). Lower: beta0(mu, kappa1 - kappa2, 1, d1),
    i.e. reaction u*(kappa1 - kappa2 - u) with unit self-limitation.
    """
    k1, k2 = params.kappa1, params.kappa2
    if k1 <= k2:
        raise DomainError("speed bracket needs kappa1 > kappa2")
    hi = beta0(params.mu, params.b1.value, params.delta1, params.d1, **kwargs)
    lo = beta0(params.mu, k1 - k2, 1.0, params.d1, **kwargs)
    return lo, hi
