"""Principal eigenvalue of -d phi'' - b(x) phi = lambda phi on (0, h0).

Boundary conditions are phi'(0) = 0 (ghost node) and phi(h0) = 0 (row
eliminated). Scaling the Neumann row by the trapezoid weight 1/2 makes the
matrix symmetric tridiagonal; the smallest eigenvalue is bracketed by
Sturm-sequence bisection and polished by inverse iteration.

Also here: the critical diffusivity d* and habitat size h* (roots of
lambda1), and the empirical mu-thresholds obtained by bisecting on the
outcome of full simulations.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import BracketError, DomainError, HorizonError, ResolutionError, ValidationError
from .model import BirthRateField

MIN_N = 64
THRESHOLD_KINDS = ("d1_star", "h_star", "mu_bar", "mu_lower", "mu_star_empirical")


def potential_values(b, x):
    """Evaluate a potential given as a number, a BirthRateField or a callable."""
    if isinstance(b, (int, float)):
        return np.full_like(x, float(b))
    out = np.asarray(b(x), dtype=float)
    if out.shape != x.shape:
        out = np.broadcast_to(out, x.shape).copy()
    return out


@dataclass(frozen=True)
class EigenProblem:
    """``b`` may be a number, a :class:`BirthRateField` or any callable of x."""

    d: float
    b: object
    h0: float
    n: int = 512

    def __post_init__(self):
        for name in ("d", "h0"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ValidationError(name, f"must be finite and > 0, got {val!r}")
        if int(self.n) != self.n or self.n < MIN_N:
            raise ResolutionError(f"n must be an integer >= {MIN_N}, got {self.n!r}")

    @property
    def dx(self):
        return self.h0 / self.n


@dataclass
class EigenResult:
    lambda1: float
    x: np.ndarray
    phi1: np.ndarray
    problem: EigenProblem
    iterations: int

    def to_dict(self):
        return {"lambda1": self.lambda1, "d": self.problem.d, "h0": self.problem.h0,
                "n": self.problem.n, "iterations": self.iterations}


@dataclass
class ThresholdResult:
    kind: str
    value: float
    bracket: tuple
    iterations: int
    method: str
    residual: float = None
    probes: list = field(default_factory=list)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "bracket": list(self.bracket),
                "iterations": self.iterations, "method": self.method,
                "residual": self.residual, "probes": self.probes}


def assemble(problem):
    """Diagonal and off-diagonal of the symmetrised matrix on nodes 0..n-1."""
    n, dx = problem.n, problem.dx
    x = np.arange(n) * dx
    k = problem.d / dx ** 2
    diag = 2.0 * k - potential_values(problem.b, x)
    off = np.full(n - 1, -k)
    off[0] = -math.sqrt(2.0) * k
    return diag, off


def sturm_count(diag, off_sq, sigma):
    """Number of eigenvalues of the symmetric tridiagonal matrix below ``sigma``.

    ``diag`` and ``off_sq`` (squared off-diagonal) are plain lists for speed.
    """
    q = diag[0] - sigma
    count = 1 if q < 0.0 else 0
    tiny = 1e-300
    for a, e2 in zip(diag[1:], off_sq):
        if q == 0.0:
            q = tiny
        q = a - sigma - e2 / q
        if q < 0.0:
            count += 1
    return count


def _discretisation_error(problem):
    k = math.pi / (2.0 * problem.h0)
    return problem.d * k * k * (k * problem.dx) ** 2 / 12.0


def principal_eigen(problem, rtol=None):
    """Smallest eigenvalue and its positive eigenfunction (normalised, int phi^2 = 1).

    If ``rtol`` is given and the estimated discretisation error of the
    mixed-BC Laplacian term exceeds ``rtol*|lambda1|`` a ResolutionError is
    raised.
    """
    diag, off = assemble(problem)
    n = problem.n
    dl, osq = diag.tolist(), (off * off).tolist()

    # Bracket: Gershgorin below, Rayleigh quotient of a cosine trial vector above.
    radius = np.zeros(n)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo = float(np.min(diag - radius))
    x = np.arange(n) * problem.dx
    y = np.cos(0.5 * math.pi * x / problem.h0)
    y[0] *= math.sqrt(0.5)
    hi = _rayleigh(diag, off, y)
    scale = max(abs(lo), abs(hi), problem.d / problem.h0 ** 2)
    hi += 1e-12 * scale
    while sturm_count(dl, osq, hi) < 1:
        hi += 1e-8 * scale
    it = 0
    while hi - lo > 1e-13 * scale and it < 200:
        mid = 0.5 * (lo + hi)
        if sturm_count(dl, osq, mid) >= 1:
            hi = mid
        else:
            lo = mid
        it += 1
    sigma = lo - 1e-10 * scale

    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag - sigma
    ab[2, :-1] = off
    for _ in range(3):
        y = solve_banded((1, 1), ab, y, check_finite=False)
        y /= np.linalg.norm(y)
    lam = _rayleigh(diag, off, y)
    if not (lo - 1e-9 * scale <= lam <= hi + 1e-9 * scale):
        lam = 0.5 * (lo + hi)

    phi = np.empty(n + 1)
    phi[:n] = y
    phi[0] *= math.sqrt(2.0)
    phi[n] = 0.0
    if phi[0] < 0:
        phi = -phi
    xs = np.linspace(0.0, problem.h0, n + 1)
    norm = math.sqrt(problem.dx * (np.sum(phi ** 2) - 0.5 * (phi[0] ** 2 + phi[-1] ** 2)))
    phi /= norm
    if rtol is not None and _discretisation_error(problem) > rtol * max(abs(lam), 1e-300):
        raise ResolutionError(
            f"n={n} too coarse for rtol={rtol}: estimated error {_discretisation_error(problem):.2e}")
    return EigenResult(lambda1=float(lam), x=xs, phi1=phi, problem=problem, iterations=it)


def _rayleigh(diag, off, y):
    ty = diag * y
    ty[:-1] += off * y[1:]
    ty[1:] += off * y[:-1]
    return float(y @ ty / (y @ y))


def lambda1_negative(problem):
    """True iff the principal eigenvalue is strictly negative (one Sturm count at 0)."""
    diag, off = assemble(problem)
    return sturm_count(diag.tolist(), (off * off).tolist(), 0.0) >= 1


# -- thresholds --------------------------------------------------------------

def _bisect_sign(negative_at, lo, hi, neg_side, rtol, max_iter=200):
    """Bisection on a monotone sign. ``neg_side`` says which end has lambda1 < 0."""
    it = 0
    while hi - lo > rtol * abs(hi) and it < max_iter:
        mid = 0.5 * (lo + hi)
        if negative_at(mid) == (neg_side == "lo"):
            lo = mid
        else:
            hi = mid
        it += 1
    return lo, hi, it


def find_d1_star(b, h0, bracket=None, *, n=512, rtol=1e-8):
    """Diffusivity d* with lambda1(d*) = 0 (lambda1 increases with d)."""
    def negative_at(d):
        return lambda1_negative(EigenProblem(d=d, b=b, h0=h0, n=n))

    if bracket is None:
        xs = np.linspace(0.0, h0, n + 1)
        bmax = float(np.max(potential_values(b, xs)))
        if bmax <= 0:
            raise DomainError("potential is nowhere positive on (0, h0); d* does not exist")
        hi = 1.01 * bmax * (2 * h0 / math.pi) ** 2
        lo = hi
        for _ in range(60):
            lo *= 0.5
            if negative_at(lo):
                break
        bracket = (lo, hi)
    lo, hi = map(float, bracket)
    if not (0 < lo < hi):
        raise BracketError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    if not (negative_at(lo) and not negative_at(hi)):
        raise BracketError(f"lambda1 does not change sign on d in [{lo}, {hi}]")
    lo, hi, it = _bisect_sign(negative_at, lo, hi, "lo", rtol)
    value = 0.5 * (lo + hi)
    res = principal_eigen(EigenProblem(d=value, b=b, h0=h0, n=n)).lambda1
    return ThresholdResult("d1_star", value, (lo, hi), it, "eigen-bisect", residual=res)


def find_h_star(d, b, bracket=None, *, n=512, rtol=1e-8, xmax=None):
    """Habitat size h* with lambda1(h*) = 0 (lambda1 decreases with h0)."""
    def negative_at(h):
        return lambda1_negative(EigenProblem(d=d, b=b, h0=h, n=n))

    if bracket is None:
        probe = np.linspace(0.0, xmax or 100.0, 10_001)
        vals = potential_values(b, probe)
        bmax, bmin = float(vals.max()), float(vals.min())
        if bmax <= 0:
            raise DomainError("potential is nowhere positive; h* does not exist")
        lo = 0.999 * 0.5 * math.pi * math.sqrt(d / bmax)
        hi = 1.001 * 0.5 * math.pi * math.sqrt(d / bmin) if bmin > 0 else 4 * lo
        for _ in range(60):
            if negative_at(hi):
                break
            hi *= 2.0
        bracket = (lo, hi)
    lo, hi = map(float, bracket)
    if not (0 < lo < hi):
        raise BracketError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    if not (not negative_at(lo) and negative_at(hi)):
        raise BracketError(f"lambda1 does not change sign on h0 in [{lo}, {hi}]")
    lo, hi, it = _bisect_sign(negative_at, lo, hi, "hi", rtol)
    value = 0.5 * (lo + hi)
    res = principal_eigen(EigenProblem(d=d, b=b, h0=value, n=n)).lambda1
    return ThresholdResult("h_star", value, (lo, hi), it, "eigen-bisect", residual=res)


def effective_potential(params, profile):
    """x -> b1(x) - delta1*phi_v*(x), constant beyond the profile grid."""
    b1, delta1 = params.b1, params.delta1
    xs, phi = profile.x, profile.phi

    def pot(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(b1(x), dtype=float) - delta1 * np.interp(x, xs, phi)

    return pot


def heterogeneous_h_star(params, grid=None, *, n=512):
    """h* of the effective potential b1 - delta1*phi_v* at diffusivity d1."""
    from .pde import Grid, solve_stationary_v

    grid = (grid or Grid()).resolve(params)
    profile = solve_stationary_v(params, grid)
    return find_h_star(params.d1, effective_potential(params, profile), n=n, xmax=grid.xmax)


def heterogeneous_d1_star(params, grid=None, *, n=512):
    """d1* of the effective potential on [0, h0]."""
    from .pde import Grid, solve_stationary_v

    grid = (grid or Grid()).resolve(params)
    profile = solve_stationary_v(params, grid)
    return find_d1_star(effective_potential(params, profile), params.h0, n=n)


def find_mu_threshold(params, init, grid, horizon, kind="mu_bar", bracket=(1e-3, 1e2), *,
                      budget=20, rtol=0.02, sample_every=None, stop_rules=None):
    """Empirical flip point of the classification in mu, by geometric bisection.

    Each probe is a full run with all other parameters fixed. The returned
    value is the geometric midpoint of the final bracket, whose ends
    classify differently. ``budget`` bounds the total number of probes.
    Unless ``stop_rules`` says otherwise, probes stop once the front passes
    90% of the truncation length so spreading runs do not hit it.
    """
    from .pde import Grid, Outcome, StopRules, run

    grid = (grid or Grid()).resolve(params)
    if stop_rules is None:
        stop_rules = StopRules(h_stop=0.9 * grid.xmax)

    if kind not in ("mu_bar", "mu_lower", "mu_star_empirical"):
        raise ValidationError("kind", f"must be mu_bar, mu_lower or mu_star_empirical, got {kind!r}")
    probes = []

    def probe(mu):
        res = run(params.replace(mu=mu), init, grid, horizon=horizon,
                  sample_every=sample_every, stop_rules=stop_rules)
        cls = res.classification
        probes.append({"mu": mu, "classification": str(cls), "h_final": res.diagnostics["final_h"]})
        if cls == Outcome.UNDECIDED:
            raise HorizonError(f"probe mu={mu:.6g} is Undecided; increase the horizon (now {horizon})")
        return cls

    lo, hi = map(float, bracket)
    if not (0 < lo < hi):
        raise BracketError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    c_lo, c_hi = probe(lo), probe(hi)
    if c_lo == c_hi:
        raise BracketError(f"both bracket ends classify as {c_lo}; no flip in [{lo}, {hi}]")
    it = 0
    while hi / lo - 1.0 > rtol and len(probes) < budget:
        mid = math.sqrt(lo * hi)
        if probe(mid) == c_lo:
            lo = mid
        else:
            hi = mid
        it += 1
    return ThresholdResult(kind, math.sqrt(lo * hi), (lo, hi), it, "sim-bisect", probes=probes)
