"""Front-fixing finite-difference solver for the free-boundary competition system.

The infected density u lives on the moving interval [0, h(t)]. With
xi = x/h(t) and w(t, xi) = u(t, xi*h(t)) it satisfies, on the fixed interval
[0, 1],

    w_t = (d1/h^2) w_xixi + (xi h'/h) w_xi + w (b1(xi h) - delta1 (w + v(xi h)))

with w_xi(0) = 0, w(1) = 0 and the Stefan law h' = -(mu/h) w_xi(1). The
uninfected density v lives on a fixed truncated grid [0, xmax] with zero
flux at both ends. Diffusion and advection are implicit (one tridiagonal
solve per species and step), reaction is explicit, and h is advanced with a
Heun predictor-corrector.
"""

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConvergenceError, DomainError, NumericalFailure, TruncationError, ValidationError
from .model import ci_birth, critical_h0_star, derive_bounds

SCHEME_VERSION = "front-fixing-imex-heun/1"

BOUND_SLACK = 1e-6
CLIP_FRACTION = 1e-12
MAX_HALVINGS = 20


@dataclass(frozen=True)
class Grid:
    """Discretisation settings.

    ``dt=None`` selects the adaptive policy, which caps each step by
    ``dt_max``, by ``safety/rate`` for the explicit reaction and by
    ``safety*dx/h'`` so the front crosses less than a cell per step.
    """

    n_u: int = 256
    n_v: int = 1024
    xmax: float = None
    dt: float = None
    dt_max: float = 5e-3
    safety: float = 0.4

    def __post_init__(self):
        if int(self.n_u) != self.n_u or self.n_u < 16:
            raise ValidationError("grid.n_u", f"must be an integer >= 16, got {self.n_u!r}")
        if int(self.n_v) != self.n_v or self.n_v < 16:
            raise ValidationError("grid.n_v", f"must be an integer >= 16, got {self.n_v!r}")
        object.__setattr__(self, "n_u", int(self.n_u))
        object.__setattr__(self, "n_v", int(self.n_v))
        for name in ("dt", "xmax"):
            val = getattr(self, name)
            if val is not None and not (math.isfinite(val) and val > 0):
                raise ValidationError(f"grid.{name}", f"must be > 0, got {val!r}")
        if not (self.dt_max > 0 and 0 < self.safety <= 1):
            raise ValidationError("grid.dt_max", "dt_max must be > 0 and safety in (0, 1]")

    def resolve(self, params):
        """Fill in the default truncation length 4*h0 and check xmax > h0."""
        xmax = self.xmax if self.xmax is not None else 4.0 * params.h0
        if xmax <= params.h0:
            raise ValidationError("grid.xmax", f"must exceed h0={params.h0}, got {xmax}")
        return replace(self, xmax=float(xmax))

    def to_dict(self):
        return {"n_u": self.n_u, "n_v": self.n_v, "xmax": self.xmax, "dt": self.dt,
                "dt_max": self.dt_max, "safety": self.safety}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValidationError("grid", "expected a JSON object")
        extra = sorted(set(data) - {"n_u", "n_v", "xmax", "dt", "dt_max", "safety"})
        if extra:
            raise ValidationError("grid", f"unknown key(s) {extra}")
        return cls(**data)


@dataclass(frozen=True)
class SimState:
    t: float
    h: float
    dhdt: float
    w: np.ndarray
    v: np.ndarray
    step: int = 0


@dataclass(frozen=True)
class StopRules:
    """Optional early exits: front beyond ``h_stop``, or ``sup u`` below ``u_extinct``."""

    h_stop: float = None
    u_extinct: float = None


class Outcome(str, enum.Enum):
    SPREADING = "Spreading"
    VANISHING = "Vanishing"
    UNDECIDED = "Undecided"

    def __str__(self):
        return self.value


SERIES_COLUMNS = ("t", "h", "dhdt", "sup_u", "sup_v", "mass_u")


@dataclass
class Series:
    """Sampled diagnostics; ``sup_u_core`` is sup u on [0, h0] (not written to CSV)."""

    t: np.ndarray
    h: np.ndarray
    dhdt: np.ndarray
    sup_u: np.ndarray
    sup_v: np.ndarray
    mass_u: np.ndarray
    sup_u_core: np.ndarray = None

    def __post_init__(self):
        for name in SERIES_COLUMNS + ("sup_u_core",):
            val = getattr(self, name)
            if val is None and name == "sup_u_core":
                val = self.sup_u
            setattr(self, name, np.asarray(val, dtype=float))

    def __len__(self):
        return len(self.t)

    def rows(self):
        return zip(*(getattr(self, c) for c in SERIES_COLUMNS))


@dataclass
class RunResult:
    series: Series
    classification: Outcome
    diagnostics: dict
    final_state: SimState = None
    params: object = None
    grid: Grid = None

    @property
    def Lambda(self):
        return self.diagnostics.get("Lambda")


@dataclass(frozen=True)
class StationaryProfile:
    x: np.ndarray
    phi: np.ndarray
    residual: float
    iterations: int


def _tridiag_solve(lower, diag, upper, rhs):
    """Solve with sub-diagonal ``lower[1:]``, diagonal and super-diagonal ``upper[:-1]``."""
    ab = np.empty((3, len(diag)))
    ab[0, 1:] = upper[:-1]
    ab[0, 0] = 0.0
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    ab[2, -1] = 0.0
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def front_speed(w, h, mu, dxi):
    """Stefan speed -(mu/h) w_xi(1) from the one-sided second-order difference.

    With w[-1] = 0 the difference is (4 w[N-1] - w[N-2]) / (2 dxi); the
    result is clamped at 0 so round-off cannot move the front backwards.
    """
    slope = (4.0 * w[-2] - w[-3]) / (2.0 * dxi)
    return max(0.0, mu * slope / h)


class FrontFixingSolver:
    """Time stepper for one configuration.

    ``source(t, x_u, x_v) -> (s_u, s_v)`` adds forcing terms (manufactured
    solutions), ``pin_front`` holds h fixed, ``freeze_v`` keeps v at its
    initial values. ``on_step(state)`` is called after each accepted step.
    """

    def __init__(self, params, grid=None, init=None, *, bounds=None, source=None,
                 pin_front=False, freeze_v=False, on_step=None):
        grid = (grid or Grid()).resolve(params)
        self.params = params
        self.grid = grid
        self.init = init
        if bounds is None:
            if init is None:
                raise ValueError("need init or bounds")
            bounds = derive_bounds(params, init, xmax=grid.xmax)
        self.bounds = bounds
        self.source = source
        self.pin_front = pin_front
        self.freeze_v = freeze_v
        self.on_step = on_step

        self.xi = np.linspace(0.0, 1.0, grid.n_u + 1)
        self.dxi = 1.0 / grid.n_u
        self.xv = np.linspace(0.0, grid.xmax, grid.n_v + 1)
        self.dxv = grid.xmax / grid.n_v
        self.b2v = np.asarray(params.b2(self.xv), dtype=float)
        self.eps_div = 1e-12 * bounds.M2
        self.rate = max(
            params.delta1 * (2 * bounds.M1 + bounds.M2) + params.b1.sup(),
            params.delta2 * (2 * bounds.M2 + bounds.M1) + params.b2.sup(),
        )
        self.max_dhdt = 0.0
        self.rejected = 0

    # -- state construction -------------------------------------------------
    def initial_state(self, init=None):
        init = init or self.init
        p = self.params
        w = np.asarray(init.u0(self.xi * p.h0, p.h0), dtype=float).copy()
        w[-1] = 0.0
        v = np.asarray(init.v0_for(p)(self.xv), dtype=float).copy()
        s = 0.0 if self.pin_front else front_speed(w, p.h0, p.mu, self.dxi)
        return SimState(t=0.0, h=p.h0, dhdt=s, w=w, v=v, step=0)

    # -- stepping -------------------------------------------------------------
    def stable_dt(self, state):
        g = self.grid
        if g.dt is not None:
            return g.dt
        dt = min(g.dt_max, g.safety / self.rate)
        if state.dhdt > 0.0:
            dt = min(dt, g.safety * min(self.dxv, state.h * self.dxi) / state.dhdt)
        return dt

    def _b1_at(self, x):
        return self.params.b1(x)

    def _try_step(self, state, dt):
        p = self.params
        h, s = state.h, state.dhdt
        w, v = state.w, state.v
        n = self.grid.n_u
        xu = self.xi * h

        v_on_u = np.interp(xu, self.xv, v)
        react_w = w * (self._b1_at(xu) - p.delta1 * (w + v_on_u))
        u_on_v = np.interp(self.xv / h, self.xi, w, right=0.0)
        react_v = ci_birth(self.b2v, u_on_v, v, self.eps_div) - p.delta2 * v * (u_on_v + v)
        if self.source is not None:
            su, sv = self.source(state.t, xu, self.xv)
            react_w = react_w + su
            react_v = react_v + sv

        if self.pin_front:
            h_pred, speed = h, 0.0
        else:
            h_pred, speed = h + dt * s, s

        # u: implicit diffusion + advection on xi in [0, 1), w[n] = 0.
        diff = p.d1 / (h_pred * h_pred) / self.dxi ** 2
        adv = self.xi[:n] * speed / h / (2.0 * self.dxi)
        central = adv <= diff
        upwind_adv = np.where(central, 0.0, 2.0 * adv)
        lower = -dt * (diff - np.where(central, adv, 0.0))
        upper = -dt * (diff + np.where(central, adv, 0.0) + upwind_adv)
        diag = 1.0 + dt * (2.0 * diff + upwind_adv)
        upper[0] = -dt * 2.0 * diff
        rhs = w[:n] + dt * react_w[:n]
        w_new = np.empty_like(w)
        w_new[:n] = _tridiag_solve(lower, diag, upper, rhs)
        w_new[n] = 0.0

        # v: implicit diffusion on the fixed grid, zero flux at both ends.
        if self.freeze_v:
            v_new = v
        else:
            m = self.grid.n_v
            kv = p.d2 / self.dxv ** 2
            lower_v = np.full(m + 1, -dt * kv)
            upper_v = np.full(m + 1, -dt * kv)
            upper_v[0] = -2.0 * dt * kv
            lower_v[m] = -2.0 * dt * kv
            diag_v = np.full(m + 1, 1.0 + 2.0 * dt * kv)
            v_new = _tridiag_solve(lower_v, diag_v, upper_v, v + dt * react_v)

        if self.pin_front:
            h_new, s_new = h, 0.0
        else:
            s_pred = front_speed(w_new, h_pred, p.mu, self.dxi)
            h_new = h + 0.5 * dt * (s + s_pred)
            s_new = front_speed(w_new, h_new, p.mu, self.dxi)
        return h_new, s_new, w_new, v_new

    def _accept(self, w, v, forced):
        """Clip round-off undershoots; return None if the step must be rejected."""
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            return None
        m1, m2 = self.bounds.M1, self.bounds.M2
        if w.min() < 0.0:
            if w.min() < -CLIP_FRACTION * m1:
                return None
            w = np.maximum(w, 0.0)
        if v.min() < 0.0:
            if v.min() < -CLIP_FRACTION * m2:
                return None
            v = np.maximum(v, 0.0)
        if not forced and (w.max() > m1 * (1 + BOUND_SLACK) or v.max() > m2 * (1 + BOUND_SLACK)):
            return None
        return w, v

    def step(self, state, dt=None):
        """Advance one step; under the adaptive policy rejected steps are retried with dt/2."""
        dt = self.stable_dt(state) if dt is None else dt
        adaptive = self.grid.dt is None
        for _ in range(MAX_HALVINGS + 1):
            h_new, s_new, w_new, v_new = self._try_step(state, dt)
            ok = self._accept(w_new, v_new, forced=self.source is not None)
            if ok is not None:
                break
            self.rejected += 1
            if not adaptive:
                raise NumericalFailure("non-finite value or bound violation", step=state.step)
            dt *= 0.5
        else:
            raise NumericalFailure(f"step rejected after {MAX_HALVINGS} halvings", step=state.step)
        w_new, v_new = ok
        if h_new >= self.grid.xmax:
            raise TruncationError(
                f"truncation exceeded; increase xmax (front at {h_new:.4g} >= {self.grid.xmax:.4g})",
                step=state.step)
        self.max_dhdt = max(self.max_dhdt, s_new)
        new = SimState(t=state.t + dt, h=h_new, dhdt=s_new, w=w_new, v=v_new, step=state.step + 1)
        if self.on_step is not None:
            self.on_step(new)
        return new

    # -- diagnostics ----------------------------------------------------------
    def sample(self, state):
        w = state.w
        core = self.xi * state.h <= self.params.h0 + 1e-12
        mass = state.h * self.dxi * (w.sum() - 0.5 * (w[0] + w[-1]))
        return (state.t, state.h, state.dhdt, float(w.max()), float(state.v.max()),
                float(mass), float(w[core].max()))

    def run(self, horizon, *, sample_every=None, stop_rules=None, state=None):
        """Integrate to ``horizon`` (or an early stop) and classify the outcome."""
        if not (horizon > 0):
            raise ValidationError("run.horizon", f"must be > 0, got {horizon!r}")
        stop_rules = stop_rules or StopRules()
        sample_every = sample_every or horizon / 200.0
        state = state or self.initial_state()
        self.max_dhdt = state.dhdt
        rows = [self.sample(state)]
        next_sample = sample_every
        started = time.perf_counter()
        stopped_by = None
        while state.t < horizon * (1 - 1e-12):
            target = min(next_sample, horizon)
            dt = min(self.stable_dt(state), target - state.t)
            state = self.step(state, dt)
            if state.t >= target * (1 - 1e-12):
                state = replace(state, t=target)
                rows.append(self.sample(state))
                next_sample = target + sample_every
            if stop_rules.h_stop is not None and state.h >= stop_rules.h_stop:
                stopped_by = "h_stop"
            elif stop_rules.u_extinct is not None and state.w.max() < stop_rules.u_extinct:
                stopped_by = "u_extinct"
            if stopped_by:
                if rows[-1][0] != state.t:
                    rows.append(self.sample(state))
                break
        cols = list(zip(*rows))
        series = Series(*[np.array(c) for c in cols])
        outcome = classify(series, self.params, self.grid, horizon=horizon, bounds=self.bounds)
        p = self.params
        diagnostics = {
            "final_sup_u": float(state.w.max()),
            "final_sup_v": float(state.v.max()),
            "final_h": float(state.h),
            "Lambda": float(self.max_dhdt),
            "M1": self.bounds.M1,
            "M2": self.bounds.M2,
            "steps": int(state.step),
            "rejected_steps": int(self.rejected),
            "stopped_by": stopped_by,
            "grid_refinement_advised": bool(state.h * self.dxi > 0.25 * math.sqrt(p.d1 / max(p.b1.sup(), 1e-300))),
            "wall_time_s": time.perf_counter() - started,
        }
        return RunResult(series=series, classification=outcome, diagnostics=diagnostics,
                         final_state=state, params=p, grid=self.grid)

    def u_profile(self, state):
        """(x, u) on the moving nodes."""
        return self.xi * state.h, state.w


def step(state, params, grid, init=None, bounds=None):
    """One step of the coupled scheme (functional wrapper around the solver)."""
    return FrontFixingSolver(params, grid, init, bounds=bounds).step(state)


def run(params, init, grid=None, horizon=10.0, stop_rules=None, sample_every=None):
    """Validate the configuration, integrate and classify."""
    grid = (grid or Grid()).resolve(params)
    init.validate(params, grid.xmax)
    solver = FrontFixingSolver(params, grid, init)
    return solver.run(horizon, sample_every=sample_every, stop_rules=stop_rules)


# -- classification -----------------------------------------------------------

def spreading_threshold(params, grid=None):
    """Front position beyond which a run counts as spreading.

    Constant rates with kappa1 > kappa2: max(3*h0*, 2*h0). Otherwise three
    times the heterogeneous critical size h* of the effective potential
    b1 - delta1*phi_v*, falling back to three times (pi/2)sqrt(d1/max b1)
    when that root does not exist.
    """
    p = params
    if p.is_constant and p.kappa1 > p.kappa2:
        return max(3.0 * critical_h0_star(p), 2.0 * p.h0)
    from . import eigen  # local import: eigen depends on this module

    try:
        h_star = eigen.heterogeneous_h_star(p, grid).value
    except Exception:  # noqa: BLE001 - any failure falls back to the sup bound
        h_star = 0.5 * math.pi * math.sqrt(p.d1 / max(p.b1.sup(), 1e-300))
    return max(3.0 * h_star, 2.0 * p.h0)


def classify(series, params, grid=None, *, horizon=None, window_fraction=0.1, warmup=1.0,
             h_threshold=None, bounds=None, u_tol_fraction=1e-3, u_floor_fraction=1e-2):
    """Label a run Spreading, Vanishing or Undecided.

    Vanishing: over the trailing window the front speed stays below
    ``1e-6*h0/window`` and sup u is non-increasing and ends below
    ``u_tol_fraction*M1``. Spreading: the front passed the spreading
    threshold and sup u on [0, h0] stayed above ``u_floor_fraction*M1`` in
    the window. Anything else, including runs shorter than ``warmup``, is
    Undecided.
    """
    t = series.t
    if len(t) < 2:
        return Outcome.UNDECIDED
    span = t[-1] - t[0]
    horizon = horizon if horizon is not None else span
    if span < warmup or span <= 0:
        return Outcome.UNDECIDED
    window = window_fraction * horizon
    tail = t >= t[-1] - window
    if tail.sum() < 3:
        return Outcome.UNDECIDED
    if bounds is not None:
        m1 = bounds.M1
    else:
        m1 = max(params.b1.sup() / params.delta1, float(series.sup_u[0]))

    eps_h = 1e-6 * params.h0 / window
    sup_tail = series.sup_u[tail]
    decaying = np.all(np.diff(sup_tail) <= 1e-12 * m1)
    if np.all(series.dhdt[tail] < eps_h) and decaying and sup_tail[-1] < u_tol_fraction * m1:
        return Outcome.VANISHING

    if h_threshold is None:
        h_threshold = spreading_threshold(params, grid)
    if series.h[-1] > h_threshold and np.min(series.sup_u_core[tail]) > u_floor_fraction * m1:
        return Outcome.SPREADING
    return Outcome.UNDECIDED


def measure_speed(result, tail_fraction=0.5):
    """Least-squares slope of h(t) over the trailing ``tail_fraction`` of the run."""
    if result.classification != Outcome.SPREADING:
        raise DomainError(f"speed is only measured on spreading runs, got {result.classification}")
    return fit_tail_slope(result.series.t, result.series.h, tail_fraction)


def fit_tail_slope(t, h, tail_fraction=0.5):
    if not (0 < tail_fraction <= 1):
        raise ValidationError("tail_fraction", "must be in (0, 1]")
    t = np.asarray(t, dtype=float)
    h = np.asarray(h, dtype=float)
    sel = t >= t[-1] - tail_fraction * (t[-1] - t[0]) - 1e-12
    if sel.sum() < 2:
        raise DomainError("not enough samples in the tail")
    slope, _ = np.polyfit(t[sel], h[sel], 1)
    return float(slope)


# -- stationary v-profile ------------------------------------------------------

def solve_stationary_v(params, grid=None, *, tol=1e-10, max_iter=500):
    """Positive steady state of d2 v'' + v (b2(x) - delta2 v) = 0 with v'(0) = 0.

    Zero flux is imposed at the truncation end. Solved by Newton's method
    with pseudo-transient damping, starting from max(sup b2/delta2, 1); the
    iteration stops once the sup-norm of the right-hand side is below ``tol``.
    """
    p = params
    if p.b2.inf() <= 0.0:
        raise DomainError("b2 must be bounded below by a positive constant")
    grid = (grid or Grid()).resolve(p)
    x = np.linspace(0.0, grid.xmax, grid.n_v + 1)
    dx = grid.xmax / grid.n_v
    b2 = np.asarray(p.b2(x), dtype=float)
    k = p.d2 / dx ** 2
    m = grid.n_v

    def residual(v):
        lap = np.empty_like(v)
        lap[1:-1] = v[2:] - 2 * v[1:-1] + v[:-2]
        lap[0] = 2 * (v[1] - v[0])
        lap[-1] = 2 * (v[-2] - v[-1])
        return k * lap + v * (b2 - p.delta2 * v)

    v = np.full(m + 1, max(p.b2.sup() / p.delta2, 1.0))
    res = residual(v)
    norm = float(np.abs(res).max())
    tau = 1.0 / max(p.b2.sup(), 1e-12)
    for it in range(1, max_iter + 1):
        if norm < tol:
            return StationaryProfile(x=x, phi=v, residual=norm, iterations=it - 1)
        lower = np.full(m + 1, -k)
        upper = np.full(m + 1, -k)
        upper[0] = -2 * k
        lower[m] = -2 * k
        diag = 1.0 / tau + 2 * k - (b2 - 2 * p.delta2 * v)
        v_next = v + _tridiag_solve(lower, diag, upper, res)
        if np.any(v_next <= 0) or not np.all(np.isfinite(v_next)):
            tau *= 0.25
            continue
        res_next = residual(v_next)
        norm_next = float(np.abs(res_next).max())
        tau = min(tau * max(norm / max(norm_next, 1e-300), 0.5), 1e12)
        v, res, norm = v_next, res_next, norm_next
    raise ConvergenceError("stationary v-profile did not converge", residual=norm)
