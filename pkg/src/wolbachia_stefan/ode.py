"""Well-mixed models: the two-species CI competition system and the
six-compartment release model it reduces to.

Two species (u infected, v uninfected):

    u' = u (b1 - delta1 (u+v))
    v' = v (b2 v/(u+v) - delta2 (u+v))

Compartments (released rf, rm; reproductive If, Im, Uf, Um; T the sum):

    rf' = -delta1 rf T                     rm' = -delta1 rm T
    If' = s bI (If + rf) - delta1 If T     Im' = (1-s) bI (If + r*) - delta1 Im T
    Uf' = s bU Uf Um/(rm+Im+Um) - delta2 Uf T
    Um' = (1-s) bU Uf Um/(rm+Im+Um) - delta2 Um T

with s the female fraction at birth and r* = rm by default (``rf`` selectable
through ``im_release_source``).
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import NumericalFailure, ValidationError

CLIP_TOL = 1e-12
EPS_DIV = 1e-12
COMPARTMENTS = ("rf", "rm", "If", "Im", "Uf", "Um")


@dataclass(frozen=True)
class OdeParams:
    b1: float = 1.0
    b2: float = 1.0
    delta1: float = 1.0
    delta2: float = 1.0
    bI: float = None
    bU: float = None
    delta_sex: float = 0.5
    im_release_source: str = "rm"

    def __post_init__(self):
        for name in ("delta1", "delta2"):
            _check(name, getattr(self, name), strict=True)
        for name in ("b1", "b2", "bI", "bU"):
            if getattr(self, name) is not None:
                _check(name, getattr(self, name), strict=False)
        s = self.delta_sex
        if not (isinstance(s, (int, float)) and 0.0 <= s <= 1.0):
            raise ValidationError("delta_sex", f"must lie in [0, 1], got {s!r}")
        if self.im_release_source not in ("rm", "rf"):
            raise ValidationError("im_release_source", f"must be 'rm' or 'rf', got {self.im_release_source!r}")

    @property
    def kappa1(self):
        return self.b1 / self.delta1

    @property
    def kappa2(self):
        return self.b2 / self.delta2

    def reduced(self):
        """Two-species parameters with b1 = bI/2, b2 = bU/2."""
        if self.bI is None or self.bU is None:
            raise ValidationError("bI", "bI and bU are needed for the reduction")
        return OdeParams(b1=self.bI / 2, b2=self.bU / 2, delta1=self.delta1, delta2=self.delta2)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValidationError(sorted(extra)[0], "unknown ode parameter")
        return cls(**data)


def _check(name, val, strict):
    ok = isinstance(val, (int, float)) and not isinstance(val, bool) and math.isfinite(val)
    if not ok or val < 0 or (strict and val == 0):
        raise ValidationError(name, f"must be finite and {'> 0' if strict else '>= 0'}, got {val!r}")


@dataclass(frozen=True)
class CompartmentState:
    rf: float = 0.0
    rm: float = 0.0
    If: float = 0.0
    Im: float = 0.0
    Uf: float = 0.0
    Um: float = 0.0

    def __post_init__(self):
        for name in COMPARTMENTS:
            _check(name, getattr(self, name), strict=False)

    @property
    def T(self):
        return self.rf + self.rm + self.If + self.Im + self.Uf + self.Um

    @property
    def u(self):
        return self.If + self.Im

    @property
    def v(self):
        return self.Uf + self.Um

    def as_tuple(self):
        return tuple(getattr(self, n) for n in COMPARTMENTS)

    @classmethod
    def equal_determination(cls, u, v, rf=0.0, rm=0.0):
        return cls(rf=rf, rm=rm, If=u / 2, Im=u / 2, Uf=v / 2, Um=v / 2)


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray       # shape (len(t), len(names))
    names: tuple

    def __getitem__(self, name):
        return self.y[:, self.names.index(name)]

    @property
    def final(self):
        return dict(zip(self.names, self.y[-1].tolist()))

    def columns(self):
        return ("t",) + tuple(self.names)

    def rows(self):
        for ti, yi in zip(self.t.tolist(), self.y.tolist()):
            yield [ti] + yi


def uv_rhs(p, y):
    u, v = y
    total = u + v
    frac = v / total if total > EPS_DIV else (1.0 if v > 0 else 0.0)
    return (u * (p.b1 - p.delta1 * total),
            v * (p.b2 * frac - p.delta2 * total))


def compartment_rhs(p, y):
    rf, rm, If, Im, Uf, Um = y
    T = rf + rm + If + Im + Uf + Um
    s = p.delta_sex
    males = rm + Im + Um
    # no males, no matings
    ci = Um / males if males > EPS_DIV else 0.0
    r_im = rm if p.im_release_source == "rm" else rf
    born_u = p.bU * Uf * ci
    return (-p.delta1 * rf * T,
            -p.delta1 * rm * T,
            s * p.bI * (If + rf) - p.delta1 * If * T,
            (1 - s) * p.bI * (If + r_im) - p.delta1 * Im * T,
            s * born_u - p.delta2 * Uf * T,
            (1 - s) * born_u - p.delta2 * Um * T)


def rk4(rhs, y0, horizon, dt, *, sample_every=None, clip_tol=CLIP_TOL):
    """Classical fixed-step RK4 on a tuple of floats.

    The last step is shortened to land on ``horizon``. Components that dip
    below zero by less than clip_tol*scale are clipped; anything worse
    raises NumericalFailure (dt too large).
    """
    if not (dt > 0 and horizon >= 0):
        raise ValidationError("dt", f"need dt > 0 and horizon >= 0, got dt={dt!r}, horizon={horizon!r}")
    n_steps = max(1, math.ceil(horizon / dt - 1e-9)) if horizon > 0 else 0
    every = 1 if sample_every is None else max(1, int(round(sample_every / dt)))
    y = tuple(float(c) for c in y0)
    scale = max(1.0, max(abs(c) for c in y))
    ts, ys = [0.0], [y]
    t = 0.0
    for k in range(1, n_steps + 1):
        h = min(dt, horizon - t) if k == n_steps else dt
        k1 = rhs(y)
        k2 = rhs(tuple(a + 0.5 * h * b for a, b in zip(y, k1)))
        k3 = rhs(tuple(a + 0.5 * h * b for a, b in zip(y, k2)))
        k4 = rhs(tuple(a + h * b for a, b in zip(y, k3)))
        y = tuple(a + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
                  for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
        if min(y) < 0.0:
            if min(y) < -clip_tol * scale or any(map(math.isnan, y)):
                raise NumericalFailure(f"negative state {min(y):.3e} at step {k}; reduce dt", step=k)
            y = tuple(max(c, 0.0) for c in y)
        t = k * dt if k < n_steps else horizon
        if k % every == 0 or k == n_steps:
            ts.append(t)
            ys.append(y)
    return np.array(ts), np.array(ys)


def integrate_uv(params, u0, v0, horizon, dt=1e-3, *, sample_every=None):
    _check("u0", u0, strict=False)
    _check("v0", v0, strict=False)
    t, y = rk4(lambda y: uv_rhs(params, y), (u0, v0), horizon, dt, sample_every=sample_every)
    return Trajectory(t, y, ("u", "v"))


def integrate_compartments(params, state0, horizon, dt=1e-3, *, sample_every=None):
    """Integrate the six-compartment model; the result also carries u, v and T."""
    if params.bI is None or params.bU is None:
        raise ValidationError("bI", "compartment model needs bI and bU")
    t, y = rk4(lambda y: compartment_rhs(params, y), state0.as_tuple(), horizon, dt,
               sample_every=sample_every)
    u = y[:, 2] + y[:, 3]
    v = y[:, 4] + y[:, 5]
    full = np.column_stack([y, u, v, y.sum(axis=1)])
    return Trajectory(t, full, COMPARTMENTS + ("u", "v", "T"))


def uv_equilibria(params):
    """Equilibria of the two-species system other than the origin."""
    k1, k2 = params.kappa1, params.kappa2
    out = [{"u": k1, "v": 0.0, "kind": "infected"}, {"u": 0.0, "v": k2, "kind": "uninfected"}]
    if 0 < k1 < k2:
        v = k1 * k1 / k2
        out.append({"u": k1 - v, "v": v, "kind": "coexistence"})
    return out


def reduction_report(params, u0, v0, horizon=50.0, dt=1e-3, tol=1e-6):
    """Compare equal-determination compartments against the reduced system.

    Uses delta_sex = 1/2, If = Im = u0/2, Uf = Um = v0/2, rf = rm = 0.
    """
    full = OdeParams(b1=params.b1, b2=params.b2, delta1=params.delta1, delta2=params.delta2,
                     bI=params.bI, bU=params.bU, delta_sex=0.5,
                     im_release_source=params.im_release_source)
    red = full.reduced()
    a = integrate_compartments(full, CompartmentState.equal_determination(u0, v0), horizon, dt)
    b = integrate_uv(red, u0, v0, horizon, dt)

    def rel(x, ref):
        return float(np.max(np.abs(x - ref) / np.maximum(np.abs(ref), 1e-300)))

    err_u, err_v = rel(a["u"], b["u"]), rel(a["v"], b["v"])
    return {"b1": red.b1, "b2": red.b2, "horizon": horizon, "dt": dt,
            "max_rel_error_u": err_u, "max_rel_error_v": err_v,
            "final_u": float(b["u"][-1]), "final_v": float(b["v"][-1]),
            "tolerance": tol, "consistent": max(err_u, err_v) < tol}
