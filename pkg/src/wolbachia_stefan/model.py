"""Model parameters, birth-rate fields, initial data and closed-form thresholds.

Everything here is immutable after construction. JSON round-tripping goes
through ``to_dict``/``from_dict`` on each type and :func:`load_model_config`
for the whole envelope::

    {"params": {"d1": 1, "d2": 1, "delta1": 1, "delta2": 1, "mu": 1, "h0": 3.14},
     "b1": {"kind": "constant", "value": 2},
     "b2": {"kind": "expression", "expression": "1 + 0.5*sin(x)"},
     "init": {"u0": {"kind": "cosine", "amplitude": 1},
              "v0": {"kind": "constant", "value": 1}}}
"""

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DomainError, ValidationError
from .expr import Expression

#: Number of points used to estimate sup/inf of non-constant fields.
SUP_SAMPLES = 10_000
#: Default window [0, xmax] on which expression fields are sampled.
DEFAULT_XMAX = 100.0

_FIELD_KINDS = ("constant", "tabulated", "expression")


def _positive(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(name, f"expected a number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(name, f"must be finite and > 0, got {value!r}")
    return value


def _reject_unknown(where, data, allowed):
    if not isinstance(data, dict):
        raise ValidationError(where, "expected a JSON object")
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ValidationError(where, f"unknown key(s) {extra}")


@dataclass(frozen=True)
class BirthRateField:
    """Nonnegative, bounded rate b(x) on [0, inf).

    Three kinds: ``constant`` (``value``), ``tabulated`` (``samples`` as
    (x, b) pairs, linear interpolation and constant extrapolation) and
    ``expression`` (see :mod:`wolbachia_stefan.expr`). For expressions the
    supremum is estimated on ``SUP_SAMPLES`` points of [0, ``xmax``].
    """

    kind: str
    value: float = None
    samples: tuple = None
    expression: Expression = None
    xmax: float = DEFAULT_XMAX
    _sup: float = field(default=None, repr=False, compare=False)
    _inf: float = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _FIELD_KINDS:
            raise ValidationError("kind", f"must be one of {_FIELD_KINDS}, got {self.kind!r}")
        if self.kind == "constant":
            v = float(self.value) if self.value is not None else float("nan")
            if not math.isfinite(v) or v < 0.0:
                raise ValidationError("value", f"constant rate must be finite and >= 0, got {self.value!r}")
            object.__setattr__(self, "value", v)
            lo = hi = v
        elif self.kind == "tabulated":
            pts = tuple((float(x), float(b)) for x, b in (self.samples or ()))
            if len(pts) < 2:
                raise ValidationError("samples", "need at least 2 samples")
            xs = np.array([p[0] for p in pts])
            bs = np.array([p[1] for p in pts])
            if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(bs))):
                raise ValidationError("samples", "samples must be finite")
            if np.any(np.diff(xs) <= 0):
                raise ValidationError("samples", "x must be strictly increasing")
            if np.any(bs < 0):
                raise ValidationError("samples", "rates must be >= 0")
            object.__setattr__(self, "samples", pts)
            lo, hi = float(bs.min()), float(bs.max())
        else:
            expr = self.expression
            if not isinstance(expr, Expression):
                expr = Expression(expr)
                object.__setattr__(self, "expression", expr)
            xmax = _positive("xmax", self.xmax)
            object.__setattr__(self, "xmax", xmax)
            vals = expr(np.linspace(0.0, xmax, SUP_SAMPLES))
            if not np.all(np.isfinite(vals)):
                raise ValidationError("expression", f"{expr.source!r} is not finite on [0, {xmax}]")
            if np.any(vals < 0):
                raise ValidationError("expression", f"{expr.source!r} is negative somewhere on [0, {xmax}]")
            lo, hi = float(vals.min()), float(vals.max())
        object.__setattr__(self, "_sup", hi)
        object.__setattr__(self, "_inf", lo)

    @classmethod
    def constant(cls, value):
        return cls("constant", value=value)

    @classmethod
    def tabulated(cls, samples):
        return cls("tabulated", samples=tuple(samples))

    @classmethod
    def from_expression(cls, source, xmax=DEFAULT_XMAX):
        return cls("expression", expression=Expression(source), xmax=xmax)

    @property
    def is_constant(self):
        return self.kind == "constant"

    def sup(self):
        """Reported supremum (exact for constant/tabulated, sampled for expressions)."""
        return self._sup

    def inf(self):
        return self._inf

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.value) if x.ndim else self.value
        if self.kind == "tabulated":
            xs = [p[0] for p in self.samples]
            bs = [p[1] for p in self.samples]
            out = np.interp(x, xs, bs)
            return out if x.ndim else float(out)
        return self.expression(x)

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "tabulated":
            return {"kind": "tabulated", "samples": [list(p) for p in self.samples]}
        return {"kind": "expression", "expression": self.expression.source, "xmax": self.xmax}

    @classmethod
    def from_dict(cls, data, where="field"):
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            return cls.constant(data)
        _reject_unknown(where, data, {"kind", "value", "samples", "expression", "xmax"})
        kind = data.get("kind")
        try:
            if kind == "constant":
                return cls("constant", value=data.get("value"))
            if kind == "tabulated":
                return cls("tabulated", samples=tuple(tuple(p) for p in data.get("samples") or ()))
            if kind == "expression":
                return cls("expression", expression=data.get("expression"),
                           xmax=data.get("xmax", DEFAULT_XMAX))
        except ValidationError as exc:
            raise ValidationError(f"{where}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        except (TypeError, ValueError) as exc:
            raise ValidationError(where, str(exc)) from None
        raise ValidationError(f"{where}.kind", f"must be one of {_FIELD_KINDS}, got {kind!r}")


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the free-boundary system.

    ``d1, d2`` diffusivities, ``delta1, delta2`` density-dependent death
    rates, ``mu`` the Stefan coefficient, ``h0`` the initial front and
    ``b1, b2`` the birth-rate fields (floats are promoted to constants).
    """

    d1: float
    d2: float
    delta1: float
    delta2: float
    mu: float
    h0: float
    b1: BirthRateField = 1.0
    b2: BirthRateField = 1.0

    def __post_init__(self):
        for name in ("d1", "d2", "delta1", "delta2", "mu", "h0"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        for name in ("b1", "b2"):
            b = getattr(self, name)
            if not isinstance(b, BirthRateField):
                try:
                    b = BirthRateField.constant(b)
                except ValidationError as exc:
                    raise ValidationError(name, str(exc)) from None
                object.__setattr__(self, name, b)

    @property
    def is_constant(self):
        return self.b1.is_constant and self.b2.is_constant

    @property
    def kappa1(self):
        if not self.b1.is_constant:
            raise DomainError("kappa1 is only defined for a constant b1")
        return self.b1.value / self.delta1

    @property
    def kappa2(self):
        if not self.b2.is_constant:
            raise DomainError("kappa2 is only defined for a constant b2")
        return self.b2.value / self.delta2

    def replace(self, **changes):
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return ModelParams(**data)

    def to_dict(self):
        return {
            "params": {k: getattr(self, k) for k in ("d1", "d2", "delta1", "delta2", "mu", "h0")},
            "b1": self.b1.to_dict(),
            "b2": self.b2.to_dict(),
        }


_PROFILE_KINDS = ("cosine", "constant", "expression", "samples")


@dataclass(frozen=True)
class InitialProfile:
    """One initial profile.

    ``cosine`` is ``amplitude*cos(pi*x/(2*h0))`` on [0, h0] and zero beyond;
    ``samples`` is linear interpolation through ``(x, values)``.
    """

    kind: str
    amplitude: float = 1.0
    value: float = None
    expression: Expression = None
    x: tuple = None
    values: tuple = None

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise ValidationError("kind", f"must be one of {_PROFILE_KINDS}, got {self.kind!r}")
        if self.kind == "cosine":
            object.__setattr__(self, "amplitude", _positive("amplitude", self.amplitude))
        elif self.kind == "constant":
            object.__setattr__(self, "value", _positive("value", self.value))
        elif self.kind == "expression":
            if not isinstance(self.expression, Expression):
                object.__setattr__(self, "expression", Expression(self.expression))
        else:
            xs = tuple(float(v) for v in (self.x or ()))
            vs = tuple(float(v) for v in (self.values or ()))
            if len(xs) < 2 or len(xs) != len(vs):
                raise ValidationError("samples", "need matching x/values with at least 2 entries")
            if np.any(np.diff(xs) <= 0):
                raise ValidationError("samples", "x must be strictly increasing")
            object.__setattr__(self, "x", xs)
            object.__setattr__(self, "values", vs)

    def __call__(self, x, h0=None):
        x = np.asarray(x, dtype=float)
        if self.kind == "cosine":
            if h0 is None:
                raise ValueError("cosine profile needs h0")
            out = np.where(x <= h0, self.amplitude * np.cos(0.5 * np.pi * np.minimum(x, h0) / h0), 0.0)
        elif self.kind == "constant":
            out = np.full_like(x, self.value)
        elif self.kind == "expression":
            out = np.asarray(self.expression(x), dtype=float)
        else:
            out = np.interp(x, self.x, self.values)
        return out if x.ndim else float(out)

    def to_dict(self):
        if self.kind == "cosine":
            return {"kind": "cosine", "amplitude": self.amplitude}
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "expression":
            return {"kind": "expression", "expression": self.expression.source}
        return {"kind": "samples", "x": list(self.x), "values": list(self.values)}

    @classmethod
    def from_dict(cls, data, where):
        _reject_unknown(where, data, {"kind", "amplitude", "value", "expression", "x", "values"})
        try:
            return cls(**data)
        except ValidationError as exc:
            raise ValidationError(f"{where}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        except TypeError as exc:
            raise ValidationError(where, str(exc)) from None


@dataclass(frozen=True)
class InitialData:
    """Initial profiles for u (on [0, h0]) and v (on [0, inf))."""

    u0: InitialProfile = InitialProfile("cosine", amplitude=1.0)
    v0: InitialProfile = None

    def v0_for(self, params):
        """v0, defaulting to the constant carrying capacity sup(b2)/delta2."""
        if self.v0 is not None:
            return self.v0
        return InitialProfile("constant", value=max(params.b2.sup() / params.delta2, 1e-12))

    def validate(self, params, xmax=None):
        """Check the compatibility conditions on (u0, v0); raise on violation."""
        h0 = params.h0
        u_end = float(self.u0(h0, h0))
        x = np.linspace(0.0, h0, 1001)
        u = self.u0(x, h0)
        scale = max(float(np.max(np.abs(u))), 1e-300)
        if not np.all(np.isfinite(u)):
            raise ValidationError("init.u0", "not finite on [0, h0]")
        if abs(u_end) > 1e-10 * scale:
            raise ValidationError("init.u0", f"u0(h0) must be 0, got {u_end!r}")
        if np.any(u[:-1] <= 0.0):
            raise ValidationError("init.u0", "u0 must be > 0 on [0, h0)")
        if self.u0.kind == "expression":
            eps = 1e-5 * h0
            slope = (float(self.u0(eps, h0)) - float(self.u0(0.0, h0))) / eps
            if abs(slope) > 1e-3 * scale / h0:
                raise ValidationError("init.u0", "u0'(0) must be 0")
        v0 = self.v0_for(params)
        xv = np.linspace(0.0, xmax if xmax is not None else 4.0 * h0, 2001)
        v = v0(xv)
        if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
            raise ValidationError("init.v0", "v0 must be finite and > 0")

    def u0_sup(self, h0):
        if self.u0.kind == "cosine":
            return self.u0.amplitude
        return float(np.max(self.u0(np.linspace(0.0, h0, SUP_SAMPLES), h0)))

    def v0_sup(self, params, xmax=None):
        v0 = self.v0_for(params)
        if v0.kind == "constant":
            return v0.value
        xmax = xmax if xmax is not None else DEFAULT_XMAX
        return float(np.max(v0(np.linspace(0.0, xmax, SUP_SAMPLES))))

    def to_dict(self):
        out = {"u0": self.u0.to_dict()}
        if self.v0 is not None:
            out["v0"] = self.v0.to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        _reject_unknown("init", data, {"u0", "v0"})
        kwargs = {}
        if "u0" in data:
            kwargs["u0"] = InitialProfile.from_dict(data["u0"], "init.u0")
        if "v0" in data:
            kwargs["v0"] = InitialProfile.from_dict(data["v0"], "init.v0")
        return cls(**kwargs)


@dataclass(frozen=True)
class DerivedBounds:
    """A-priori sup bounds for u and v; ``Lambda`` is measured by the solver."""

    M1: float
    M2: float
    Lambda: float = None


def derive_bounds(params, init, xmax=None):
    """M1 = max(|b1|/delta1, |u0|), M2 = max(|b2|/delta2, |v0|)."""
    if not isinstance(params, ModelParams):
        raise ValidationError("params", "expected ModelParams")
    m1 = max(params.b1.sup() / params.delta1, init.u0_sup(params.h0))
    m2 = max(params.b2.sup() / params.delta2, init.v0_sup(params, xmax))
    return DerivedBounds(M1=m1, M2=m2)


def critical_length_Lstar(d, b):
    """Critical length (pi/2)*sqrt(d/b) of the logistic Neumann-Dirichlet problem."""
    d = _positive("d", d)
    b = _positive("b", b)
    return 0.5 * math.pi * math.sqrt(d / b)


def critical_h0_star(params):
    """Initial habitat size above which spreading is certain (constant rates).

    Returns (pi/2)*sqrt(d1/(delta1*(kappa1 - kappa2))).
    """
    k1, k2 = params.kappa1, params.kappa2
    if k1 <= k2:
        raise DomainError("fitness-cost regime, h0* undefined (need kappa1 > kappa2)")
    return 0.5 * math.pi * math.sqrt(params.d1 / (params.delta1 * (k1 - k2)))


def critical_d1_star(params):
    """Diffusivity below which spreading is certain: 4*delta1*(kappa1-kappa2)*h0^2/pi^2."""
    k1, k2 = params.kappa1, params.kappa2
    if k1 <= k2:
        raise DomainError("fitness-cost regime, d1* undefined (need kappa1 > kappa2)")
    return 4.0 * params.delta1 * (k1 - k2) * params.h0 ** 2 / math.pi ** 2


def load_model_config(data):
    """Parse the ``{params, b1, b2, init}`` envelope into (ModelParams, InitialData)."""
    _reject_unknown("config", data, {"params", "b1", "b2", "init"})
    if "params" not in data:
        raise ValidationError("params", "missing")
    p = data["params"]
    _reject_unknown("params", p, {"d1", "d2", "delta1", "delta2", "mu", "h0"})
    missing = [k for k in ("d1", "d2", "delta1", "delta2", "mu", "h0") if k not in p]
    if missing:
        raise ValidationError(missing[0], "missing from params")
    b1 = BirthRateField.from_dict(data.get("b1", 1.0), "b1")
    b2 = BirthRateField.from_dict(data.get("b2", 1.0), "b2")
    params = ModelParams(b1=b1, b2=b2, **p)
    init = InitialData.from_dict(data.get("init", {}))
    return params, init


def model_config_dict(params, init):
    out = params.to_dict()
    out["init"] = init.to_dict()
    return out


def ci_birth(b2, u, v, eps):
    """Birth term b2*v*v/(u+v) of the uninfected class.

    When u+v <= eps the fraction v/(u+v) is taken as 1 for v > 0 and the
    term is 0 at u = v = 0.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    total = u + v
    safe = total > eps
    frac = np.where(safe, v / np.where(safe, total, 1.0), np.where(v > 0.0, 1.0, 0.0))
    return b2 * v * frac
