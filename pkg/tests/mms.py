"""Manufactured solution for the coupled scheme on a pinned domain [0, 1].

u = exp(-t) cos(pi x / 2) on [0, 1] (zero beyond), v = 1 + 0.5 exp(-t) cos(pi x / L)
on [0, L]; the forcing makes both exact solutions of the forced system.
"""

import math

import numpy as np

from wolbachia_stefan.model import InitialData, InitialProfile, ModelParams
from wolbachia_stefan.pde import FrontFixingSolver, Grid

PARAMS = ModelParams(d1=1.0, d2=0.5, delta1=1.0, delta2=1.0, mu=1.0, h0=1.0, b1=2.0, b2=1.0)
XMAX = 2.0
K = math.pi / 2


def u_exact(t, x):
    return np.where(x <= 1.0, np.exp(-t) * np.cos(K * np.minimum(x, 1.0)), 0.0)


def v_exact(t, x):
    return 1.0 + 0.5 * np.exp(-t) * np.cos(math.pi * x / XMAX)


def source(t, xu, xv):
    p = PARAMS
    u, vu = u_exact(t, xu), v_exact(t, xu)
    su = -u + p.d1 * K * K * u - u * (2.0 - p.delta1 * (u + vu))
    uv, v = u_exact(t, xv), v_exact(t, xv)
    c = 0.5 * np.exp(-t) * np.cos(math.pi * xv / XMAX)
    vt = -c
    vxx = -(math.pi / XMAX) ** 2 * c
    sv = vt - p.d2 * vxx - (1.0 * v * v / (uv + v) - p.delta2 * v * (uv + v))
    return su, sv


def max_error(n, horizon=0.5, courant=0.25):
    """Max nodal error of (u, v) at ``horizon`` with n_u = n, n_v = 2n, dt ~ dx^2."""
    steps = int(math.ceil(horizon * n * n / courant))
    dt = horizon / steps
    init = InitialData(v0=InitialProfile("expression", expression=f"1 + 0.5*cos({math.pi / XMAX!r}*x)"))
    solver = FrontFixingSolver(PARAMS, Grid(n_u=n, n_v=2 * n, xmax=XMAX, dt=dt), init,
                               source=source, pin_front=True)
    state = solver.initial_state()
    for _ in range(steps):
        state = solver.step(state, dt)
    eu = np.abs(state.w - u_exact(horizon, solver.xi)).max()
    ev = np.abs(state.v - v_exact(horizon, solver.xv)).max()
    return float(max(eu, ev))
