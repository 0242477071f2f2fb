"""Min-plus dynamic programming for the rescaled Hamilton-Jacobi evolution.

One step of the scheme realizes the variational solution operator

    out(x) = min_{|x - y| <= rho} u(y) + dt * L((x / eps) mod 1, (x - y) / dt)

on the grid of a CoverWindow, in scaled coordinates (grid spacing
eps / cell_res). The action integral uses the single-step rectangle rule with
L read at the arrival cell coordinate; the search radius realizes the finite
speed bound a0, so the domain shrinks by rho per step and no boundary
condition is ever needed. Ties in the minimum break toward the
lexicographically smallest offset, and the reduction order is fixed, so
results are bit-identical regardless of parallel schedule.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .cover import CoverWindow
from .errors import VelocityOutOfWindow, WindowExhausted
from .hamiltonian import LagrangianTable, SolverConstants, scaled_lagrangian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LipschitzCertificate:
    space_constant: float
    time_constant: float
    space_bound: float
    time_bound: float
    passed: bool
    worst_space: tuple = ()
    worst_time: tuple = ()


@dataclass(frozen=True)
class ValueField:
    """One time slice of the evolving value function.

    `values` covers the currently valid node range; `node_lo` locates its
    first node inside the window grid (per axis). Scaled coordinates of node
    i are scale * window.axis_nodes()[node_lo + i].
    """

    window: CoverWindow
    scale: float
    time: float
    values: np.ndarray
    node_lo: tuple
    lipschitz_cert: Optional[LipschitzCertificate] = None

    def __post_init__(self):
        if self.values.ndim != len(self.node_lo):
            raise ValueError("node_lo must give one offset per value axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite on the valid region")

    @property
    def dim(self):
        return self.values.ndim

    def axis_scaled_nodes(self, axis):
        nodes = self.window.axis_nodes()
        lo = self.node_lo[axis]
        return self.scale * nodes[lo:lo + self.values.shape[axis]]

    def axis_cover_nodes(self, axis):
        nodes = self.window.axis_nodes()
        lo = self.node_lo[axis]
        return nodes[lo:lo + self.values.shape[axis]]

    @property
    def grid_spacing(self):
        """Scaled-coordinate spacing."""
        return self.scale / self.window.cell_res

    def measured_space_lipschitz(self):
        """Max axis-adjacent difference quotient in the scaled metric."""
        h = self.grid_spacing
        worst = 0.0
        for axis in range(self.dim):
            d = np.abs(np.diff(self.values, axis=axis))
            if d.size:
                worst = max(worst, float(np.max(d)) / h)
        return worst


def initial_field(window, scale, fn, dim=1, time=0.0):
    """Evaluate fn on the full window grid; fn receives scaled coordinates."""
    nodes = window.axis_nodes()
    mesh = np.meshgrid(*([scale * nodes] * dim), indexing="ij")
    pts = np.stack(mesh, axis=-1)
    vals = fn(pts)
    return ValueField(window=window, scale=scale, time=time,
                      values=np.asarray(vals, dtype=float), node_lo=(0,) * dim)


def field_from_values(window, scale, values, time=0.0, node_lo=None):
    values = np.asarray(values, dtype=float)
    if node_lo is None:
        node_lo = (0,) * values.ndim
    return ValueField(window=window, scale=scale, time=time, values=values,
                      node_lo=tuple(node_lo))


@dataclass(frozen=True)
class StepConfig:
    """Timestep, search stencil and constants for the evolution scheme."""

    dt: float
    search_radius: float
    constants: SolverConstants
    eps: float
    interpolation: str = "linear"

    def __post_init__(self):
        if self.dt <= 0 or self.eps <= 0:
            raise ValueError("dt and eps must be positive")
        if self.interpolation != "linear":
            raise ValueError("only linear interpolation is implemented")
        if self.search_radius < self.constants.a0 * self.dt - 1e-12:
            raise ValueError(
                f"search_radius {self.search_radius} below the speed cap "
                f"a0 * dt = {self.constants.a0 * self.dt}")


def stencil_offsets(dim, cells):
    """Integer offsets in the closed Euclidean ball of the given cell radius,
    lexicographically ordered so the min-reduction order is fixed."""
    rng = range(-cells, cells + 1)
    out = [k for k in itertools.product(rng, repeat=dim)
           if sum(c * c for c in k) <= cells * cells]
    return np.array(sorted(out), dtype=int)


def _step_geometry(field, cfg, table):
    h = field.grid_spacing
    cells = math.ceil(cfg.search_radius / h - 1e-12)
    rho = cells * h
    vmax_needed = cells * h / cfg.dt
    if vmax_needed > table.v_max * (1 + 1e-12):
        raise VelocityOutOfWindow(
            f"stencil velocity {vmax_needed:.6g} exceeds the table window "
            f"v_max = {table.v_max:.6g}; enlarge the table or shrink search_radius/dt")
    return h, cells, rho


def step_kernel(field, cfg, table):
    """Precompute dt * L(cell coordinate, offset velocity) for every node.

    The kernel is time independent: it depends only on the node's cell
    coordinate and the stencil velocities, so one table of shape
    full_grid + (n_offsets,) serves the whole evolution.
    """
    h, cells, rho = _step_geometry(field, cfg, table)
    n = field.dim
    offsets = stencil_offsets(n, cells)
    nodes = field.window.axis_nodes()
    mesh = np.meshgrid(*([nodes] * n), indexing="ij")
    pts = np.stack(mesh, axis=-1)          # cover coordinates == x/eps
    frac = np.mod(pts, 1.0)
    vels = offsets * (h / cfg.dt)          # scaled velocities, (M, n)
    costs = np.empty(pts.shape[:-1] + (offsets.shape[0],))
    for j in range(offsets.shape[0]):
        v = np.broadcast_to(vels[j], frac.shape)
        costs[..., j] = cfg.dt * scaled_lagrangian(table, 1.0, frac, v)
    return offsets, costs, cells, rho


def lax_step(field, cfg, table, kernel=None):
    """Advance one timestep; the valid region shrinks by the search radius."""
    if abs(field.scale - cfg.eps) > 1e-15:
        raise ValueError("field scale and cfg.eps disagree")
    if kernel is None:
        kernel = step_kernel(field, cfg, table)
    offsets, costs, cells, rho = kernel
    n = field.dim
    out_shape = tuple(s - 2 * cells for s in field.values.shape)
    if any(s <= 0 for s in out_shape):
        raise WindowExhausted(
            f"search radius {rho:.6g} exhausts the remaining window {field.values.shape}")
    new_margin = field.window.margin - rho
    if new_margin < -1e-9:
        raise WindowExhausted("window margin exhausted")
    new_lo = tuple(lo + cells for lo in field.node_lo)
    cost_sl = tuple(slice(lo, lo + s) for lo, s in zip(new_lo, out_shape))

    out = None
    for j, k in enumerate(offsets):
        # arrival x reads departure y = x - k*h: index shift is -k relative
        # to the output block, i.e. (cells - k) in the current values array
        sl = tuple(slice(cells - k[a], cells - k[a] + out_shape[a]) for a in range(n))
        cand = field.values[sl] + costs[cost_sl + (j,)]
        out = cand if out is None else np.minimum(out, cand)

    window = replace(field.window, margin=max(new_margin, 0.0))
    return ValueField(window=window, scale=field.scale, time=field.time + cfg.dt,
                      values=out, node_lo=new_lo)


def solve(field, T, cfg, table):
    """Run the semigroup to horizon T; returns fields at 0, dt, ..., T."""
    steps = round(T / cfg.dt)
    if steps < 1 or abs(steps * cfg.dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError(f"T = {T} is not a positive integer multiple of dt = {cfg.dt}")
    kernel = step_kernel(field, cfg, table)
    out = [field]
    cur = field
    for _ in range(steps):
        cur = lax_step(cur, cfg, table, kernel=kernel)
        logger.info("t=%.6g min=%.6g max=%.6g lip=%.6g", cur.time,
                    float(np.min(cur.values)), float(np.max(cur.values)),
                    cur.measured_space_lipschitz())
        out.append(cur)
    return out


def certify_lipschitz(fields, constants, tol_lip=0.05):
    """Measure space/time difference quotients; PASS against b2 and c1.

    Space quotients use axis-adjacent nodes in the scaled metric on each
    slice; time quotients compare consecutive slices on their common valid
    region. Returns a FAIL certificate (never raises) with the violating
    pair when a bound is exceeded.
    """
    if len(fields) < 2:
        raise ValueError("need at least two time slices")
    space = 0.0
    worst_space = ()
    for f in fields:
        m = f.measured_space_lipschitz()
        if m > space:
            space, worst_space = m, (f.time,)
    time_const = 0.0
    worst_time = ()
    for f0, f1 in zip(fields[:-1], fields[1:]):
        dt = f1.time - f0.time
        if dt <= 0:
            raise ValueError("fields must be time ordered")
        lo = tuple(max(a, b) for a, b in zip(f0.node_lo, f1.node_lo))
        hi = tuple(min(a + s, b + t) for a, s, b, t in
                   zip(f0.node_lo, f0.values.shape, f1.node_lo, f1.values.shape))
        if any(h <= l for l, h in zip(lo, hi)):
            continue
        sl0 = tuple(slice(l - a, h - a) for l, h, a in zip(lo, hi, f0.node_lo))
        sl1 = tuple(slice(l - b, h - b) for l, h, b in zip(lo, hi, f1.node_lo))
        diff = np.abs(f1.values[sl1] - f0.values[sl0])
        m = float(np.max(diff)) / dt
        if m > time_const:
            time_const, worst_time = m, (f0.time, f1.time)
    space_bound = constants.b2 * (1 + tol_lip)
    time_bound = constants.c1 * (1 + tol_lip)
    return LipschitzCertificate(
        space_constant=space, time_constant=time_const,
        space_bound=space_bound, time_bound=time_bound,
        passed=(space <= space_bound and time_const <= time_bound),
        worst_space=worst_space, worst_time=worst_time)


def periodic_minplus_step(values, offsets, costs):
    """One min-plus step with wraparound indexing on the periodic cell grid.

    values: (res,)*n array; offsets: (M, n) ints; costs: (res,)*n + (M,).
    Same tie-break and reduction order as lax_step.
    """
    n = values.ndim
    out = None
    for j, k in enumerate(offsets):
        shifted = np.roll(values, shift=tuple(k), axis=tuple(range(n)))
        cand = shifted + costs[..., j]
        out = cand if out is None else np.minimum(out, cand)
    return out


def export_fields_csv(fields, path):
    """Write (t, scaled coordinates, value) rows for every valid node."""
    n = fields[0].dim
    cols = ",".join(f"x_{a + 1}" for a in range(n))
    with open(path, "w") as fh:
        fh.write(f"t,{cols},value\n")
        for f in fields:
            axes = [f.axis_scaled_nodes(a) for a in range(n)]
            mesh = np.meshgrid(*axes, indexing="ij")
            coords = np.stack([m.ravel() for m in mesh], axis=-1)
            vals = f.values.ravel()
            for row, val in zip(coords, vals):
                xs = ",".join(repr(float(c)) for c in row)
                fh.write(f"{f.time!r},{xs},{val!r}\n")
