"""Tonelli Hamiltonians on the flat periodic cell, their duals and constants.

Points x live on the unit cell [0,1)^n (evaluation reduces x mod 1, so lattice
periodicity is built in); covectors p and velocities v live in R^n. Arrays are
vectorized over leading axes with the coordinate axis last.

The module covers four jobs:

* model construction and the Tonelli audits (convexity, superlinearity,
  periodicity);
* the discrete Legendre transform producing a `LagrangianTable` of L, dL/dv
  and the energy E = v . L_v - L on a velocity window;
* derivation of the solver constant chain (A, B, a1, k0, a0, b2, c2, c1)
  from a table and an initial-data Lipschitz constant;
* the quadratic-at-infinity truncation of a model outside a momentum radius.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import (
    NonConvexBlend,
    SearchWindowTooSmall,
    TableWindowTooSmall,
    VelocityOutOfWindow,
)

DEFAULT_TOL_CONVEX = 1e-8
DEFAULT_TOL_LEGENDRE = 1e-6


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HamiltonianModel:
    """Evaluable Hamiltonian H(x, p) on the periodic cell.

    `fn(x, p)` receives x already reduced to the cell. For mechanical models
    `potential` and `drift` expose V and the vector field so that downstream
    code (truncation, Lagrangian shortcuts in tests) can read them.
    """

    dim: int
    fn: Callable
    kind: str = "custom"  # "mechanical" | "custom"
    potential: Optional[Callable] = None
    drift: Optional[Callable] = None
    truncation_radius: Optional[float] = None

    def __call__(self, x, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if x.shape[-1] != self.dim or p.shape[-1] != self.dim:
            raise ValueError(f"expected trailing axis {self.dim}, got x{x.shape} p{p.shape}")
        return self.fn(np.mod(x, 1.0), p)


def mechanical_model(dim, potential=None, drift=None):
    """H(x, p) = |p|^2/2 + p . xi(x) + V(x)."""
    V = potential if potential is not None else (lambda x: np.zeros(x.shape[:-1]))
    xi = drift

    def fn(x, p):
        out = 0.5 * np.sum(p * p, axis=-1) + V(x)
        if xi is not None:
            out = out + np.sum(p * xi(x), axis=-1)
        return out

    return HamiltonianModel(dim=dim, fn=fn, kind="mechanical", potential=V, drift=xi)


def free_model(dim=1):
    return mechanical_model(dim)


def custom_model(dim, fn):
    return HamiltonianModel(dim=dim, fn=fn, kind="custom")


def pendulum_model():
    """The classical one-dimensional benchmark: H = p^2/2 + cos(2 pi x)."""
    return mechanical_model(1, potential=lambda x: np.cos(2.0 * np.pi * x[..., 0]))


# ---------------------------------------------------------------------------
# Tonelli audits
# ---------------------------------------------------------------------------

def cell_grid(dim, res):
    """Product grid of res^dim points on the unit cell, shape (res^dim, dim)."""
    axes = [np.arange(res) / res] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def box_grid(dim, half_width, res):
    """Product grid on [-half_width, half_width]^dim, shape (res^dim, dim)."""
    axes = [np.linspace(-half_width, half_width, res)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def convexity_defect(model, x_samples, p_samples, lambdas=(0.25, 0.5, 0.75), max_pairs=2000, seed=0):
    """Largest violation of midpoint convexity in p over sampled pairs.

    Non-positive (up to tolerance) for fiberwise convex Hamiltonians.
    """
    x = np.asarray(x_samples, dtype=float)
    p = np.asarray(p_samples, dtype=float)
    m = p.shape[0]
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    if len(pairs) > max_pairs:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[k] for k in idx]
    ii = np.array([a for a, _ in pairs])
    jj = np.array([b for _, b in pairs])
    worst = -np.inf
    for lam in lambdas:
        pm = lam * p[ii] + (1.0 - lam) * p[jj]
        for xi in x:
            xb = np.broadcast_to(xi, pm.shape)
            h_mid = model(xb, pm)
            h_lin = lam * model(np.broadcast_to(xi, p[ii].shape), p[ii]) \
                + (1.0 - lam) * model(np.broadcast_to(xi, p[jj].shape), p[jj])
            worst = max(worst, float(np.max(h_mid - h_lin)))
    return worst


def superlinearity_offsets(model, slopes, x_samples, p_samples):
    """For each slope A return the least sampled B with H >= A|p| - B."""
    x = np.asarray(x_samples, dtype=float)
    p = np.asarray(p_samples, dtype=float)
    pn = np.linalg.norm(p, axis=-1)
    out = {}
    for a in slopes:
        worst = -np.inf
        for xi in x:
            h = model(np.broadcast_to(xi, p.shape), p)
            worst = max(worst, float(np.max(a * pn - h)))
        out[float(a)] = worst
    return out


def periodicity_defect(model, x_samples, p_samples):
    """Max |H(x + e_i, p) - H(x, p)| over samples; zero on dyadic grids."""
    x = np.asarray(x_samples, dtype=float)
    p = np.asarray(p_samples, dtype=float)
    worst = 0.0
    for axis in range(model.dim):
        shift = np.zeros(model.dim)
        shift[axis] = 1.0
        for xi in x:
            h0 = model(np.broadcast_to(xi, p.shape), p)
            h1 = model(np.broadcast_to(xi + shift, p.shape), p)
            worst = max(worst, float(np.max(np.abs(h1 - h0))))
    return worst


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LagrangianTable:
    """Grid-sampled Legendre dual L(x, v) with dL/dv and energy samples.

    L, E have shape (x_res,)*dim + (v_res,)*dim; Lv carries a trailing
    component axis. The x grid is the periodic cell grid i/x_res, the v grid
    is uniform on [-v_max, v_max] with an odd point count so that v = 0 is a
    node.
    """

    dim: int
    x_res: int
    v_max: float
    v_res: int
    L: np.ndarray
    Lv: np.ndarray
    E: np.ndarray

    @property
    def x_nodes(self):
        return np.arange(self.x_res) / self.x_res

    @property
    def v_nodes(self):
        return np.linspace(-self.v_max, self.v_max, self.v_res)

    @property
    def dv(self):
        return 2.0 * self.v_max / (self.v_res - 1)


_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo, hi, tol, max_iter=200):
    """Vectorized golden-section maximization on per-element brackets."""
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    for _ in range(max_iter):
        if float(np.max(b - a)) < tol:
            break
        c = b - _GOLD * (b - a)
        d = a + _GOLD * (b - a)
        left = f(c) > f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def legendre_dual(model, x_res, v_max, v_res, p_max, p_res,
                  tol_legendre=DEFAULT_TOL_LEGENDRE):
    """Tabulate L(x, v) = sup_p p.v - H(x, p) over a momentum search window.

    Dense scan over the p grid bracketed by one cell, then golden-section
    refinement of the argmax per coordinate. Raises SearchWindowTooSmall when
    any argmax touches the window boundary, which signals that v_max exceeds
    the dual range of the p window.
    """
    if v_max <= 0 or x_res <= 0 or v_res <= 1 or p_res <= 2:
        raise ValueError("resolutions and windows must be positive")
    if v_res % 2 == 0:
        raise ValueError("v_res must be odd so that v = 0 is a grid node")
    n = model.dim
    xg = cell_grid(n, x_res)                       # (Nx, n)
    vg = box_grid(n, v_max, v_res)                 # (Nv, n)
    pg_axis = np.linspace(-p_max, p_max, p_res)
    pg = box_grid(n, p_max, p_res)                 # (Np, n)
    nx, nv, npts = xg.shape[0], vg.shape[0], pg.shape[0]

    L = np.empty((nx, nv))
    arg = np.empty((nx, nv, n))
    chunk = max(1, int(2e7 // (nv * npts)) or 1)
    for s in range(0, nx, chunk):
        xs = xg[s:s + chunk]                       # (c, n)
        h = model(xs[:, None, :], np.broadcast_to(pg[None, :, :], (xs.shape[0],) + pg.shape))
        vals = pg @ vg.T - h[:, :, None]           # (c, Np, Nv)
        best = np.argmax(vals, axis=1)             # (c, Nv)
        L[s:s + chunk] = np.take_along_axis(vals, best[:, None, :], axis=1)[:, 0, :]
        idx = np.stack(np.unravel_index(best, (p_res,) * n), axis=-1)  # (c, Nv, n)
        if np.any(idx == 0) or np.any(idx == p_res - 1):
            raise SearchWindowTooSmall(
                "Legendre argmax on the p window boundary; enlarge p_max or shrink v_max")
        arg[s:s + chunk] = pg_axis[idx]

    # refine each coordinate around its bracketing cell
    dp = pg_axis[1] - pg_axis[0]
    xb = np.broadcast_to(xg[:, None, :], (nx, nv, n)).reshape(-1, n)
    vb = np.broadcast_to(vg[None, :, :], (nx, nv, n)).reshape(-1, n)
    p_cur = arg.reshape(-1, n).copy()
    cycles = 1 if n == 1 else 2
    for _ in range(cycles):
        for axis in range(n):
            def f(z):
                pz = p_cur.copy()
                pz[:, axis] = z
                return np.sum(pz * vb, axis=-1) - model(xb, pz)
            zm, _ = _golden_max(f, p_cur[:, axis] - dp, p_cur[:, axis] + dp, tol_legendre)
            p_cur[:, axis] = zm
    L_flat = np.sum(p_cur * vb, axis=-1) - model(xb, p_cur)
    L = np.maximum(L, L_flat.reshape(nx, nv))

    shape = (x_res,) * n + (v_res,) * n
    L = L.reshape(shape)
    Lv = np.empty(shape + (n,))
    dv = 2.0 * v_max / (v_res - 1)
    for axis in range(n):
        Lv[..., axis] = _central_diff(L, axis=n + axis, spacing=dv)
    vmesh = vg.reshape((1,) * n + (v_res,) * n + (n,))
    E = np.sum(vmesh * Lv, axis=-1) - L
    return LagrangianTable(dim=n, x_res=x_res, v_max=float(v_max), v_res=v_res,
                           L=L, Lv=Lv, E=E)


def _central_diff(arr, axis, spacing):
    out = np.empty_like(arr)
    sl = [slice(None)] * arr.ndim

    def at(i):
        s = sl.copy()
        s[axis] = i
        return tuple(s)

    out[at(slice(1, -1))] = (arr[at(slice(2, None))] - arr[at(slice(0, -2))]) / (2 * spacing)
    out[at(0)] = (arr[at(1)] - arr[at(0)]) / spacing
    out[at(-1)] = (arr[at(-1)] - arr[at(-2)]) / spacing
    return out


# ---------------------------------------------------------------------------
# table interpolation (periodic multilinear in x, linear in v)
# ---------------------------------------------------------------------------

def _interp_table(table, values, x, w, tol=1e-9):
    """Multilinear interpolation of `values` at cell point x, velocity w."""
    n = table.dim
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > table.v_max * (1 + 1e-12) + tol):
        raise VelocityOutOfWindow(
            f"|v| = {float(np.max(np.abs(w))):.6g} exceeds the window v_max = {table.v_max}")
    w = np.clip(w, -table.v_max, table.v_max)

    fx = x * table.x_res
    ix = np.floor(fx).astype(int)
    tx = fx - ix
    ix = np.mod(ix, table.x_res)

    dv = table.dv
    fv = (w + table.v_max) / dv
    jv = np.clip(np.floor(fv).astype(int), 0, table.v_res - 2)
    tv = fv - jv

    extra = values.ndim - 2 * n  # trailing component axis of Lv
    out = 0.0
    for corner in itertools.product((0, 1), repeat=2 * n):
        weight = 1.0
        idx = []
        for axis in range(n):
            c = corner[axis]
            idx.append(np.mod(ix[..., axis] + c, table.x_res))
            weight = weight * np.where(c, tx[..., axis], 1.0 - tx[..., axis])
        for axis in range(n):
            c = corner[n + axis]
            idx.append(jv[..., axis] + c)
            weight = weight * np.where(c, tv[..., axis], 1.0 - tv[..., axis])
        vals = values[tuple(idx)]
        if extra:
            weight = weight[..., None]
        out = out + weight * vals
    return out


def scaled_lagrangian(table, eps, x, v):
    """L^eps(x, v) = L(x, eps v) read from the table by linear interpolation."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _interp_table(table, table.L, x, eps * np.asarray(v, dtype=float))


def energy_scaled(table, eps, x, v):
    """E^eps(x, v) = E(x, eps v) read from the table."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _interp_table(table, table.E, x, eps * np.asarray(v, dtype=float))


# ---------------------------------------------------------------------------
# solver constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConstants:
    """Energy/speed caps and Lipschitz constants backing the evolution scheme."""

    K: float
    A: float
    B: float
    a1: float
    k0: float
    a0: float
    b2: float
    c2: float
    c1: float
    Q: float


def _table_norms(table):
    n = table.dim
    vg = box_grid(n, table.v_max, table.v_res)
    vnorm = np.linalg.norm(vg, axis=-1).reshape((1,) * n + (table.v_res,) * n)
    return vnorm


def _sup_over_superlinear(vals, vnorm, v_res, dim, what):
    """Max of vals with an interior-argmax check along every velocity axis."""
    best = float(np.max(vals))
    flat = np.argmax(vals)
    idx = np.unravel_index(flat, vals.shape)
    for axis in range(dim, 2 * dim):
        if idx[axis] in (0, v_res - 1):
            raise TableWindowTooSmall(
                f"argmax of {what} on the velocity window boundary; enlarge v_max")
    return best


def derive_constants(model, table, K, pad=1e-6):
    """Derive the constant chain A -> B -> a1 -> k0 -> a0 and b2, c2, c1.

    K must dominate the Lipschitz constant of the intended initial data.
    All suprema are table scans; raises TableWindowTooSmall when the window
    cannot certify a bound (a0 or 4 a0 beyond v_max, or a superlinearity
    argmax on the boundary).
    """
    n = table.dim
    vnorm = _table_norms(table)
    A = K + 1.0
    B = _sup_over_superlinear(2.0 * A * vnorm - table.L, vnorm, table.v_res, n, "2A|v| - L")
    zero_idx = (slice(None),) * n + ((table.v_res - 1) // 2,) * n
    sup_l0 = float(np.max(np.abs(table.L[zero_idx])))
    a1 = (B + sup_l0) / A + pad
    inside = vnorm <= a1
    if not np.any(inside):
        raise TableWindowTooSmall("a1 exceeds the sampled velocity window")
    k0 = float(np.max(np.where(inside, table.E, -np.inf))) + pad
    low_energy = table.E <= k0
    a0 = float(np.max(np.where(low_energy, vnorm, -np.inf))) + table.dv
    boundary = vnorm >= table.v_max - 0.5 * table.dv
    if np.any(low_energy & boundary):
        raise TableWindowTooSmall("energy cap k0 reaches the velocity window boundary; "
                                  "a0 would exceed v_max")
    speed_window = vnorm <= 4.0 * a0
    if 4.0 * a0 > table.v_max:
        raise TableWindowTooSmall(f"window cannot certify b2: need v_max >= 4 a0 = {4 * a0:.3g}")
    lv_norm = np.linalg.norm(table.Lv, axis=-1)
    b2 = max(K + 1.0, float(np.max(np.where(speed_window, lv_norm, -np.inf))))
    c2 = _sup_over_superlinear(b2 * vnorm - table.L, vnorm, table.v_res, n, "b2|v| - L") + pad
    c1 = max(c2, sup_l0)
    return SolverConstants(K=float(K), A=A, B=B, a1=a1, k0=k0, a0=a0,
                           b2=b2, c2=c2, c1=c1, Q=max(b2, c1))


def shifted_speed_cap(table, shift, pad=1e-6):
    """Speed cap a0 for the tilted Lagrangian L - <shift(x), v> with K = 0.

    `shift` maps cell points (Nx, n) to covectors (Nx, n); the energy function
    of the tilted Lagrangian equals E, so only B -> a1 -> k0 -> a0 is rerun.
    Used by the cell-problem stepper to size its stencil.
    """
    n = table.dim
    xg = cell_grid(n, table.x_res)
    sv = np.asarray(shift(xg), dtype=float).reshape((table.x_res,) * n + (1,) * n + (n,))
    vg = box_grid(n, table.v_max, table.v_res).reshape((1,) * n + (table.v_res,) * n + (n,))
    Lp = table.L - np.sum(sv * vg, axis=-1)
    vnorm = _table_norms(table)
    A = 1.0
    B = _sup_over_superlinear(2.0 * A * vnorm - Lp, vnorm, table.v_res, n, "2A|v| - L_P")
    zero_idx = (slice(None),) * n + ((table.v_res - 1) // 2,) * n
    sup_l0 = float(np.max(np.abs(Lp[zero_idx])))
    a1 = (B + sup_l0) / A + pad
    inside = vnorm <= a1
    if not np.any(inside):
        raise TableWindowTooSmall("a1 exceeds the sampled velocity window")
    k0 = float(np.max(np.where(inside, table.E, -np.inf))) + pad
    low_energy = table.E <= k0
    a0 = float(np.max(np.where(low_energy, vnorm, -np.inf))) + table.dv
    boundary = vnorm >= table.v_max - 0.5 * table.dv
    if np.any(low_energy & boundary):
        raise TableWindowTooSmall("tilted energy cap reaches the velocity window boundary")
    return a0


# ---------------------------------------------------------------------------
# quadratic truncation
# ---------------------------------------------------------------------------

def _smoothstep(t):
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_integral(t):
    # integral of 3s^2 - 2s^3 from 0 to t
    return t ** 3 - 0.5 * t ** 4


def quadratic_truncation(model, r0, convexity_x_res=8, convexity_p_res=25,
                         tol_convex=DEFAULT_TOL_CONVEX):
    """Replace the model outside |p| = r0 by a quadratic-at-infinity tail.

    Mechanical models already have the exact global form |p|^2/2 + p.xi + V,
    so they are returned unchanged apart from the truncation marker. For
    custom models the radial derivative is interpolated with a smoothstep
    weight between its value at r0 and the quadratic target at 2 r0, which
    keeps the result C^1, equal to the input on |p| <= r0, and exactly
    quadratic beyond 2 r0; the tail constant is the fitted join value.

    Raises NonConvexBlend when the sampled convexity audit fails (the model's
    radial slope at r0 is incompatible with the quadratic target).
    """
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    if model.kind == "mechanical":
        return replace(model, truncation_radius=float(r0))

    n = model.dim
    base = model.fn
    dh = 1e-5 * r0

    def drift_at(x):
        # fitted constant-in-p drift: dH/dp at p = 0 by central differences
        out = np.empty(x.shape[:-1] + (n,))
        for axis in range(n):
            e = np.zeros(n)
            e[axis] = dh
            out[..., axis] = (base(x, np.broadcast_to(e, x.shape))
                              - base(x, np.broadcast_to(-e, x.shape))) / (2 * dh)
        return out

    def fn(x, p):
        r = np.linalg.norm(p, axis=-1)
        safe_r = np.where(r > 0, r, 1.0)
        theta = p / safe_r[..., None]
        inside = r <= r0
        h_in = base(x, p)

        xi_theta = np.sum(drift_at(x) * theta, axis=-1)
        p0 = r0 * theta
        h_r0 = base(x, p0)
        a = (base(x, (r0 + dh) * theta) - base(x, (r0 - dh) * theta)) / (2 * dh)
        b = 2.0 * r0 + xi_theta
        t = np.clip((r - r0) / r0, 0.0, 1.0)
        ramp = r0 * (a * t + (b - a) * _smoothstep_integral(t))
        h_mid = h_r0 + ramp
        h_2r0 = h_r0 + r0 * (a + (b - a) * 0.5)
        h_out = h_2r0 + 0.5 * (r * r - 4.0 * r0 * r0) + (r - 2.0 * r0) * xi_theta
        blended = np.where(r <= 2.0 * r0, h_mid, h_out)
        return np.where(inside, h_in, blended)

    out = HamiltonianModel(dim=n, fn=fn, kind=model.kind,
                           potential=model.potential, drift=model.drift,
                           truncation_radius=float(r0))
    xg = cell_grid(n, convexity_x_res)
    pg = box_grid(n, 3.0 * r0, convexity_p_res)
    defect = convexity_defect(out, xg, pg)
    if defect > tol_convex:
        raise NonConvexBlend(
            f"sampled convexity defect {defect:.3g} after truncation at r0 = {r0}; "
            "the model's slope at r0 is incompatible with the quadratic tail")
    return out


def level_set_within_radius(model, h0, r0, x_res=16, p_max=None, p_res=41):
    """Numerically audit the containment {H <= h0} inside {|p| <= r0}."""
    if p_max is None:
        p_max = 2.0 * r0
    xg = cell_grid(model.dim, x_res)
    pg = box_grid(model.dim, p_max, p_res)
    pn = np.linalg.norm(pg, axis=-1)
    for xi in xg:
        h = model(np.broadcast_to(xi, pg.shape), pg)
        if np.any((h <= h0) & (pn > r0)):
            return False
    return True


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def dump_table(table, path):
    """Write the table as CSV with one row per (x, v) grid pair."""
    n = table.dim
    nx = table.x_res ** n
    nv = table.v_res ** n
    L = table.L.reshape(nx, nv)
    E = table.E.reshape(nx, nv)
    Lv = table.Lv.reshape(nx, nv, n)
    comp_cols = ",".join(f"L_v_{k + 1}" for k in range(n))
    with open(path, "w") as fh:
        fh.write(f"# hjlab-lagrangian-table dim={n} x_res={table.x_res} "
                 f"v_max={table.v_max!r} v_res={table.v_res}\n")
        fh.write(f"x_index,v_index,L,{comp_cols},E\n")
        for i in range(nx):
            for j in range(nv):
                comps = ",".join(repr(float(c)) for c in Lv[i, j])
                fh.write(f"{i},{j},{float(L[i, j])!r},{comps},{float(E[i, j])!r}\n")


def load_table(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# hjlab-lagrangian-table"):
            raise ValueError(f"{path}: not a table file")
        meta = dict(kv.split("=") for kv in header.split()[2:])
        n = int(meta["dim"])
        x_res = int(meta["x_res"])
        v_max = float(meta["v_max"])
        v_res = int(meta["v_res"])
        fh.readline()  # column header
        nx, nv = x_res ** n, v_res ** n
        L = np.empty((nx, nv))
        E = np.empty((nx, nv))
        Lv = np.empty((nx, nv, n))
        for line in fh:
            parts = line.strip().split(",")
            i, j = int(parts[0]), int(parts[1])
            L[i, j] = float(parts[2])
            Lv[i, j] = [float(c) for c in parts[3:3 + n]]
            E[i, j] = float(parts[3 + n])
    shape = (x_res,) * n + (v_res,) * n
    return LagrangianTable(dim=n, x_res=x_res, v_max=v_max, v_res=v_res,
                           L=L.reshape(shape), Lv=Lv.reshape(shape + (n,)),
                           E=E.reshape(shape))
