"""Closed-form parameter recursions for the two erasure-type example channels.

channel1 is ``(eps, lam)`` over Z4 and channel2 is ``(gam, eps, lam)`` over
Z6. A coset mass ``x`` (``eps`` or ``gam``) steps as

    plus:  x -> x**2 + 2*x*lam          lam -> lam**2
    minus: x -> 2*x - x**2 - 2*x*lam    lam -> 2*lam - lam**2

For channel2 the minus step has an extra ``2*gam*eps`` moved from both coset
masses onto ``lam``: a ``gam`` output on one side and an ``eps`` output on the
other reveal residues mod 3 and mod 2 of different symbols, so their
difference is fully erased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import ChannelParams1, ChannelParams2

LOG2_3 = math.log2(3)
LOG2_6 = math.log2(6)
MAX_PROFILE_DEPTH = 24

FIXED_POINT_GRID = 101
FIXED_POINT_RESIDUAL = 1e-9
FIXED_POINT_CLUSTER = 1e-6


class UnknownMap(ValueError):
    pass


def _step_arrays(coords, bit: int):
    """One step on parameter arrays ``(eps, lam)`` or ``(gam, eps, lam)``."""
    *xs, lam = coords
    if bit:
        return tuple(x * x + 2 * x * lam for x in xs) + (lam * lam,)
    cross = 2 * xs[0] * xs[1] if len(xs) == 2 else 0.0
    return tuple(2 * x - x * x - 2 * x * lam - cross for x in xs) + (2 * lam - lam * lam + cross,)


def _bit(b) -> int:
    if b in (0, 1):
        return int(b)
    if b in ("-", "minus"):
        return 0
    if b in ("+", "plus"):
        return 1
    raise ValueError(f"unknown transform {b!r}")


def channel1_step(p: ChannelParams1, bit) -> ChannelParams1:
    return ChannelParams1(*_step_arrays(p.astuple(), _bit(bit)))


def channel2_step(p: ChannelParams2, bit) -> ChannelParams2:
    return ChannelParams2(*_step_arrays(p.astuple(), _bit(bit)))


def channel1_info(p: ChannelParams1) -> float:
    return 2.0 - p.eps - 2.0 * p.lam


def channel2_info(p: ChannelParams2) -> float:
    return LOG2_6 - p.gam - p.eps * LOG2_3 - p.lam * LOG2_6


def channel1_z(p: ChannelParams1) -> np.ndarray:
    """Average Bhattacharyya ``z_d`` for d in Z4 (``z_0 = 1``)."""
    return np.array([1.0, p.lam, p.eps + p.lam, p.lam])


def channel2_z(p: ChannelParams2) -> np.ndarray:
    """``z_d`` for d in Z6; ``d=3`` is confused by ``gam``, ``d=2,4`` by ``eps``."""
    g, e, l = p.gam, p.eps, p.lam
    return np.array([1.0, l, e + l, g + l, e + l, l])


_KINDS = {
    "channel1": (ChannelParams1, lambda c: np.clip(2.0 - c[0] - 2.0 * c[1], 0.0, 2.0)),
    "channel2": (
        ChannelParams2,
        lambda c: np.clip(LOG2_6 - c[0] - c[1] * LOG2_3 - c[2] * LOG2_6, 0.0, LOG2_6),
    ),
}


@dataclass(frozen=True)
class AnalyticProfile:
    """Parameters and info of all ``2**n`` paths, index = path in binary-counter order."""

    kind: str
    n: int
    params: tuple[np.ndarray, ...]
    info: np.ndarray

    def __len__(self) -> int:
        return len(self.info)

    def params_at(self, index: int):
        cls, _ = _KINDS[self.kind]
        return cls(*(float(c[index]) for c in self.params))


def analytic_profile(kind: str, params, n: int) -> AnalyticProfile:
    if kind not in _KINDS:
        raise ValueError(f"no closed-form recursion for {kind!r}")
    if not 0 <= n <= MAX_PROFILE_DEPTH:
        raise ValueError(f"n must be in 0..{MAX_PROFILE_DEPTH}")
    cls, info_fn = _KINDS[kind]
    if not isinstance(params, cls):
        params = cls(*params)
    coords = tuple(np.array([v], dtype=np.float64) for v in params.astuple())
    for _ in range(n):
        minus = _step_arrays(coords, 0)
        plus = _step_arrays(coords, 1)
        nxt = []
        for m, p in zip(minus, plus):
            out = np.empty(2 * len(m))
            out[0::2], out[1::2] = m, p
            nxt.append(out)
        coords = tuple(nxt)
    return AnalyticProfile(kind, n, coords, info_fn(coords))


def analytic_z_table(kind: str, params, n: int) -> np.ndarray:
    """``z[i, d]`` for every path of the profile, shape ``(2**n, q)``."""
    prof = analytic_profile(kind, params, n)
    ones = np.ones(len(prof))
    if kind == "channel1":
        eps, lam = prof.params
        return np.stack([ones, lam, eps + lam, lam], axis=1)
    gam, eps, lam = prof.params
    return np.stack([ones, lam, eps + lam, gam + lam, eps + lam, lam], axis=1)


# fixed points

_MAPS = {
    "channel1_plus": (2, 1),
    "channel1_minus": (2, 0),
    "channel2_plus": (3, 1),
    "channel2_minus": (3, 0),
}
MAP_NAMES = tuple(_MAPS)


@dataclass(frozen=True)
class FixedPointReport:
    map_name: str
    fixed_points: tuple[tuple[float, ...], ...]
    admissible: tuple[tuple[float, ...], ...]
    residuals: tuple[float, ...]


def _jacobian(p: np.ndarray, bit: int) -> np.ndarray:
    """Jacobian of ``map(p) - p``."""
    k = p.shape[1]
    xs, lam = p[:, :-1], p[:, -1]
    jac = np.zeros((len(p), k, k))
    idx = np.arange(k - 1)
    if bit:
        jac[:, idx, idx] = 2 * xs + 2 * lam[:, None]
        jac[:, idx, -1] = 2 * xs
        jac[:, -1, -1] = 2 * lam
    else:
        jac[:, idx, idx] = 2 - 2 * xs - 2 * lam[:, None]
        jac[:, idx, -1] = -2 * xs
        jac[:, -1, -1] = 2 - 2 * lam
        if k == 3:
            g, e = xs[:, 0], xs[:, 1]
            jac[:, 0, 0] -= 2 * e
            jac[:, 0, 1] = -2 * g
            jac[:, 1, 0] = -2 * e
            jac[:, 1, 1] -= 2 * g
            jac[:, 2, 0] = 2 * e
            jac[:, 2, 1] = 2 * g
    jac[:, np.arange(k), np.arange(k)] -= 1
    return jac


def _newton(points: np.ndarray, bit: int, iters: int = 60) -> np.ndarray:
    """Vectorized Newton on ``map(p) - p``; seeds that hit a singular Jacobian are dropped."""
    p = points.copy()
    active = np.arange(len(p))
    for _ in range(iters):
        if not len(active):
            break
        cur = p[active]
        jac = _jacobian(cur, bit)
        ok = np.abs(np.linalg.det(jac)) > 1e-12
        p[active[~ok]] = np.nan
        active, cur, jac = active[ok], cur[ok], jac[ok]
        f = np.stack(_step_arrays(tuple(cur.T), bit), axis=1) - cur
        step = np.linalg.solve(jac, f[..., None])[..., 0]
        p[active] = cur - step
        diverged = ~np.all(np.abs(p[active]) < 1e6, axis=1)
        p[active[diverged]] = np.nan
        active = active[~diverged & (np.abs(step[~diverged]).max(axis=1) > 1e-15)]
    return p


def fixed_points(map_name: str, grid: int = FIXED_POINT_GRID) -> FixedPointReport:
    """Real fixed points of a step map, seeded from a ``grid**k`` lattice over ``[-1, 1]**k``.

    ``admissible`` keeps the points that are valid erasure parameters
    (non-negative, summing to at most 1).
    """
    if map_name not in _MAPS:
        raise UnknownMap(f"unknown map {map_name!r}; expected one of {sorted(_MAPS)}")
    k, bit = _MAPS[map_name]
    axis = np.linspace(-1.0, 1.0, grid)
    seeds = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    roots = _newton(seeds, bit)
    roots = roots[np.all(np.isfinite(roots), axis=1)]
    resid = np.abs(np.stack(_step_arrays(tuple(roots.T), bit), axis=1) - roots).max(axis=1)
    roots = roots[resid <= FIXED_POINT_RESIDUAL]

    found: list[np.ndarray] = []
    candidates = np.unique(np.round(roots / FIXED_POINT_CLUSTER) * FIXED_POINT_CLUSTER, axis=0)
    for r in candidates:
        if not any(np.abs(r - f).max() <= FIXED_POINT_CLUSTER for f in found):
            found.append(r)
    # snap to the cluster's rounded value so reports are stable across platforms
    pts = [tuple(float(v) + 0.0 for v in np.round(f, 12)) for f in found]
    residuals = tuple(
        float(np.abs(np.array(_step_arrays(tuple(np.array(pt)), bit)) - np.array(pt)).max())
        for pt in pts
    )
    tol = FIXED_POINT_CLUSTER
    admissible = tuple(pt for pt in pts if min(pt) >= -tol and sum(pt) <= 1 + tol)
    return FixedPointReport(map_name, tuple(pts), admissible, residuals)


def example1_fractions(p: ChannelParams1) -> tuple[float, float, float]:
    """Limiting fractions ``(p0, p1, p2)`` of useless, half-perfect and perfect channels.

    ``I4`` is the symmetric capacity and ``I22`` is ``I(X1; Y) + I(X1'; Y)`` with
    ``X1`` uniform on {0,2} and ``X1'`` uniform on {1,3}; each term is ``1 - eps - lam``.
    """
    i4 = 2.0 - p.eps - 2.0 * p.lam
    i22 = 2.0 - 2.0 * p.eps - 2.0 * p.lam
    p2 = 1.0 - p.eps - p.lam
    p1 = i4 - i22
    p0 = 1.0 - (i4 - i22 / 2.0)
    return (p0, p1, p2)
