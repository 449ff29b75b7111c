"""Single-step channel transforms and exact synthesis of polarized channels."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channels import Channel, new_channel, symmetric_capacity, z_all

MERGE_TOL = 1e-10
ALPHABET_CAP = 200_000
MAX_DEPTH = 20
# transforms refuse to allocate tables with more entries than this
RAW_ENTRY_LIMIT = 16_000_000


class AlphabetCapExceeded(RuntimeError):
    pass


class PathTooLong(ValueError):
    pass


@dataclass(frozen=True)
class PolarPath:
    """Sequence of transforms, ``0`` for minus and ``1`` for plus; the first bit is applied first."""

    bits: tuple[int, ...] = ()

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"path bits must be 0/1, got {self.bits}")
        if len(self.bits) > MAX_DEPTH:
            raise PathTooLong(f"path length {len(self.bits)} exceeds {MAX_DEPTH}")

    @classmethod
    def parse(cls, text: str) -> PolarPath:
        """Accepts ``-``/``+`` or ``0``/``1`` strings; ``""`` is the empty path."""
        text = text.strip()
        if not re.fullmatch(r"[-+01]*", text):
            raise ValueError(f"cannot parse path {text!r}")
        return cls(tuple(1 if c in "+1" else 0 for c in text))

    @classmethod
    def from_index(cls, index: int, n: int) -> PolarPath:
        """Path of the 0-based synthesized-channel index ``index`` among ``2**n``."""
        if not 0 <= index < 2**n:
            raise ValueError(f"index {index} out of range for n={n}")
        return cls(tuple((index >> (n - 1 - k)) & 1 for k in range(n)))

    @property
    def index(self) -> int:
        out = 0
        for b in self.bits:
            out = 2 * out + b
        return out

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join("+" if b else "-" for b in self.bits)

    def binary(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class SpectrumRow:
    path: PolarPath
    info: float
    z: np.ndarray = field(repr=False)
    merged_outputs: int
    approximate: bool = False


def _check_raw(q: int, cols: int) -> None:
    if q * cols > RAW_ENTRY_LIMIT:
        raise AlphabetCapExceeded(
            f"transform would produce {cols} outputs ({q * cols} table entries); "
            "merge or degrade the channel first"
        )


def minus_transform(ch: Channel) -> Channel:
    """``W-(y1, y2 | u1) = sum_u2 W(y1 | u1+u2) W(y2 | u2) / q``; output ``y1*M + y2``."""
    q, m = ch.q, ch.output_size
    _check_raw(q, m * m)
    shifted = ch.w[ch.group.add_table]  # [u1, u2, y1]
    w = np.einsum("uvy,vz->uyz", shifted, ch.w) / q
    return new_channel(ch.group, w.reshape(q, m * m))


def plus_transform(ch: Channel) -> Channel:
    """``W+(y1, y2, u1 | u2) = W(y1 | u1+u2) W(y2 | u2) / q``; output ``(y1*M + y2)*q + u1``."""
    q, m = ch.q, ch.output_size
    _check_raw(q, m * m * q)
    shifted = ch.w[ch.group.add_table]  # [u2, u1, y1]
    w = np.einsum("vuy,vz->vyzu", shifted, ch.w) / q
    return new_channel(ch.group, w.reshape(q, m * m * q))


def merge_outputs(ch: Channel, tol: float = MERGE_TOL) -> Channel:
    """Sum outputs whose posterior columns agree within ``tol``; drop zero-mass outputs.

    Columns are bucketed on their posterior rounded to a ``tol`` grid, so two
    columns closer than ``tol`` that straddle a grid boundary stay separate.
    That only costs alphabet size, never exactness.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    w = ch.w
    mass = w.sum(axis=0)
    keep = mass > 0
    w = w[:, keep]
    post = w / mass[keep]
    if tol > 0:
        key = np.round(post / tol).astype(np.int64)
    else:
        key = post
    _, inverse = np.unique(key.T, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    k = int(inverse.max()) + 1 if inverse.size else 0
    merged = np.stack([np.bincount(inverse, weights=row, minlength=k) for row in w])
    return new_channel(ch.group, merged)


def canonical_table(ch: Channel, tol: float = MERGE_TOL) -> np.ndarray:
    """Merged table with columns in lexicographic order; equal iff channels are equivalent."""
    w = merge_outputs(ch, tol).w
    return w[:, np.lexsort(w[::-1])]


def channels_equivalent(a: Channel, b: Channel, atol: float = 1e-9) -> bool:
    """Same input group and, up to output relabeling, tables within ``atol``.

    Outputs whose likelihoods are all below ``atol`` are ignored on both sides.
    """
    if a.group != b.group:
        return False
    ta, tb = canonical_table(a), canonical_table(b)
    ta = ta[:, ta.max(axis=0) >= atol]
    tb = tb[:, tb.max(axis=0) >= atol]
    if ta.shape != tb.shape:
        return False
    cost = np.abs(ta.T[:, None, :] - tb.T[None, :, :]).max(axis=2)
    rows, cols = linear_sum_assignment(cost)
    return bool(cost[rows, cols].max(initial=0.0) <= atol)


def degrade_to_budget(ch: Channel, budget: int) -> Channel:
    """Greedy degrading merge down to at most ``budget`` outputs.

    Outputs are ordered lexicographically by posterior and adjacent pairs
    with the smallest ``min(mass) * L1(posterior gap)`` are merged, a small
    batch of disjoint pairs per round. The result is a degraded version of ``ch``:
    every functional moves in the "worse channel" direction.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    w = ch.w
    while w.shape[1] > budget:
        mass = w.sum(axis=0)
        post = w / mass
        order = np.lexsort(post[::-1])
        w, post, mass = w[:, order], post[:, order], mass[order]
        cost = np.minimum(mass[:-1], mass[1:]) * np.abs(post[:, 1:] - post[:, :-1]).sum(axis=0)
        excess = min(w.shape[1] - budget, max(1, w.shape[1] // 8))
        chosen = np.zeros(w.shape[1], dtype=bool)
        picked = 0
        for j in np.argsort(cost, kind="stable"):
            if chosen[j] or chosen[j + 1]:
                continue
            chosen[j] = chosen[j + 1] = True
            picked += 1
            if picked >= excess:
                break
        # chosen columns come in consecutive disjoint pairs, so odd positions are second members
        target = np.arange(w.shape[1])
        second = chosen & ((np.cumsum(chosen) - 1) % 2 == 1)
        target[second] -= 1
        _, new_idx = np.unique(target, return_inverse=True)
        k = int(new_idx.max()) + 1
        w = np.stack([np.bincount(new_idx, weights=row, minlength=k) for row in w])
    return new_channel(ch.group, w)


def _step(ch: Channel, bit: int, tol: float, cap: int, budget: int | None) -> tuple[Channel, bool]:
    raw = plus_transform(ch) if bit else minus_transform(ch)
    out = merge_outputs(raw, tol)
    degraded = False
    if budget is not None and out.output_size > budget:
        out = degrade_to_budget(out, budget)
        degraded = True
    if out.output_size > cap:
        raise AlphabetCapExceeded(
            f"merged alphabet has {out.output_size} outputs, cap is {cap}; "
            "pass a degrading budget to approximate"
        )
    return out, degraded


def synthesize_path(
    ch: Channel,
    path: PolarPath | str | Sequence[int],
    tol: float = MERGE_TOL,
    cap: int = ALPHABET_CAP,
    budget: int | None = None,
) -> Channel:
    """Apply the path's transforms in order, merging equivalent outputs after each step."""
    path = _as_path(path)
    for bit in path.bits:
        ch, _ = _step(ch, bit, tol, cap, budget)
    return ch


def _as_path(path) -> PolarPath:
    if isinstance(path, PolarPath):
        return path
    if isinstance(path, str):
        return PolarPath.parse(path)
    return PolarPath(tuple(int(b) for b in path))


def iter_synthesized(
    ch: Channel,
    n: int,
    tol: float = MERGE_TOL,
    cap: int = ALPHABET_CAP,
    budget: int | None = None,
) -> Iterator[tuple[PolarPath, Channel, bool]]:
    """Depth-first walk yielding ``(path, channel, degraded)`` in binary-counter order."""
    if not 0 <= n <= MAX_DEPTH:
        raise PathTooLong(f"depth {n} outside 0..{MAX_DEPTH}")

    def walk(node: Channel, prefix: tuple[int, ...], degraded: bool):
        if len(prefix) == n:
            yield PolarPath(prefix), node, degraded
            return
        for bit in (0, 1):
            child, d = _step(node, bit, tol, cap, budget)
            yield from walk(child, prefix + (bit,), degraded or d)

    yield from walk(ch, (), False)


def spectrum(
    ch: Channel,
    n: int,
    tol: float = MERGE_TOL,
    cap: int = ALPHABET_CAP,
    budget: int | None = None,
) -> list[SpectrumRow]:
    """One row per synthesized channel ``W^{b1..bn}``, in binary-counter order."""
    return [
        SpectrumRow(path, symmetric_capacity(c), z_all(c), c.output_size, degraded)
        for path, c, degraded in iter_synthesized(ch, n, tol, cap, budget)
    ]
