"""Discrete memoryless channels with group-structured inputs.

All information quantities are in bits. ``0*log 0`` and ``sqrt(a*0)`` are 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .groups import (
    Group,
    NotASubgroup,
    Subgroup,
    check_subgroup,
    coset_labels,
    make_group,
    maximal_subgroups,
    subgroup_from_members,
    transversal_of,
)

ROW_TOL = 1e-9


class ChannelError(ValueError):
    pass


class BadShape(ChannelError):
    pass


class NotStochastic(ChannelError):
    pass


class SameSymbol(ChannelError):
    pass


class ParamOutOfRange(ChannelError):
    pass


class NotMaximal(ChannelError):
    pass


class BadRepresentative(ChannelError):
    pass


class NotErasureType(ChannelError):
    pass


class ParseError(ChannelError):
    pass


@dataclass(frozen=True, eq=False)
class Channel:
    """Transition table ``w[x, y] = W(y|x)`` over a group input alphabet."""

    group: Group
    w: np.ndarray = field(repr=False)
    labels: tuple[str, ...] | None = None

    @property
    def q(self) -> int:
        return self.group.order

    @property
    def output_size(self) -> int:
        return self.w.shape[1]

    def __repr__(self) -> str:
        return f"Channel({self.group}, outputs={self.output_size})"


def new_channel(group: Group, w, labels: Sequence[str] | None = None) -> Channel:
    w = np.array(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != group.order or w.shape[1] < 1:
        raise BadShape(f"expected a {group.order} x M table, got shape {w.shape}")
    if not np.isfinite(w).all() or (w < 0).any():
        raise NotStochastic("transition probabilities must be finite and non-negative")
    sums = w.sum(axis=1)
    if np.abs(sums - 1.0).max() > ROW_TOL:
        raise NotStochastic(f"row sums {sums} differ from 1 by more than {ROW_TOL}")
    w = w / sums[:, None]
    w.setflags(write=False)
    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != w.shape[1]:
            raise BadShape(f"{len(labels)} labels for {w.shape[1]} outputs")
    return Channel(group, w, labels)


@dataclass(frozen=True)
class ChannelParams1:
    """Erasure weights of the Z4 example channel: ``eps`` on cosets of {0,2}, ``lam`` on everything."""

    eps: float
    lam: float

    def __post_init__(self):
        _check_probs(eps=self.eps, lam=self.lam)

    def astuple(self) -> tuple[float, float]:
        return (self.eps, self.lam)


@dataclass(frozen=True)
class ChannelParams2:
    """Z6 example channel: ``gam`` on cosets of {0,3}, ``eps`` on cosets of {0,2,4}, ``lam`` on everything."""

    gam: float
    eps: float
    lam: float

    def __post_init__(self):
        _check_probs(gam=self.gam, eps=self.eps, lam=self.lam)

    def astuple(self) -> tuple[float, float, float]:
        return (self.gam, self.eps, self.lam)


def _check_probs(**params: float) -> None:
    slack = 1e-12
    for name, v in params.items():
        if not -slack <= v <= 1 + slack:
            raise ParamOutOfRange(f"{name}={v} outside [0, 1]")
    if sum(params.values()) > 1 + slack:
        raise ParamOutOfRange(f"{' + '.join(params)} = {sum(params.values())} exceeds 1")


def _erasure_channel(group: Group, clear: float, erasures, labels) -> Channel:
    """Identity outputs with mass ``clear`` plus one column per (coset set, mass) erasure."""
    q = group.order
    cols = [np.eye(q) * clear]
    for cosets, mass in erasures:
        for coset in cosets:
            col = np.zeros((q, 1))
            col[list(coset), 0] = mass
            cols.append(col)
    return new_channel(group, np.hstack(cols), labels)


def channel1(eps: float, lam: float) -> Channel:
    p = ChannelParams1(eps, lam)
    g = make_group([(2, 2)])
    labels = ["0", "1", "2", "3", "E1", "E2", "E3"]
    return _erasure_channel(
        g,
        1.0 - p.eps - p.lam,
        [([(0, 2), (1, 3)], p.eps), ([(0, 1, 2, 3)], p.lam)],
        labels,
    )


def channel2(gam: float, eps: float, lam: float) -> Channel:
    p = ChannelParams2(gam, eps, lam)
    g = make_group([(2, 1), (3, 1)])
    labels = [str(k) for k in range(6)] + [f"E{k}" for k in range(1, 7)]
    return _erasure_channel(
        g,
        1.0 - p.gam - p.eps - p.lam,
        [
            ([(0, 3), (1, 4), (2, 5)], p.gam),
            ([(0, 2, 4), (1, 3, 5)], p.eps),
            ([tuple(range(6))], p.lam),
        ],
        labels,
    )


def q_erasure(group: Group, eps: float) -> Channel:
    _check_probs(eps=eps)
    labels = [str(k) for k in range(group.order)] + ["E"]
    return _erasure_channel(group, 1.0 - eps, [([tuple(group.elements())], eps)], labels)


def identity_channel(group: Group) -> Channel:
    return new_channel(group, np.eye(group.order))


def useless_channel(group: Group) -> Channel:
    return new_channel(group, np.ones((group.order, 1)))


def random_channel(group: Group, outputs: int, seed: int) -> Channel:
    """Rows drawn uniformly from the probability simplex (normalised unit exponentials)."""
    if outputs < 1:
        raise BadShape("need at least one output")
    rng = np.random.default_rng(seed)
    w = rng.exponential(size=(group.order, outputs))
    return new_channel(group, w / w.sum(axis=1, keepdims=True))


def standard_channel(kind: str, **params) -> Channel:
    """Builder dispatch: channel1, channel2, q_erasure, identity, useless, random."""
    group = params.get("group")
    if kind == "channel1":
        return channel1(params.get("eps", 0.0), params.get("lam", 0.0))
    if kind == "channel2":
        return channel2(params.get("gam", 0.0), params.get("eps", 0.0), params.get("lam", 0.0))
    if group is None:
        raise ParamOutOfRange(f"channel kind {kind!r} needs a group")
    if kind == "q_erasure":
        return q_erasure(group, params.get("eps", 0.0))
    if kind == "identity":
        return identity_channel(group)
    if kind == "useless":
        return useless_channel(group)
    if kind == "random":
        return random_channel(group, params.get("outputs", group.order), params.get("seed", 0))
    raise ParamOutOfRange(f"unknown channel kind {kind!r}")


def _xlogx_ratio(joint: np.ndarray, px: np.ndarray, py: np.ndarray) -> float:
    denom = px[:, None] * py[None, :]
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log2(joint[nz] / denom[nz])))


def mutual_information(w: np.ndarray) -> float:
    """I(X;Y) in bits for uniform X over the rows of ``w``."""
    q = w.shape[0]
    joint = w / q
    return max(0.0, _xlogx_ratio(joint, np.full(q, 1.0 / q), joint.sum(axis=0)))


def symmetric_capacity(ch: Channel) -> float:
    return mutual_information(ch.w)


def pair_bhattacharyya(ch: Channel, x: int, x2: int) -> float:
    ch.group._check(x)
    ch.group._check(x2)
    if x == x2:
        raise SameSymbol("Bhattacharyya distance needs two distinct inputs")
    return float(np.sqrt(ch.w[x] * ch.w[x2]).sum())


def bhattacharyya_matrix(ch: Channel) -> np.ndarray:
    """``B[x, x'] = sum_y sqrt(W(y|x) W(y|x'))``."""
    s = np.sqrt(ch.w)
    return s @ s.T


def avg_bhattacharyya(ch: Channel) -> float:
    q = ch.q
    b = bhattacharyya_matrix(ch)
    return float((b.sum() - np.trace(b)) / (q * (q - 1)))


def z_all(ch: Channel) -> np.ndarray:
    """Vector of ``Z_d`` for every ``d``; ``Z_0 == 1``."""
    b = bhattacharyya_matrix(ch)
    add = ch.group.add_table
    x = np.arange(ch.q)
    z = b[x[:, None], add].mean(axis=0)
    z[0] = 1.0
    return np.clip(z, 0.0, 1.0)


def z_d(ch: Channel, d: int) -> float:
    ch.group._check(d)
    return float(z_all(ch)[d])


def z_aggregate(ch: Channel, h: Subgroup) -> float:
    check_subgroup(ch.group, h)
    z = z_all(ch)
    return float(z[~h.mask].sum())


def z_max_outside(ch: Channel, h: Subgroup) -> float:
    """``max_{d not in H} Z_d``; 0 when ``H`` is the whole group."""
    z = z_all(ch)[~h.mask]
    return float(z.max()) if z.size else 0.0


def coset_channel(ch: Channel, h: Subgroup) -> np.ndarray:
    """Rows ``P(y | X in a + H)`` for each coset, ordered by minimal representative."""
    labels = coset_labels(ch.group, h)
    reps = np.unique(labels)
    return np.stack([ch.w[labels == r].mean(axis=0) for r in reps])


def coset_conditional_info(ch: Channel, h: Subgroup) -> float:
    """I(X;Y | coset of H) = I(X;Y) - I(coset;Y)."""
    check_subgroup(ch.group, h)
    if h.is_trivial():
        return 0.0
    total = symmetric_capacity(ch)
    if h.is_whole():
        return total
    return max(0.0, total - mutual_information(coset_channel(ch, h)))


def variational_d(ch: Channel, d: int) -> float:
    ch.group._check(d)
    shifted = ch.w[ch.group.add_table[:, d]]
    return float(np.abs(ch.w - shifted).sum() / (2 * ch.q))


def erasure_masses(ch: Channel, tol: float = 1e-9) -> dict[tuple[int, ...], float]:
    """Decompose a coset-erasure channel into ``{subgroup members: mass}``.

    Each output must have a posterior uniform on some coset ``a + H``; its
    mass is counted toward ``H`` as seen from input 0. Raises
    :class:`NotErasureType` otherwise.
    """
    g = ch.group
    out: dict[tuple[int, ...], float] = {}
    for col in ch.w.T:
        top = col.max()
        if top <= 0:
            continue
        support = np.flatnonzero(col > tol * top)
        if np.ptp(col[support]) > tol * top:
            raise NotErasureType("output likelihoods are not uniform on their support")
        shifted = np.sort(g.sub_table[support, support[0]])
        members = tuple(int(a) for a in shifted)
        try:
            subgroup_from_members(g, members)
        except NotASubgroup as exc:
            raise NotErasureType(f"support {support.tolist()} is not a coset") from exc
        if 0 in support:
            out[members] = out.get(members, 0.0) + float(col[0])
    return out


def quotient_generator(h: Subgroup, m: Subgroup) -> int:
    """Smallest element of ``H \\ M``; its multiples index the cosets of ``M`` in ``H``."""
    return next(a for a in h.members if a not in m)


def quotient_coset_index(h: Subgroup, m: Subgroup, d: int) -> int:
    """``k`` with ``d + M == k*g + M`` for the quotient generator ``g``."""
    g = h.parent
    if d not in h:
        raise BadRepresentative(f"{d} is not in {h}")
    gen = quotient_generator(h, m)
    mset = m.mask
    for k in range(h.order // m.order):
        if mset[g.sub_table[d, g.multiple(k, gen)]]:
            return k
    raise NotMaximal("quotient H/M is not cyclic on the chosen generator")


def quotient_channel(ch: Channel, h: Subgroup, m: Subgroup, t_h: int) -> Channel:
    """Channel from the cosets of ``M`` inside ``t_h + H`` to ``Y``.

    Input ``k`` is the coset ``t_h + k*g + M`` where ``g`` is
    :func:`quotient_generator`; the input alphabet is the cyclic group of
    prime order ``|H|/|M|``.
    """
    g = ch.group
    check_subgroup(g, h)
    check_subgroup(g, m)
    if h.is_trivial() or not any(m == k for k in maximal_subgroups(g, h)):
        raise NotMaximal(f"{m} is not maximal in {h}")
    if t_h not in transversal_of(g, h).reps:
        raise BadRepresentative(f"{t_h} is not a canonical coset representative of {h}")
    qbar = h.order // m.order
    gen = quotient_generator(h, m)
    rows = []
    for k in range(qbar):
        base = g.add(t_h, g.multiple(k, gen))
        xs = g.add_table[base, list(m.members)]
        rows.append(ch.w[xs].mean(axis=0))
    return new_channel(make_group([(qbar, 1)]), np.stack(rows), ch.labels)


def channel_to_json(ch: Channel) -> dict:
    out = {
        "group": ch.group.to_json(),
        "outputs": ch.output_size,
        "rows": ch.w.tolist(),
    }
    if ch.labels is not None:
        out["labels"] = list(ch.labels)
    return out


def channel_from_json(data: dict) -> Channel:
    try:
        group = make_group(data["group"])
        rows = data["rows"]
        outputs = int(data.get("outputs", len(rows[0]) if rows else 0))
        labels = data.get("labels")
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed channel JSON: {exc}") from exc
    ch = new_channel(group, rows, labels)
    if ch.output_size != outputs:
        raise BadShape(f"'outputs' says {outputs} but rows have {ch.output_size} columns")
    return ch


def load_channel(path: str | Path) -> Channel:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read channel file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("channel JSON must be an object")
    return channel_from_json(data)


def save_channel(ch: Channel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(channel_to_json(ch), indent=2))
