"""Finite Abelian groups as direct sums of prime-power cyclic groups.

Elements are integers ``0..q-1`` in mixed-radix encoding over cyclic
components, first component most significant. The j-th factor of every
prime is folded into the j-th component through the CRT, so ``[(2,1),(3,1)]``
is Z6 with its usual labels while ``[(2,1),(2,1)]`` is Z2 x Z2 with
``(a, b) -> 2*a + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MAX_LATTICE_ORDER = 64


class GroupError(ValueError):
    pass


class EmptySpec(GroupError):
    pass


class NonPrimeFactor(GroupError):
    pass


class IndexOutOfRange(GroupError):
    pass


class GroupTooLarge(GroupError):
    pass


class NotASubgroup(GroupError):
    pass


class TrivialSubgroup(GroupError):
    pass


class NotPrimePowerGroup(GroupError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % k for k in range(2, math.isqrt(p) + 1))


@dataclass(frozen=True)
class Group:
    """Direct sum of cyclic groups ``Z_{p^r}``, one per ``(p, r)`` factor."""

    factors: tuple[tuple[int, int], ...]

    @cached_property
    def moduli(self) -> tuple[int, ...]:
        """Orders of the cyclic components."""
        per_prime: dict[int, list[int]] = {}
        for p, r in self.factors:
            per_prime.setdefault(p, []).append(p**r)
        width = max(len(v) for v in per_prime.values())
        return tuple(
            math.prod(v[j] for v in per_prime.values() if j < len(v)) for j in range(width)
        )

    @cached_property
    def order(self) -> int:
        return math.prod(self.moduli)

    @property
    def q(self) -> int:
        return self.order

    @cached_property
    def _weights(self) -> tuple[int, ...]:
        w, acc = [], 1
        for m in reversed(self.moduli):
            w.append(acc)
            acc *= m
        return tuple(reversed(w))

    def to_tuple(self, a: int) -> tuple[int, ...]:
        self._check(a)
        return tuple((a // w) % m for w, m in zip(self._weights, self.moduli))

    def from_tuple(self, residues: Sequence[int]) -> int:
        if len(residues) != len(self.moduli):
            raise IndexOutOfRange(f"expected {len(self.moduli)} residues, got {len(residues)}")
        return sum((r % m) * w for r, m, w in zip(residues, self.moduli, self._weights))

    @cached_property
    def add_table(self) -> np.ndarray:
        """``add_table[a, b] == a + b``; read-only."""
        digits = np.array([self.to_tuple(a) for a in range(self.order)], dtype=np.int64)
        mods = np.array(self.moduli, dtype=np.int64)
        weights = np.array(self._weights, dtype=np.int64)
        summed = (digits[:, None, :] + digits[None, :, :]) % mods
        table = summed @ weights
        table.setflags(write=False)
        return table

    @cached_property
    def neg_table(self) -> np.ndarray:
        table = np.argmin(self.add_table, axis=1)
        table.setflags(write=False)
        return table

    @cached_property
    def sub_table(self) -> np.ndarray:
        """``sub_table[a, b] == a - b``."""
        table = self.add_table[:, self.neg_table]
        table.setflags(write=False)
        return table

    def add(self, a: int, b: int) -> int:
        self._check(a)
        self._check(b)
        return int(self.add_table[a, b])

    def negate(self, a: int) -> int:
        self._check(a)
        return int(self.neg_table[a])

    def multiple(self, k: int, a: int) -> int:
        """``k*a`` for an integer ``k >= 0``."""
        self._check(a)
        return self.from_tuple([k * r for r in self.to_tuple(a)])

    def elements(self) -> range:
        return range(self.order)

    def _check(self, a: int) -> None:
        if not 0 <= a < self.order:
            raise IndexOutOfRange(f"element {a} not in 0..{self.order - 1}")

    def to_json(self) -> list[list[int]]:
        return [[p, r] for p, r in self.factors]

    def __str__(self) -> str:
        return " x ".join(f"Z{m}" for m in self.moduli)


def make_group(spec: Iterable[Sequence[int]]) -> Group:
    """Build a group from ``[(p, r), ...]``; e.g. ``[(2, 2)]`` is Z4."""
    factors = tuple((int(p), int(r)) for p, r in spec)
    if not factors:
        raise EmptySpec("group spec must contain at least one (prime, exponent) pair")
    for p, r in factors:
        if not is_prime(p):
            raise NonPrimeFactor(f"{p} is not prime")
        if r < 1:
            raise NonPrimeFactor(f"exponent {r} for prime {p} must be >= 1")
    return Group(factors)


def cyclic(p: int, r: int = 1) -> Group:
    return make_group([(p, r)])


@dataclass(frozen=True)
class Subgroup:
    parent: Group = field(repr=False)
    members: tuple[int, ...]

    @property
    def order(self) -> int:
        return len(self.members)

    @property
    def index(self) -> int:
        return self.parent.order // self.order

    def __contains__(self, a: int) -> bool:
        return a in self._member_set

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def _member_set(self) -> frozenset[int]:
        return frozenset(self.members)

    @cached_property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.parent.order, dtype=bool)
        m[list(self.members)] = True
        m.setflags(write=False)
        return m

    def is_trivial(self) -> bool:
        return self.members == (0,)

    def is_whole(self) -> bool:
        return self.order == self.parent.order

    def __le__(self, other: Subgroup) -> bool:
        return self._member_set <= other._member_set

    def __lt__(self, other: Subgroup) -> bool:
        return self._member_set < other._member_set

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


@dataclass(frozen=True)
class Transversal:
    subgroup: Subgroup
    reps: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.reps)

    def __iter__(self):
        return iter(self.reps)


def subgroup_from_members(g: Group, members: Iterable[int]) -> Subgroup:
    """Validate ``members`` as an add-closed subset containing 0."""
    ms = sorted(set(int(a) for a in members))
    for a in ms:
        g._check(a)
    if not ms or ms[0] != 0:
        raise NotASubgroup("subgroup must contain 0")
    mask = np.zeros(g.order, dtype=bool)
    mask[ms] = True
    idx = np.array(ms)
    if not mask[g.add_table[np.ix_(idx, idx)]].all():
        raise NotASubgroup(f"{ms} is not closed under addition")
    return Subgroup(g, tuple(ms))


def generated_subgroup(g: Group, gens: Iterable[int]) -> Subgroup:
    members = {0}
    frontier = [0]
    gens = sorted(set(int(a) for a in gens))
    for a in gens:
        g._check(a)
    while frontier:
        nxt = []
        for x in frontier:
            for a in gens:
                y = int(g.add_table[x, a])
                if y not in members:
                    members.add(y)
                    nxt.append(y)
        frontier = nxt
    return Subgroup(g, tuple(sorted(members)))


def whole(g: Group) -> Subgroup:
    return Subgroup(g, tuple(range(g.order)))


def trivial(g: Group) -> Subgroup:
    return Subgroup(g, (0,))


def _sort_key(h: Subgroup):
    return (h.order, h.members)


def all_subgroups(g: Group, cap: int = MAX_LATTICE_ORDER) -> list[Subgroup]:
    """Every subgroup of ``g``, sorted by ``(order, members)``.

    Grows the lattice upward from ``{0}`` by adjoining one element at a time;
    every subgroup of a group of order ``q`` needs at most ``log2 q``
    generators, so this reaches all of them.
    """
    if g.order > cap:
        raise GroupTooLarge(f"subgroup enumeration capped at order {cap}, got {g.order}")
    return list(_lattice(g))


_LATTICE_CACHE: dict[Group, tuple[Subgroup, ...]] = {}


def _lattice(g: Group) -> tuple[Subgroup, ...]:
    cached = _LATTICE_CACHE.get(g)
    if cached is not None:
        return cached
    seen = {(0,): trivial(g)}
    frontier = [trivial(g)]
    while frontier:
        nxt = []
        for h in frontier:
            for a in g.elements():
                if a in h:
                    continue
                k = generated_subgroup(g, h.members + (a,))
                if k.members not in seen:
                    seen[k.members] = k
                    nxt.append(k)
        frontier = nxt
    result = tuple(sorted(seen.values(), key=_sort_key))
    _LATTICE_CACHE[g] = result
    return result


def check_subgroup(g: Group, h: Subgroup) -> None:
    if h.parent != g:
        raise NotASubgroup(f"{h} belongs to {h.parent}, not {g}")
    subgroup_from_members(g, h.members)


def coset_labels(g: Group, h: Subgroup) -> np.ndarray:
    """Map each element to the minimal element of its coset ``a + H``."""
    members = np.array(h.members)
    return g.add_table[:, members].min(axis=1)


def transversal_of(g: Group, h: Subgroup) -> Transversal:
    """Minimal element of each coset; for ``p^t Z_{p^r}`` this is ``{0..p^t-1}``."""
    check_subgroup(g, h)
    reps = tuple(int(r) for r in np.unique(coset_labels(g, h)))
    return Transversal(h, reps)


def maximal_subgroups(g: Group, h: Subgroup) -> list[Subgroup]:
    check_subgroup(g, h)
    if h.is_trivial():
        raise TrivialSubgroup("{0} has no proper subgroups")
    below = [k for k in all_subgroups(g) if k < h]
    return [m for m in below if not any(m < k for k in below)]


def prime_chain(g: Group) -> list[tuple[Subgroup, frozenset[int]]]:
    """``(H_t, K_t)`` for ``t = 0..r`` where ``H_t = p^t G`` and ``K_t = H_t \\ H_{t+1}``."""
    if len(g.factors) != 1:
        raise NotPrimePowerGroup(f"{g} is not cyclic of prime-power order")
    p, r = g.factors[0]
    q = g.order
    hs = [Subgroup(g, tuple(range(0, q, p**t))) for t in range(r + 1)]
    chain = []
    for t, h in enumerate(hs):
        k = frozenset(h.members) - frozenset(hs[t + 1].members) if t < r else frozenset({0})
        chain.append((h, k))
    return chain
