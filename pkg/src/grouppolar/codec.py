"""Polar code construction, encoding and successive-cancellation decoding over a group.

Index ``i`` (1-based) is the synthesized channel whose path is the binary
expansion of ``i - 1``, most significant bit first, minus = 0 and plus = 1.
Codewords are ``x = u G_N`` with ``G_N = B_N F^{(x)n}``, ``B_N`` the
bit-reversal permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .channels import Channel, z_all
from .groups import Group, Subgroup, generated_subgroup, make_group, subgroup_from_members, transversal_of
from .polarize import MAX_DEPTH, PolarPath, spectrum, synthesize_path

DEFAULT_Z_HI = 0.9
DEFAULT_Z_LO = 0.1
MIN_MC_TRIALS = 100
# largest depth whose N x N generator table is materialized on request
MATERIALIZE_DEPTH = 12
CHUNK = 256


class CodecError(ValueError):
    pass


class DepthTooLarge(CodecError):
    pass


class LengthMismatch(CodecError):
    pass


class TrialsTooFew(CodecError):
    pass


class ConfigChannelMismatch(CodecError):
    pass


class MissingIndex(CodecError):
    pass


def bit_reversal(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    out = np.zeros_like(idx)
    for k in range(n):
        out |= ((idx >> k) & 1) << (n - 1 - k)
    return out


@dataclass(frozen=True)
class GeneratorMatrix:
    n: int

    def __post_init__(self):
        if not 0 <= self.n <= MAX_DEPTH:
            raise DepthTooLarge(f"depth {self.n} outside 0..{MAX_DEPTH}")

    @property
    def N(self) -> int:
        return 2**self.n

    @cached_property
    def bits(self) -> np.ndarray:
        """``B_N F^{(x)n}`` as a 0/1 table; row ``i`` is row ``bitrev(i)`` of the Kronecker power."""
        if self.n > MATERIALIZE_DEPTH:
            raise DepthTooLarge(f"refusing to materialize a {self.N} x {self.N} table")
        rows = bit_reversal(self.n)[:, None]
        cols = np.arange(self.N)[None, :]
        table = ((rows & cols) == cols).astype(np.uint8)
        table.setflags(write=False)
        return table


def generator_matrix(n: int) -> GeneratorMatrix:
    return GeneratorMatrix(n)


def rank_mod_p(a: np.ndarray, p: int) -> int:
    """Rank of an integer matrix over the field Z_p (Gaussian elimination)."""
    m = np.array(a, dtype=np.int64) % p
    rows, cols = m.shape
    rank = 0
    for c in range(cols):
        pivots = np.flatnonzero(m[rank:, c]) + rank
        if not pivots.size:
            continue
        r = pivots[0]
        m[[rank, r]] = m[[r, rank]]
        m[rank] = (m[rank] * pow(int(m[rank, c]), -1, p)) % p
        others = np.flatnonzero(m[:, c])
        others = others[others != rank]
        m[others] = (m[others] - np.outer(m[others, c], m[rank])) % p
        rank += 1
        if rank == rows:
            break
    return rank


def _natural_transform(g: Group, v: np.ndarray) -> np.ndarray:
    """``v F^{(x)n}`` along the last axis: ``x_j = sum of v_i over i containing j's bits``."""
    x = np.array(v, dtype=np.int64, copy=True)
    n_len = x.shape[-1]
    step = 1
    while step < n_len:
        view = x.reshape(*x.shape[:-1], -1, 2, step)
        view[..., 0, :] = g.add_table[view[..., 0, :], view[..., 1, :]]
        step *= 2
    return x


def encode(g: Group, gm: GeneratorMatrix, u) -> np.ndarray:
    """``x = u G_N`` using group addition; ``u`` may carry leading batch axes."""
    u = np.asarray(u, dtype=np.int64)
    if u.shape[-1] != gm.N:
        raise LengthMismatch(f"message has {u.shape[-1]} symbols, code length is {gm.N}")
    if u.size and (u.min() < 0 or u.max() >= g.order):
        raise LengthMismatch("message symbols outside the group")
    # B_N F = F B_N, so permute after the butterfly
    return _natural_transform(g, u)[..., bit_reversal(gm.n)]


@dataclass(frozen=True, eq=False)
class CodeConfig:
    group: Group
    n: int
    assignment: tuple[Subgroup, ...]
    dither_seed: int = 0
    output_size: int | None = None
    z_table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.assignment) != 2**self.n:
            raise LengthMismatch(f"{len(self.assignment)} subgroups for {2**self.n} indices")

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def rate(self) -> float:
        q = self.group.order
        return sum(math.log2(q / h.order) for h in self.assignment) / self.N

    @cached_property
    def transversals(self) -> dict[tuple[int, ...], tuple[int, ...]]:
        out = {}
        for h in self.assignment:
            if h.members not in out:
                out[h.members] = transversal_of(self.group, h).reps
        return out

    def counts(self) -> dict[tuple[int, ...], int]:
        out: dict[tuple[int, ...], int] = {}
        for h in self.assignment:
            out[h.members] = out.get(h.members, 0) + 1
        return out

    def to_json(self) -> dict:
        data = {
            "group": self.group.to_json(),
            "n": self.n,
            "assignment": [list(h.members) for h in self.assignment],
            "dither_seed": self.dither_seed,
            "rate": self.rate,
        }
        if self.output_size is not None:
            data["output_size"] = self.output_size
        if self.z_table is not None:
            data["z_table"] = self.z_table.tolist()
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> CodeConfig:
        g = make_group(data["group"])
        cache: dict[tuple[int, ...], Subgroup] = {}
        assignment = []
        for members in data["assignment"]:
            key = tuple(members)
            if key not in cache:
                cache[key] = subgroup_from_members(g, key)
            assignment.append(cache[key])
        z = data.get("z_table")
        return cls(
            g,
            int(data["n"]),
            tuple(assignment),
            int(data.get("dither_seed", 0)),
            data.get("output_size"),
            None if z is None else np.asarray(z, dtype=float),
        )


def dither(cfg: CodeConfig) -> np.ndarray:
    """Shared pseudorandom offsets, ``b_i`` uniform on ``H(i)``."""
    draws = np.random.default_rng(cfg.dither_seed).random(cfg.N)
    return np.array(
        [h.members[int(r * h.order)] for h, r in zip(cfg.assignment, draws)], dtype=np.int64
    )


# index quality


@dataclass(frozen=True)
class QualityEstimate:
    """``z[i, d]`` for every 0-based index; ``stderr`` only for Monte Carlo."""

    z: np.ndarray
    stderr: np.ndarray | None = None
    method: str = "exact"


@dataclass(frozen=True)
class IndexQuality:
    """``{d: z_d}`` of one synthesized channel, ``d != 0``."""

    index: int
    z: dict[int, float]
    stderr: dict[int, float] | None = None


def _exact_quality(ch: Channel, n: int, **kw) -> QualityEstimate:
    rows = spectrum(ch, n, **kw)
    return QualityEstimate(np.stack([r.z for r in rows]), None, "exact")


def _sample_outputs(ch: Channel, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(ch.w, axis=1)
    r = rng.random(x.shape)
    y = np.empty_like(x)
    for a in range(ch.q):
        sel = x == a
        y[sel] = np.searchsorted(cdf[a], r[sel], side="right")
    return np.minimum(y, ch.output_size - 1)


def _mc_quality(ch: Channel, n: int, trials: int, seed: int) -> QualityEstimate:
    if trials < MIN_MC_TRIALS:
        raise TrialsTooFew(f"need at least {MIN_MC_TRIALS} trials, got {trials}")
    g, big_n, q = ch.group, 2**n, ch.q
    gm = GeneratorMatrix(n)
    total = np.zeros((big_n, q))
    total_sq = np.zeros((big_n, q))
    chunks = [CHUNK] * (trials // CHUNK) + ([trials % CHUNK] if trials % CHUNK else [])
    for size, ss in zip(chunks, np.random.SeedSequence(seed).spawn(len(chunks))):
        rng = np.random.default_rng(ss)
        u = rng.integers(0, q, size=(size, big_n))
        y = _sample_outputs(ch, encode(g, gm, u), rng)
        post = _genie_posteriors(ch, y, u)  # (T, N, q)
        p_true = np.take_along_axis(post, u[..., None], axis=2)
        shifted = np.take_along_axis(post, g.add_table[u], axis=2)  # [.., d] = P(u + d)
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = np.where(p_true > 0, np.sqrt(shifted / p_true), 0.0)
        total += stat.sum(axis=0)
        total_sq += (stat**2).sum(axis=0)
    mean = total / trials
    var = np.maximum(total_sq / trials - mean**2, 0.0) * trials / (trials - 1)
    return QualityEstimate(mean, np.sqrt(var / trials), "monte_carlo")


def estimate_quality(
    ch: Channel, n: int, method: str = "exact", trials: int = 1000, seed: int = 0, **kw
) -> QualityEstimate:
    """``z_d`` of every synthesized channel ``W_N^{(i)}``."""
    if not 0 <= n <= MAX_DEPTH:
        raise DepthTooLarge(f"depth {n} outside 0..{MAX_DEPTH}")
    if method == "exact":
        return _exact_quality(ch, n, **kw)
    if method in ("monte_carlo", "mc"):
        return _mc_quality(ch, n, trials, seed)
    raise ValueError(f"unknown estimation method {method!r}")


def estimate_index_quality(
    ch: Channel, n: int, i: int, method: str = "exact", trials: int = 1000, seed: int = 0, **kw
) -> IndexQuality:
    """Quality of the 1-based index ``i``."""
    if not 1 <= i <= 2**n:
        raise MissingIndex(f"index {i} outside 1..{2**n}")
    if method == "exact":
        z = z_all(synthesize_path(ch, PolarPath.from_index(i - 1, n), **kw))
        se = None
    else:
        est = estimate_quality(ch, n, method, trials, seed)
        z, se = est.z[i - 1], est.stderr[i - 1]
    ds = range(1, ch.q)
    return IndexQuality(
        i,
        {d: float(z[d]) for d in ds},
        None if se is None else {d: float(se[d]) for d in ds},
    )


def classify_index(
    g: Group, z, z_hi: float = DEFAULT_Z_HI, z_lo: float = DEFAULT_Z_LO
) -> Subgroup:
    """Smallest subgroup containing every ``d`` with ``z_d > z_hi``, then enlarged
    until no ``d`` outside it has ``z_d > z_lo``."""
    if not z_hi > z_lo:
        raise ValueError(f"z_hi={z_hi} must exceed z_lo={z_lo}")
    if isinstance(z, Mapping):
        vals = np.zeros(g.order)
        for d, v in z.items():
            vals[int(d)] = v
    else:
        vals = np.asarray(z, dtype=float)
    gens = [d for d in range(1, g.order) if vals[d] > z_hi]
    h = generated_subgroup(g, gens)
    while True:
        extra = [d for d in range(1, g.order) if d not in h and vals[d] > z_lo]
        if not extra:
            return h
        h = generated_subgroup(g, h.members + tuple(extra))


def construct_code(
    ch: Channel,
    n: int,
    method: str = "exact",
    z_hi: float = DEFAULT_Z_HI,
    z_lo: float = DEFAULT_Z_LO,
    trials: int = 1000,
    seed: int = 0,
    dither_seed: int = 0,
    z_table: np.ndarray | None = None,
    z_budget: float | None = None,
    **kw,
) -> CodeConfig:
    """Assign a subgroup to every index from its estimated ``z_d`` values.

    A precomputed ``z_table`` (shape ``N x q``) bypasses estimation.
    ``z_budget`` replaces ``z_lo`` with ``z_budget / N``, which keeps the
    admitted ``z`` mass per code roughly constant as ``N`` grows; a fixed
    ``z_lo`` lets the block error rate climb with ``N``.
    """
    if z_budget is not None:
        if z_budget <= 0:
            raise ValueError("z_budget must be positive")
        z_lo = z_budget / 2**n
    if z_table is None:
        z_table = estimate_quality(ch, n, method, trials, seed, **kw).z
    z_table = np.asarray(z_table, dtype=float)
    if z_table.shape != (2**n, ch.q):
        raise MissingIndex(f"z table has shape {z_table.shape}, expected {(2**n, ch.q)}")
    cache: dict[tuple[int, ...], Subgroup] = {}
    assignment = []
    for row in z_table:
        h = classify_index(ch.group, row, z_hi, z_lo)
        assignment.append(cache.setdefault(h.members, h))
    return CodeConfig(ch.group, n, tuple(assignment), dither_seed, ch.output_size, z_table)


def error_bound(cfg: CodeConfig, z_table: np.ndarray | None = None) -> float:
    """``q^2 * sum_i sum_{d not in H(i)} z_d(W_N^{(i)})``."""
    z = cfg.z_table if z_table is None else np.asarray(z_table, dtype=float)
    if z is None or z.shape[0] != cfg.N:
        raise MissingIndex("z table must cover every index")
    if z.shape[1] != cfg.group.order:
        raise MissingIndex("z table must cover every d")
    mask = np.ones_like(z, dtype=bool)
    for i, h in enumerate(cfg.assignment):
        mask[i, list(h.members)] = False
    return float(cfg.group.order**2 * z[mask].sum())


# successive cancellation


def _normalize(p: np.ndarray) -> np.ndarray:
    s = p.sum(axis=-1, keepdims=True)
    return np.divide(p, s, out=np.full_like(p, 1.0 / p.shape[-1]), where=s > 0)


class _Decoder:
    """Natural-order SC over ``x_nat = u F^{(x)n}`` for a batch of received words."""

    def __init__(self, g: Group, leaf):
        self.add = g.add_table
        self.leaf = leaf  # (index, probs (T, q)) -> decided symbols (T,)

    def run(self, probs: np.ndarray, offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
        length = probs.shape[1]
        if length == 1:
            u = self.leaf(offset, probs[:, 0, :])
            return u[:, None], u[:, None]
        half = length // 2
        top, bot = probs[:, :half], probs[:, half:]
        # W-(a) = sum_b W_top(a + b) W_bot(b)
        minus = np.einsum("tkab,tkb->tka", top[:, :, self.add], bot)
        u_a, a = self.run(_normalize(minus), offset)
        plus = np.take_along_axis(top, self.add[a], axis=2) * bot
        u_b, b = self.run(_normalize(plus), offset + half)
        x = np.concatenate([self.add[a, b], b], axis=1)
        return np.concatenate([u_a, u_b], axis=1), x


def _input_likelihoods(ch: Channel, y: np.ndarray, n: int) -> np.ndarray:
    """Per-position ``W(y|x)`` in natural order, normalized: shape ``(T, N, q)``."""
    y_nat = y[..., bit_reversal(n)]
    return _normalize(np.moveaxis(ch.w[:, y_nat], 0, -1))


def _genie_posteriors(ch: Channel, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    n = int(math.log2(y.shape[-1]))
    post = np.empty(y.shape + (ch.q,))

    def leaf(i, p):
        post[:, i] = p
        return u[:, i]

    _Decoder(ch.group, leaf).run(_input_likelihoods(ch, y, n))
    return post


def sc_decode(ch: Channel, cfg: CodeConfig, y) -> np.ndarray:
    """Recover messages ``v`` (symbols of each index's transversal) from outputs ``y``.

    ``y`` is a length-``N`` vector or a ``(T, N)`` batch.
    """
    y = np.asarray(y, dtype=np.int64)
    single = y.ndim == 1
    if single:
        y = y[None, :]
    if y.shape[-1] != cfg.N:
        raise LengthMismatch(f"received {y.shape[-1]} symbols, code length is {cfg.N}")
    if ch.group != cfg.group or (cfg.output_size is not None and cfg.output_size != ch.output_size):
        raise ConfigChannelMismatch("channel does not match the code configuration")
    if y.size and (y.min() < 0 or y.max() >= ch.output_size):
        raise LengthMismatch("received symbols outside the output alphabet")
    g = cfg.group
    b = dither(cfg)
    cands = [
        np.sort(g.add_table[b[i], list(cfg.transversals[h.members])])
        for i, h in enumerate(cfg.assignment)
    ]

    def leaf(i, p):
        c = cands[i]
        # first maximum among ascending candidates = smallest element on ties
        return c[np.argmax(p[:, c], axis=1)]

    u_hat, _ = _Decoder(g, leaf).run(_input_likelihoods(ch, y, cfg.n))
    v_hat = g.sub_table[u_hat, b[None, :]]
    return v_hat[0] if single else v_hat


def random_messages(cfg: CodeConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    """Messages with ``v_i`` uniform on the transversal of ``H(i)``."""
    reps = [cfg.transversals[h.members] for h in cfg.assignment]
    sizes = np.array([len(r) for r in reps])
    picks = (rng.random((count, cfg.N)) * sizes).astype(np.int64)
    table = np.zeros((cfg.N, sizes.max()), dtype=np.int64)
    for i, r in enumerate(reps):
        table[i, : len(r)] = r
    return table[np.arange(cfg.N), picks]


def transmit(ch: Channel, cfg: CodeConfig, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Dither, encode and pass messages through the channel."""
    u = cfg.group.add_table[v, dither(cfg)[None, :]]
    return _sample_outputs(ch, encode(cfg.group, GeneratorMatrix(cfg.n), u), rng)


@dataclass(frozen=True)
class SimulationResult:
    trials: int
    errors: int

    @property
    def bler(self) -> float:
        return self.errors / self.trials


def simulate(ch: Channel, cfg: CodeConfig, trials: int, seed: int = 0) -> SimulationResult:
    """Block error rate over ``trials`` random messages; chunks draw from spawned seed streams."""
    if trials < 1:
        raise TrialsTooFew("need at least one trial")
    sizes = [CHUNK] * (trials // CHUNK) + ([trials % CHUNK] if trials % CHUNK else [])
    errors = 0
    for size, ss in zip(sizes, np.random.SeedSequence(seed).spawn(len(sizes))):
        rng = np.random.default_rng(ss)
        v = random_messages(cfg, size, rng)
        v_hat = sc_decode(ch, cfg, transmit(ch, cfg, v, rng))
        errors += int(np.any(v_hat != v, axis=1).sum())
    return SimulationResult(trials, errors)


def all_information(g: Group, n: int, dither_seed: int = 0) -> CodeConfig:
    """Every index carries a full symbol (``H = {0}``)."""
    h = generated_subgroup(g, [])
    return CodeConfig(g, n, (h,) * 2**n, dither_seed)


def fixed_assignment(g: Group, n: int, subgroups: Sequence[Subgroup], dither_seed: int = 0) -> CodeConfig:
    return CodeConfig(g, n, tuple(subgroups), dither_seed)
