"""Acceptance criteria 1 to 10.

Each test records one line through the ``acceptance`` fixture; the terminal
summary prints a PASS/FAIL line per criterion. Parts that cannot be met at
n=14 are strict xfails that still assert the stated tolerance.
"""

import itertools
import math
import time

import numpy as np
import pytest

from conftest import GROUP_SPECS, random_ensemble
from grouppolar.analytic import (
    LOG2_3,
    LOG2_6,
    analytic_profile,
    example1_fractions,
    fixed_points,
)
from grouppolar.channels import (
    ChannelParams1,
    avg_bhattacharyya,
    channel1,
    channel2,
    coset_conditional_info,
    erasure_masses,
    identity_channel,
    quotient_channel,
    quotient_coset_index,
    random_channel,
    symmetric_capacity,
    variational_d,
    z_all,
)
from grouppolar.codec import (
    all_information,
    construct_code,
    dither,
    encode,
    error_bound,
    fixed_assignment,
    generator_matrix,
    random_messages,
    rank_mod_p,
    sc_decode,
    simulate,
    transmit,
)
from grouppolar.groups import (
    all_subgroups,
    cyclic,
    make_group,
    maximal_subgroups,
    subgroup_from_members,
    transversal_of,
    whole,
)
from grouppolar.polarize import (
    channels_equivalent,
    iter_synthesized,
    merge_outputs,
    minus_transform,
    plus_transform,
)

pytestmark = pytest.mark.acceptance

ENSEMBLE_SIZE = 200


@pytest.fixture(scope="module")
def ensemble():
    """(channel, minus, plus) for the seeded ensemble, plus the time it took to build."""
    t0 = time.perf_counter()
    out = [
        (ch, merge_outputs(minus_transform(ch)), merge_outputs(plus_transform(ch)))
        for ch in random_ensemble(ENSEMBLE_SIZE)
    ]
    return out, time.perf_counter() - t0


def test_criterion_1_martingale(ensemble, acceptance):
    triples, build = ensemble
    t0 = time.perf_counter()
    worst = max(
        abs(symmetric_capacity(mi) + symmetric_capacity(pl) - 2 * symmetric_capacity(ch))
        for ch, mi, pl in triples
    )
    elapsed = build + time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    acceptance(1, ok, f"{len(triples)} channels, max |I- + I+ - 2I| = {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-9
    assert elapsed < 10


def test_criterion_2_supermartingale(ensemble, acceptance):
    triples, _ = ensemble
    violations, worst = 0, -np.inf
    for ch, mi, pl in triples:
        for h in all_subgroups(ch.group):
            gap = coset_conditional_info(mi, h) + coset_conditional_info(pl, h) - 2 * coset_conditional_info(ch, h)
            worst = max(worst, gap)
            violations += gap > 1e-9
    acceptance(2, violations == 0, f"{violations} violations, max excess {worst:.2e}")
    assert violations == 0


def test_criterion_3_one_step_laws(ensemble, acceptance):
    triples, _ = ensemble
    plus_err, max_violations = 0.0, 0
    for ch, mi, pl in triples:
        z, zm, zp = z_all(ch), z_all(mi), z_all(pl)
        plus_err = max(plus_err, float(np.abs(zp - z**2).max()))
        for h in all_subgroups(ch.group):
            if h.is_whole():
                continue
            out = ~h.mask
            max_violations += zm[out].max() > (ch.q + 2) * z[out].max() + 1e-12
    ok = plus_err <= 1e-12 and max_violations == 0
    acceptance(3, ok, f"max |Z(W+) - Z^2| = {plus_err:.1e}, {max_violations} minus-bound violations")
    assert plus_err <= 1e-12
    assert max_violations == 0


def _closure_errors(ch, kind, params, n):
    prof = analytic_profile(kind, params, n)
    keys = {
        "channel1": [(0, 2), (0, 1, 2, 3)],
        "channel2": [(0, 3), (0, 2, 4), (0, 1, 2, 3, 4, 5)],
    }[kind]
    worst, mismatched = 0.0, 0
    build = channel1 if kind == "channel1" else channel2
    for path, syn, _ in iter_synthesized(ch, n):
        masses = erasure_masses(syn)
        expect = prof.params_at(path.index).astuple()
        got = tuple(masses.get(k, 0.0) for k in keys)
        worst = max(worst, max(abs(a - b) for a, b in zip(got, expect)))
        mismatched += not channels_equivalent(syn, build(*expect))
    return worst, mismatched


def test_criterion_4_transform_closure(acceptance):
    t0 = time.perf_counter()
    err1, bad1 = _closure_errors(channel1(0.4, 0.2), "channel1", (0.4, 0.2), 6)
    err2, bad2 = _closure_errors(channel2(0.3, 0.2, 0.1), "channel2", (0.3, 0.2, 0.1), 4)
    elapsed = time.perf_counter() - t0
    ok = max(err1, err2) <= 1e-9 and bad1 == bad2 == 0 and elapsed < 30
    acceptance(
        4,
        ok,
        f"64 + 16 paths, param error {max(err1, err2):.1e}, {bad1 + bad2} non-isomorphic, {elapsed:.2f}s",
    )
    assert bad1 == bad2 == 0
    assert max(err1, err2) <= 1e-9
    assert elapsed < 30


def _plateau_fractions(info, levels, window=0.1):
    return [float(np.mean(np.abs(info - v) < window)) for v in levels]


def test_criterion_5_mean_and_runtime(acceptance):
    t0 = time.perf_counter()
    info = analytic_profile("channel1", (0.4, 0.2), 14).info
    elapsed = time.perf_counter() - t0
    ok = abs(info.mean() - 1.2) <= 1e-6 and elapsed < 5
    acceptance(5, ok, f"mean {info.mean():.9f}, {elapsed:.2f}s")
    assert abs(info.mean() - 1.2) <= 1e-6
    assert elapsed < 5


@pytest.mark.xfail(
    strict=True,
    reason="at n=14 about 11% of paths are still between plateaus; the half-perfect fraction is 0.345, not 0.4",
)
def test_criterion_5_plateau_fractions(acceptance):
    info = analytic_profile("channel1", (0.4, 0.2), 14).info
    got = _plateau_fractions(info, (0.0, 1.0, 2.0))
    want = example1_fractions(ChannelParams1(0.4, 0.2))
    gap = max(abs(a - b) for a, b in zip(got, want))
    acceptance(
        5,
        gap <= 0.05,
        "fractions (" + ", ".join(f"{v:.3f}" for v in got) + ") vs (" + ", ".join(f"{v:.1f}" for v in want)
        + f"), worst gap {gap:.3f} > 0.05" * (gap > 0.05),
    )
    assert gap <= 0.05


LEVELS_Z6 = (0.0, 1.0, LOG2_3, LOG2_6)


def test_criterion_6_middle_plateaus(acceptance):
    a = analytic_profile("channel2", (0, 0.4, 0.2), 14).info
    b = analytic_profile("channel2", (0.4, 0, 0.2), 14).info
    fa, fb = _plateau_fractions(a, LEVELS_Z6), _plateau_fractions(b, LEVELS_Z6)
    # coset-of-{0,2,4} erasures leave 1 bit, coset-of-{0,3} erasures leave log2(3)
    ok = fa[1] > 0.25 and fa[2] < 0.02 and fb[2] > 0.25 and fb[1] < 0.02
    acceptance(6, ok, f"middle plateau mass {fa[1]:.3f} at 1 and {fb[2]:.3f} at log2(3)")
    assert fa[1] > 0.25 and fa[2] < 0.02
    assert fb[2] > 0.25 and fb[1] < 0.02
    assert a.mean() == pytest.approx(LOG2_6 - 0.4 * LOG2_3 - 0.2 * LOG2_6, abs=1e-9)


@pytest.mark.xfail(strict=True, reason="four-level coverage at n=14 is 0.89, below 0.95")
def test_criterion_6_four_level_coverage(acceptance):
    cover = []
    for params in ((0, 0.4, 0.2), (0.4, 0, 0.2)):
        info = analytic_profile("channel2", params, 14).info
        cover.append(sum(_plateau_fractions(info, LEVELS_Z6)))
    ok = min(cover) >= 0.95
    acceptance(6, ok, f"four-level coverage {cover[0]:.3f} and {cover[1]:.3f} (need 0.95)")
    assert ok


QUOTIENT_GROUPS = dict(GROUP_SPECS, Z3=[(3, 1)], Z9=[(3, 2)])


def test_criterion_7_quotient_bounds(acceptance):
    counts = dict.fromkeys(["C", "D", "Dq", "E"], 0)
    checked = 0
    for name, spec in QUOTIENT_GROUPS.items():
        g = make_group(spec)
        single = len(g.factors) == 1
        for s in range(100):
            ch = random_channel(g, 2 + s % 9, seed=10_000 + s)
            z = z_all(ch)
            for d in range(1, g.order):
                dv = variational_d(ch, d)
                counts["D"] += (1 - z[d] > dv + 1e-12) or (z[d] > math.sqrt(max(0.0, 1 - dv * dv)) + 1e-12)
            for h in all_subgroups(g):
                if h.is_trivial():
                    continue
                for m in maximal_subgroups(g, h):
                    qbar = h.order // m.order
                    c = m.order * h.order * g.order / (h.order - m.order)
                    outside = [d for d in h.members if d not in m]
                    eps = max(z[d] for d in outside)
                    for t_h in transversal_of(g, h).reps:
                        wb = quotient_channel(ch, h, m, t_h)
                        zb = z_all(wb)
                        checked += 1
                        counts["C"] += avg_bhattacharyya(wb) > c * eps + 1e-12
                        for d in outside:
                            k = quotient_coset_index(h, m, d)
                            counts["Dq"] += variational_d(wb, k) > 2 * g.order * variational_d(ch, d) / (qbar * m.order) + 1e-12
                            if single:
                                counts["E"] += zb[k] < 1 - g.order**3 * (1 - z[d]) / qbar - 1e-12
    total = sum(counts.values())
    detail = ", ".join(f"{k} {v}" for k, v in counts.items())
    acceptance(7, total == 0, f"{checked} quotient channels over {len(QUOTIENT_GROUPS)} groups, violations: {detail}")
    assert total == 0


def _as_set(points):
    return {tuple(round(v, 9) + 0.0 for v in p) for p in points}


def test_criterion_8_fixed_points(acceptance):
    ch1 = {(0, 0), (1, 0), (0, 1)}
    ch2 = {(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)}
    results = {}
    worst = 0.0
    for name, want in [("channel1_plus", ch1), ("channel1_minus", ch1), ("channel2_plus", ch2), ("channel2_minus", ch2)]:
        rep = fixed_points(name)
        results[name] = _as_set(rep.admissible) == want
        worst = max(worst, max(rep.residuals))
    ok = all(results.values()) and worst <= 1e-9
    acceptance(8, ok, f"admissible sets match for {sum(results.values())}/4 maps, max residual {worst:.1e}")
    assert all(results.values())
    assert worst <= 1e-9


def test_criterion_9_end_to_end(acceptance):
    t0 = time.perf_counter()
    ch = channel1(0.4, 0.2)
    trials, seed = 2000, 7
    rows = {}
    for n in (6, 8, 10):
        cfg = construct_code(ch, n, "exact", z_budget=8)
        rows[n] = (cfg.rate, simulate(ch, cfg, trials, seed).bler, error_bound(cfg))
    elapsed = time.perf_counter() - t0
    rate8, bler8, bound8 = rows[8]
    ok = (
        rate8 >= 0.9
        and all(b <= bd for _, b, bd in rows.values())
        and rows[10][1] < rows[6][1]
        and elapsed < 300
    )
    detail = "; ".join(f"N={2**n} rate {r:.3f} bler {b:.4f} bound {bd:.2f}" for n, (r, b, bd) in rows.items())
    acceptance(9, ok, f"{detail}; {elapsed:.1f}s")
    assert rate8 >= 0.9
    assert bler8 <= bound8
    assert all(b <= bd for _, b, bd in rows.values())
    assert rows[10][1] < rows[6][1]
    assert elapsed < 300


def _nested_ok():
    g = cyclic(2, 2)
    full, half, zero = whole(g), subgroup_from_members(g, [0, 2]), subgroup_from_members(g, [0])
    assignment = [full, full, half, half, half, zero, half, zero]
    cfg = fixed_assignment(g, 3, assignment, dither_seed=1)
    gm = generator_matrix(3)
    msgs = np.array(list(itertools.product(*(cfg.transversals[h.members] for h in assignment))))
    inner = np.array(list(itertools.product(*(h.members for h in assignment))))
    x = encode(g, gm, g.add_table[msgs, dither(cfg)])
    c = encode(g, gm, inner)
    keys = g.add_table[x[:, None, :], c[None, :, :]].reshape(-1, 8) @ (4 ** np.arange(8))
    # every coset of the inner code holds exactly one codeword
    return len(np.unique(keys)) == 4**8 == len(msgs) * len(inner)


def test_criterion_10_roundtrip_and_structure(acceptance):
    rng = np.random.default_rng(2024)
    failures = []
    for name, spec in GROUP_SPECS.items():
        g = make_group(spec)
        ch = identity_channel(g)
        for n in range(11):
            cfg = all_information(g, n, dither_seed=n)
            v = random_messages(cfg, 4, rng)
            if not (sc_decode(ch, cfg, transmit(ch, cfg, v, rng)) == v).all():
                failures.append(f"{name} N={2**n}")
    rank_ok = all(rank_mod_p(generator_matrix(n).bits, p) == 2**n for n in range(11) for p in (2, 3))
    nested = _nested_ok()
    ok = not failures and rank_ok and nested
    acceptance(
        10,
        ok,
        f"roundtrip failures {len(failures)}, full rank mod 2 and 3 up to n=10: {rank_ok}, nested cosets at N=8: {nested}",
    )
    assert not failures
    assert rank_ok
    assert nested
