"""Command-line driver: spectra, code construction, simulation, fixed points, validation."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytic, codec, polarize
from .channels import (
    Channel,
    channel1,
    channel2,
    identity_channel,
    load_channel,
    q_erasure,
    random_channel,
    symmetric_capacity,
    useless_channel,
    z_all,
)
from .groups import make_group

BUILTIN = ("channel1", "channel2")
GROUPLESS = ("random", "identity", "useless", "q_erasure")
# builtin channels switch from exact synthesis to the closed-form recursion above this depth
EXACT_DEFAULT_MAX_N = 8


class ValidationFailure(Exception):
    """Bad user input; maps to exit status 2."""


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    channel: str
    params: dict = field(default_factory=dict)
    n: tuple[int, ...] = (0,)
    tol: float = polarize.MERGE_TOL
    z_hi: float = codec.DEFAULT_Z_HI
    z_lo: float = codec.DEFAULT_Z_LO
    z_budget: float | None = None
    trials: int = 1000
    seed: int = 0
    engine: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationFailure("--trials must be >= 1")
        for n in self.n:
            if not 0 <= n <= analytic.MAX_PROFILE_DEPTH:
                raise ValidationFailure(f"--n {n} outside 0..{analytic.MAX_PROFILE_DEPTH}")
        if self.tol < 0:
            raise ValidationFailure("--tol must be non-negative")

    @property
    def is_builtin(self) -> bool:
        return self.channel in BUILTIN

    def builtin_params(self):
        if self.channel == "channel1":
            return (self.params.get("eps", 0.0), self.params.get("lam", 0.0))
        return (self.params.get("gam", 0.0), self.params.get("eps", 0.0), self.params.get("lam", 0.0))


def parse_group(text: str):
    """``"2^2"`` is Z4, ``"2,3"`` is Z2 x Z3, ``"2,2"`` is Z2 x Z2."""
    factors = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        p, _, r = tok.partition("^")
        try:
            factors.append((int(p), int(r) if r else 1))
        except ValueError as exc:
            raise ValidationFailure(f"cannot parse group factor {tok!r}") from exc
    return make_group(factors)


def build_channel(cfg: ExperimentConfig) -> Channel:
    kind = cfg.channel
    if kind == "channel1":
        return channel1(*cfg.builtin_params())
    if kind == "channel2":
        return channel2(*cfg.builtin_params())
    if kind.startswith("json:"):
        return load_channel(kind[5:])
    if kind in GROUPLESS:
        group = cfg.params.get("group")
        if group is None:
            raise ValidationFailure(f"--channel {kind} needs --group")
        g = parse_group(group)
        if kind == "random":
            return random_channel(g, cfg.params.get("outputs") or g.order, cfg.seed)
        if kind == "identity":
            return identity_channel(g)
        if kind == "useless":
            return useless_channel(g)
        return q_erasure(g, cfg.params.get("eps", 0.0))
    raise ValidationFailure(f"unknown channel {kind!r}")


def _fmt(x: float) -> str:
    return format(float(x) + 0.0, ".12g")


def _engine(cfg: ExperimentConfig, n: int, allow_mc: bool) -> str:
    engine = cfg.engine
    if engine is None:
        engine = "analytic" if cfg.is_builtin and n > EXACT_DEFAULT_MAX_N else "exact"
    if engine == "analytic" and not cfg.is_builtin:
        raise ValidationFailure("the analytic engine only covers channel1 and channel2")
    if engine == "mc" and not allow_mc:
        raise ValidationFailure("the mc engine estimates z only; use analytic or exact")
    return engine


def _write_csv(cfg: ExperimentConfig, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if cfg.out:
        Path(cfg.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def run_spectrum(cfg: ExperimentConfig) -> None:
    """CSV ``path,rank,info,z_1..z_{q-1}`` sorted by info; rank is the 1-based sorted position."""
    n = cfg.n[0]
    ch = build_channel(cfg)
    engine = _engine(cfg, n, allow_mc=False)
    if engine == "analytic":
        info = analytic.analytic_profile(cfg.channel, cfg.builtin_params(), n).info
        z = analytic.analytic_z_table(cfg.channel, cfg.builtin_params(), n)
    else:
        rows = polarize.spectrum(ch, n, cfg.tol)
        info = np.array([r.info for r in rows])
        z = np.stack([r.z for r in rows])
    order = np.argsort(info, kind="stable")
    header = ["path", "rank", "info"] + [f"z_{d}" for d in range(1, ch.q)]
    out = []
    for rank, i in enumerate(order, start=1):
        path = str(polarize.PolarPath.from_index(int(i), n))
        out.append([path, rank, _fmt(info[i])] + [_fmt(v) for v in z[i, 1:]])
    _write_csv(cfg, header, out)


def _construct(cfg: ExperimentConfig, ch: Channel, n: int) -> codec.CodeConfig:
    engine = _engine(cfg, n, allow_mc=True)
    kw = dict(
        z_hi=cfg.z_hi,
        z_lo=cfg.z_lo,
        z_budget=cfg.z_budget,
        dither_seed=cfg.seed,
    )
    if engine == "analytic":
        z_table = analytic.analytic_z_table(cfg.channel, cfg.builtin_params(), n)
        return codec.construct_code(ch, n, z_table=z_table, **kw)
    if engine == "mc":
        return codec.construct_code(ch, n, "monte_carlo", trials=cfg.trials, seed=cfg.seed, **kw)
    return codec.construct_code(ch, n, "exact", tol=cfg.tol, **kw)


def run_construct(cfg: ExperimentConfig) -> None:
    ch = build_channel(cfg)
    code = _construct(cfg, ch, cfg.n[0])
    data = code.to_json()
    data["error_bound"] = codec.error_bound(code)
    text = json.dumps(data, indent=2) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def run_simulate(cfg: ExperimentConfig) -> None:
    ch = build_channel(cfg)
    header = ["n", "N", "rate", "bler", "bound", "trials", "seed"]
    rows = []
    for n in cfg.n:
        code = _construct(cfg, ch, n)
        result = codec.simulate(ch, code, cfg.trials, cfg.seed)
        rows.append(
            [n, 2**n, _fmt(code.rate), _fmt(result.bler), _fmt(codec.error_bound(code)), cfg.trials, cfg.seed]
        )
    _write_csv(cfg, header, rows)


def run_fixed_points(cfg: ExperimentConfig) -> None:
    names = [cfg.params["map"]] if cfg.params.get("map") else list(analytic.MAP_NAMES)
    rows = []
    for name in names:
        rep = analytic.fixed_points(name)
        for pt, res in zip(rep.fixed_points, rep.residuals):
            rows.append([name, " ".join(_fmt(v) for v in pt), int(pt in rep.admissible), _fmt(res)])
    _write_csv(cfg, ["map", "point", "admissible", "residual"], rows)


def run_validate(cfg: ExperimentConfig) -> None:
    ch = build_channel(cfg)
    z = z_all(ch)
    lines = [
        f"group: {ch.group}",
        f"outputs: {ch.output_size}",
        f"symmetric_capacity: {_fmt(symmetric_capacity(ch))}",
    ] + [f"z_{d}: {_fmt(z[d])}" for d in range(1, ch.q)]
    config_path = cfg.params.get("config")
    if config_path:
        try:
            code = codec.CodeConfig.from_json(json.loads(Path(config_path).read_text()))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationFailure(f"cannot read code config: {exc}") from exc
        if code.group != ch.group or (code.output_size not in (None, ch.output_size)):
            raise ValidationFailure("code config does not match the channel")
        lines.append(f"code: N={code.N} rate={_fmt(code.rate)}")
    text = "\n".join(lines) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


COMMANDS = {
    "spectrum": run_spectrum,
    "construct": run_construct,
    "simulate": run_simulate,
    "fixed-points": run_fixed_points,
    "validate": run_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grouppolar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def channel_args(p):
        p.add_argument("--channel", default="channel1",
                       help="channel1 | channel2 | json:<path> | random | identity | useless | q_erasure")
        p.add_argument("--eps", type=float, default=0.0)
        p.add_argument("--lam", type=float, default=0.0)
        p.add_argument("--gam", type=float, default=0.0)
        p.add_argument("--group", help='input group for non-builtin kinds, e.g. "2^2" or "2,3"')
        p.add_argument("--outputs", type=int, help="output alphabet size of a random channel")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write here instead of stdout")

    def code_args(p):
        p.add_argument("--tol", type=float, default=polarize.MERGE_TOL)
        p.add_argument("--engine", choices=["analytic", "exact", "mc"])
        p.add_argument("--z-hi", type=float, default=codec.DEFAULT_Z_HI)
        p.add_argument("--z-lo", type=float, default=codec.DEFAULT_Z_LO)
        p.add_argument("--z-budget", type=float,
                       help="use z_lo = budget / N instead of a fixed --z-lo")
        p.add_argument("--trials", type=int, default=1000)

    p = sub.add_parser("spectrum", help="info and z_d of every synthesized channel, CSV")
    channel_args(p)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--tol", type=float, default=polarize.MERGE_TOL)
    p.add_argument("--engine", choices=["analytic", "exact", "mc"])

    p = sub.add_parser("construct", help="code configuration as JSON")
    channel_args(p)
    code_args(p)
    p.add_argument("--n", type=int, default=0)

    p = sub.add_parser("simulate", help="block error rate per length, CSV")
    channel_args(p)
    code_args(p)
    p.add_argument("--n", type=int, nargs="+", default=[0])

    p = sub.add_parser("fixed-points", help="fixed points of the parameter recursions, CSV")
    p.add_argument("--map", choices=list(analytic.MAP_NAMES))
    p.add_argument("--out")

    p = sub.add_parser("validate", help="check a channel (and optionally a code config)")
    channel_args(p)
    p.add_argument("--config", help="code configuration JSON to check against the channel")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    params = {
        k: getattr(args, k)
        for k in ("eps", "lam", "gam", "group", "outputs", "map", "config")
        if getattr(args, k, None) is not None
    }
    n = getattr(args, "n", 0)
    return ExperimentConfig(
        command=args.command,
        channel=getattr(args, "channel", "channel1"),
        params=params,
        n=tuple(n) if isinstance(n, list) else (n,),
        tol=getattr(args, "tol", polarize.MERGE_TOL),
        z_hi=getattr(args, "z_hi", codec.DEFAULT_Z_HI),
        z_lo=getattr(args, "z_lo", codec.DEFAULT_Z_LO),
        z_budget=getattr(args, "z_budget", None),
        trials=getattr(args, "trials", 1000),
        seed=getattr(args, "seed", 0),
        engine=getattr(args, "engine", None),
        out=getattr(args, "out", None),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        COMMANDS[cfg.command](cfg)
    except (ValidationFailure, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (polarize.AlphabetCapExceeded, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
