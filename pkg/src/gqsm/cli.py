"""Command-line front end: BER sweeps, complexity probes, and a decode trace demo.

Configuration comes from an INI file ([system] / [decoder] / [sweep]
sections, unknown keys rejected), overridden by GQSM_* environment
variables, overridden by command-line flags. Every CSV embeds the seed
and a digest of the effective configuration.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import ebn0_to_n0
from .codec import GqsmConfig
from .gabp import DecoderParams, decode
from .harness import (
    SweepPlan,
    run_sweep,
    scaling_probe,
    simulate_frame,
)

SCHEMA_LINE = "# schema=1"
SWEEP_HEADER = (
    "decoder,ebn0_db,frames,spatial_bits,bit_errors,frame_errors,"
    "ber,ci95,wall_time_s,seed,config_hash"
)
SCALING_HEADER = "decoder,n_tx,n_rx,p,per_iter_ms,fit_residual"
ENV_PREFIX = "GQSM_"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


@dataclass
class RunConfig:
    """Flat, validated view of everything a sweep run depends on."""

    n_tx: int = 16
    n_rx: int = 16
    p: int = 1
    m: int = 4
    tau_max: int = 100
    rho: float = 0.5
    variance_floor: float = 1e-12
    ebn0_db: tuple[float, ...] = (0.0,)
    frames: int = 10_000
    max_bit_errors: int = 200
    decoders: tuple[str, ...] = ("gabp",)
    randomize_pilots: bool = False
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def digest(self) -> str:
        """Short hash over every result-affecting field except the seed."""
        items = []
        for f in fields(self):
            if f.name in ("seed", "workers"):
                continue
            items.append(f"{f.name}={getattr(self, f.name)!r}")
        return hashlib.sha256("\n".join(items).encode()).hexdigest()[:12]

    def plan(self) -> SweepPlan:
        config = GqsmConfig(n_tx=self.n_tx, n_rx=self.n_rx, p=self.p, m=self.m)
        params = DecoderParams(
            tau_max=self.tau_max, rho=self.rho, variance_floor=self.variance_floor
        )
        return SweepPlan(
            config=config,
            params=params,
            decoders=self.decoders,
            ebn0_points_db=self.ebn0_db,
            frames_per_point=self.frames,
            max_bit_errors=self.max_bit_errors if self.max_bit_errors > 0 else None,
            master_seed=self.seed,
            randomize_pilots=self.randomize_pilots,
        )


class ConfigError(Exception):
    pass


def parse_ebn0(text: str) -> tuple[float, ...]:
    """Parse 'start:step:stop' (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad ebn0 range {text!r}, expected start:step:stop")
        start, step, stop = (float(v) for v in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"bad ebn0 range {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + k * step for k in range(count))
    return tuple(float(v) for v in text.split(","))


def _parse_bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


_SECTION_KEYS = {
    "system": {"n_tx": int, "n_rx": int, "p": int, "m": int},
    "decoder": {"tau_max": int, "rho": float, "variance_floor": float},
    "sweep": {
        "ebn0_db": parse_ebn0,
        "frames": int,
        "max_bit_errors": int,
        "decoders": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
        "randomize_pilots": _parse_bool,
        "seed": int,
    },
}


def load_config_file(path: str) -> dict:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        known = _SECTION_KEYS[section]
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                values[key] = known[key](raw)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
    return values


def _env_override(name: str, cast):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return None
    try:
        return cast(raw)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad {ENV_PREFIX}{name.upper()}={raw!r}: {exc}") from exc


def build_run_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))

    env_casts = {
        "seed": int,
        "workers": int,
        "frames": int,
        "ebn0_db": parse_ebn0,
        "decoders": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    }
    for name, cast in env_casts.items():
        env = _env_override(name, cast)
        if env is not None:
            values[name] = env

    if args.seed is not None:
        values["seed"] = args.seed
    if args.workers is not None:
        values["workers"] = args.workers
    if getattr(args, "frames", None) is not None:
        values["frames"] = args.frames
    if getattr(args, "ebn0", None) is not None:
        values["ebn0_db"] = parse_ebn0(args.ebn0)
    if getattr(args, "decoders", None) is not None:
        values["decoders"] = tuple(s.strip() for s in args.decoders.split(",") if s.strip())

    try:
        run = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if run.workers < 1:
        raise ConfigError("workers must be >= 1")
    return run


def _write_atomically(path: str, lines: list[str]) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    payload = "\n".join(lines) + "\n"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gqsm-", suffix=".csv")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        run = build_run_config(args)
        plan = run.plan()
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    records = run_sweep(plan, workers=run.workers)
    digest = run.digest()
    lines = [SCHEMA_LINE]
    for ebn0 in plan.ebn0_points_db:
        n0 = ebn0_to_n0(ebn0, plan.config, plan.fixed_pilots())
        lines.append(f"# point ebn0_db={ebn0!r} n0={n0!r}")
    lines.append(SWEEP_HEADER)
    for r in records:
        lines.append(
            f"{r.decoder},{r.ebn0_db!r},{r.frames},{r.spatial_bits},{r.bit_errors},"
            f"{r.frame_errors},{r.ber!r},{r.ci95_halfwidth!r},{r.wall_time_s!r},"
            f"{run.seed},{digest}"
        )
    try:
        _write_atomically(args.out, lines)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"bad integer list {text!r}")
    return values


def cmd_scaling(args: argparse.Namespace) -> int:
    try:
        n_tx_values = _parse_int_list(args.n_tx)
        p_values = _parse_int_list(args.p)
        if any(p > min(n_tx_values) for p in p_values):
            raise ConfigError("grid contains p > n_tx cells")
        decoders = tuple(s.strip() for s in args.decoders.split(",") if s.strip())
        seed = args.seed if args.seed is not None else 0
        records = scaling_probe(
            n_tx_values=n_tx_values,
            p_values=p_values,
            decoders=decoders,
            reps=args.reps,
            seed=seed,
        )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    digest = hashlib.sha256(
        f"n_tx={n_tx_values} p={p_values} decoders={decoders} reps={args.reps}".encode()
    ).hexdigest()[:12]
    lines = [SCHEMA_LINE, f"# seed={seed} config_hash={digest}", SCALING_HEADER]
    for r in records:
        lines.append(
            f"{r.decoder},{r.n_tx},{r.n_rx},{r.p},{r.per_iter_ms!r},{r.fit_residual!r}"
        )
    try:
        _write_atomically(args.out, lines)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    try:
        config = GqsmConfig(n_tx=args.n_tx, n_rx=args.n_rx, p=args.p, m=args.m)
        params = DecoderParams(tau_max=args.tau_max, rho=args.rho)
        seed = args.seed if args.seed is not None else 0
        plan = SweepPlan(
            config=config, params=params, decoders=("gabp",),
            ebn0_points_db=(args.ebn0_db,), frames_per_point=1, master_seed=seed,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    n0 = ebn0_to_n0(args.ebn0_db, config, plan.fixed_pilots())
    frame, system, pilots = simulate_frame(plan, n0, 0, 0)
    trace: list[float] = []
    result = decode(system, pilots, params, entropy_trace=trace)
    print(f"demo: n_tx={config.n_tx} n_rx={config.n_rx} p={config.p} "
          f"ebn0_db={args.ebn0_db} seed={seed} n0={n0:.6g}")
    print(f"true k_r={frame.k_r.tolist()} k_i={frame.k_i.tolist()}")
    for i, h in enumerate(trace, start=1):
        print(f"iter {i:3d}  consensus entropy {h:.6f} bits")
    match = bool(
        np.array_equal(result.k_r_hat, frame.k_r)
        and np.array_equal(result.k_i_hat, frame.k_i)
    )
    print(f"decided k_r={result.k_r_hat.tolist()} k_i={result.k_i_hat.tolist()} "
          f"correct={match} collision_resolved={result.collision_resolved}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gqsm",
        description="Link-level BER simulation for piloted quadrature spatial modulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="Monte-Carlo BER sweep, CSV output")
    sweep.add_argument("--config", help="INI configuration file")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", required=True, help="output CSV path")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument("--ebn0", help="Eb/N0 points: start:step:stop or comma list")
    sweep.add_argument("--frames", type=int, default=None, help="frames per point")
    sweep.add_argument("--decoders", help="comma list from gabp,ml,mfb")
    sweep.set_defaults(func=cmd_sweep)

    scaling = sub.add_parser("scaling", help="decode-time scaling probe, CSV output")
    scaling.add_argument("--n-tx", default="8,16,32", help="comma list of n_tx values")
    scaling.add_argument("--p", default="1,2,4", help="comma list of p values")
    scaling.add_argument("--decoders", default="gabp,ml")
    scaling.add_argument("--reps", type=int, default=3)
    scaling.add_argument("--seed", type=int, default=None)
    scaling.add_argument("--out", required=True)
    scaling.set_defaults(func=cmd_scaling)

    demo = sub.add_parser("demo", help="trace one decode's consensus entropy")
    demo.add_argument("--n-tx", type=int, default=4)
    demo.add_argument("--n-rx", type=int, default=4)
    demo.add_argument("--p", type=int, default=1)
    demo.add_argument("--m", type=int, default=4)
    demo.add_argument("--ebn0-db", type=float, default=20.0)
    demo.add_argument("--tau-max", type=int, default=100)
    demo.add_argument("--rho", type=float, default=0.5)
    demo.add_argument("--seed", type=int, default=None)
    demo.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
