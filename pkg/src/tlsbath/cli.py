"""Command-line interface.

Subcommands wrap the scenario runners and analytic maps, writing deterministic
CSV/JSON outputs. Exit codes: 0 success, 1 usage or configuration error,
2 scientific tolerance failure. All energies are raw numbers in the same
arbitrary unit (hbar = 1).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analytics, experiments
from .model import (
    ModelParams,
    beta_working_point,
    binomial_degeneracy,
    effective_beta,
)


class ConfigError(Exception):
    pass


_COMMON_KEYS = {"seed", "out"}

_KNOWN_KEYS = {
    "attractor-map": _COMMON_KEYS
    | {"dt_min", "dt_max", "detuning_min", "detuning_max", "grid", "delta_s", "beta"},
    "relax": _COMMON_KEYS
    | {
        "scenario",
        "engine",
        "reset_mode",
        "n_traj",
        "steps",
        "tolerance",
        "model",
        "delta_s",
        "detuning",
        "coupling",
        "dt",
        "n",
        "k0",
    },
    "freeze": _COMMON_KEYS
    | {
        "delta_s",
        "detuning",
        "coupling",
        "dt",
        "n",
        "k0",
        "steps",
        "engine",
        "model",
        "n_traj",
    },
    "sweep": _COMMON_KEYS
    | {
        "quantity",
        "parameter",
        "start",
        "stop",
        "num",
        "values",
        "delta_s",
        "detuning",
        "coupling",
        "dt",
        "beta",
    },
    "env-inspect": _COMMON_KEYS | {"n", "delta_b", "model", "band_width"},
}

_SWEEP_PARAMS = {"dt", "detuning", "coupling", "delta_s", "beta"}


def _sweep_registry():
    def rel(p, beta):
        return analytics.relaxation_constants(p, beta)

    return {
        "R": lambda p, b: rel(p, b).rate,
        "d": lambda p, b: rel(p, b).drive,
        "attractor": lambda p, b: (
            lambda a: math.nan if a is None else a.rho00_star
        )(analytics.attractor(p, b)),
        "t_eff": lambda p, b: (
            lambda a: math.nan if a is None else a.t_eff
        )(analytics.attractor(p, b)),
        "c1": lambda p, b: analytics.offdiag_coeffs(p, b).c1,
        "c2": lambda p, b: analytics.offdiag_coeffs(p, b).c2,
        "c3": lambda p, b: analytics.offdiag_coeffs(p, b).c3,
        "c4": lambda p, b: analytics.offdiag_coeffs(p, b).c4,
        "rho00_min": lambda p, b: analytics.temperature_bounds(p, b).rho00_min,
        "rho00_max": lambda p, b: analytics.temperature_bounds(p, b).rho00_max,
    }


def _load_config(args, command: str) -> dict:
    cfg = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config JSON: {exc}")
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    known = _KNOWN_KEYS[command]
    for key in cfg:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r} for {command}")
    # Flags override file values.
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "engine", None) is not None:
        cfg["engine"] = args.engine
    if getattr(args, "reset", None) is not None:
        cfg["reset_mode"] = args.reset
    if getattr(args, "scenario", None) is not None:
        cfg["scenario"] = args.scenario
    cfg["out"] = args.out
    return cfg


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _metadata(cfg: dict) -> dict:
    resolved = {k: v for k, v in cfg.items() if k != "out"}
    return {
        "version": __version__,
        "config": resolved,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def cmd_attractor_map(cfg: dict) -> int:
    delta_s = float(cfg.setdefault("delta_s", 1.0))
    beta = float(cfg.setdefault("beta", 0.75))
    cfg.setdefault("dt_min", 0.01)
    cfg.setdefault("dt_max", 4.0 * math.pi / delta_s)
    cfg.setdefault("detuning_min", -0.9 * delta_s)
    cfg.setdefault("detuning_max", 3.0 * delta_s)
    grid = cfg.setdefault("grid", [400, 400])
    dts, dets, values, frozen = experiments.attractor_map(
        dt_range=(float(cfg["dt_min"]), float(cfg["dt_max"])),
        detuning_range=(float(cfg["detuning_min"]), float(cfg["detuning_max"])),
        grid_sizes=(int(grid[0]), int(grid[1])),
        delta_s=delta_s,
        beta=beta,
    )
    out = _out_dir(cfg)
    csv_path = out / "attractor_map.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dt", "detuning", "rho00_star", "is_freezing"])
        for i, det in enumerate(dets):
            for jj, dt in enumerate(dts):
                if frozen[i, jj]:
                    w.writerow([repr(float(dt)), repr(float(det)), "", "true"])
                else:
                    w.writerow(
                        [
                            repr(float(dt)),
                            repr(float(det)),
                            repr(float(values[i, jj])),
                            "false",
                        ]
                    )
    with open(out / "attractor_map.json", "w") as fh:
        json.dump(
            {"metadata": _metadata(cfg), "rows": int(values.size)}, fh, indent=1
        )
    print(f"wrote {csv_path} ({values.size} rows)")
    return 0


def cmd_relax(cfg: dict) -> int:
    scenario = cfg.setdefault("scenario", "fig2")
    overrides = {}
    for key in (
        "delta_s",
        "detuning",
        "coupling",
        "dt",
        "n",
        "k0",
        "engine",
        "reset_mode",
        "n_traj",
        "steps",
        "tolerance",
        "model",
    ):
        if cfg.get(key) is not None:
            overrides[key] = cfg[key]
    if "seed" in cfg and cfg["seed"] is not None:
        overrides["seed"] = int(cfg["seed"])
    if scenario == "fig2":
        report = experiments.reproduce_fig2(**overrides)
    elif scenario == "fig3":
        report = experiments.reproduce_fig3(**overrides)
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    out = _out_dir(cfg)
    csv_path = out / f"relax_{scenario}.csv"
    rho00 = report.series["rho00_exact"]
    re10 = report.series["re_rho10"]
    im10 = report.series["im_rho10"]
    stderr = report.series["stderr"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k_j", "rho00", "re_rho10", "im_rho10", "stderr"])
        for j, val in enumerate(rho00):
            w.writerow([j, "", repr(float(val)), repr(float(re10[j])),
                        repr(float(im10[j])), repr(float(stderr[j]))])
    report.extra["metadata"] = _metadata(cfg)
    report.to_json(out / f"relax_{scenario}.json")
    status = "pass" if report.passed else "FAIL"
    print(
        f"{scenario}: plateau={report.plateau:.4f} target={report.target} "
        f"tol={report.tolerance} [{status}]"
    )
    return 0 if report.passed else 2


def cmd_freeze(cfg: dict) -> int:
    params = ModelParams(
        delta_s=float(cfg.setdefault("delta_s", 1.0)),
        detuning=float(cfg.setdefault("detuning", 2.0)),
        coupling=float(cfg.setdefault("coupling", 0.05)),
        dt=float(cfg.setdefault("dt", math.pi)),
    )
    try:
        report = experiments.verify_freezing(
            params,
            steps=int(cfg.setdefault("steps", 500)),
            n=int(cfg.setdefault("n", 7)),
            k0=int(cfg.setdefault("k0", 2)),
            engine=cfg.setdefault("engine", "nonselective"),
            seed=int(cfg.get("seed", experiments.DEFAULT_SEED)),
            model=cfg.setdefault("model", "random-band"),
            n_traj=cfg.get("n_traj"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    report.extra["metadata"] = _metadata(cfg)
    out = _out_dir(cfg)
    report.to_json(out / "freeze.json")
    status = "pass" if report.passed else "FAIL"
    print(
        f"freezing (n={report.extra['matched_n']}, m={report.extra['matched_m']}): "
        f"drift_rho00={report.extra['drift_rho00']:.2e} "
        f"drift_abs_rho10={report.extra['drift_abs_rho10']:.2e} [{status}]"
    )
    return 0 if report.passed else 2


def cmd_sweep(cfg: dict) -> int:
    registry = _sweep_registry()
    quantity = cfg.get("quantity")
    if quantity not in registry:
        raise ConfigError(
            f"unknown quantity {quantity!r}; choose from {sorted(registry)}"
        )
    parameter = cfg.get("parameter", "dt")
    if parameter not in _SWEEP_PARAMS:
        raise ConfigError(
            f"unknown sweep parameter {parameter!r}; choose from {sorted(_SWEEP_PARAMS)}"
        )
    if cfg.get("values") is not None:
        values = [float(v) for v in cfg["values"]]
    else:
        values = np.linspace(
            float(cfg.get("start", 0.0)),
            float(cfg.get("stop", math.pi)),
            int(cfg.get("num", 101)),
        ).tolist()
    base = {
        "delta_s": float(cfg.setdefault("delta_s", 1.0)),
        "detuning": float(cfg.setdefault("detuning", 0.0)),
        "coupling": float(cfg.setdefault("coupling", 0.05)),
        "dt": float(cfg.setdefault("dt", math.pi)),
    }
    beta = float(cfg.setdefault("beta", 0.75))
    fn = registry[quantity]
    out = _out_dir(cfg)
    csv_path = out / f"sweep_{quantity}_{parameter}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([parameter, quantity])
        for v in values:
            kw = dict(base)
            b = beta
            if parameter == "beta":
                b = v
            else:
                kw[parameter] = v
            try:
                val = fn(ModelParams(**kw), b)
            except ValueError:
                val = math.nan
            w.writerow([repr(float(v)), repr(float(val))])
    with open(out / f"sweep_{quantity}_{parameter}.json", "w") as fh:
        json.dump({"metadata": _metadata(cfg), "rows": len(values)}, fh, indent=1)
    print(f"wrote {csv_path} ({len(values)} rows)")
    return 0


def cmd_env_inspect(cfg: dict) -> int:
    n = int(cfg.setdefault("n", 7))
    delta_b = float(cfg.setdefault("delta_b", 1.0))
    env = experiments.default_environment(
        n=n,
        delta_b=delta_b,
        seed=int(cfg.get("seed", experiments.DEFAULT_SEED)),
        model=cfg.setdefault("model", "random-band"),
        band_width=float(cfg.setdefault("band_width", 0.0)),
    )
    print(f"environment: n={n} delta_b={delta_b} model={cfg['model']} dim={env.dim}")
    print(f"{'k':>4} {'E_k':>10} {'N_k':>8}")
    for k, deg in zip(env.ks, env.degeneracies):
        print(f"{k:>4} {k * delta_b:>10.4f} {deg:>8}")
    for k0 in range(1, n):
        b_dig = beta_working_point(n, k0, delta_b, method="digamma")
        b_log = beta_working_point(n, k0, delta_b, method="log-approx")
        print(
            f"k0={k0}: beta_digamma={b_dig:.6f} beta_log={b_log:.6f} "
            f"ratio_e_bd={binomial_degeneracy(n, k0 + 1) / binomial_degeneracy(n, k0):.4f}"
            if k0 < n
            else f"k0={k0}: beta_digamma={b_dig:.6f} beta_log={b_log:.6f}"
        )
    pair = effective_beta(n, 1, 2, delta_b)
    print(f"effective beta (bands 1-2): {pair:.6f}")
    return 0


_DISPATCH = {
    "attractor-map": cmd_attractor_map,
    "relax": cmd_relax,
    "freeze": cmd_freeze,
    "sweep": cmd_sweep,
    "env-inspect": cmd_env_inspect,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsbath",
        description="Repeatedly measured spin-bath relaxation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, engine=False, scenario=False):
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", type=str, default=None, help="output directory")
        if engine:
            p.add_argument("--engine", choices=["sampled", "nonselective"])
            p.add_argument("--reset", choices=["exact", "coarse"], dest="reset")
        if scenario:
            p.add_argument("--scenario", type=str, default=None)

    common(sub.add_parser("attractor-map", help="attractor occupation grid"))
    common(
        sub.add_parser("relax", help="run a relaxation scenario"),
        engine=True,
        scenario=True,
    )
    common(sub.add_parser("freeze", help="verify state freezing"), engine=True)
    common(sub.add_parser("sweep", help="sweep an analytic quantity"))
    common(sub.add_parser("env-inspect", help="print environment band table"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; remap to the documented code 1
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = _load_config(args, args.command)
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
