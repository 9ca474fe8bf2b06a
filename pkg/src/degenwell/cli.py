"""Command-line front end.

Commands: validate, simulate, flow, control, lyapunov, action, costs,
classify, invariant, rerun.  Parameters come from a flat key = value config
document (keys lambda1, lambda2, lambda3, sigma0, sigma1, theta, epsilon,
epsilon0; '#' starts a comment) plus --set overrides; every run writes its
outputs and a manifest echoing the fully resolved configuration into the
output directory, and `rerun MANIFEST` reproduces the outputs byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, TextIO

from .action import (
    DegenerateDiffusion,
    action,
    extremal_control,
    extremal_path,
    read_scalar_path,
    write_scalar_path,
)
from .lyapunov import CertificateNotFound, GridSpec, certificate_record, find_certificate
from .model import PARAM_KEYS, InvalidParams, Params, State, param_violations
from .quasipotential import (
    ClassificationInconsistency,
    CostMatrix,
    PathOptimizationFailed,
    classify_limit_measure,
    cost_matrix,
    default_delta,
)
from .simulate import (
    OccupationHistogram,
    SimConfig,
    SimulationDiverged,
    Trajectory,
    band_region,
    outside_ball_region,
    run_ensemble,
    simulate_controlled,
    simulate_flow,
    simulate_sde,
)

__all__ = ["RunSpec", "run", "invariant_experiment", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

OUTPUT_ENV = "DEGENWELL_OUTPUT"
DEFAULT_OUTPUT = "degenwell_out"


class ConfigError(ValueError):
    """Malformed configuration input."""


# Per-command option schema: name -> (type, default).  A default of None is
# resolved against the parameters when the RunSpec is built, so manifests
# always record concrete values.
_OPTION_SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "validate": {},
    "simulate": {
        "dt": (float, 1e-3),
        "t_final": (float, 100.0),
        "seed": (int, 0),
        "x0": (float, 1.0),
        "y0": (float, 0.0),
    },
    "flow": {
        "dt": (float, 1e-3),
        "t_final": (float, 20.0),
        "x0": (float, 0.5),
        "y0": (float, 0.0),
    },
    "control": {
        "dt": (float, 1e-3),
        "t_final": (float, 5.0),
        "x0": (float, 0.6),
        "y0": (float, 0.0),
        "control": (str, "constant"),
        "k": (float, 0.0),
        "w0": (float, 0.6),
    },
    "lyapunov": {
        "nodes": (int, 601),
        "half_width": (float, 3.0),
        "epsilon_max": (float, None),
    },
    "action": {
        "source": (str, "extremal"),
        "path_file": (str, ""),
        "w0": (float, 0.6),
        "horizon": (float, 10.0),
        "nodes": (int, 2001),
        "direction": (str, "reverse"),
    },
    "costs": {
        "delta": (float, None),
        "method": (str, "integral"),
        # 0 = per-entry automatic horizon (extremal traversal time).
        "horizon": (float, 0.0),
        "nodes": (int, 400),
    },
    "classify": {
        "delta": (float, None),
    },
    "invariant": {
        "dt": (float, 1e-3),
        "t_final": (float, 1000.0),
        "seed": (int, 0),
        "n_paths": (int, 16),
        "delta": (float, None),
        "burn_in_fraction": (float, 0.1),
        "radius": (float, 3.0),
        "initial": (str, "balanced"),
        "x0": (float, 0.0),
        "y0": (float, 0.0),
    },
}


@dataclass(frozen=True)
class RunSpec:
    """One fully resolved run: command, parameters, output directory, options."""

    command: str
    params: Params
    output: Path
    options: Mapping[str, object]


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat key = value lines; '#' starts a comment anywhere."""
    record: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        record[key] = value.strip()
    return record


def _load_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config_text(text)


def _params_from_record(record: Mapping[str, str]) -> Params:
    violations = param_violations(record)
    if violations:
        raise InvalidParams(violations)
    return Params(
        **{k: float(record.get(k, getattr(Params, k))) for k in PARAM_KEYS}
    )


def _resolve_options(
    command: str, given: Mapping[str, object], p: Params
) -> dict[str, object]:
    schema = _OPTION_SCHEMA[command]
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise ConfigError(f"unknown options for {command}: {', '.join(unknown)}")
    resolved: dict[str, object] = {}
    for name, (typ, default) in schema.items():
        if name in given and given[name] is not None:
            try:
                resolved[name] = typ(given[name])
            except (TypeError, ValueError):
                raise ConfigError(f"option {name} expects {typ.__name__}, got {given[name]!r}") from None
        else:
            resolved[name] = default
    # Materialize parameter-dependent defaults so manifests are concrete.
    if resolved.get("delta", 0.0) is None:
        resolved["delta"] = default_delta(p)
    if command == "lyapunov" and resolved["epsilon_max"] is None:
        resolved["epsilon_max"] = p.epsilon0
    return resolved


def _write_manifest(spec: RunSpec) -> None:
    lines = [f"command = {spec.command}"]
    for key in PARAM_KEYS:
        lines.append(f"{key} = {_fmt(getattr(spec.params, key))}")
    for name in sorted(spec.options):
        lines.append(f"{name} = {_fmt(spec.options[name])}")
    (spec.output / "manifest.txt").write_text("\n".join(lines) + "\n")


def _write_trajectory(traj: Trajectory, stream: TextIO) -> None:
    stream.write("t,x,y\n")
    for t, (x, y) in zip(traj.times, traj.states):
        stream.write(f"{t:.17g},{x:.17g},{y:.17g}\n")


def _write_occupations(hist: OccupationHistogram, stream: TextIO) -> None:
    stream.write("region,time,fraction\n")
    for name in hist.region_names:
        stream.write(f"{name},{hist.time_in(name):.17g},{hist.fraction(name):.17g}\n")


def _write_cost_table(cm: CostMatrix, stream: TextIO) -> None:
    stream.write("from,K1,K2,K3\n")
    for i in (1, 2, 3):
        row = ",".join(f"{cm.cost(i, j):.17g}" for j in (1, 2, 3))
        stream.write(f"K{i},{row}\n")


def invariant_experiment(
    p: Params,
    dt: float,
    t_final: float,
    seed: int,
    n_paths: int,
    delta: float,
    burn_in_fraction: float = 0.1,
    radius: float = 3.0,
    initial: str = "balanced",
    x0: float = 0.0,
    y0: float = 0.0,
) -> OccupationHistogram:
    """Occupation of the well bands and the far region over an ensemble.

    initial="balanced" starts half the paths in each outer well (the model
    itself fixes no starting law, and a balanced start lets the band
    occupations compare the wells on equal footing); initial="point" starts
    every path at (x0, y0).  Substreams are keyed by (seed, path index)
    either way.
    """
    regions = [
        band_region(1, delta),
        band_region(2, delta),
        band_region(3, delta),
        outside_ball_region(radius),
    ]
    if initial == "point":
        base = SimConfig(dt=dt, t_final=t_final, seed=seed, initial=State(x0, y0))
        return run_ensemble(p, base, n_paths, regions, burn_in_fraction)
    if initial != "balanced":
        raise ConfigError(f"initial must be 'balanced' or 'point', got {initial!r}")
    n_left = (n_paths + 1) // 2
    n_right = n_paths - n_left
    left = SimConfig(dt=dt, t_final=t_final, seed=seed, initial=State(-1.0, 0.0))
    hist = run_ensemble(p, left, n_left, regions, burn_in_fraction, path_offset=0)
    if n_right:
        right = SimConfig(dt=dt, t_final=t_final, seed=seed, initial=State(1.0, 0.0))
        hist = hist.merge(
            run_ensemble(p, right, n_right, regions, burn_in_fraction, path_offset=n_left)
        )
    return hist


def _cmd_validate(spec: RunSpec) -> None:
    lines = ["status = ok"]
    for key in PARAM_KEYS:
        lines.append(f"{key} = {_fmt(getattr(spec.params, key))}")
    (spec.output / "validation.txt").write_text("\n".join(lines) + "\n")


def _cmd_simulate(spec: RunSpec) -> None:
    o = spec.options
    config = SimConfig(
        dt=o["dt"], t_final=o["t_final"], seed=o["seed"], initial=State(o["x0"], o["y0"])
    )
    traj = simulate_sde(spec.params, config)
    with open(spec.output / "trajectory.csv", "w") as stream:
        _write_trajectory(traj, stream)


def _cmd_flow(spec: RunSpec) -> None:
    o = spec.options
    config = SimConfig(
        dt=o["dt"], t_final=o["t_final"], seed=0, initial=State(o["x0"], o["y0"])
    )
    traj = simulate_flow(spec.params, config)
    with open(spec.output / "trajectory.csv", "w") as stream:
        _write_trajectory(traj, stream)


def _cmd_control(spec: RunSpec) -> None:
    o = spec.options
    config = SimConfig(
        dt=o["dt"], t_final=o["t_final"], seed=0, initial=State(o["x0"], o["y0"])
    )
    if o["control"] == "constant":
        phi: Callable[[float], float] = lambda t, k=o["k"]: k
    elif o["control"] == "extremal":
        phi = lambda t, p=spec.params, w0=o["w0"]: extremal_control(p, w0, t)
    else:
        raise ConfigError(f"control must be 'constant' or 'extremal', got {o['control']!r}")
    traj = simulate_controlled(spec.params, config, phi)
    with open(spec.output / "trajectory.csv", "w") as stream:
        _write_trajectory(traj, stream)


def _cmd_lyapunov(spec: RunSpec) -> None:
    o = spec.options
    hw = o["half_width"]
    grid = GridSpec(-hw, hw, -hw, hw, o["nodes"], o["nodes"])
    cert = find_certificate(spec.params, grid, epsilon_max=o["epsilon_max"])
    (spec.output / "certificate.txt").write_text(certificate_record(cert))


def _cmd_action(spec: RunSpec) -> None:
    o = spec.options
    if o["source"] == "file":
        if not o["path_file"]:
            raise ConfigError("source = file requires path_file")
        with open(o["path_file"]) as stream:
            path = read_scalar_path(stream)
    elif o["source"] == "extremal":
        path = extremal_path(
            spec.params, o["w0"], o["horizon"], o["nodes"], direction=o["direction"]
        )
    else:
        raise ConfigError(f"source must be 'extremal' or 'file', got {o['source']!r}")
    value = action(spec.params, path)
    with open(spec.output / "path.csv", "w") as stream:
        write_scalar_path(path, stream)
    (spec.output / "action.txt").write_text(
        f"raw = {value.raw:.17g}\nnormalized = {value.normalized:.17g}\n"
    )


def _cmd_costs(spec: RunSpec) -> None:
    o = spec.options
    if o["method"] not in ("integral", "path-opt", "both"):
        raise ConfigError(f"method must be integral, path-opt or both, got {o['method']!r}")
    horizon = o["horizon"] if o["horizon"] > 0 else None
    primary = "integral" if o["method"] == "both" else o["method"]
    cm = cost_matrix(
        spec.params, delta=o["delta"], method=primary, horizon=horizon, n=o["nodes"]
    )
    with open(spec.output / "costs.csv", "w") as stream:
        _write_cost_table(cm, stream)
    if o["method"] == "both":
        other = cost_matrix(
            spec.params, delta=o["delta"], method="path-opt",
            horizon=horizon, n=o["nodes"],
        )
        with open(spec.output / "comparison.csv", "w") as stream:
            stream.write("from,to,integral,path_opt,abs_diff\n")
            for i in (1, 2, 3):
                for j in (1, 2, 3):
                    if i == j:
                        continue
                    a, b = cm.cost(i, j), other.cost(i, j)
                    stream.write(
                        f"K{i},K{j},{a:.17g},{b:.17g},{abs(a - b):.17g}\n"
                    )


def _cmd_classify(spec: RunSpec) -> None:
    o = spec.options
    measure = classify_limit_measure(spec.params, delta=o["delta"])
    wells = "+".join(f"K{i}" for i in sorted(measure.weights))
    with open(spec.output / "verdict.csv", "w") as stream:
        stream.write("sigma1,argmin_wells,measure\n")
        stream.write(f"{spec.params.sigma1:.17g},{wells},{measure.label}\n")


def _cmd_invariant(spec: RunSpec) -> None:
    o = spec.options
    hist = invariant_experiment(
        spec.params,
        dt=o["dt"],
        t_final=o["t_final"],
        seed=o["seed"],
        n_paths=o["n_paths"],
        delta=o["delta"],
        burn_in_fraction=o["burn_in_fraction"],
        radius=o["radius"],
        initial=o["initial"],
        x0=o["x0"],
        y0=o["y0"],
    )
    with open(spec.output / "occupations.csv", "w") as stream:
        _write_occupations(hist, stream)


_COMMANDS: dict[str, Callable[[RunSpec], None]] = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "flow": _cmd_flow,
    "control": _cmd_control,
    "lyapunov": _cmd_lyapunov,
    "action": _cmd_action,
    "costs": _cmd_costs,
    "classify": _cmd_classify,
    "invariant": _cmd_invariant,
}


def run(spec: RunSpec) -> int:
    """Execute a resolved run: outputs plus manifest; maps failures to exit codes."""
    try:
        spec.output.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        _error_record("io", str(err))
        return EXIT_IO
    try:
        _COMMANDS[spec.command](spec)
        _write_manifest(spec)
    except (
        SimulationDiverged,
        PathOptimizationFailed,
        ClassificationInconsistency,
        DegenerateDiffusion,
        CertificateNotFound,
    ) as err:
        _error_record("numeric", str(err))
        return EXIT_NUMERIC
    except (InvalidParams, ConfigError, ValueError) as err:
        _error_record("config", str(err))
        return EXIT_CONFIG
    except OSError as err:
        _error_record("io", str(err))
        return EXIT_IO
    return EXIT_OK


def _error_record(kind: str, detail: str) -> None:
    sys.stderr.write(f"error_kind = {kind}\nerror_detail = {detail}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degenwell",
        description="Planar double-well diffusion with one shared noise source.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in _OPTION_SCHEMA.items():
        cp = sub.add_parser(command)
        cp.add_argument("--config", help="flat key = value parameter file")
        cp.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one parameter key",
        )
        cp.add_argument("--output", help="output directory")
        for name in schema:
            cp.add_argument(f"--{name.replace('_', '-')}", dest=f"opt_{name}")
    rerun = sub.add_parser("rerun")
    rerun.add_argument("manifest", help="manifest.txt from a previous run")
    rerun.add_argument("--output", help="output directory")
    return parser


def _output_dir(flag: str | None) -> Path:
    if flag:
        return Path(flag)
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def _spec_from_args(args: argparse.Namespace) -> RunSpec:
    record: dict[str, str] = {}
    if args.config:
        record.update(_load_config_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        record[key.strip()] = value.strip()
    params = _params_from_record(record)
    given = {
        name: getattr(args, f"opt_{name}")
        for name in _OPTION_SCHEMA[args.command]
        if getattr(args, f"opt_{name}") is not None
    }
    options = _resolve_options(args.command, given, params)
    return RunSpec(
        command=args.command,
        params=params,
        output=_output_dir(args.output),
        options=options,
    )


def _spec_from_manifest(path: str, output: str | None) -> RunSpec:
    record = _load_config_file(path)
    command = record.pop("command", None)
    if command not in _OPTION_SCHEMA:
        raise ConfigError(f"manifest {path} has no valid command entry")
    param_record = {k: record.pop(k) for k in list(record) if k in PARAM_KEYS}
    params = _params_from_record(param_record)
    options = _resolve_options(command, record, params)
    return RunSpec(
        command=command,
        params=params,
        output=_output_dir(output),
        options=options,
    )


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            spec = _spec_from_manifest(args.manifest, args.output)
        else:
            spec = _spec_from_args(args)
    except (InvalidParams, ConfigError) as err:
        _error_record("config", str(err))
        return EXIT_CONFIG
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
