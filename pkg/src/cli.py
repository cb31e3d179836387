"""
Command-line front end.

    python -m src.cli classify --drift down --gamma 0.5 --theta 0.7 --side positive
    python -m src.cli constants --theta 0.5 --delta 0
    python -m src.cli phase-sweep --gamma-grid 0.1:0.9:0.1 --theta-grid 0.1:0.9:0.1

Settings come from an optional INI file (--config) with one section per
group (model, dist, run, drift, sweep, constants, output); flags override the
file, and --print-config dumps the effective configuration.
"""

import argparse
import configparser
import csv
import json
import os
import sys
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator

from . import __version__
from .chain import Drift, ModelSpec, simulate, write_trajectory_csv
from .classify import CRITICAL_TOL, classify, lyapunov_recipe
from .config import configure_logging, get_settings
from .dist import CProfile, Innovation, InnovationSpec, PointMass, Side
from .drift import Condition, ConditionKind, LyapunovSpec, check_condition, geometric_grid
from .errors import ConfigError, DomainError, EstimationError, HeavyTailError, NumericalError
from .montecarlo import run_campaign, run_passages, summarize, write_samples_csv
from .specialfn import delta0_k, delta0_l, k_const, l_const

logger = logging.getLogger(__name__)

SWEEP_SCHEMA = "# heavytail phase-sweep v1"
EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2


class Subcommand(str, Enum):
    CLASSIFY = "classify"
    SIMULATE = "simulate"
    PASSAGE = "passage"
    DRIFT_CHECK = "drift-check"
    CONSTANTS = "constants"
    PHASE_SWEEP = "phase-sweep"


def parse_grid(text: str) -> List[float]:
    """
    Parse "a:b:step" (inclusive), "a,b,c" or a single number.

    Raises:
        ConfigError: On malformed or empty grids.
    """
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError(text)
            lo, hi, step = parts
            count = int((hi - lo) / step + 1e-9) + 1
            values = [round(lo + k * step, 12) for k in range(count)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"malformed grid {text!r}; use a:b:step or a,b,c") from None
    if not values:
        raise ConfigError(f"empty grid {text!r}")
    return values


def parse_range(text: str) -> Tuple[float, float]:
    """Parse "lo:hi" for geometric drift grids."""
    try:
        lo, hi = (float(p) for p in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"malformed range {text!r}; use lo:hi") from None
    if not 0 < lo < hi:
        raise ConfigError(f"range {text!r} needs 0 < lo < hi")
    return lo, hi


class ModelSection(BaseModel):
    drift: Drift = Drift.DOWN
    gamma: float = Field(default=0.5, gt=0.0, lt=1.0)
    reflect: bool = True
    target_a: float = Field(default=2.0, ge=0.0)


class DistSection(BaseModel):
    side: Side = Side.POSITIVE_ONLY
    theta: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    theta_right: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    theta_left: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    c: Optional[float] = Field(default=None, gt=0.0)
    c_right: Optional[float] = Field(default=None, gt=0.0)
    c_left: Optional[float] = Field(default=None, gt=0.0)
    y0: float = Field(default=1.0, gt=0.0)
    c_profile: CProfile = CProfile.CONSTANT
    amplitude: float = Field(default=0.0, ge=0.0, lt=1.0)
    lattice: bool = False
    point_mass: Optional[float] = None


class RunSection(BaseModel):
    seed: Optional[int] = None
    x0: float = Field(default=100.0, ge=0.0)
    horizon: int = Field(default=10_000, ge=1)
    n: int = Field(default=1000, ge=0)
    index: int = Field(default=0, ge=0)
    workers: Optional[int] = Field(default=None, ge=1)


class DriftSection(BaseModel):
    delta: Optional[float] = None
    clipped: bool = False
    condition: Optional[ConditionKind] = None
    p: float = Field(default=1.0, gt=0.0)
    r: Optional[float] = Field(default=None, gt=0.0)
    c: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    grid: str = "1e2:1e6"
    per_decade: int = Field(default=64, ge=1)

    @field_validator("grid")
    @classmethod
    def _grid(cls, value: str) -> str:
        parse_range(value)
        return value


class SweepSection(BaseModel):
    gamma_grid: str = "0.1:0.9:0.1"
    theta_grid: str = "0.1:0.9:0.1"
    campaign: bool = False
    n: int = Field(default=200, ge=1)
    horizon: int = Field(default=10_000, ge=1)

    @field_validator("gamma_grid", "theta_grid")
    @classmethod
    def _grids(cls, value: str) -> str:
        parse_grid(value)
        return value


class ConstantsSection(BaseModel):
    theta: str = "0.5"
    delta: str = "0"
    c: Optional[str] = None

    @field_validator("theta", "delta", "c")
    @classmethod
    def _grids(cls, value: Optional[str]) -> Optional[str]:
        if value is not None:
            parse_grid(value)
        return value


class OutputSection(BaseModel):
    dir: str = "out"


SECTIONS = ("model", "dist", "run", "drift", "sweep", "constants", "output")


class RunConfig(BaseModel):
    """Effective configuration of one CLI invocation."""
    subcommand: Subcommand
    model: ModelSection = Field(default_factory=ModelSection)
    dist: DistSection = Field(default_factory=DistSection)
    run: RunSection = Field(default_factory=RunSection)
    drift: DriftSection = Field(default_factory=DriftSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    constants: ConstantsSection = Field(default_factory=ConstantsSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def to_ini(self) -> str:
        """Serialise to INI text; from_ini(to_ini()) gives back an equal config."""
        data = self.model_dump(mode="json")
        lines = ["[main]", f"subcommand = {data['subcommand']}"]
        for section in SECTIONS:
            lines.append("")
            lines.append(f"[{section}]")
            for key, value in data[section].items():
                if value is None:
                    continue
                if isinstance(value, bool):
                    value = "true" if value else "false"
                elif isinstance(value, float):
                    value = repr(value)
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ini(cls, text: str, subcommand: Optional[str] = None) -> "RunConfig":
        """
        Parse INI text. A subcommand argument overrides [main] subcommand.

        Raises:
            ConfigError: Naming the offending field and line.
        """
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}", line=getattr(exc, "lineno", None)) from None

        data: Dict[str, Any] = {}
        for section in parser.sections():
            if section == "main":
                continue
            if section not in SECTIONS:
                raise ConfigError("unknown section", field=section, line=_line_of(text, section))
            known = cls.model_fields[section].annotation.model_fields
            for key, value in parser.items(section):
                if key not in known:
                    raise ConfigError("unknown key", field=f"{section}.{key}", line=_line_of(text, section, key))
                data.setdefault(section, {})[key] = value
        data["subcommand"] = subcommand or parser.get("main", "subcommand", fallback=None)
        if data["subcommand"] is None:
            raise ConfigError("no subcommand given", field="main.subcommand")
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            err = exc.errors()[0]
            loc = [str(p) for p in err["loc"]]
            line = _line_of(text, loc[0], loc[1]) if len(loc) > 1 else None
            raise ConfigError(err["msg"], field=".".join(loc), line=line) from None

    def with_overrides(self, overrides: Dict[Tuple[str, str], Any]) -> "RunConfig":
        """Apply (section, key) -> value overrides and re-validate."""
        data = self.model_dump(mode="json")
        for (section, key), value in overrides.items():
            data[section][key] = value.value if isinstance(value, Enum) else value
        try:
            return RunConfig.model_validate(data)
        except ValidationError as exc:
            err = exc.errors()[0]
            raise ConfigError(err["msg"], field=".".join(str(p) for p in err["loc"])) from None

    def seed(self) -> int:
        return self.run.seed if self.run.seed is not None else get_settings().seed

    def model_spec(self, gamma: Optional[float] = None) -> ModelSpec:
        m = self.model
        return ModelSpec(drift=m.drift, gamma=m.gamma if gamma is None else gamma,
                         reflect=m.reflect, target_a=m.target_a)

    def innovation(self, theta: Optional[float] = None) -> Innovation:
        """Innovation law; theta (sweep value) replaces the deciding tail's index."""
        d = self.dist
        if d.point_mass is not None:
            return PointMass(d.point_mass, lattice=d.lattice)
        theta_right = d.theta_right if d.theta_right is not None else d.theta
        theta_left = d.theta_left if d.theta_left is not None else d.theta
        if theta is not None:
            if self.model.drift == Drift.DOWN:
                theta_right = theta
            else:
                theta_left = theta
        return InnovationSpec(
            side=d.side,
            theta_right=theta_right,
            theta_left=theta_left,
            c_right=d.c_right if d.c_right is not None else d.c,
            c_left=d.c_left if d.c_left is not None else d.c,
            y0=d.y0,
            c_profile=d.c_profile,
            amplitude=d.amplitude,
            lattice=d.lattice,
        )


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return number
        elif key is not None and current == section and line.split("=")[0].strip().lower() == key:
            return number
    return None


# flag dest -> (section, key)
FLAG_MAP: Dict[str, Tuple[str, str]] = {
    "drift": ("model", "drift"),
    "gamma": ("model", "gamma"),
    "reflect": ("model", "reflect"),
    "target_a": ("model", "target_a"),
    "side": ("dist", "side"),
    "theta": ("dist", "theta"),
    "theta_right": ("dist", "theta_right"),
    "theta_left": ("dist", "theta_left"),
    "c": ("dist", "c"),
    "c_right": ("dist", "c_right"),
    "c_left": ("dist", "c_left"),
    "y0": ("dist", "y0"),
    "c_profile": ("dist", "c_profile"),
    "amplitude": ("dist", "amplitude"),
    "lattice": ("dist", "lattice"),
    "point_mass": ("dist", "point_mass"),
    "seed": ("run", "seed"),
    "x0": ("run", "x0"),
    "horizon": ("run", "horizon"),
    "n": ("run", "n"),
    "index": ("run", "index"),
    "workers": ("run", "workers"),
    "delta": ("drift", "delta"),
    "clipped": ("drift", "clipped"),
    "condition": ("drift", "condition"),
    "p": ("drift", "p"),
    "r": ("drift", "r"),
    "moment_c": ("drift", "c"),
    "c1": ("drift", "c1"),
    "c2": ("drift", "c2"),
    "grid": ("drift", "grid"),
    "per_decade": ("drift", "per_decade"),
    "gamma_grid": ("sweep", "gamma_grid"),
    "theta_grid": ("sweep", "theta_grid"),
    "campaign": ("sweep", "campaign"),
    "sweep_n": ("sweep", "n"),
    "sweep_horizon": ("sweep", "horizon"),
    "const_theta": ("constants", "theta"),
    "const_delta": ("constants", "delta"),
    "const_c": ("constants", "c"),
    "out_dir": ("output", "dir"),
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file; flags override it")
    common.add_argument("--print-config", action="store_true", help="Print the effective config and exit")
    common.add_argument("--seed", type=int, help="Master seed (env HEAVYTAIL_SEED)")
    common.add_argument("--log-level", help="Logging level (env HEAVYTAIL_LOG_LEVEL)")
    common.add_argument("--out-dir", help="Output directory")
    return common


def _model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--drift", choices=[d.value for d in Drift])
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--reflect", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--target-a", type=float)
    parser.add_argument("--side", choices=[s.value for s in Side])
    parser.add_argument("--theta", type=float, help="Tail index of every active side")
    parser.add_argument("--theta-right", type=float)
    parser.add_argument("--theta-left", type=float)
    parser.add_argument("--c", type=float, help="Tail constant of every active side")
    parser.add_argument("--c-right", type=float)
    parser.add_argument("--c-left", type=float)
    parser.add_argument("--y0", type=float)
    parser.add_argument("--c-profile", choices=[p.value for p in CProfile])
    parser.add_argument("--amplitude", type=float)
    parser.add_argument("--lattice", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--point-mass", type=float, help="Deterministic innovation value")


def _run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x0", type=float)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--n", type=int)
    parser.add_argument("--index", type=int)
    parser.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavytail", description="Heavy-tailed sublinear-drift chains")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common_parser()
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("classify", parents=[common], help="Print the regime of a parameter point")
    _model_flags(p)

    p = sub.add_parser("simulate", parents=[common], help="Write one trajectory as CSV")
    _model_flags(p)
    _run_flags(p)

    p = sub.add_parser("passage", parents=[common], help="Run a passage-time campaign")
    _model_flags(p)
    _run_flags(p)

    p = sub.add_parser("drift-check", parents=[common], help="Certify a drift criterion on a grid")
    _model_flags(p)
    p.add_argument("--delta", type=float, help="Lyapunov exponent (default: proof recipe)")
    p.add_argument("--clipped", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--condition", choices=[k.value for k in ConditionKind])
    p.add_argument("--p", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--moment-c", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--grid", help="Geometric grid range lo:hi")
    p.add_argument("--per-decade", type=int)

    p = sub.add_parser("constants", parents=[common], help="Print K, L and delta0 tables")
    p.add_argument("--theta", dest="const_theta", help="theta grid")
    p.add_argument("--delta", dest="const_delta", help="delta grid")
    p.add_argument("--c", dest="const_c", help="c grid for the delta0 roots")

    p = sub.add_parser("phase-sweep", parents=[common], help="Classify over a (gamma, theta) grid")
    _model_flags(p)
    p.add_argument("--x0", type=float)
    p.add_argument("--gamma-grid")
    p.add_argument("--theta-grid")
    p.add_argument("--campaign", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--sweep-n", type=int)
    p.add_argument("--sweep-horizon", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (if any) plus flag overrides."""
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError("config file not found", field=str(path))
        config = RunConfig.from_ini(path.read_text(), subcommand=args.subcommand)
    else:
        config = RunConfig(subcommand=args.subcommand)
    overrides = {
        FLAG_MAP[dest]: value
        for dest, value in vars(args).items()
        if dest in FLAG_MAP and value is not None
    }
    return config.with_overrides(overrides)


def _output_dir(config: RunConfig) -> Path:
    out = Path(config.output.dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", field="output.dir") from None
    if not os.access(out, os.W_OK):
        raise ConfigError("output directory is not writable", field="output.dir")
    return out


def _emit(payload: Any) -> None:
    print(json.dumps(payload, indent=2))


def cmd_classify(config: RunConfig) -> int:
    dist = config.innovation()
    if not isinstance(dist, InnovationSpec):
        raise ConfigError("classify needs a heavy-tailed law, not a point mass", field="dist.point_mass")
    _emit(classify(config.model_spec(), dist).to_dict())
    return EXIT_OK


def _maybe(fn, *args) -> Optional[float]:
    try:
        value = fn(*args)
    except DomainError:
        return None
    return getattr(value, "delta0", value)


def constants_table(thetas: Sequence[float], deltas: Sequence[float], cs: Sequence[float]) -> Dict[str, Any]:
    """K and L on a (theta, delta) grid and the delta0 roots on a (c, theta) grid."""
    rows = [
        {"theta": t, "delta": d, "K": _maybe(k_const, d, t), "L": _maybe(l_const, d, t)}
        for t in thetas for d in deltas
    ]
    roots = [
        {"c": c, "theta": t, "delta0_k": _maybe(delta0_k, c, t), "delta0_l": _maybe(delta0_l, c, t)}
        for c in cs for t in thetas
    ]
    return {"constants": rows, "roots": roots}


def cmd_constants(config: RunConfig) -> int:
    c = config.constants
    cs = parse_grid(c.c) if c.c is not None else []
    _emit(constants_table(parse_grid(c.theta), parse_grid(c.delta), cs))
    return EXIT_OK


def cmd_simulate(config: RunConfig) -> int:
    out = _output_dir(config)
    r = config.run
    traj = simulate(config.model_spec(), config.innovation(), r.x0, r.horizon, config.seed(), r.index)
    path = write_trajectory_csv(out / "trajectory.csv", traj)
    logger.info(f"Trajectory written to {path}")
    _emit({"trajectory": str(path), "steps": r.horizon, "final_state": float(traj[-1])})
    return EXIT_OK


def cmd_passage(config: RunConfig) -> int:
    out = _output_dir(config)
    r = config.run
    if r.n < 1:
        raise ConfigError("a campaign needs n >= 1", field="run.n")
    seed = config.seed()
    batch = run_passages(config.model_spec(), config.innovation(), r.x0, r.n, r.horizon, seed, r.workers)
    summary = summarize(batch, r.x0, seed)
    write_samples_csv(out / "samples.csv", batch)
    summary.write_json(out / "summary.json")
    logger.info(f"Samples and summary written to {out}")
    _emit(summary.to_dict())
    return EXIT_OK


def cmd_drift_check(config: RunConfig) -> int:
    out = _output_dir(config)
    model, dist = config.model_spec(), config.innovation()
    d = config.drift
    if d.delta is None or d.condition is None:
        if not isinstance(dist, InnovationSpec):
            raise ConfigError("a point-mass law needs explicit --delta and --condition", field="drift.delta")
        recipe = lyapunov_recipe(model, dist)
    lyap = LyapunovSpec(d.delta, d.clipped or d.delta < 0) if d.delta is not None else recipe.lyapunov
    if d.condition is not None:
        condition = Condition(d.condition, p=d.p, c=d.c, r=d.r, c1=d.c1, c2=d.c2)
    else:
        condition = recipe.condition
    lo, hi = parse_range(d.grid)
    grid = [x for x in geometric_grid(lo, hi, d.per_decade) if x > model.target_a]
    report = check_condition(model, dist, lyap, condition, grid)
    report.write_csv(out / "drift_report.csv")
    report.write_json(out / "drift_report.json")
    _emit(report.to_dict())
    return EXIT_OK


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def phase_sweep(config: RunConfig) -> List[Dict[str, Any]]:
    """Classification (and optionally a small campaign) at every (gamma, theta)."""
    rows = []
    gammas = parse_grid(config.sweep.gamma_grid)
    thetas = parse_grid(config.sweep.theta_grid)
    for gamma in gammas:
        for theta in thetas:
            model = config.model_spec(gamma)
            dist = config.innovation(theta)
            verdict = classify(model, dist)
            row = {
                "gamma": gamma,
                "theta": theta,
                "regime": verdict.regime.value,
                "q_star": verdict.q_star,
                "delta0": verdict.delta0,
                "critical": int(abs(theta - (1.0 - gamma)) <= CRITICAL_TOL),
            }
            if config.sweep.campaign:
                summary = run_campaign(model, dist, config.run.x0, config.sweep.n, config.sweep.horizon,
                                       config.seed(), config.run.workers)
                row["hit_fraction"] = summary.return_prob_lower
            rows.append(row)
        logger.info(f"Swept gamma={gamma}")
    return rows


def cmd_phase_sweep(config: RunConfig) -> int:
    out = _output_dir(config)
    rows = phase_sweep(config)
    columns = ["gamma", "theta", "regime", "q_star", "delta0", "critical"]
    if config.sweep.campaign:
        columns.append("hit_fraction")
    path = out / "phase_sweep.csv"
    with path.open("w", newline="") as handle:
        handle.write(SWEEP_SCHEMA + "\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                row[col] if isinstance(row[col], (str, int)) else _fmt(row[col])
                for col in columns
            ])
    logger.info(f"Phase sweep with {len(rows)} rows written to {path}")
    _emit({"phase_sweep": str(path), "rows": len(rows)})
    return EXIT_OK


COMMANDS = {
    Subcommand.CLASSIFY: cmd_classify,
    Subcommand.SIMULATE: cmd_simulate,
    Subcommand.PASSAGE: cmd_passage,
    Subcommand.DRIFT_CHECK: cmd_drift_check,
    Subcommand.CONSTANTS: cmd_constants,
    Subcommand.PHASE_SWEEP: cmd_phase_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on numerical or estimation failures, 2 on
        configuration or domain errors.
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = resolve_config(args)
        if args.print_config:
            print(config.to_ini(), end="")
            return EXIT_OK
        return COMMANDS[config.subcommand](config)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, EstimationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HeavyTailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
