import configparser
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .dynamics import EquationKind, IntegratorSpec, NlsParameters, Scheme, gaussian_state, plane_wave_state, sech_state
from .field_core import Boundary, Grid1D, PhasePair, RealField, make_grid
from .functionals import FUNCTIONAL_NAME, FunctionalSpec, functional_from_name
from .structures import SchrodingerOperator

# Built-in defaults; None marks values that depend on other settings
_DEFAULT_CONFIG: Dict[str, Dict[str, Optional[str]]] = {
    "experiment": {"equation": None, "seed": "0"},
    "grid": {"length": "20.0", "points": "256", "boundary": "periodic", "origin": None},
    "physics": {"hbar": "1.0", "mass": "1.0", "b": "0.0", "potential": "zero"},
    "initial": {"state": "gaussian(0.0, 1.0, 0.0)"},
    "integrator": {"scheme": "strang-split", "dt": "1e-3", "steps": "1000", "stride": "10"},
    "monitors": {"functionals": None},
    "check": {"states": "20", "tolerance": "1e-8", "structure_tolerance": "1e-5", "jacobi_points": "192"},
    "output": {"csv": "trajectory.csv", "json": "report.json"},
}

_DEFAULT_MONITORS = {EquationKind.LSE: "H0, H1, H2", EquationKind.NLS: "K-1, K0, K1"}
_CALL = re.compile(r"^\s*(?P<name>[a-z][a-z-]*)\s*(?:\((?P<args>.*)\))?\s*$")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` is set for parse errors"""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class GridSettings:
    length: float
    points: int
    boundary: Boundary
    origin: float

    def build(self) -> Grid1D:
        return make_grid(self.length, self.points, self.boundary, self.origin)


@dataclass(frozen=True)
class PotentialSpec:
    """zero | harmonic(omega) | file(path)"""

    kind: str = "zero"
    omega: float = 0.0
    path: Optional[Path] = None

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"


@dataclass(frozen=True)
class PhysicsSettings:
    hbar: float
    mass: float
    b: float
    potential: PotentialSpec


@dataclass(frozen=True)
class InitialSpec:
    """gaussian(center, width, momentum) | plane-wave(k) | sech(amplitude, width, phase-slope) | file(path)"""

    kind: str
    parameters: Tuple[float, ...] = ()
    path: Optional[Path] = None


@dataclass(frozen=True)
class CheckSettings:
    states: int
    tolerance: float
    structure_tolerance: float
    jacobi_points: int


@dataclass(frozen=True)
class OutputSettings:
    csv: str
    json: str


@dataclass(frozen=True)
class ExperimentConfig:
    equation: EquationKind
    seed: int
    grid: GridSettings
    physics: PhysicsSettings
    initial: InitialSpec
    integrator: IntegratorSpec
    monitors: List[str] = field(default_factory=list)
    check: Optional[CheckSettings] = None
    output: Optional[OutputSettings] = None

    def build_grid(self) -> Grid1D:
        return self.grid.build()

    def build_operator(self, grid: Optional[Grid1D] = None) -> SchrodingerOperator:
        grid = grid or self.build_grid()
        physics = self.physics
        spec = physics.potential
        if spec.kind == "harmonic":
            return SchrodingerOperator.harmonic(grid, physics.hbar, physics.mass, spec.omega)
        if spec.kind == "file":
            return SchrodingerOperator(physics.hbar, physics.mass, RealField(grid, _tabulated(spec.path, grid, 1)[0]))
        return SchrodingerOperator.free(grid, physics.hbar, physics.mass)

    def build_nls(self) -> NlsParameters:
        return NlsParameters(self.physics.hbar, self.physics.mass, self.physics.b)

    def dynamics_parameters(self, grid: Optional[Grid1D] = None):
        return self.build_operator(grid) if self.equation is EquationKind.LSE else self.build_nls()

    def initial_state(self, grid: Optional[Grid1D] = None) -> PhasePair:
        grid = grid or self.build_grid()
        spec = self.initial
        if spec.kind == "gaussian":
            return gaussian_state(grid, *spec.parameters)
        if spec.kind == "plane-wave":
            return plane_wave_state(grid, *spec.parameters)
        if spec.kind == "sech":
            return sech_state(grid, *spec.parameters)
        q, p = _tabulated(spec.path, grid, 2)
        return PhasePair.from_arrays(grid, q, p)

    def monitored(self, grid: Optional[Grid1D] = None) -> Dict[str, FunctionalSpec]:
        operator = self.build_operator(grid) if self.equation is EquationKind.LSE else None
        physics = self.physics
        return {name: functional_from_name(name, operator, physics.hbar, physics.mass, physics.b) for name in self.monitors}

    def as_dict(self) -> Dict[str, Any]:
        """Plain data echo of the configuration, for reports"""

        def plain(value):
            if isinstance(value, dict):
                return {key: plain(item) for key, item in value.items()}
            if isinstance(value, (list, tuple)):
                return [plain(item) for item in value]
            if isinstance(value, Path):
                return str(value)
            if hasattr(value, "value"):
                return value.value
            return value

        return plain(asdict(self))


def _tabulated(path: Path, grid: Grid1D, columns: int) -> List[np.ndarray]:
    """Columns of a whitespace-separated (x, values...) table, linearly interpolated onto the grid"""
    table = np.atleast_2d(np.loadtxt(path))
    if table.shape[1] != columns + 1:
        raise ConfigError(f"{path}: expected {columns + 1} columns (x and {columns} value column(s)), found {table.shape[1]}")
    order = np.argsort(table[:, 0])
    x = table[order, 0]
    return [np.interp(grid.x, x, table[order, column]) for column in range(1, columns + 1)]


def _merge_configs(base: Dict[str, Dict[str, Any]], override: Dict[str, Dict[str, Any]]) -> Dict[str, Dict[str, Any]]:
    """
    Merge two sectioned configuration dictionaries; None values in the override never replace base values.

    Args:
        base: The base configuration, section -> key -> value.
        override: The configuration to merge on top.
    """
    result = {section: dict(values) for section, values in base.items()}

    for section, values in override.items():
        merged = result.setdefault(section, {})
        for key, value in values.items():
            if value is not None:
                merged[key] = value

    return result


def _parse_config_file(config_path: Path) -> Dict[str, Dict[str, str]]:
    """Parse an experiment file into section -> key -> raw text, rejecting unknown sections and keys."""

    config = configparser.ConfigParser(
        interpolation=None,
        inline_comment_prefixes=("#", ";"),
        comment_prefixes=("#", ";"),
        delimiters=("=",),
    )

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            config.read_file(f)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError(f"{config_path}, line {e.lineno}: settings must follow a [section] header", line=e.lineno) from None
    except configparser.ParsingError as e:
        errors = getattr(e, "errors", None)
        line = errors[0][0] if errors else None
        raise ConfigError(f"{config_path}, line {line}: cannot parse {errors[0][1] if errors else ''}".rstrip(), line=line) from None
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        raise ConfigError(f"{config_path}, line {line}: {e.message}", line=line) from None

    result = {}
    for section in config.sections():
        if section not in _DEFAULT_CONFIG:
            raise ConfigError(f"Unknown section [{section}] in {config_path}\n" f"Known sections: {', '.join('[' + name + ']' for name in _DEFAULT_CONFIG)}")
        result[section] = {}
        for key, value in config.items(section):
            if key not in _DEFAULT_CONFIG[section]:
                raise ConfigError(f"Unknown key '{key}' in [{section}]\n" f"Known keys: {', '.join(_DEFAULT_CONFIG[section])}")
            result[section][key] = value.strip()

    return result


def _number(config: Dict[str, Dict[str, Any]], section: str, key: str, kind=float, minimum: Optional[float] = None, strict: bool = False):
    raw = config[section][key]
    try:
        value = kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key} must be {'an integer' if kind is int else 'a number'}, got {raw!r}") from None
    if kind is float and not np.isfinite(value):
        raise ConfigError(f"[{section}] {key} must be finite, got {raw!r}")
    if minimum is not None and (value <= minimum if strict else value < minimum):
        bound = f"greater than {minimum}" if strict else f"at least {minimum}"
        raise ConfigError(f"[{section}] {key} must be {bound}, got {raw}")
    return value


def _call(section: str, key: str, raw: str) -> Tuple[str, List[str]]:
    match = _CALL.match(raw)
    if not match:
        raise ConfigError(f"[{section}] {key} must look like name or name(arg, ...), got {raw!r}")
    args = match.group("args")
    return match.group("name"), [arg.strip() for arg in args.split(",")] if args and args.strip() else []


def _floats(section: str, key: str, name: str, args: List[str], count: int) -> Tuple[float, ...]:
    if len(args) != count:
        raise ConfigError(f"[{section}] {key}: {name} takes {count} argument(s), got {len(args)}")
    try:
        return tuple(float(arg) for arg in args)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {name} arguments must be numbers, got {', '.join(args)}") from None


def _existing_file(section: str, key: str, args: List[str], base_dir: Path) -> Path:
    if len(args) != 1:
        raise ConfigError(f"[{section}] {key}: file takes one path argument")
    path = Path(args[0])
    if not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise ConfigError(f"[{section}] {key}: file {path} does not exist")
    return path


def _potential(raw: str, base_dir: Path) -> PotentialSpec:
    name, args = _call("physics", "potential", raw)
    if name == "zero":
        _floats("physics", "potential", name, args, 0)
        return PotentialSpec()
    if name == "harmonic":
        return PotentialSpec("harmonic", omega=_floats("physics", "potential", name, args, 1)[0])
    if name == "file":
        return PotentialSpec("file", path=_existing_file("physics", "potential", args, base_dir))
    raise ConfigError(f"[physics] potential must be zero, harmonic(omega) or file(path), got {raw!r}")


_INITIAL_ARITY = {"gaussian": 3, "plane-wave": 1, "sech": 3}


def _initial(raw: str, base_dir: Path) -> InitialSpec:
    name, args = _call("initial", "state", raw)
    if name in _INITIAL_ARITY:
        parameters = _floats("initial", "state", name, args, _INITIAL_ARITY[name])
        if name in ("gaussian", "sech") and parameters[1] <= 0:
            raise ConfigError(f"[initial] state: {name} width must be positive, got {parameters[1]}")
        return InitialSpec(name, parameters)
    if name == "file":
        return InitialSpec("file", path=_existing_file("initial", "state", args, base_dir))
    raise ConfigError(
        f"[initial] state must be one of gaussian(center, width, momentum), plane-wave(k), sech(amplitude, width, phase-slope) or file(path), got {raw!r}"
    )


def validate_config(config: Dict[str, Dict[str, Any]], base_dir: Path = Path(".")) -> ExperimentConfig:
    """
    Turn merged raw settings into a typed ExperimentConfig, with error messages naming the offending field.
    """

    equation_raw = config["experiment"]["equation"]
    if equation_raw is None:
        raise ConfigError("No equation specified. To fix this:\n" "add below configuration to the experiment file:\n" "   [experiment]\n" "   equation = lse")
    try:
        equation = EquationKind(equation_raw.lower())
    except ValueError:
        raise ConfigError(f"[experiment] equation must be lse or nls, got {equation_raw!r}") from None

    seed = _number(config, "experiment", "seed", int, minimum=0)

    try:
        boundary = Boundary(config["grid"]["boundary"].lower())
    except ValueError:
        raise ConfigError(f"[grid] boundary must be periodic or decaying, got {config['grid']['boundary']!r}") from None
    length = _number(config, "grid", "length", minimum=0, strict=True)
    points = _number(config, "grid", "points", int, minimum=8)
    if points % 2:
        raise ConfigError(f"[grid] points must be even, got {points}")
    origin = -0.5 * length if config["grid"]["origin"] is None else _number(config, "grid", "origin")
    grid = GridSettings(length, points, boundary, origin)

    potential = _potential(config["physics"]["potential"], base_dir)
    physics = PhysicsSettings(
        hbar=_number(config, "physics", "hbar", minimum=0, strict=True),
        mass=_number(config, "physics", "mass", minimum=0, strict=True),
        b=_number(config, "physics", "b"),
        potential=potential,
    )
    if equation is EquationKind.NLS and not potential.is_zero:
        raise ConfigError("[physics] potential must be zero for equation = nls")

    initial = _initial(config["initial"]["state"], base_dir)

    try:
        scheme = Scheme(config["integrator"]["scheme"].lower())
    except ValueError:
        raise ConfigError(f"[integrator] scheme must be strang-split or rk4, got {config['integrator']['scheme']!r}") from None
    if scheme is Scheme.STRANG and boundary is not Boundary.PERIODIC:
        raise ConfigError("[integrator] scheme = strang-split needs [grid] boundary = periodic\n" "Use scheme = rk4 on decaying grids.")
    integrator = IntegratorSpec(
        scheme=scheme,
        dt=_number(config, "integrator", "dt", minimum=0, strict=True),
        steps=_number(config, "integrator", "steps", int, minimum=1),
        stride=_number(config, "integrator", "stride", int, minimum=1),
    )

    monitors_raw = config["monitors"]["functionals"] or _DEFAULT_MONITORS[equation]
    monitors = [name.strip() for name in monitors_raw.split(",") if name.strip()]
    if not monitors:
        raise ConfigError("[monitors] functionals must name at least one functional")
    for name in monitors:
        match = FUNCTIONAL_NAME.match(name)
        if not match:
            raise ConfigError(f"[monitors] functionals: unknown functional {name!r}; expected H<n>, K-1, K0 or K1")
        if match.group("order") is not None and equation is EquationKind.NLS:
            raise ConfigError(f"[monitors] functionals: {name} is only defined for equation = lse")
    if len(set(monitors)) != len(monitors):
        raise ConfigError("[monitors] functionals must not repeat a name")

    check = CheckSettings(
        states=_number(config, "check", "states", int, minimum=1),
        tolerance=_number(config, "check", "tolerance", minimum=0, strict=True),
        structure_tolerance=_number(config, "check", "structure_tolerance", minimum=0, strict=True),
        jacobi_points=_number(config, "check", "jacobi_points", int, minimum=8),
    )
    if check.jacobi_points % 2:
        raise ConfigError(f"[check] jacobi_points must be even, got {check.jacobi_points}")

    output = OutputSettings(csv=config["output"]["csv"], json=config["output"]["json"])
    for key, value in asdict(output).items():
        if not value or Path(value).name != value:
            raise ConfigError(f"[output] {key} must be a plain file name, got {value!r}")

    return ExperimentConfig(equation, seed, grid, physics, initial, integrator, monitors, check, output)


def parse_config(path, overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> ExperimentConfig:
    """
    Load an experiment file with priority order:
    1. Command line overrides (highest priority)
    2. The experiment file
    3. Built-in defaults (lowest priority)
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")

    config = _merge_configs(_DEFAULT_CONFIG, _parse_config_file(path))
    if overrides:
        config = _merge_configs(config, overrides)

    return validate_config(config, base_dir=path.parent)
