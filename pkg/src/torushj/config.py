"""Experiment configuration: TOML parsing, defaults, and serialization.

Every field has an explicit default so ``print-config`` can dump the full
effective configuration, and parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field

from .errors import ParameterError
from .problems import ProblemSpec


@dataclass
class SchemeConfig:
    kind: str = "fd"  # fd | sl
    numerical_hamiltonian: str = "lax_friedrichs"  # | separable_1d
    alpha: str | float = "auto"
    alpha_inflation: float = 1.1
    cfl_fraction: float = 0.9
    control_box: str | float = "auto"
    control_samples: int = 33
    polish_iters: int = 25
    warm_start: bool = True
    # > 1 deliberately runs past the CFL bound (negative controls only)
    unsafe_dt_factor: float = 1.0


@dataclass
class RefinementConfig:
    # fd studies refine in space; sl studies refine the time step
    grid_sizes: list[int] = field(default_factory=lambda: [64, 128, 256])
    dts: list[float] = field(default_factory=list)
    # cfl: dt = c * dt_max(h); dt_linear: dt = c*h; dt_sqrt: dt = c*sqrt(h);
    # h_dt2: h = c * dt^2 (refinement driven by the dts list)
    coupling: str = "cfl"
    coupling_constant: float = 0.9


@dataclass
class OracleConfig:
    kind: str = "auto"  # auto | hopf_lax | reference
    multiplier: int = 8
    samples_per_axis: int = 4096
    cache_dir: str = ""


@dataclass
class OutputConfig:
    directory: str = "out"
    norms: list[str] = field(default_factory=lambda: ["1", "2", "4", "inf"])
    snapshot_times: list[float] = field(default_factory=lambda: [0.125, 0.25, 0.5])


@dataclass
class AcceptanceConfig:
    l1_slope_min: float = 0.85
    l1_slope_max: float = 1.6
    l1_r2_min: float = 0.98
    linf_slope_min: float = 0.45
    l2_slope_min: float = 0.70
    l4_slope_min: float = 0.57


@dataclass
class PropertiesConfig:
    suites: list[str] = field(default_factory=lambda: ["scheme"])
    instances: int = 200
    pairs: int = 200
    steps: int = 8
    grid_size: int = 32
    dt_levels: int = 3
    seed: int = 0


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(
        default_factory=lambda: ProblemSpec(dim=1, final_time=0.5)
    )
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    acceptance: AcceptanceConfig = field(default_factory=AcceptanceConfig)
    properties: PropertiesConfig = field(default_factory=PropertiesConfig)

    def validate(self) -> None:
        if self.scheme.kind not in ("fd", "sl"):
            raise ParameterError(f"unknown scheme kind {self.scheme.kind!r}")
        if self.scheme.kind == "fd" and self.problem.has_potential:
            raise ParameterError(
                "the finite-difference scheme solves the potential-free "
                "problem; use the sl scheme for nonzero potentials"
            )
        if self.refinement.coupling not in ("cfl", "dt_linear", "dt_sqrt", "h_dt2"):
            raise ParameterError(
                f"unknown coupling rule {self.refinement.coupling!r}"
            )
        if self.scheme.kind == "sl" and self.refinement.coupling not in ("h_dt2",):
            raise ParameterError(
                "sl rate studies use the h = c*dt^2 coupling so the "
                "interpolation term h/dt refines like dt"
            )
        for p in self.outputs.norms:
            if p not in ("1", "2", "4", "inf"):
                raise ParameterError(f"unsupported norm {p!r}")

    def validate_rates(self) -> None:
        self.validate()
        n_levels = (
            len(self.refinement.dts)
            if self.refinement.coupling == "h_dt2"
            else len(self.refinement.grid_sizes)
        )
        if n_levels < 3:
            raise ParameterError("rate studies need at least 3 refinement levels")


def _problem_from_dict(d: dict) -> ProblemSpec:
    return ProblemSpec(
        dim=int(d.get("dim", 1)),
        final_time=float(d.get("T", 0.5)),
        hamiltonian=d.get("hamiltonian", "quadratic"),
        hamiltonian_params=dict(d.get("hamiltonian_params", {})),
        potential=d.get("potential", "none"),
        potential_params=dict(d.get("potential_params", {})),
        datum=d.get("datum", "cosine"),
        datum_params=dict(d.get("datum_params", {})),
    )


def _fill(cls, d: dict):
    obj = cls()
    for key, val in d.items():
        if not hasattr(obj, key):
            raise ParameterError(f"unknown {cls.__name__} field {key!r}")
        default = getattr(obj, key)
        if isinstance(default, list):
            setattr(obj, key, list(val))
        elif isinstance(default, bool):
            setattr(obj, key, bool(val))
        elif isinstance(default, int) and not isinstance(val, bool):
            setattr(obj, key, int(val))
        elif isinstance(default, float):
            setattr(obj, key, float(val))
        else:
            setattr(obj, key, val)
    return obj


def from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    known = {
        "problem",
        "scheme",
        "refinement",
        "oracle",
        "outputs",
        "acceptance",
        "properties",
    }
    unknown = set(data) - known
    if unknown:
        raise ParameterError(f"unknown config sections {sorted(unknown)}")
    if "problem" in data:
        cfg.problem = _problem_from_dict(data["problem"])
    if "scheme" in data:
        cfg.scheme = _fill(SchemeConfig, data["scheme"])
    if "refinement" in data:
        cfg.refinement = _fill(RefinementConfig, data["refinement"])
    if "oracle" in data:
        cfg.oracle = _fill(OracleConfig, data["oracle"])
    if "outputs" in data:
        cfg.outputs = _fill(OutputConfig, data["outputs"])
    if "acceptance" in data:
        cfg.acceptance = _fill(AcceptanceConfig, data["acceptance"])
    if "properties" in data:
        cfg.properties = _fill(PropertiesConfig, data["properties"])
    return cfg


def load(path) -> ExperimentConfig:
    with open(path, "rb") as f:
        data = tomllib.load(f)
    return from_dict(data)


def loads(text: str) -> ExperimentConfig:
    return from_dict(tomllib.loads(text))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ParameterError(f"cannot serialize {v!r} to TOML")


def _emit_table(name: str, items: dict, out: list[str]) -> None:
    subtables = {k: v for k, v in items.items() if isinstance(v, dict)}
    scalars = {k: v for k, v in items.items() if not isinstance(v, dict)}
    out.append(f"[{name}]")
    for k, v in scalars.items():
        out.append(f"{k} = {_toml_value(v)}")
    out.append("")
    for k, v in subtables.items():
        _emit_table(f"{name}.{k}", v, out)


def dumps(cfg: ExperimentConfig) -> str:
    """Serialize with every effective value explicit."""
    p = cfg.problem
    problem = {
        "dim": p.dim,
        "T": p.final_time,
        "hamiltonian": p.hamiltonian,
        "potential": p.potential,
        "datum": p.datum,
        "hamiltonian_params": dict(p.hamiltonian_params),
        "potential_params": dict(p.potential_params),
        "datum_params": dict(p.datum_params),
    }
    out: list[str] = []
    _emit_table("problem", problem, out)
    for name, section in (
        ("scheme", cfg.scheme),
        ("refinement", cfg.refinement),
        ("oracle", cfg.oracle),
        ("outputs", cfg.outputs),
        ("acceptance", cfg.acceptance),
        ("properties", cfg.properties),
    ):
        _emit_table(name, asdict(section), out)
    return "\n".join(out).rstrip() + "\n"
