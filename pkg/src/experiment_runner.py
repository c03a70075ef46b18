"""
Experiment Runner for the cloaking toolkit.

Loads experiment configurations, dispatches them to the design, radial
solver and ray tracer modules, writes data files and a run manifest.
"""

import logging
import math
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional

import pandas as pd
import yaml

from . import __version__
from .analysis import RunAnalyzer, error_summary, monotonicity_table, ray_summary
from .designs import (
    QuantumCloakSpec,
    cloak_metric_field,
    collimator_warp,
    free_quantum_profile,
    homogeneous_profile,
    ideal_cloak_profile,
    layered_isotropic_profile,
    product_warp,
    quantum_potential_profile,
    truncated_cloak_profile,
    wormhole_geometry,
)
from .errors import CloakingError, ConfigError, PreconditionError, exit_code_for
from .output import write_csv, write_json
from .radial import (
    check_quantum_preconditions,
    cloak_convergence_sweep,
    dn_spectrum,
    free_dn_spectrum,
    hidden_flux_sweep,
    quantum_dn_convergence,
    trapped_state_scan,
)
from .rays import RayState, compare_traces, polyline_frame, ray_fan, trace_rays, wormhole_trace

KINDS = (
    "design-dump",
    "dn-spectrum",
    "cloak-converge",
    "quantum-converge",
    "trapped-scan",
    "rays",
    "wormhole-rays",
)
DESIGNS = ("homogeneous", "ideal-cloak", "truncated-cloak", "layered", "quantum", "free-quantum")
FORMATS = ("csv", "json")
METHODS = ("auto", "ode")
OUTPUT_ENV = "CLOAKING_OUTPUT_DIR"

# Built-in parameter defaults per experiment kind (config.yaml may override)
DEFAULT_PARAMETERS: Dict[str, Dict[str, Any]] = {
    "design-dump": {"design": "ideal-cloak", "R": 1.5, "n": 8, "E": 1.0, "W": None, "points": 50,
                    "bulk_mode": "exact"},
    "dn-spectrum": {"design": "truncated-cloak", "R": 1.5, "n": 8, "omega": 0.0, "E": None, "W": None,
                    "l_max": 8, "method": "auto", "bulk_mode": "exact"},
    "cloak-converge": {"omega": 1.0, "l_max": 4, "R_list": [1.5, 1.25, 1.1, 1.05, 1.01], "method": "auto"},
    "quantum-converge": {"E": 1.0, "W": None, "l_max": 4, "n_list": [4, 8, 16, 32], "check_preconditions": True},
    "trapped-scan": {"n": 16, "l": 0, "W": None, "energy_range": [15.0, 25.0], "points": 201, "refine": True},
    "rays": {"count": 100, "impact_range": [0.1, 1.9], "start_x": -3.0, "random": True, "exit_radius": 4.0,
             "t_max": 100.0, "polylines": True},
    "wormhole-rays": {"separation": 4.0, "warp": "product", "r_min": 0.2, "handle_length": 1.0,
                      "impacts": [0.0, 0.5], "start_z": -3.0, "t_max": 60.0},
}


def _field_lines(text: str) -> Dict[str, int]:
    """Map dotted key paths of a YAML document to 1-based line numbers."""
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix: str):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                lines[path] = key_node.start_mark.line + 1
                walk(value_node, path)

    if root is not None:
        walk(root, "")
    return lines


def _as_float(value: Any, name: str, line: Optional[int]) -> float:
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", name, line)
    if not math.isfinite(result):
        raise ConfigError(f"expected a finite number, got {value!r}", name, line)
    return result


def _as_int(value: Any, name: str, line: Optional[int]) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", name, line)
    return int(value)


@dataclass
class ExperimentConfig:
    """
    One experiment: kind, parameters, output location and run settings.

    Attributes:
        kind: Experiment kind (one of KINDS)
        name: Base name of the emitted files
        parameters: Kind-specific parameters, defaults resolved
        output_dir: Directory receiving data files and the manifest
        output_format: "csv" or "json" for spectra and design dumps
        threads: Worker pool size for sweeps and ray batches
        tol: Relative integration tolerance of ray tracing, radial ODE bases and eigenvalue shooting
        seed: Seed of random ray fans
    """

    kind: str
    name: str
    parameters: Dict[str, Any]
    output_dir: str = "output"
    output_format: str = "csv"
    threads: int = 1
    tol: float = 1e-10
    seed: int = 0

    @classmethod
    def from_mapping(
        cls,
        data: Mapping[str, Any],
        defaults: Optional[Mapping[str, Any]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        lines: Optional[Mapping[str, int]] = None,
    ) -> "ExperimentConfig":
        """
        Build and validate a config from a parsed experiment document.

        Args:
            data: Experiment mapping (kind, name, parameters, output, run)
            defaults: Repository defaults (the parsed config.yaml)
            overrides: Command-line values (output_dir, threads, tol, kind)
            lines: Key path -> line number, for error messages

        Raises:
            ConfigError: unknown kind or out-of-range values
        """
        defaults = defaults or {}
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        lines = lines or {}
        if not isinstance(data, Mapping):
            raise ConfigError("experiment document must be a mapping")

        kind = overrides.get("kind", data.get("kind"))
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}",
                              "kind", lines.get("kind"))
        parameters = dict(DEFAULT_PARAMETERS[kind])
        parameters.update((defaults.get("experiments") or {}).get(kind) or {})
        supplied = data.get("parameters") or {}
        if not isinstance(supplied, Mapping):
            raise ConfigError("parameters must be a mapping", "parameters", lines.get("parameters"))
        unknown = sorted(set(supplied) - set(DEFAULT_PARAMETERS[kind]))
        if unknown:
            raise ConfigError(f"unknown parameter(s) for {kind}: {', '.join(unknown)}",
                              f"parameters.{unknown[0]}", lines.get(f"parameters.{unknown[0]}"))
        parameters.update(supplied)

        run_defaults = defaults.get("run") or {}
        run = {**run_defaults, **(data.get("run") or {})}
        output = data.get("output") or {}
        output_dir = (
            overrides.get("output_dir")
            or output.get("dir")
            or os.getenv(OUTPUT_ENV)
            or (defaults.get("output") or {}).get("dir")
            or "output"
        )
        config = cls(
            kind=kind,
            name=str(data.get("name") or kind),
            parameters=parameters,
            output_dir=str(output_dir),
            output_format=str(output.get("format", (defaults.get("output") or {}).get("format", "csv"))),
            threads=overrides.get("threads", run.get("threads", 1)),
            tol=overrides.get("tol", run.get("tol", 1e-10)),
            seed=run.get("seed", 0),
        )
        config._validate(lines)
        return config

    def _validate(self, lines: Mapping[str, int]):
        p = self.parameters

        def line(key: str) -> Optional[int]:
            return lines.get(f"parameters.{key}")

        def radius(key: str, value: Any):
            R = _as_float(value, key, line(key))
            if not 1.0 < R < 2.0:
                raise ConfigError(f"R must lie in the open interval (1, 2), got {R}", key, line(key))

        def layers(key: str, value: Any):
            if _as_int(value, key, line(key)) < 1:
                raise ConfigError(f"n must be at least 1, got {value}", key, line(key))

        if self.output_format not in FORMATS:
            raise ConfigError(f"unknown output format {self.output_format!r}", "output.format",
                              lines.get("output.format"))
        if _as_int(self.threads, "threads", lines.get("run.threads")) < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}", "threads", lines.get("run.threads"))
        if not _as_float(self.tol, "tol", lines.get("run.tol")) > 0.0:
            raise ConfigError(f"tol must be positive, got {self.tol}", "tol", lines.get("run.tol"))
        self.tol = float(self.tol)
        _as_int(self.seed, "seed", lines.get("run.seed"))

        if "design" in p and p["design"] not in DESIGNS:
            raise ConfigError(f"unknown design {p['design']!r}; expected one of {', '.join(DESIGNS)}",
                              "design", line("design"))
        if "R" in p and p["R"] is not None:
            radius("R", p["R"])
        if "n" in p:
            layers("n", p["n"])
        for key in ("R_list", "n_list"):
            if key in p:
                if not isinstance(p[key], (list, tuple)) or not p[key]:
                    raise ConfigError(f"{key} must be a non-empty list", key, line(key))
                for value in p[key]:
                    (radius if key == "R_list" else layers)(key, value)
        if "l_max" in p and _as_int(p["l_max"], "l_max", line("l_max")) < 0:
            raise ConfigError(f"L_max must be non-negative, got {p['l_max']}", "l_max", line("l_max"))
        if "l" in p and _as_int(p["l"], "l", line("l")) < 0:
            raise ConfigError(f"l must be non-negative, got {p['l']}", "l", line("l"))
        for key in ("omega", "E", "W"):
            if key in p and p[key] is not None:
                _as_float(p[key], key, line(key))
        for key in ("impact_range", "energy_range"):
            if key in p:
                pair = p[key]
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ConfigError(f"{key} must be a [low, high] pair", key, line(key))
                lo, hi = (_as_float(v, key, line(key)) for v in pair)
                if not lo < hi:
                    raise ConfigError(f"{key} must be increasing, got {pair}", key, line(key))
        if "count" in p and _as_int(p["count"], "count", line("count")) < 0:
            raise ConfigError(f"count must be non-negative, got {p['count']}", "count", line("count"))
        if "points" in p and _as_int(p["points"], "points", line("points")) < 1:
            raise ConfigError(f"points must be positive, got {p['points']}", "points", line("points"))
        if "separation" in p and not _as_float(p["separation"], "separation", line("separation")) > 3.0:
            raise ConfigError(f"separation must exceed 3, got {p['separation']}", "separation", line("separation"))
        if "warp" in p and p["warp"] not in ("product", "collimator"):
            raise ConfigError(f"unknown warp {p['warp']!r}", "warp", line("warp"))
        if "bulk_mode" in p and p["bulk_mode"] not in ("exact", "average"):
            raise ConfigError(f"unknown bulk_mode {p['bulk_mode']!r}", "bulk_mode", line("bulk_mode"))
        if "method" in p and p["method"] not in METHODS:
            raise ConfigError(f"unknown method {p['method']!r}; expected one of {', '.join(METHODS)}",
                              "method", line("method"))
        for key in ("start_x", "start_z"):
            if key in p:
                _as_float(p[key], key, line(key))
        for key in ("t_max", "exit_radius", "handle_length"):
            if key in p and not _as_float(p[key], key, line(key)) > 0.0:
                raise ConfigError(f"{key} must be positive, got {p[key]}", key, line(key))
        if "r_min" in p and not 0.0 < _as_float(p["r_min"], "r_min", line("r_min")) <= 1.0:
            raise ConfigError(f"r_min must lie in (0, 1], got {p['r_min']}", "r_min", line("r_min"))
        if "impacts" in p:
            if not isinstance(p["impacts"], (list, tuple)):
                raise ConfigError("impacts must be a list of numbers", "impacts", line("impacts"))
            for value in p["impacts"]:
                _as_float(value, "impacts", line("impacts"))
        for key in ("random", "polylines", "refine", "check_preconditions"):
            if key in p and not isinstance(p[key], bool):
                raise ConfigError(f"{key} must be true or false, got {p[key]!r}", key, line(key))

    def echo(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class StageRecord:
    name: str
    status: str
    seconds: float
    message: str = ""


@dataclass
class RunManifest:
    """Record of one run: config echo, version, stages and emitted files."""

    kind: str
    name: str
    config: Dict[str, Any]
    version: str = __version__
    status: str = "running"
    started: str = field(default_factory=lambda: datetime.now().isoformat())
    finished: Optional[str] = None
    stages: List[StageRecord] = field(default_factory=list)
    files: List[Dict[str, Any]] = field(default_factory=list)
    exit_code: int = 0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["stages"] = [asdict(s) for s in self.stages]
        return data

    def save(self, path: Path) -> Path:
        return write_json(self.to_dict(), path, schema="manifest")


@dataclass
class ValidationReport:
    ok: bool
    config: Optional[ExperimentConfig]
    warnings: List[str]
    errors: List[str]


class ExperimentRunner:
    """
    Runs cloaking experiments from YAML configurations.

    Handles:
    - Config loading and validation
    - Dispatch to the module operations
    - Atomic data files and run manifests
    """

    def __init__(self, config_path: str = "config.yaml", configure_logging: bool = True):
        """
        Initialize experiment runner.

        Args:
            config_path: Path to the repository defaults YAML file
            configure_logging: Set up the root logger from the config
        """
        self.config = self._load_config(config_path)
        if configure_logging:
            logging.basicConfig(
                level=getattr(logging, str((self.config.get("logging") or {}).get("level", "INFO")).upper()),
                format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            )
        self.log = logging.getLogger(__name__)
        self.analyzer = RunAnalyzer()
        self.last_report = ""

    def _load_config(self, config_path: str) -> Dict[str, Any]:
        """Load repository defaults (empty when the file does not exist)."""
        path = Path(config_path)
        if not path.exists():
            return {}
        with open(path, "r") as f:
            text = f.read()
        try:
            return yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(f"cannot parse {config_path}: {e}", line=mark.line + 1 if mark else None)

    def load_experiment(self, path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
        """
        Parse an experiment file (or only overrides when path is None).

        Raises:
            ConfigError: parse errors with line numbers, invalid fields
        """
        data: Dict[str, Any] = {}
        lines: Dict[str, int] = {}
        if path is not None:
            try:
                with open(path, "r") as f:
                    text = f.read()
            except OSError as e:
                raise ConfigError(f"cannot read {path}: {e}")
            try:
                data = yaml.safe_load(text) or {}
            except yaml.YAMLError as e:
                mark = getattr(e, "problem_mark", None)
                raise ConfigError(f"cannot parse {path}: {getattr(e, 'problem', e)}",
                                  line=mark.line + 1 if mark else None)
            lines = _field_lines(text)
        return ExperimentConfig.from_mapping(data, self.config, overrides, lines)

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def validate(self, path: Optional[str], overrides: Optional[Mapping[str, Any]] = None) -> ValidationReport:
        """Schema check and precondition dry run without solving anything."""
        try:
            config = self.load_experiment(path, overrides)
        except ConfigError as e:
            return ValidationReport(ok=False, config=None, warnings=[], errors=[str(e)])
        warnings = self._precondition_warnings(config)
        for message in warnings:
            self.log.warning(message)
        return ValidationReport(ok=True, config=config, warnings=warnings, errors=[])

    def _precondition_warnings(self, config: ExperimentConfig) -> List[str]:
        p = config.parameters
        energy = None
        if config.kind == "quantum-converge":
            energy = p["E"]
        elif config.kind == "dn-spectrum" and p["design"] in ("quantum", "free-quantum"):
            energy = p["E"]
        if energy is None:
            return []
        try:
            check_quantum_preconditions(float(energy), p.get("W"), int(p.get("l_max", 0)), rtol=config.tol)
        except PreconditionError as e:
            return [f"{e} (trapped-state resonance: the cloak will not hide the interior at this energy)"]
        return []

    # ------------------------------------------------------------------
    # Running
    # ------------------------------------------------------------------

    @contextmanager
    def _stage(self, manifest: RunManifest, name: str) -> Iterator[None]:
        start = time.perf_counter()
        self.log.info(f"Stage {name} started")
        try:
            yield
        except CloakingError as e:
            manifest.stages.append(StageRecord(name, "failed", time.perf_counter() - start, str(e)))
            self.log.error(f"Stage {name} failed: {e}")
            raise
        manifest.stages.append(StageRecord(name, "ok", time.perf_counter() - start))
        self.log.info(f"Stage {name} finished in {manifest.stages[-1].seconds:.2f} s")

    def _emit_csv(self, manifest: RunManifest, out_dir: Path, config: ExperimentConfig, suffix: str,
                  frame: pd.DataFrame) -> Path:
        path = write_csv(frame, out_dir / f"{config.name}.{suffix}.csv")
        manifest.files.append({"path": path.name, "format": "csv", "rows": int(len(frame))})
        return path

    def _emit_json(self, manifest: RunManifest, out_dir: Path, config: ExperimentConfig, suffix: str,
                   document: Mapping[str, Any], schema: str) -> Path:
        path = write_json(document, out_dir / f"{config.name}.{suffix}.json", schema=schema)
        manifest.files.append({"path": path.name, "format": "json", "schema": schema})
        return path

    def run(self, config: ExperimentConfig) -> RunManifest:
        """
        Run one experiment and write its data files and manifest.

        Returns:
            RunManifest (also saved as <name>.manifest.json)

        Raises:
            CloakingError: after the manifest has been written with status "failed"
        """
        out_dir = Path(config.output_dir)
        manifest = RunManifest(kind=config.kind, name=config.name, config=config.echo())
        self.log.info(f"Running {config.kind} '{config.name}' -> {out_dir}")
        handler = getattr(self, "_run_" + config.kind.replace("-", "_"))
        summaries: Dict[str, Any] = {}
        try:
            summaries = handler(config, manifest, out_dir) or {}
            manifest.status = "ok"
        except CloakingError as e:
            manifest.status = "failed"
            manifest.exit_code = exit_code_for(e)
            raise
        finally:
            manifest.finished = datetime.now().isoformat()
            try:
                manifest.save(out_dir / f"{config.name}.manifest.json")
            except CloakingError as e:
                self.log.error(f"Could not save manifest: {e}")
        self.last_report = self.analyzer.generate_report(manifest.to_dict(), summaries)
        self.log.info(f"Run '{config.name}' complete: {len(manifest.files)} data file(s)")
        return manifest

    # ------------------------------------------------------------------
    # Kinds
    # ------------------------------------------------------------------

    def _profile(self, p: Mapping[str, Any]):
        design = p["design"]
        if design == "homogeneous":
            return homogeneous_profile()
        if design == "ideal-cloak":
            return ideal_cloak_profile()
        if design == "truncated-cloak":
            return truncated_cloak_profile(float(p["R"]))
        if design == "layered":
            return layered_isotropic_profile(float(p["R"]), int(p["n"]), bulk_mode=p.get("bulk_mode", "exact"))
        if design == "quantum":
            spec = QuantumCloakSpec(int(p["n"]), float(p["E"]), truncation=p.get("R"), interior_potential=p.get("W"))
            return quantum_potential_profile(spec)
        return free_quantum_profile(p.get("W"))

    def _run_design_dump(self, config: ExperimentConfig, manifest: RunManifest, out_dir: Path):
        p = config.parameters
        with self._stage(manifest, "design"):
            profile = self._profile(p)
            table = profile.sample(int(p["points"]))
        with self._stage(manifest, "write"):
            self._emit_csv(manifest, out_dir, config, "profile", table)
            if config.output_format == "json":
                self._emit_json(manifest, out_dir, config, "design", profile.to_records(), "design")
        return {"design": {"name": profile.name, "intervals": len(profile.intervals), "points": len(table)}}

    def _run_dn_spectrum(self, config: ExperimentConfig, manifest: RunManifest, out_dir: Path):
        p = config.parameters
        quantum = p["design"] in ("quantum", "free-quantum")
        with self._stage(manifest, "solve"):
            profile = self._profile(p)
            energy = float(p["E"]) if quantum else None
            spectrum = dn_spectrum(profile, omega=float(p["omega"]), l_max=int(p["l_max"]),
                                   method=p["method"], energy=energy, rtol=config.tol)
            free = free_dn_spectrum(omega=float(p["omega"]), l_max=int(p["l_max"]), energy=energy)
            table = spectrum.as_frame()
            table["lambda_free"] = list(free.values)
            table["error"] = spectrum.errors_against(free)
        with self._stage(manifest, "write"):
            if config.output_format == "json":
                document = spectrum.to_records()
                document["free"] = [{"l": l, "lambda": v} for l, v in zip(free.degrees, free.values)]
                self._emit_json(manifest, out_dir, config, "spectrum", document, "spectrum")
            else:
                self._emit_csv(manifest, out_dir, config, "spectrum", table)
        return {"spectrum": table}

    def _run_cloak_converge(self, config: ExperimentConfig, manifest: RunManifest, out_dir: Path):
        p = config.parameters
        degrees = list(range(1, int(p["l_max"]) + 1))
        with self._stage(manifest, "dn-errors"):
            errors = cloak_convergence_sweep(float(p["omega"]), int(p["l_max"]), p["R_list"],
                                             method=p["method"], threads=config.threads, rtol=config.tol)
        with self._stage(manifest, "hidden-flux"):
            flux = hidden_flux_sweep(p["R_list"], float(p["omega"]), degrees, method=p["method"],
                                     threads=config.threads, rtol=config.tol) if degrees else pd.DataFrame()
        with self._stage(manifest, "write"):
            self._emit_csv(manifest, out_dir, config, "errors", errors)
            if degrees:
                self._emit_csv(manifest, out_dir, config, "hidden_flux", flux)
        summaries = {
            "errors by R": error_summary(errors, "R"),
            "monotone in R": monotonicity_table(errors, "l", "R", slack=1e-12),
        }
        if degrees:
            summaries["hidden flux monotone"] = monotonicity_table(flux, "l", "R", "abs_interior_flux")
        return summaries

    def _run_quantum_converge(self, config: ExperimentConfig, manifest: RunManifest, out_dir: Path):
        p = config.parameters
        with self._stage(manifest, "dn-errors"):
            errors = quantum_dn_convergence(p["n_list"], float(p["E"]), W=p.get("W"), l_max=int(p["l_max"]),
                                            threads=config.threads,
                                            check_preconditions=bool(p["check_preconditions"]), rtol=config.tol)
        with self._stage(manifest, "write"):
            self._emit_csv(manifest, out_dir, config, "errors", errors)
        return {
            "errors by n": error_summary(errors, "n"),
            "monotone in n": monotonicity_table(errors, "l", "n", ascending=True, slack=1e-12),
        }

    def _run_trapped_scan(self, config: ExperimentConfig, manifest: RunManifest, out_dir: Path):
        p = config.parameters
        with self._stage(manifest, "scan"):
            scan = trapped_state_scan(int(p["n"]), tuple(p["energy_range"]), int(p["l"]), W=p.get("W"),
                                      points=int(p["points"]), refine=bool(p["refine"]), threads=config.threads,
                                      rtol=config.tol)
        with self._stage(manifest, "write"):
            self._emit_csv(manifest, out_dir, config, "curve", scan.curve)
            self._emit_csv(manifest, out_dir, config, "peaks", scan.peaks)
        return {"peaks": scan.peaks, "scan": {"off_peak_median": scan.off_peak_median,
                                              "predicted": [round(e, 6) for e in scan.predicted]}}

    def _run_rays(self, config: ExperimentConfig, manifest: RunManifest, out_dir: Path):
        p = config.parameters
        with self._stage(manifest, "trace"):
            rays = ray_fan(int(p["count"]), tuple(p["impact_range"]), float(p["start_x"]), seed=config.seed,
                           random=bool(p["random"]))
            exit_radius = float(p["exit_radius"])
            results = trace_rays(cloak_metric_field(), rays, float(p["t_max"]), config.tol, exit_radius, config.threads)
            compare = compare_traces(rays, results, exit_radius)
        with self._stage(manifest, "write"):
            self._emit_csv(manifest, out_dir, config, "compare", compare)
            if p["polylines"]:
                self._emit_csv(manifest, out_dir, config, "polylines", polyline_frame(results))
        return {"rays": ray_summary(compare)}

    def _run_wormhole_rays(self, config: ExperimentConfig, manifest: RunManifest, out_dir: Path):
        p = config.parameters
        warp = collimator_warp(float(p["r_min"])) if p["warp"] == "collimator" else product_warp()
        rows = []
        results = []
        with self._stage(manifest, "trace"):
            design = wormhole_geometry(float(p["separation"]), warp, float(p["handle_length"]))
            for i, b in enumerate(p["impacts"]):
                start = RayState.launch((float(b), 0.0, float(p["start_z"])), (0.0, 0.0, 1.0))
                traced = wormhole_trace(design, start, t_max=float(p["t_max"]), tol=config.tol)
                results.append(traced.result)
                final = traced.result.final
                rows.append({
                    "ray": i,
                    "impact": float(b),
                    "route": " ".join(traced.route),
                    "transited": traced.transited,
                    "returned": traced.returned,
                    "reason": traced.result.reason.value,
                    "x": final.position.x,
                    "y": final.position.y,
                    "z": final.position.z,
                    "clairaut": traced.clairaut[0] if traced.clairaut else float("nan"),
                    "clairaut_drift": traced.clairaut_drift,
                    "max_handle_z": traced.max_handle_z,
                })
        summary = pd.DataFrame(rows, columns=["ray", "impact", "route", "transited", "returned", "reason",
                                              "x", "y", "z", "clairaut", "clairaut_drift", "max_handle_z"])
        with self._stage(manifest, "write"):
            self._emit_csv(manifest, out_dir, config, "summary", summary)
            self._emit_csv(manifest, out_dir, config, "polylines", polyline_frame(results))
        return {"wormhole": summary[["impact", "route", "reason", "clairaut_drift"]]}
