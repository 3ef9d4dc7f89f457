"""Scenario documents: YAML in, validated :class:`ScenarioConfig` out, and back."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import yaml

from . import constants as C
from .geometry import ArrayLayout, PlaneWaveDirection
from .impedance import DipoleSpec, LoadModel
from .optimizer import QUANTIZERS, RANGE_RULES
from .pattern import GridSpec

MODELS = ("conventional", "impedance")
COUPLINGS = ("full", "diagonal")
STATE_BOUNDS = ("c_min", "c_max")

# default RIS cell: quarter-wave dipole, radius wavelength/500; far links: half-wave dipoles
CELL_LENGTH_RATIO = 0.25
CELL_RADIUS_RATIO = 1 / 500
LINK_LENGTH_RATIO = 0.5
LINK_RADIUS_RATIO = 1 / 1000
CELL_SERIES_REACTANCE_OHM = 485.0


class ScenarioError(ValueError):
    """Invalid scenario document; ``errors`` lists ``path: reason`` strings."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class ArraySpec:
    n_x: int
    n_z: int
    delta: float


@dataclass(frozen=True)
class PathlossSpec:
    gamma_g: float = 1.0
    gamma_h: float = 1.0


@dataclass(frozen=True)
class SurrogateSpec:
    """Dipole surrogate used to evaluate patterns (and the impedance optimizer)."""

    cell_length_m: float
    cell_radius_m: float
    link_length_m: float
    link_radius_m: float
    cell_series_reactance_ohm: float = CELL_SERIES_REACTANCE_OHM
    link_distance_m: float = 1000.0
    z0_ohm: float = C.Z0_OHM
    y0: float = 1.0
    state_zero: str = "c_max"
    state_pi: str = "c_min"
    range_rule: str = "ascent"


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    pattern_csv: str = "pattern.csv"
    summary: str = "summary.json"
    states_csv: str = "states.csv"
    impedance_dump: str = "impedance.json"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    frequency_hz: float
    array: ArraySpec
    aoa: PlaneWaveDirection
    aod: PlaneWaveDirection
    load: LoadModel
    model: str
    quantization: str
    surrogate: SurrogateSpec
    pathloss: PathlossSpec = field(default_factory=PathlossSpec)
    coupling: str = "full"
    grid: GridSpec = field(default_factory=GridSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def wavelength(self) -> float:
        return C.wavelength(self.frequency_hz)

    @property
    def layout(self) -> ArrayLayout:
        return ArrayLayout(self.array.n_x, self.array.n_z, self.array.delta, self.wavelength)

    @property
    def state_capacitances(self):
        """Capacitances realising phase states 0 and pi."""
        pick = {"c_min": self.load.c_min, "c_max": self.load.c_max}
        return pick[self.surrogate.state_zero], pick[self.surrogate.state_pi]


_REQUIRED = object()


class _Reader:
    """Walks a nested mapping, coercing values and collecting every error."""

    def __init__(self):
        self.errors = []

    def section(self, doc, path, keys):
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            self.errors.append(f"{path or '<root>'}: expected a mapping, got {type(doc).__name__}")
            return {}
        for k in doc:
            if k not in keys:
                self.errors.append(f"{_join(path, k)}: unknown key")
        return doc

    def get(self, doc, path, key, kind, default=_REQUIRED, check=None, why=""):
        p = _join(path, key)
        if key not in doc or doc[key] is None:
            if default is _REQUIRED:
                self.errors.append(f"{p}: required field missing")
            return None if default is _REQUIRED else default
        try:
            value = kind(doc[key])
        except (TypeError, ValueError) as exc:
            self.errors.append(f"{p}: {exc}")
            return None
        if check is not None and not check(value):
            self.errors.append(f"{p}: {why} (got {doc[key]!r})")
            return None
        return value


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _float(v):
    if isinstance(v, bool):
        raise TypeError("expected a number, got a boolean")
    if isinstance(v, str):
        v = v.strip()
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise ValueError(f"expected a number, got {v!r}") from None
    if not math.isfinite(out):
        raise ValueError(f"expected a finite number, got {v!r}")
    return out


def _int(v):
    f = _float(v)
    if f != int(f):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _str(v):
    if not isinstance(v, str):
        raise TypeError(f"expected a string, got {type(v).__name__}")
    return v


def _choice(options):
    def conv(v):
        v = _str(v)
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return conv


def _pair(v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ValueError(f"expected a two-element list, got {v!r}")
    return (_float(v[0]), _float(v[1]))


def _positive(x):
    return x > 0


def _direction(reader, doc, key):
    if key not in doc or doc[key] is None:
        reader.errors.append(f"{key}: required field missing")
        return None
    raw = doc[key]
    if isinstance(raw, (list, tuple)):
        try:
            az, el = _pair(raw)
        except ValueError as exc:
            reader.errors.append(f"{key}: {exc}")
            return None
    else:
        sec = reader.section(raw, key, ("azimuth_deg", "elevation_deg"))
        az = reader.get(sec, key, "azimuth_deg", _float)
        el = reader.get(sec, key, "elevation_deg", _float)
        if az is None or el is None:
            return None
    try:
        return PlaneWaveDirection(az, el)
    except ValueError as exc:
        reader.errors.append(f"{key}: {exc}")
        return None


def parse_scenario(text) -> ScenarioConfig:
    """Validate a scenario document (YAML text or an already-loaded mapping).

    Raises :class:`ScenarioError` listing every problem found.
    """
    if isinstance(text, (str, bytes)):
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ScenarioError([f"<document>: not valid YAML ({exc})"]) from None
    else:
        doc = text
    r = _Reader()
    top = r.section(doc, "", ("name", "frequency_hz", "array", "aoa", "aod", "pathloss", "load",
                              "model", "quantization", "coupling", "grid", "surrogate", "output"))
    name = r.get(top, "", "name", _str, "scenario")
    freq = r.get(top, "", "frequency_hz", _float, check=_positive, why="must be > 0")

    arr = r.section(top.get("array"), "array", ("n_x", "n_z", "delta"))
    n_x = r.get(arr, "array", "n_x", _int, check=lambda v: v >= 1, why="must be >= 1")
    n_z = r.get(arr, "array", "n_z", _int, check=lambda v: v >= 1, why="must be >= 1")
    delta = r.get(arr, "array", "delta", _float, check=_positive, why="must be > 0")

    aoa = _direction(r, top, "aoa")
    aod = _direction(r, top, "aod")

    pl = r.section(top.get("pathloss"), "pathloss", ("gamma_g", "gamma_h"))
    gamma_g = r.get(pl, "pathloss", "gamma_g", _float, 1.0, _positive, "must be > 0")
    gamma_h = r.get(pl, "pathloss", "gamma_h", _float, 1.0, _positive, "must be > 0")

    ld = r.section(top.get("load"), "load", ("r0_ohm", "l_h", "c_min_f", "c_max_f"))
    r0 = r.get(ld, "load", "r0_ohm", _float, check=lambda v: v >= 0, why="must be >= 0")
    ind = r.get(ld, "load", "l_h", _float, check=lambda v: v >= 0, why="must be >= 0")
    c_min = r.get(ld, "load", "c_min_f", _float, check=_positive, why="must be > 0")
    c_max = r.get(ld, "load", "c_max_f", _float, check=_positive, why="must be > 0")
    if c_min is not None and c_max is not None and not c_min < c_max:
        r.errors.append(f"load.c_max_f: capacitance range is degenerate (c_min={c_min!r} >= c_max={c_max!r})")

    model = r.get(top, "", "model", _choice(MODELS))
    quant = r.get(top, "", "quantization", _choice(QUANTIZERS))
    coupling = r.get(top, "", "coupling", _choice(COUPLINGS), "full")
    if model == "conventional" and quant == "capacitance_range":
        r.errors.append("quantization: capacitance_range applies to the impedance model only")

    gd = r.section(top.get("grid"), "grid", ("step_deg", "azimuth_range_deg", "elevation_range_deg",
                                             "window_deg", "mirror_threshold_db"))
    grid_kw = dict(
        step_deg=r.get(gd, "grid", "step_deg", _float, 1.0, _positive, "must be > 0"),
        azimuth_range_deg=r.get(gd, "grid", "azimuth_range_deg", _pair, (-90.0, 90.0)),
        elevation_range_deg=r.get(gd, "grid", "elevation_range_deg", _pair, (-90.0, 90.0)),
        window_deg=r.get(gd, "grid", "window_deg", _float, 5.0, lambda v: v >= 0, "must be >= 0"),
        mirror_threshold_db=r.get(gd, "grid", "mirror_threshold_db", _float, 3.0,
                                  lambda v: v >= 0, "must be >= 0"),
    )

    lam = C.wavelength(freq) if freq else None
    sd = r.section(top.get("surrogate"), "surrogate",
                   ("cell_length_m", "cell_radius_m", "link_length_m", "link_radius_m",
                    "cell_series_reactance_ohm", "link_distance_m", "z0_ohm", "y0",
                    "state_zero", "state_pi", "range_rule"))

    def dim(key, ratio):
        return r.get(sd, "surrogate", key, _float, lam * ratio if lam else None, _positive, "must be > 0")

    sur_kw = dict(
        cell_length_m=dim("cell_length_m", CELL_LENGTH_RATIO),
        cell_radius_m=dim("cell_radius_m", CELL_RADIUS_RATIO),
        link_length_m=dim("link_length_m", LINK_LENGTH_RATIO),
        link_radius_m=dim("link_radius_m", LINK_RADIUS_RATIO),
        cell_series_reactance_ohm=r.get(sd, "surrogate", "cell_series_reactance_ohm", _float,
                                        CELL_SERIES_REACTANCE_OHM),
        link_distance_m=r.get(sd, "surrogate", "link_distance_m", _float, 1000.0, _positive, "must be > 0"),
        z0_ohm=r.get(sd, "surrogate", "z0_ohm", _float, C.Z0_OHM, _positive, "must be > 0"),
        y0=r.get(sd, "surrogate", "y0", _float, 1.0, lambda v: v != 0, "must be nonzero"),
        state_zero=r.get(sd, "surrogate", "state_zero", _choice(STATE_BOUNDS), "c_max"),
        state_pi=r.get(sd, "surrogate", "state_pi", _choice(STATE_BOUNDS), "c_min"),
        range_rule=r.get(sd, "surrogate", "range_rule", _choice(RANGE_RULES), "ascent"),
    )
    if sur_kw["state_zero"] and sur_kw["state_zero"] == sur_kw["state_pi"]:
        r.errors.append("surrogate.state_pi: both phase states map to the same capacitance")

    od = r.section(top.get("output"), "output",
                   ("directory", "pattern_csv", "summary", "states_csv", "impedance_dump"))
    out_kw = {k: r.get(od, "output", k, _str, getattr(OutputSpec, k))
              for k in ("directory", "pattern_csv", "summary", "states_csv", "impedance_dump")}

    # component constructors enforce the remaining cross-field invariants
    parts = {}
    if not r.errors:
        for key, build in (
            ("load", lambda: LoadModel(r0, ind, c_min, c_max)),
            ("grid", lambda: GridSpec(**grid_kw)),
            ("surrogate", lambda: SurrogateSpec(**sur_kw)),
            ("surrogate.cell", lambda: DipoleSpec((0, 0, 0), sur_kw["cell_length_m"], sur_kw["cell_radius_m"])),
            ("surrogate.link", lambda: DipoleSpec((0, 0, 0), sur_kw["link_length_m"], sur_kw["link_radius_m"])),
        ):
            try:
                parts[key] = build()
            except ValueError as exc:
                r.errors.append(f"{key}: {exc}")
    if r.errors:
        raise ScenarioError(r.errors)
    return ScenarioConfig(
        name=name, frequency_hz=freq, array=ArraySpec(n_x, n_z, delta), aoa=aoa, aod=aod,
        load=parts["load"], model=model, quantization=quant, surrogate=parts["surrogate"],
        pathloss=PathlossSpec(gamma_g, gamma_h), coupling=coupling, grid=parts["grid"],
        output=OutputSpec(**out_kw),
    )


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Fully resolved document; ``parse_scenario`` of it gives ``cfg`` back."""
    g = cfg.grid
    return {
        "name": cfg.name,
        "frequency_hz": cfg.frequency_hz,
        "array": {"n_x": cfg.array.n_x, "n_z": cfg.array.n_z, "delta": cfg.array.delta},
        "aoa": {"azimuth_deg": cfg.aoa.azimuth_deg, "elevation_deg": cfg.aoa.elevation_deg},
        "aod": {"azimuth_deg": cfg.aod.azimuth_deg, "elevation_deg": cfg.aod.elevation_deg},
        "pathloss": {"gamma_g": cfg.pathloss.gamma_g, "gamma_h": cfg.pathloss.gamma_h},
        "load": {"r0_ohm": cfg.load.r0, "l_h": cfg.load.l, "c_min_f": cfg.load.c_min,
                 "c_max_f": cfg.load.c_max},
        "model": cfg.model,
        "quantization": cfg.quantization,
        "coupling": cfg.coupling,
        "grid": {"step_deg": g.step_deg, "azimuth_range_deg": list(g.azimuth_range_deg),
                 "elevation_range_deg": list(g.elevation_range_deg), "window_deg": g.window_deg,
                 "mirror_threshold_db": g.mirror_threshold_db},
        "surrogate": dict(vars(cfg.surrogate)),
        "output": dict(vars(cfg.output)),
    }


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False, allow_unicode=True)


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def with_overrides(cfg: ScenarioConfig, *, grid_step=None, coupling=None, out_dir=None) -> ScenarioConfig:
    """Apply command-line overrides, re-validating through the parser."""
    doc = scenario_to_dict(cfg)
    if grid_step is not None:
        doc["grid"]["step_deg"] = grid_step
    if coupling is not None:
        doc["coupling"] = coupling
    if out_dir is not None:
        doc["output"]["directory"] = str(out_dir)
    return parse_scenario(doc)


def reference_document(name, aoa, aod, model, quantization, directory=None) -> dict:
    """Document for the reference 20x20 RIS at 26.168 GHz."""
    return {
        "name": name,
        "frequency_hz": C.FREQUENCY_HZ,
        "array": {"n_x": C.N_X, "n_z": C.N_Z, "delta": C.SPACING_RATIO},
        "aoa": list(aoa),
        "aod": list(aod),
        "load": {"r0_ohm": C.R0_OHM, "l_h": C.INDUCTANCE_H, "c_min_f": C.C_MIN_F,
                 "c_max_f": C.C_MAX_F},
        "model": model,
        "quantization": quantization,
        "output": {"directory": directory or f"out/{name}"},
    }


def _slug(angle):
    az, el = angle
    return f"{az:+g}_{el:+g}".replace("+", "p").replace("-", "m")


def table1_scenarios(root: str = "out") -> list:
    """The four reference angle combinations under both pipelines (8 scenarios).

    The conventional pipeline uses nearest 1-bit phases, the impedance one the
    capacitance-range quantizer.
    """
    out = []
    for aoa in C.AOA_SET:
        for aod in C.AOD_SET:
            for model, quant in (("conventional", "one_bit_nearest"),
                                 ("impedance", "capacitance_range")):
                name = f"{model}_aoa_{_slug(aoa)}_aod_{_slug(aod)}"
                out.append(parse_scenario(reference_document(name, aoa, aod, model, quant,
                                                             f"{root}/{name}")))
    return out


def replace_output_dir(cfg: ScenarioConfig, directory: str) -> ScenarioConfig:
    return replace(cfg, output=replace(cfg.output, directory=str(directory)))
