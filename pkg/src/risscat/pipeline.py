"""Scenario orchestration: optimize, evaluate on the surrogate, write artifacts."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .conventional import optimal_phases, quantize_1bit, received_gain, reradiation_channels
from .impedance import end_to_end_channel
from .optimizer import optimize_loads
from .pattern import LobeReport, PatternGrid, RisConfiguration, Surrogate
from .scenario import ScenarioConfig, scenario_to_dict

SWEEP_COLUMNS = ("name", "model", "quantization", "aoa_azimuth_deg", "aoa_elevation_deg",
                 "aod_azimuth_deg", "aod_elevation_deg", "intended_level_db", "specular_level_db",
                 "mirror_level_db", "mirror_present", "gap_structural_minus_intended")


class SweepError(RuntimeError):
    pass


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    ris: RisConfiguration
    grid: PatternGrid
    lobes: LobeReport
    summary: dict
    paths: dict


def _surrogate_key(cfg: ScenarioConfig):
    return (cfg.frequency_hz, cfg.array, cfg.surrogate, cfg.grid, cfg.coupling)


def optimize(cfg: ScenarioConfig, surrogate: Surrogate) -> RisConfiguration:
    """RIS configuration chosen by the scenario's model and quantizer."""
    if cfg.model == "conventional":
        g, h = reradiation_channels(cfg.layout, cfg.aoa, cfg.aod, cfg.pathloss.gamma_g,
                                    cfg.pathloss.gamma_h)
        if cfg.quantization == "ideal":
            phases = optimal_phases(g, h)
        elif cfg.quantization == "one_bit_nearest":
            phases = quantize_1bit(g, h, "nearest")
        elif cfg.quantization == "one_bit_sweep":
            phases = quantize_1bit(g, h, "sweep")
        else:
            raise ValueError(f"quantizer {cfg.quantization!r} does not apply to the conventional model")
        return RisConfiguration.from_phases(phases, cfg.load, cfg.frequency_hz,
                                            cfg.state_capacitances, label=cfg.quantization)
    # the closed-form optimum assumes negligible coupling: optimize on the diagonal
    imps = surrogate.impedance_set(cfg.aoa, cfg.aod).diagonal()
    sol = optimize_loads(imps, cfg.load, cfg.frequency_hz, cfg.quantization,
                         range_rule=cfg.surrogate.range_rule)
    ris = RisConfiguration(loads=sol.loads, capacitances=sol.capacitances, label=cfg.quantization)
    # phases equivalent to the loads, for the phase-shift channel evaluation
    phases = np.mod(ris.reflection_phases(cfg.surrogate.z0_ohm), 2 * np.pi)
    return RisConfiguration(loads=ris.loads, capacitances=ris.capacitances, phases=phases,
                            label=cfg.quantization)


def evaluate(cfg: ScenarioConfig, surrogate: Surrogate | None = None):
    """Run one scenario in memory; returns ``(ris, grid, lobes, summary)``."""
    sur = surrogate or Surrogate(cfg)
    ris = optimize(cfg, sur)
    grid = sur.pattern(ris.loads, cfg.aoa, cfg.aod)
    lobes = sur.lobes(grid, cfg.aoa, cfg.aod)

    g, h = reradiation_channels(cfg.layout, cfg.aoa, cfg.aod, cfg.pathloss.gamma_g, cfg.pathloss.gamma_h)
    h_conv = received_gain(h, g, ris.phases)
    imps = sur.impedance_set(cfg.aoa, cfg.aod)
    h_imp = end_to_end_channel(imps, ris.loads)
    matched = sur.pattern(np.full(imps.n, imps.z0, dtype=complex), cfg.aoa, cfg.aod)
    matched_spec = sur.lobes(matched, cfg.aoa, cfg.aod).specular

    summary = {
        "name": cfg.name,
        "model": cfg.model,
        "quantization": cfg.quantization,
        "optimizer": "phase_alignment" if cfg.model == "conventional" else "load_closed_form",
        "coupling": cfg.coupling,
        **lobes.as_dict(),
        "h_conventional_abs": abs(h_conv),
        "h_impedance_abs": abs(h_imp),
        "h_impedance_phase_rad": float(np.angle(h_imp)),
        "normalization_reference_db": float(sur.reference_db),
        "matched_specular_level_db": matched_spec.level_db,
        "open_circuit_elements": int(np.sum(~np.isfinite(ris.loads.imag))),
        "peak": dict(zip(("azimuth_deg", "elevation_deg", "level_db"), grid.peak())),
    }
    return ris, grid, lobes, summary


def _provenance(cfg_docs) -> dict:
    return {"generator": f"risscat {__version__}", "kernel_backend": kernels.BACKEND,
            "config": cfg_docs}


def _header_lines(prov) -> str:
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in prov.items())


def _file_mode() -> int:
    umask = os.umask(0)
    os.umask(umask)
    return 0o666 & ~umask


def _atomic_write(path: Path, text: str):
    """Write via a temporary sibling so a failed run never leaves a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        # mkstemp creates the file private; give it ordinary permissions
        os.chmod(tmp, _file_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def pattern_csv(grid: PatternGrid, prov: dict) -> str:
    buf = io.StringIO()
    buf.write(_header_lines(prov))
    buf.write("azimuth_deg,elevation_deg,level_db\n")
    np.savetxt(buf, grid.rows(), fmt="%.6f", delimiter=",")
    return buf.getvalue()


def states_csv(cfg: ScenarioConfig, ris: RisConfiguration, prov: dict) -> str:
    buf = io.StringIO()
    buf.write(_header_lines(prov))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["element", "m", "n", "phase_rad", "capacitance_f", "load_re_ohm", "load_im_ohm"])
    m, n = cfg.layout.indices()
    phases = ris.phases if ris.phases is not None else np.full(ris.loads.size, np.nan)
    caps = ris.capacitances if ris.capacitances is not None else np.full(ris.loads.size, np.nan)
    for i in range(ris.loads.size):
        w.writerow([i, int(m[i]), int(n[i]), repr(float(phases[i])), repr(float(caps[i])),
                    repr(float(ris.loads[i].real)), repr(float(ris.loads[i].imag))])
    return buf.getvalue()


def run_scenario(cfg: ScenarioConfig, *, surrogate: Surrogate | None = None) -> ScenarioResult:
    """Evaluate a scenario and write its pattern CSV, summary and state dump."""
    ris, grid, lobes, summary = evaluate(cfg, surrogate)
    prov = _provenance(scenario_to_dict(cfg))
    out = Path(cfg.output.directory)
    paths = {
        "pattern": out / cfg.output.pattern_csv,
        "summary": out / cfg.output.summary,
        "states": out / cfg.output.states_csv,
    }
    _atomic_write(paths["pattern"], pattern_csv(grid, prov))
    _atomic_write(paths["states"], states_csv(cfg, ris, prov))
    doc = {"provenance": prov, **summary}
    _atomic_write(paths["summary"], json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return ScenarioResult(cfg, ris, grid, lobes, summary, paths)


def sweep_row(summary: dict, cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "model": cfg.model,
        "quantization": cfg.quantization,
        "aoa_azimuth_deg": cfg.aoa.azimuth_deg,
        "aoa_elevation_deg": cfg.aoa.elevation_deg,
        "aod_azimuth_deg": cfg.aod.azimuth_deg,
        "aod_elevation_deg": cfg.aod.elevation_deg,
        "intended_level_db": summary["intended"]["level_db"],
        "specular_level_db": summary["specular"]["level_db"],
        "mirror_level_db": summary["mirror"]["level_db"],
        "mirror_present": summary["mirror"]["present"],
        "gap_structural_minus_intended": summary["gap_structural_minus_intended"],
    }


def run_sweep(configs, out_path=None, *, write_scenarios: bool = True):
    """One comparison row per scenario; the first failure aborts the sweep.

    Scenarios with identical hardware share one surrogate, so impedance
    assembly and the normalization run happen once.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one scenario")
    surrogates = {}
    rows = []
    for cfg in configs:
        sur = surrogates.setdefault(_surrogate_key(cfg), Surrogate(cfg))
        try:
            if write_scenarios:
                summary = run_scenario(cfg, surrogate=sur).summary
            else:
                summary = evaluate(cfg, sur)[3]
        except Exception as exc:
            raise SweepError(f"scenario {cfg.name!r} failed: {exc}") from exc
        rows.append(sweep_row(summary, cfg))
    if out_path is not None:
        prov = _provenance([scenario_to_dict(c) for c in configs])
        buf = io.StringIO()
        buf.write(_header_lines(prov))
        w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
        _atomic_write(Path(out_path), buf.getvalue())
    return rows


def impedance_dump(cfg: ScenarioConfig, *, surrogate: Surrogate | None = None) -> dict:
    """Assembled impedance set of a scenario as a JSON-ready mapping."""
    sur = surrogate or Surrogate(cfg)
    imps = sur.impedance_set(cfg.aoa, cfg.aod)

    def cplx(a):
        a = np.asarray(a)
        return {"re": a.real.tolist(), "im": a.imag.tolist()}

    return {
        "provenance": _provenance(scenario_to_dict(cfg)),
        "n": imps.n,
        "coupling": imps.coupling,
        "z0_ohm": imps.z0,
        "y0": cplx(imps.y0),
        "z_rt": cplx(imps.z_rt),
        "z_st": cplx(imps.z_st),
        "z_rs": cplx(imps.z_rs),
        "z_ss": cplx(imps.z_ss),
        "incident": list(imps.meta.get("incident", ())),
        "departure": list(imps.meta.get("departure", ())),
    }


def write_impedance_dump(cfg: ScenarioConfig) -> Path:
    path = Path(cfg.output.directory) / cfg.output.impedance_dump
    _atomic_write(path, json.dumps(impedance_dump(cfg), sort_keys=True) + "\n")
    return path


__all__ = ["run_scenario", "run_sweep", "evaluate", "optimize", "impedance_dump",
           "write_impedance_dump", "ScenarioResult", "SweepError"]
