"""Angular scattering maps of an RIS configuration on the dipole surrogate.

A configuration is evaluated by solving for the induced cell currents under
full coupling and superposing their far fields over an azimuth/elevation
grid. Levels are in dB relative to the peak of a matched-load array under
broadside incidence.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .conventional import PhaseConfiguration
from .geometry import ArrayLayout, PlaneWaveDirection, element_positions, unit_vectors
from .impedance import (DipoleSpec, ImpedanceSet, LoadModel, assemble_impedance_set,
                        link_dipole, load_impedance_rlc, ris_response)


@dataclass(frozen=True)
class GridSpec:
    """Uniform angular grid in degrees plus the lobe-search settings."""

    step_deg: float = 1.0
    azimuth_range_deg: tuple = (-90.0, 90.0)
    elevation_range_deg: tuple = (-90.0, 90.0)
    window_deg: float = 5.0
    mirror_threshold_db: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "azimuth_range_deg", tuple(float(v) for v in self.azimuth_range_deg))
        object.__setattr__(self, "elevation_range_deg", tuple(float(v) for v in self.elevation_range_deg))
        if not self.step_deg > 0:
            raise ValueError(f"grid step must be > 0, got {self.step_deg!r}")
        for name in ("azimuth_range_deg", "elevation_range_deg"):
            lo, hi = getattr(self, name)
            if not -90.0 <= lo <= hi <= 90.0:
                raise ValueError(f"{name} must satisfy -90 <= lo <= hi <= 90, got {(lo, hi)}")
            steps = (hi - lo) / self.step_deg
            if abs(steps - round(steps)) > 1e-9:
                raise ValueError(f"grid step {self.step_deg} does not divide {name} {(lo, hi)}")
        if not self.window_deg >= 0:
            raise ValueError("window_deg must be >= 0")
        if not self.mirror_threshold_db >= 0:
            raise ValueError("mirror_threshold_db must be >= 0")

    def _axis(self, rng):
        lo, hi = rng
        count = int(round((hi - lo) / self.step_deg)) + 1
        return np.linspace(lo, hi, count)

    @property
    def azimuth(self) -> np.ndarray:
        return self._axis(self.azimuth_range_deg)

    @property
    def elevation(self) -> np.ndarray:
        return self._axis(self.elevation_range_deg)


@dataclass
class PatternGrid:
    """Levels in dB, ``values[i_el, i_az]``, relative to ``reference_db``."""

    azimuth: np.ndarray
    elevation: np.ndarray
    values: np.ndarray
    reference_db: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.azimuth = np.asarray(self.azimuth, dtype=float)
        self.elevation = np.asarray(self.elevation, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.elevation.size, self.azimuth.size):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{self.elevation.size} elevations x {self.azimuth.size} azimuths"
            )
        if self.values.size == 0:
            raise ValueError("empty grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("pattern values must be finite")

    def peak(self):
        """``(azimuth, elevation, level)`` of the grid maximum."""
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.azimuth[j]), float(self.elevation[i]), float(self.values[i, j])

    def level_at(self, azimuth_deg, elevation_deg) -> float:
        j = int(np.argmin(np.abs(self.azimuth - azimuth_deg)))
        i = int(np.argmin(np.abs(self.elevation - elevation_deg)))
        return float(self.values[i, j])

    def rows(self):
        """``(az, el, level)`` triples, elevation outer and azimuth inner."""
        az, el = np.meshgrid(self.azimuth, self.elevation)
        return np.column_stack([az.ravel(), el.ravel(), self.values.ravel()])


@dataclass(frozen=True)
class Lobe:
    azimuth_deg: float
    elevation_deg: float
    level_db: float

    def as_dict(self):
        return {"azimuth_deg": self.azimuth_deg, "elevation_deg": self.elevation_deg,
                "level_db": self.level_db}


@dataclass(frozen=True)
class MirrorLobe(Lobe):
    present: bool = False

    def as_dict(self):
        return {**super().as_dict(), "present": self.present}


@dataclass(frozen=True)
class LobeReport:
    intended: Lobe
    specular: Lobe
    mirror: MirrorLobe
    gap_structural_minus_intended: float

    def as_dict(self):
        return {
            "intended": self.intended.as_dict(),
            "specular": self.specular.as_dict(),
            "mirror": self.mirror.as_dict(),
            "gap_structural_minus_intended": self.gap_structural_minus_intended,
        }


@dataclass(frozen=True)
class RisConfiguration:
    """Per-element loads, plus the phase states or capacitances behind them.

    An infinite load reactance marks an open-circuited element.
    """

    loads: np.ndarray
    phases: np.ndarray | None = None
    capacitances: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "loads", np.atleast_1d(np.asarray(self.loads, dtype=complex)))
        n = self.loads.size
        for name in ("phases", "capacitances"):
            v = getattr(self, name)
            if v is not None:
                v = np.atleast_1d(np.asarray(v, dtype=float))
                if v.size != n:
                    raise ValueError(f"{name} has {v.size} entries, loads {n}")
                object.__setattr__(self, name, v)

    @classmethod
    def from_phases(cls, phases, model: LoadModel, f: float, state_capacitances=None, label=""):
        """Realise phases with the two capacitance bounds.

        ``state_capacitances`` gives the capacitance for state 0 and for state
        pi (default ``(c_max, c_min)``). Phases other than 0 and pi go to the
        nearer state.
        """
        if isinstance(phases, PhaseConfiguration):
            phases = phases.phases
        phases = PhaseConfiguration(phases).phases
        c0, cpi = state_capacitances or (model.c_max, model.c_min)
        is_pi = np.abs(phases - np.pi) < np.minimum(phases, 2 * np.pi - phases)
        caps = np.where(is_pi, cpi, c0)
        return cls(loads=load_impedance_rlc(caps, model, f), phases=phases, capacitances=caps,
                   label=label)

    def reflection_phases(self, z0: float) -> np.ndarray:
        """``angle((Z_L - Z0) / (Z_L + Z0))``; open circuits give 0."""
        with np.errstate(invalid="ignore"):
            gamma = (self.loads - z0) / (self.loads + z0)
        gamma = np.where(np.isfinite(self.loads.imag), gamma, 1.0)
        return np.angle(gamma)


def induced_currents(imps: ImpedanceSet, loads, incident: PlaneWaveDirection | None = None):
    """``-(Z_SS + Z_RIS)^-1 z_ST`` for a unit TX current.

    ``incident`` is checked against the direction the set was assembled for,
    when the set records one.
    """
    if incident is not None:
        known = imps.meta.get("incident")
        if known is not None and tuple(known) != incident.as_tuple():
            raise ValueError(f"impedance set was assembled for incidence {known}, not {incident.as_tuple()}")
    return -ris_response(imps, loads)


def scattered_pattern(currents, layout: ArrayLayout, grid: GridSpec, *, reference_db: float = 0.0,
                      backend=None) -> PatternGrid:
    """Far-field level ``20 log10 |sum_n i_n exp(j k p_n . u)| - reference_db``."""
    currents = np.atleast_1d(np.asarray(currents, dtype=complex))
    if currents.size != layout.n:
        raise ValueError(f"{currents.size} currents for {layout.n} elements")
    az, el = grid.azimuth, grid.elevation
    if az.size == 0 or el.size == 0:
        raise ValueError("empty grid")
    azg, elg = np.meshgrid(az, el)
    dirs = unit_vectors(azg, elg).reshape(-1, 3)
    k = 2 * np.pi / layout.wavelength
    mag = kernels.array_factor(currents, element_positions(layout), dirs, k, backend=backend)
    level = 20 * np.log10(np.maximum(mag, np.finfo(float).tiny))
    return PatternGrid(az, el, level.reshape(el.size, az.size) - reference_db,
                       reference_db=float(reference_db))


def _window_max(grid: PatternGrid, direction: PlaneWaveDirection, window: float) -> Lobe:
    az0, el0 = direction.as_tuple()
    eps = 1e-9
    if not (grid.azimuth[0] - eps <= az0 <= grid.azimuth[-1] + eps
            and grid.elevation[0] - eps <= el0 <= grid.elevation[-1] + eps):
        raise ValueError(f"lobe window around {direction.as_tuple()} lies outside the grid")
    ja = np.flatnonzero(np.abs(grid.azimuth - az0) <= window + eps)
    ie = np.flatnonzero(np.abs(grid.elevation - el0) <= window + eps)
    if ja.size == 0 or ie.size == 0:
        # window narrower than the grid step: fall back to the nearest sample
        ja = np.array([int(np.argmin(np.abs(grid.azimuth - az0)))])
        ie = np.array([int(np.argmin(np.abs(grid.elevation - el0)))])
    sub = grid.values[np.ix_(ie, ja)]
    i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
    return Lobe(float(grid.azimuth[ja[j]]), float(grid.elevation[ie[i]]), float(sub[i, j]))


def detect_lobes(grid: PatternGrid, intended: PlaneWaveDirection, specular: PlaneWaveDirection,
                 mirror: PlaneWaveDirection | None = None, *, window_deg: float = 5.0,
                 mirror_threshold_db: float = 3.0) -> LobeReport:
    """Maxima within ``+/- window_deg`` of the expected lobe directions.

    The mirror direction defaults to ``(-az, -el)`` of the intended one; the
    mirror lobe counts as present when within ``mirror_threshold_db`` of the
    intended level.
    """
    mirror = mirror or intended.mirrored()
    li = _window_max(grid, intended, window_deg)
    ls = _window_max(grid, specular, window_deg)
    lm = _window_max(grid, mirror, window_deg)
    present = lm.level_db >= li.level_db - mirror_threshold_db
    return LobeReport(
        intended=li,
        specular=ls,
        mirror=MirrorLobe(lm.azimuth_deg, lm.elevation_deg, lm.level_db, bool(present)),
        gap_structural_minus_intended=ls.level_db - li.level_db,
    )


class Surrogate:
    """Dipole model of one scenario's hardware: layout, cells and far TX/RX links.

    ``scenario`` needs ``layout`` (an :class:`ArrayLayout`), ``grid``,
    ``coupling`` and a ``surrogate`` section with the dipole dimensions, link
    distance, cell series reactance, ``z0`` and ``y0``.
    """

    def __init__(self, scenario, backend=None):
        self.scenario = scenario
        self.layout = scenario.layout
        s = scenario.surrogate
        self.cell = DipoleSpec((0.0, 0.0, 0.0), s.cell_length_m, s.cell_radius_m)
        self.backend = backend
        self._cache = {}

    def _link(self, direction: PlaneWaveDirection) -> DipoleSpec:
        s = self.scenario.surrogate
        return link_dipole(self.layout, direction, s.link_distance_m, s.link_length_m, s.link_radius_m)

    def impedance_set(self, incident: PlaneWaveDirection, departure: PlaneWaveDirection,
                      coupling: str | None = None) -> ImpedanceSet:
        coupling = coupling or self.scenario.coupling
        key = (incident.as_tuple(), departure.as_tuple(), coupling)
        if key not in self._cache:
            s = self.scenario.surrogate
            imps = assemble_impedance_set(
                self.layout, self._link(incident), self._link(departure), self.cell, coupling,
                cell_reactance=s.cell_series_reactance_ohm, z0=s.z0_ohm, y0=s.y0,
                backend=self.backend)
            imps.meta.update(incident=incident.as_tuple(), departure=departure.as_tuple())
            self._cache[key] = imps
        return self._cache[key]

    @functools.cached_property
    def reference_db(self) -> float:
        """Peak level of the matched-load array under broadside incidence."""
        broadside = PlaneWaveDirection(0.0, 0.0)
        imps = self.impedance_set(broadside, broadside)
        cur = induced_currents(imps, np.full(imps.n, imps.z0, dtype=complex))
        return scattered_pattern(cur, self.layout, self.scenario.grid, backend=self.backend).peak()[2]

    def pattern(self, loads, incident: PlaneWaveDirection, departure: PlaneWaveDirection) -> PatternGrid:
        imps = self.impedance_set(incident, departure)
        cur = induced_currents(imps, loads, incident)
        grid = scattered_pattern(cur, self.layout, self.scenario.grid,
                                 reference_db=self.reference_db, backend=self.backend)
        grid.meta.update(incident=incident.as_tuple(), coupling=imps.coupling)
        return grid

    def lobes(self, grid: PatternGrid, incident: PlaneWaveDirection,
              departure: PlaneWaveDirection) -> LobeReport:
        g = self.scenario.grid
        return detect_lobes(grid, departure, incident.mirrored(), window_deg=g.window_deg,
                            mirror_threshold_db=g.mirror_threshold_db)


def evaluate_configuration(scenario, config: RisConfiguration, *, surrogate: Surrogate | None = None):
    """Pattern and lobe report of ``config`` under the scenario's surrogate."""
    sur = surrogate or Surrogate(scenario)
    grid = sur.pattern(config.loads, scenario.aoa, scenario.aod)
    return grid, sur.lobes(grid, scenario.aoa, scenario.aod)
