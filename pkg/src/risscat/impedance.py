"""Mutual-impedance (EM-consistent) RIS channel model.

Every antenna is a thin z-directed wire dipole with a sinusoidal current. The
end-to-end channel is ``y0 (Z_RT - z_RS (Z_SS + Z_RIS)^-1 z_ST)`` and, with
matched loads ``Z_RIS = Z0 I``, reduces to the structural-scattering term.
"""
from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import kernels
from .geometry import ArrayLayout, PlaneWaveDirection, array_centroid, element_positions
from .constants import Z0_OHM


class QuadratureError(RuntimeError):
    """The adaptive quadrature hit its panel limit before converging."""


class SingularSystemError(np.linalg.LinAlgError):
    pass


class ModelMismatchWarning(UserWarning):
    """A decoupled model was applied to a coupled impedance matrix."""


class FarFieldWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DipoleSpec:
    """Center-fed thin wire along z. ``position`` is the feed point in meters."""

    position: tuple = (0.0, 0.0, 0.0)
    length: float = 0.0
    radius: float = 0.0

    def __post_init__(self):
        pos = tuple(float(v) for v in np.asarray(self.position, dtype=float).ravel())
        if len(pos) != 3 or not all(np.isfinite(pos)):
            raise ValueError(f"position must be three finite coordinates, got {self.position!r}")
        object.__setattr__(self, "position", pos)
        if not self.length > 0:
            raise ValueError(f"dipole length must be > 0, got {self.length!r}")
        if not self.radius > 0:
            raise ValueError(f"dipole radius must be > 0, got {self.radius!r}")
        if not self.radius < self.length / 10:
            raise ValueError("thin-wire model needs radius < length/10")

    @property
    def half_length(self) -> float:
        return self.length / 2

    def moved_to(self, position) -> "DipoleSpec":
        return replace(self, position=tuple(position))


@dataclass(frozen=True)
class LoadModel:
    """Series R-L-C load with a tunable capacitance in ``[c_min, c_max]``."""

    r0: float
    l: float
    c_min: float
    c_max: float

    def __post_init__(self):
        if not self.r0 >= 0:
            raise ValueError("r0 must be >= 0")
        if not self.l >= 0:
            raise ValueError("l must be >= 0")
        if not 0 < self.c_min < self.c_max:
            raise ValueError(f"need 0 < c_min < c_max, got c_min={self.c_min!r}, c_max={self.c_max!r}")

    def reactance_range(self, f):
        """Realised reactances at ``c_min`` and ``c_max`` (ascending)."""
        return (load_impedance_rlc(self.c_min, self, f).imag,
                load_impedance_rlc(self.c_max, self, f).imag)


@dataclass
class ImpedanceSet:
    z_ss: np.ndarray
    z_st: np.ndarray
    z_rs: np.ndarray
    z_rt: complex = 0j
    z0: float = Z0_OHM
    y0: complex = 1.0 + 0j
    coupling: str = "full"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.z_ss = np.atleast_2d(np.asarray(self.z_ss, dtype=complex))
        self.z_st = np.atleast_1d(np.asarray(self.z_st, dtype=complex))
        self.z_rs = np.atleast_1d(np.asarray(self.z_rs, dtype=complex))
        n = self.z_ss.shape[0]
        if self.z_ss.shape != (n, n) or self.z_st.shape != (n,) or self.z_rs.shape != (n,):
            raise ValueError(
                f"inconsistent shapes: z_ss {self.z_ss.shape}, z_st {self.z_st.shape}, z_rs {self.z_rs.shape}"
            )

    @property
    def n(self) -> int:
        return self.z_st.size

    @property
    def is_diagonal(self) -> bool:
        off = self.z_ss - np.diag(np.diag(self.z_ss))
        return not np.any(off)

    def diagonal(self) -> "ImpedanceSet":
        """Copy with the RIS mutual coupling removed."""
        return replace(self, z_ss=np.diag(np.diag(self.z_ss)), coupling="diagonal",
                       meta=dict(self.meta))


def _pair_geometry(p: DipoleSpec, q: DipoleSpec):
    rel = np.subtract(q.position, p.position)
    return float(np.hypot(rel[0], rel[1])), float(rel[2])


def _check_dipoles(k, *dipoles):
    for d in dipoles:
        if abs(np.sin(k * d.half_length)) < 1e-6:
            raise ValueError(
                f"dipole length {d.length!r} m is a whole number of wavelengths; "
                "its input current vanishes"
            )


def _effective_rho(rho, dz, p, q):
    """Lateral distance used in the kernel; rejects overlapping wires."""
    if rho < p.radius + q.radius and abs(dz) < p.half_length + q.half_length:
        raise ValueError(f"dipoles at {p.position} and {q.position} overlap")
    # collinear wires: evaluate the field on the wire surface, as for the self term
    return max(rho, p.radius, q.radius)


def mutual_impedance(p: DipoleSpec, q: DipoleSpec, wavelength: float, *, rtol=1e-10,
                     atol=1e-12, panels=None, backend=None) -> complex:
    """Induced-EMF impedance ``z_qp`` in ohms; the self impedance when ``p == q``.

    ``panels`` switches to a fixed composite rule with that many panels per
    piece instead of the adaptive one.
    """
    k = 2 * np.pi / wavelength
    _check_dipoles(k, p, q)
    if p == q:
        rho, dz = p.radius, 0.0
    else:
        rho, dz = _pair_geometry(p, q)
        rho = _effective_rho(rho, dz, p, q)
    if panels is not None:
        return complex(kernels.mutual_impedance_fixed(
            rho, dz, p.half_length, q.half_length, k, panels, backend=backend)[0])
    z, err, ok = kernels.mutual_impedance_batch(
        rho, dz, p.half_length, q.half_length, k, rtol=rtol, atol=atol, backend=backend)
    if not ok[0]:
        raise QuadratureError(
            f"mutual impedance did not converge: achieved |dZ| = {err[0]:.3e} ohm "
            f"against requested {atol + rtol * abs(z[0]):.3e}"
        )
    return complex(z[0])


def _batch(rho, dz, h1, h2, k, rtol, backend, what):
    z, err, ok = kernels.mutual_impedance_batch(rho, dz, h1, h2, k, rtol=rtol, atol=1e-12,
                                                backend=backend)
    if not ok.all():
        worst = int(np.argmax(np.where(ok, 0.0, err)))
        raise QuadratureError(
            f"{what}: {int((~ok).sum())} quadratures did not converge; worst |dZ| = {err[worst]:.3e} ohm"
        )
    return z


@functools.lru_cache(maxsize=32)
def _coupling_table(n_x, n_z, spacing, length, radius, k, coupling, rtol, backend):
    """Z between cells separated by ``(|dm|, |dn|)`` grid steps, shape (n_x, n_z)."""
    h = length / 2
    dm, dn = np.meshgrid(np.arange(n_x), np.arange(n_z), indexing="ij")
    if coupling == "diagonal":
        dm, dn = dm[:1, :1], dn[:1, :1]
    rho = dm * spacing
    dz = dn * spacing
    if n_z > 1 and spacing < length and coupling == "full":
        raise ValueError(
            f"collinear RIS dipoles overlap: length {length:.4g} m exceeds spacing {spacing:.4g} m"
        )
    rho = np.maximum(rho, radius).astype(float)
    z = _batch(rho.ravel(), dz.ravel().astype(float), h, h, k, rtol, backend, "RIS coupling")
    table = np.zeros((n_x, n_z), dtype=complex)
    table[: dm.shape[0], : dm.shape[1]] = z.reshape(dm.shape)
    table.setflags(write=False)
    return table


def _link_vector(link: DipoleSpec, cell: DipoleSpec, positions, k, rtol, backend, what):
    rel = positions - np.asarray(link.position)
    rho = np.hypot(rel[:, 0], rel[:, 1])
    dz = rel[:, 2]
    for r, z_ in zip(rho, dz):
        if r < link.radius + cell.radius and abs(z_) < link.half_length + cell.half_length:
            raise ValueError(f"{what} dipole overlaps an RIS cell")
    rho = np.maximum(rho, max(link.radius, cell.radius))
    return _batch(rho, dz, link.half_length, cell.half_length, k, rtol, backend, what)


def link_dipole(layout: ArrayLayout, direction: PlaneWaveDirection, distance: float,
                length: float, radius: float) -> DipoleSpec:
    """Dipole placed ``distance`` meters from the array centroid along ``direction``."""
    pos = array_centroid(layout) + distance * direction.unit_vector()
    return DipoleSpec(tuple(pos), length, radius)


def assemble_impedance_set(layout: ArrayLayout, tx: DipoleSpec, rx: DipoleSpec,
                           ris_dipole_template: DipoleSpec, coupling: str = "full", *,
                           cell_reactance: float = 0.0, z0: float = Z0_OHM, y0: complex = 1.0,
                           rtol: float = 1e-10, backend=None) -> ImpedanceSet:
    """Impedances of the TX-RIS-RX system; ``z_rt`` is 0 (blocked direct link).

    The template fixes the cell dipole length and radius; its position is the
    location of element (0, 0). ``cell_reactance`` is a fixed series reactance
    of each unit cell added to the ``z_ss`` diagonal. With ``coupling="diagonal"``
    only the self terms are computed.
    """
    if coupling not in ("full", "diagonal"):
        raise ValueError(f"coupling must be 'full' or 'diagonal', got {coupling!r}")
    k = 2 * np.pi / layout.wavelength
    _check_dipoles(k, tx, rx, ris_dipole_template)
    cell = ris_dipole_template
    positions = element_positions(layout) + np.asarray(cell.position)

    aperture = np.hypot((layout.n_x - 1) * layout.spacing, (layout.n_z - 1) * layout.spacing)
    # Fraunhofer distance, and never closer than ten wavelengths
    rayleigh = max(2 * aperture**2 / layout.wavelength, 10 * layout.wavelength)
    centre = array_centroid(layout) + np.asarray(cell.position)
    for name, d in (("TX", tx), ("RX", rx)):
        dist = float(np.linalg.norm(np.asarray(d.position) - centre))
        if dist < rayleigh:
            warnings.warn(f"{name} at {dist:.3g} m is inside the far-field distance {rayleigh:.3g} m",
                          FarFieldWarning, stacklevel=2)

    table = _coupling_table(layout.n_x, layout.n_z, layout.spacing, cell.length, cell.radius,
                            k, coupling, float(rtol), backend or kernels.BACKEND)
    m, n = layout.indices()
    if coupling == "full":
        z_ss = table[np.abs(m[:, None] - m[None, :]), np.abs(n[:, None] - n[None, :])]
    else:
        z_ss = np.diag(np.full(layout.n, table[0, 0]))
    z_ss = z_ss + 1j * cell_reactance * np.eye(layout.n)

    z_st = _link_vector(tx, cell, positions, k, rtol, backend, "TX")
    z_rs = _link_vector(rx, cell, positions, k, rtol, backend, "RX")
    return ImpedanceSet(z_ss=z_ss, z_st=z_st, z_rs=z_rs, z_rt=0j, z0=z0, y0=complex(y0),
                        coupling=coupling)


def load_impedance_rlc(c, model: LoadModel, f):
    """``R0 + j 2 pi f L + 1/(j 2 pi f C)``; ``c`` may be an array."""
    c = np.asarray(c, dtype=float)
    if not f > 0:
        raise ValueError(f"frequency must be > 0, got {f!r}")
    if np.any(~(c > 0)):
        raise ValueError("capacitance must be > 0")
    w = 2 * np.pi * f
    z = model.r0 + 1j * (w * model.l - 1.0 / (w * c))
    return complex(z) if np.ndim(z) == 0 else z


def _as_load_vector(loads, n):
    loads = np.asarray(loads, dtype=complex)
    if loads.ndim == 2:
        if loads.shape != (n, n):
            raise ValueError(f"load matrix must be {n}x{n}, got {loads.shape}")
        if np.any(loads - np.diag(np.diag(loads))):
            raise ValueError("load matrix must be diagonal")
        loads = np.diag(loads)
    loads = np.broadcast_to(loads, (n,)).copy()
    return loads


def solve(a, b):
    """LU solve with a 1-norm condition check; raises SingularSystemError."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return np.zeros_like(np.asarray(b, dtype=complex))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    anorm = np.linalg.norm(a, 1)
    rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    if not rcond > np.finfo(float).eps:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise SingularSystemError(f"singular RIS system: condition estimate {cond:.3e}")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def ris_response(imps: ImpedanceSet, loads) -> np.ndarray:
    """``(Z_SS + Z_RIS)^-1 z_ST``; elements with infinite load are open circuits."""
    loads = _as_load_vector(loads, imps.n)
    live = np.isfinite(loads)
    x = np.zeros(imps.n, dtype=complex)
    if live.any():
        a = imps.z_ss[np.ix_(live, live)] + np.diag(loads[live])
        x[live] = solve(a, imps.z_st[live])
    return x


def end_to_end_channel(imps: ImpedanceSet, loads) -> complex:
    """``y0 (Z_RT - z_RS (Z_SS + Z_RIS)^-1 z_ST)``.

    ``loads`` is the diagonal of ``Z_RIS`` (vector) or the diagonal matrix.
    """
    x = ris_response(imps, loads)
    return complex(imps.y0 * (imps.z_rt - imps.z_rs @ x))


def structural_scattering_channel(imps: ImpedanceSet) -> complex:
    """``-y0 z_RS (Z_SS + Z0 I)^-1 z_ST``: what a matched RIS still scatters."""
    x = ris_response(imps, np.full(imps.n, imps.z0, dtype=complex))
    return complex(imps.y0 * (0j - imps.z_rs @ x))
