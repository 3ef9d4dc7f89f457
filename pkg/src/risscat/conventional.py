"""Phase-shift RIS channel model, its SNR-optimal phases and 1-bit quantizers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayLayout, PlaneWaveDirection, direction_cosines

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ChannelLink:
    """LoS link vector; ``gains`` already carries the ``sqrt(pathloss)`` factor."""

    gains: np.ndarray
    pathloss: float = 1.0

    def __post_init__(self):
        if not self.pathloss > 0:
            raise ValueError(f"pathloss must be > 0, got {self.pathloss!r}")
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=complex))

    def __len__(self):
        return self.gains.size


@dataclass(frozen=True)
class PhaseConfiguration:
    phases: np.ndarray

    def __post_init__(self):
        ph = np.mod(np.asarray(self.phases, dtype=float), TWO_PI)
        # mod can return exactly 2*pi for tiny negative inputs
        ph[ph >= TWO_PI] = 0.0
        object.__setattr__(self, "phases", ph)

    def __len__(self):
        return self.phases.size

    @property
    def is_binary(self) -> bool:
        return bool(np.all(np.isin(self.phases, (0.0, np.pi))))


@dataclass(frozen=True)
class ReceivedSignalModel:
    transmit_symbol: complex = 1.0
    noise_power: float = 1.0

    def __post_init__(self):
        if not self.noise_power >= 0:
            raise ValueError("noise_power must be >= 0")

    def snr(self, gain: complex) -> float:
        signal = abs(gain * self.transmit_symbol) ** 2
        if self.noise_power == 0:
            return np.inf if signal > 0 else np.nan
        return signal / self.noise_power


def _vec(x) -> np.ndarray:
    if isinstance(x, ChannelLink):
        return x.gains
    return np.atleast_1d(np.asarray(x, dtype=complex))


def _phases(x) -> np.ndarray:
    if isinstance(x, PhaseConfiguration):
        return x.phases
    return np.atleast_1d(np.asarray(x, dtype=float))


def steering_vector(layout: ArrayLayout, direction: PlaneWaveDirection) -> np.ndarray:
    """Kronecker array response ``a_x(u_x) (x) a_z(u_z)``."""
    ux, uz = direction_cosines(direction)
    ax = np.exp(1j * TWO_PI * layout.delta * np.arange(layout.n_x) * ux)
    az = np.exp(1j * TWO_PI * layout.delta * np.arange(layout.n_z) * uz)
    return np.kron(ax, az)


def build_channels(layout, aoa, aod, gamma_g, gamma_h):
    """``g = sqrt(gamma_g) a(aoa)`` and ``h = sqrt(gamma_h) a(aod)``."""
    if not (gamma_g > 0 and gamma_h > 0):
        raise ValueError(f"pathloss must be > 0, got gamma_g={gamma_g!r}, gamma_h={gamma_h!r}")
    g = ChannelLink(np.sqrt(gamma_g) * steering_vector(layout, aoa), gamma_g)
    h = ChannelLink(np.sqrt(gamma_h) * steering_vector(layout, aod), gamma_h)
    return g, h


def reradiation_channels(layout, aoa, aod, gamma_g, gamma_h):
    """Links for which ``h^H Phi g`` is the field re-radiated toward ``aod``.

    An element at ``p`` contributes ``exp(+j k p.u_aod)`` to a far receiver, so
    the RIS-to-RX row vector is ``a(aod)^T`` and ``h`` is its conjugate.
    """
    g, h = build_channels(layout, aoa, aod, gamma_g, gamma_h)
    return g, ChannelLink(np.conj(h.gains), h.pathloss)


def received_gain(h, g, config) -> complex:
    """Noiseless ``h^H diag(exp(j phi)) g`` for a unit transmit symbol."""
    h, g, phi = _vec(h), _vec(g), _phases(config)
    if not (h.size == g.size == phi.size):
        raise ValueError(f"length mismatch: h={h.size}, g={g.size}, phases={phi.size}")
    return complex(np.sum(np.conj(h) * np.exp(1j * phi) * g))


def _check_nonzero(*vecs):
    for v in vecs:
        if np.any(v == 0):
            raise ValueError("channel has zero entries; their phase is undefined")


def optimal_phases(g, h) -> PhaseConfiguration:
    """Phases that co-phase every term of ``h^H Phi g``.

    The n-th term has phase ``phi_n + angle(g_n) - angle(h_n)``, so the
    maximiser is ``phi_n = angle(h_n) - angle(g_n)``.
    """
    g, h = _vec(g), _vec(h)
    if g.size != h.size:
        raise ValueError(f"length mismatch: g={g.size}, h={h.size}")
    _check_nonzero(g, h)
    return PhaseConfiguration(np.angle(h) - np.angle(g))


def binary_sweep(d, offset=0j) -> np.ndarray:
    """Signs ``s in {+1,-1}^N`` maximising ``|offset + sum_n s_n d_n|`` exactly.

    At the optimum every ``s_n`` agrees with ``sign Re(conj(H) d_n)``, so the
    answer is the sign pattern of some direction ``theta``. Those patterns only
    change where ``theta`` crosses ``angle(d_n) +/- pi/2``; evaluating one
    direction inside each of the 2N arcs covers every candidate.
    """
    d = _vec(d)
    if d.size == 0:
        return np.ones(0)
    cuts = np.mod(np.concatenate([np.angle(d) + np.pi / 2, np.angle(d) - np.pi / 2]), TWO_PI)
    cuts = np.unique(cuts)
    nxt = np.append(cuts[1:], cuts[0] + TWO_PI)
    mids = 0.5 * (cuts + nxt)
    proj = np.real(np.exp(-1j * mids)[:, None] * d[None, :])
    signs = np.where(proj >= 0, 1.0, -1.0)
    values = np.abs(offset + signs @ d)
    return signs[int(np.argmax(values))]


def quantize_1bit(g, h, mode: str = "nearest") -> PhaseConfiguration:
    """Restrict the phases to ``{0, pi}``.

    ``nearest`` snaps each optimal phase to the closer state (ties go to 0).
    ``sweep`` returns the exact binary maximiser of ``|h^H Phi g|``.
    """
    g, h = _vec(g), _vec(h)
    if g.size != h.size:
        raise ValueError(f"length mismatch: g={g.size}, h={h.size}")
    _check_nonzero(g, h)
    if mode == "nearest":
        phi = optimal_phases(g, h).phases
        to_zero = np.minimum(phi, TWO_PI - phi)
        to_pi = np.abs(phi - np.pi)
        return PhaseConfiguration(np.where(to_pi < to_zero, np.pi, 0.0))
    if mode == "sweep":
        s = binary_sweep(np.conj(h) * g)
        return PhaseConfiguration(np.where(s > 0, 0.0, np.pi))
    raise ValueError(f"unknown quantization mode {mode!r}; expected 'nearest' or 'sweep'")
