"""Closed-form load optimum of the impedance model and its feasible realisations.

Under negligible RIS coupling the channel is ``H = b - sum_n a_n exp(j 2 theta_n)``
with ``a_n = z_ST(n) z_RS(n) / (2 |R0 + X_SS(n)|)`` and ``b = Z_RT - sum_n a_n``.
Every term is maximised by pointing ``a_n exp(j 2 theta_n)`` opposite to ``b``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .conventional import binary_sweep
from .impedance import ImpedanceSet, LoadModel, ModelMismatchWarning, load_impedance_rlc

QUANTIZERS = ("ideal", "one_bit_nearest", "one_bit_sweep", "capacitance_range")
RANGE_RULES = ("ascent", "clip")


@dataclass(frozen=True)
class OptimizerCoefficients:
    a: np.ndarray
    b: complex
    z_rt: complex = 0j

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=complex))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", complex(self.b))
        expect = self.z_rt - a.sum()
        scale = max(abs(self.z_rt), np.abs(a).sum(), 1e-300)
        if abs(self.b - expect) > 1e-12 * scale:
            raise ValueError(f"b must equal z_rt - sum(a): got {self.b!r}, expected {expect!r}")

    @property
    def best_gain(self) -> float:
        """``|b| + sum |a_n|``, the optimum of ``|H|/|y0|``."""
        return abs(self.b) + float(np.abs(self.a).sum())


def _diagonal_of(imps: ImpedanceSet, strict: bool) -> np.ndarray:
    if not imps.is_diagonal:
        if strict:
            raise ValueError("optimizer needs a diagonal z_ss (negligible RIS coupling)")
        warnings.warn("z_ss has mutual coupling; the optimizer uses its diagonal only",
                      ModelMismatchWarning, stacklevel=3)
    return np.diag(imps.z_ss).copy()


def compute_coefficients(imps: ImpedanceSet, r0: float, *, strict: bool = True) -> OptimizerCoefficients:
    """Coefficients ``a_n`` and ``b``; ``X_SS`` is the real part of ``z_ss(n, n)``.

    With ``strict=False`` a coupled ``z_ss`` is reduced to its diagonal with a
    :class:`ModelMismatchWarning`.
    """
    zd = _diagonal_of(imps, strict)
    den = 2 * np.abs(r0 + zd.real)
    if np.any(den == 0):
        raise ValueError("r0 + Re(z_ss) vanishes; optimizer coefficients undefined")
    a = imps.z_st * imps.z_rs / den
    return OptimizerCoefficients(a=a, b=imps.z_rt - a.sum(), z_rt=imps.z_rt)


def optimal_phase_angles(coeffs: OptimizerCoefficients) -> np.ndarray:
    """``2 theta_n = angle(b) - angle(a_n) + pi``.

    The term ``-a_n exp(j 2 theta_n)`` then has the phase of ``b`` and ``|H|``
    reaches ``|b| + sum |a_n|``.
    """
    return np.angle(coeffs.b) - np.angle(coeffs.a) + np.pi


def optimal_loads(coeffs: OptimizerCoefficients, r0: float, z_ss_diag) -> np.ndarray:
    """Load impedances ``2|r0 + X_SS| / (1 + exp(j 2 theta_n)) - z_ss(n, n)``.

    Where ``1 + exp(j 2 theta_n)`` vanishes the element should be an open
    circuit; its load is returned with an infinite imaginary part.
    """
    zd = np.atleast_1d(np.asarray(z_ss_diag, dtype=complex))
    if zd.shape != coeffs.a.shape:
        raise ValueError(f"z_ss_diag has {zd.size} entries, coefficients {coeffs.a.size}")
    r = np.abs(r0 + zd.real)
    den = 1 + np.exp(1j * optimal_phase_angles(coeffs))
    unbounded = np.abs(den) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        loads = 2 * r / np.where(unbounded, 1.0, den) - zd
    # built explicitly: 1j * inf would give a NaN real part
    loads[unbounded] = [complex(v, np.inf) for v in (r - zd.real)[unbounded]]
    return loads


def reactance_to_capacitance(x_target, model: LoadModel, f):
    """Capacitance realising ``x_target`` in the series RLC, clipped to the range.

    Targets at or above ``2 pi f L`` cannot be realised by any capacitance; they
    map to the bound whose realised reactance is closer.
    """
    if not f > 0:
        raise ValueError(f"frequency must be > 0, got {f!r}")
    x = np.asarray(x_target, dtype=float)
    w = 2 * np.pi * f
    den = w * model.l - x
    feasible = den > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.clip(1.0 / (w * np.where(feasible, den, 1.0)), model.c_min, model.c_max)
    x_lo, x_hi = model.reactance_range(f)
    nearer_lo = np.abs(x_lo - x) < np.abs(x_hi - x)
    c = np.where(feasible, c, np.where(nearer_lo, model.c_min, model.c_max))
    return float(c) if c.ndim == 0 else c


def _response(c_num, zd, r0, x):
    """Per-element channel term ``-z_ST z_RS / (z_ss + r0 + jX)``."""
    return -c_num / (zd + r0 + 1j * x)


def _ascent_step(c_num, zd, r0, x_lo, x_hi, direction):
    """Reactance in ``[x_lo, x_hi]`` maximising ``Re(conj(direction) term)`` per element."""
    p = -c_num * np.conj(direction)
    a = zd.real + r0
    bias = zd.imag
    # Re(p / (a + j u)) with u = bias + x; stationary at p_i u^2 + 2 p_r a u - p_i a^2 = 0
    cands = [x_lo, x_hi]
    with np.errstate(divide="ignore", invalid="ignore"):
        for sgn in (1.0, -1.0):
            u = a * (-p.real + sgn * np.abs(p)) / p.imag
            xc = u - bias
            ok = np.isfinite(xc) & (xc >= x_lo) & (xc <= x_hi)
            cands.append(np.where(ok, xc, x_lo))
    cands = np.stack(cands)
    vals = np.real(np.conj(direction) * _response(c_num, zd, r0, cands))
    return cands[np.argmax(vals, axis=0), np.arange(zd.size)]


def _coordinate_ascent(c_num, zd, r0, x_lo, x_hi, x0, z_rt, max_iter=200):
    """Monotone ascent of ``|z_rt + sum_n t_n(x_n)|`` over the reactance box."""
    x = x0.copy()
    h = z_rt + _response(c_num, zd, r0, x).sum()
    for _ in range(max_iter):
        if h == 0:
            break
        xn = _ascent_step(c_num, zd, r0, x_lo, x_hi, h / abs(h))
        hn = z_rt + _response(c_num, zd, r0, xn).sum()
        if abs(hn) <= abs(h) * (1 + 1e-15):
            break
        x, h = xn, hn
    return x


@dataclass(frozen=True)
class LoadSolution:
    """Per-element loads chosen by a quantizer.

    ``capacitances`` is NaN where the load is not realisable by the RLC model.
    ``h_diagonal`` is the channel predicted by the negligible-coupling model.
    """

    loads: np.ndarray
    capacitances: np.ndarray
    quantizer: str
    h_diagonal: complex


def _capacitance_of(x, model, f):
    w = 2 * np.pi * f
    den = w * model.l - x
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, 1.0 / (w * den), np.nan)


def optimize_loads(imps: ImpedanceSet, model: LoadModel, f: float, quantizer: str = "capacitance_range",
                   *, range_rule: str = "ascent") -> LoadSolution:
    """Optimize the RIS loads under the negligible-coupling impedance model.

    ``ideal`` returns the unconstrained optimum. The other quantizers keep every
    capacitance in ``[c_min, c_max]``. ``one_bit_*`` use only the two bounds;
    ``nearest`` picks the bound whose element response is closer to the ideal
    one and ``sweep`` the exact binary maximiser of ``|H|``.
    ``capacitance_range`` with ``range_rule="clip"`` clips each optimal
    reactance to the realisable interval; ``"ascent"`` instead maximises ``|H|``
    over the interval by coordinate ascent, started from the clipped solution
    and from the best binary solution.
    """
    if quantizer not in QUANTIZERS:
        raise ValueError(f"unknown quantizer {quantizer!r}; expected one of {QUANTIZERS}")
    if range_rule not in RANGE_RULES:
        raise ValueError(f"unknown range rule {range_rule!r}; expected one of {RANGE_RULES}")
    zd = _diagonal_of(imps, strict=False)
    r0 = model.r0
    coeffs = compute_coefficients(imps.diagonal() if not imps.is_diagonal else imps, r0)
    ideal = optimal_loads(coeffs, r0, zd)
    c_num = imps.z_st * imps.z_rs
    y0 = imps.y0

    def done(x, name):
        loads = r0 + 1j * x
        h = y0 * (imps.z_rt + _response(c_num, zd, r0, x).sum())
        return LoadSolution(loads=loads, capacitances=_capacitance_of(x, model, f),
                            quantizer=name, h_diagonal=complex(h))

    if quantizer == "ideal":
        t = np.where(np.isfinite(ideal.imag), -c_num / (zd + ideal), 0j)
        h = y0 * (imps.z_rt + t.sum())
        return LoadSolution(loads=ideal, capacitances=_capacitance_of(ideal.imag, model, f),
                            quantizer=quantizer, h_diagonal=complex(h))

    x_lo, x_hi = model.reactance_range(f)
    t_lo = _response(c_num, zd, r0, x_lo)
    t_hi = _response(c_num, zd, r0, x_hi)
    x_lo_v, x_hi_v = np.full(zd.size, x_lo), np.full(zd.size, x_hi)

    def binary_best():
        s = binary_sweep((t_lo - t_hi) / 2, imps.z_rt + ((t_lo + t_hi) / 2).sum())
        return np.where(s > 0, x_lo, x_hi)

    if quantizer == "one_bit_sweep":
        return done(binary_best(), quantizer)
    if quantizer == "one_bit_nearest":
        t_ideal = np.where(np.isfinite(ideal.imag), -c_num / (zd + ideal), 0j)
        pick_lo = np.abs(t_lo - t_ideal) <= np.abs(t_hi - t_ideal)
        return done(np.where(pick_lo, x_lo, x_hi), quantizer)

    c_clip = reactance_to_capacitance(ideal.imag, model, f)
    x_clip = np.atleast_1d(load_impedance_rlc(c_clip, model, f)).imag
    if range_rule == "clip":
        return done(x_clip, quantizer)
    best = None
    for x0 in (x_clip, binary_best()):
        x = _coordinate_ascent(c_num, zd, r0, x_lo_v, x_hi_v, x0, imps.z_rt)
        val = abs(imps.z_rt + _response(c_num, zd, r0, x).sum())
        if best is None or val > best[0]:
            best = (val, x)
    return done(best[1], quantizer)
