"""Hot loops: induced-EMF quadrature for parallel z-dipoles and the far-field
array factor.

Both kernels exist twice, once as numba ``@njit`` loops and once as a
vectorised numpy twin. The numba path is used when numba imports and the
environment variable ``RISSCAT_NO_NUMBA`` is unset (or ``0``). Every public
function also accepts ``backend="numba" | "numpy"`` so the two paths can be
compared inside one process (see ``benchmarks/bench_kernels.py``).

Quadrature scheme
-----------------
The mutual impedance of two parallel, center-fed dipoles with sinusoidal
currents is ``Z = j*eta/(4 pi) / (sin kh1 sin kh2) * int E(z) sin(k(h2-|z|)) dz``
where ``E`` is the closed-form near field of the first dipole. The field has
sharp peaks of width ``rho`` at the ends and center of the source dipole, so
the integration interval is cut at those points (and at the feed kink of the
receiving current), every piece is halved, and halves that touch a peak are
mapped with ``z = anchor +/- rho*sinh(t)``. That substitution cancels the
``1/R`` peak and leaves a smooth integrand for composite Gauss-Legendre.
Panel counts double until two successive estimates agree.
"""
from __future__ import annotations

import math
import os

import numpy as np

# eta0 / (4 pi) = mu0 c / (4 pi)
ETA_OVER_4PI = 1e-7 * 299792458.0

GL_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)
# map from [-1, 1] to [0, 1]
GL_NODES = 0.5 * (_GL_NODES + 1.0)
GL_WEIGHTS = 0.5 * _GL_WEIGHTS

_FLAG = os.environ.get("RISSCAT_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

HAVE_NUMBA = False
if not NUMBA_DISABLED:
    try:
        import numba
        from numba import njit, prange

        if "NUMBA_THREADING_LAYER" not in os.environ:
            # the bundled TBB is too old and warns on every first launch
            numba.config.THREADING_LAYER = "workqueue"
        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba ships with the dev env
        HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def _pick(backend):
    backend = backend or BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    return backend


# --------------------------------------------------------------------------
# numpy twin
# --------------------------------------------------------------------------

def _breakpoints_np(rho, dz, h1, h2):
    """Sorted cut points (P, 6) and a peak flag for each."""
    peaks = np.stack([-dz - h1, -dz, -dz + h1], axis=1)
    inside = (peaks > -h2[:, None]) & (peaks < h2[:, None])
    cand = np.where(inside, peaks, -h2[:, None])
    pts = np.concatenate(
        [-h2[:, None], h2[:, None], np.zeros_like(h2)[:, None], cand], axis=1
    )
    pts.sort(axis=1)
    scale = 1e-12 * np.maximum(h1, h2)[:, None, None]
    is_peak = (np.abs(pts[:, :, None] - peaks[:, None, :]) <= scale).any(axis=2)
    return pts, is_peak


def _emf_sum_np(rho, dz, h1, h2, k, panels):
    """Composite estimate of the un-normalised EMF integral, shape (P,)."""
    pts, is_peak = _breakpoints_np(rho, dz, h1, h2)
    s, e = pts[:, :-1], pts[:, 1:]
    mid = 0.5 * (s + e)
    # ten halves per pair: (anchor, far end, anchor is a peak)
    anchor = np.concatenate([s, e], axis=1)
    other = np.concatenate([mid, mid], axis=1)
    peak = np.concatenate([is_peak[:, :-1], is_peak[:, 1:]], axis=1)
    length = np.abs(other - anchor)
    sgn = np.where(other >= anchor, 1.0, -1.0)
    rho_ = rho[:, None]
    upper = np.where(peak, np.arcsinh(length / rho_), length)

    # nodes on [0, 1] replicated over panels
    m = np.arange(panels)
    t01 = ((m[:, None] + GL_NODES[None, :]) / panels).ravel()
    w01 = np.tile(GL_WEIGHTS, panels) / panels
    t = upper[:, :, None] * t01[None, None, :]
    w = upper[:, :, None] * w01[None, None, :]
    peak3 = peak[:, :, None]
    off = np.where(peak3, rho_[:, :, None] * np.sinh(t), t)
    jac = np.where(peak3, rho_[:, :, None] * np.cosh(t), 1.0)
    zp = anchor[:, :, None] + sgn[:, :, None] * off

    z = dz[:, None, None] + zp
    r2 = rho_[:, :, None] ** 2
    h1_ = h1[:, None, None]
    R1 = np.sqrt(r2 + (z - h1_) ** 2)
    R2 = np.sqrt(r2 + (z + h1_) ** 2)
    R0 = np.sqrt(r2 + z**2)
    field = (
        np.exp(-1j * k * R1) / R1
        + np.exp(-1j * k * R2) / R2
        - 2.0 * np.cos(k * h1_) * np.exp(-1j * k * R0) / R0
    )
    current = np.sin(k * (h2[:, None, None] - np.abs(zp)))
    return np.sum(field * current * jac * w, axis=(1, 2))


def _mutual_np(rho, dz, h1, h2, k, rtol, atol, min_panels, max_panels, chunk=256):
    n = rho.size
    out = np.empty(n, dtype=np.complex128)
    err = np.empty(n)
    ok = np.zeros(n, dtype=np.bool_)
    norm = 1j * ETA_OVER_4PI / (np.sin(k * h1) * np.sin(k * h2))
    for lo in range(0, n, chunk):
        idx = np.arange(lo, min(n, lo + chunk))
        panels = min_panels
        prev = _emf_sum_np(rho[idx], dz[idx], h1[idx], h2[idx], k, panels)
        while idx.size:
            panels *= 2
            cur = _emf_sum_np(rho[idx], dz[idx], h1[idx], h2[idx], k, panels)
            zc, zp = cur * norm[idx], prev * norm[idx]
            diff = np.abs(zc - zp)
            done = diff <= atol + rtol * np.abs(zc)
            last = panels >= max_panels
            fin = done | last
            out[idx[fin]] = zc[fin]
            err[idx[fin]] = diff[fin]
            ok[idx[fin]] = done[fin]
            idx, prev = idx[~fin], cur[~fin]
    return out, err, ok


def _fixed_np(rho, dz, h1, h2, k, panels):
    norm = 1j * ETA_OVER_4PI / (np.sin(k * h1) * np.sin(k * h2))
    return _emf_sum_np(rho, dz, h1, h2, k, panels) * norm


def _array_factor_np(currents, positions, directions, k, chunk=4096):
    out = np.empty(directions.shape[0])
    for lo in range(0, directions.shape[0], chunk):
        phase = k * (directions[lo:lo + chunk] @ positions.T)
        out[lo:lo + chunk] = np.abs(np.exp(1j * phase) @ currents)
    return out


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _half_nb(anchor, other, peak, rho, dz, h1, h2, k, ckh1, panels, nodes, weights):
        length = abs(other - anchor)
        if length == 0.0:
            return 0j
        sgn = 1.0 if other >= anchor else -1.0
        upper = math.asinh(length / rho) if peak else length
        acc = 0j
        r2 = rho * rho
        for m in range(panels):
            for q in range(nodes.size):
                t = upper * (m + nodes[q]) / panels
                if peak:
                    off = rho * math.sinh(t)
                    jac = rho * math.cosh(t)
                else:
                    off = t
                    jac = 1.0
                zp = anchor + sgn * off
                z = dz + zp
                R1 = math.sqrt(r2 + (z - h1) * (z - h1))
                R2 = math.sqrt(r2 + (z + h1) * (z + h1))
                R0 = math.sqrt(r2 + z * z)
                f = (
                    (math.cos(k * R1) - 1j * math.sin(k * R1)) / R1
                    + (math.cos(k * R2) - 1j * math.sin(k * R2)) / R2
                    - 2.0 * ckh1 * (math.cos(k * R0) - 1j * math.sin(k * R0)) / R0
                )
                acc += f * math.sin(k * (h2 - abs(zp))) * jac * weights[q] * upper / panels
        return acc

    @njit(cache=True, nogil=True)
    def _emf_sum_nb(rho, dz, h1, h2, k, panels, nodes, weights):
        pk = np.empty(3)
        pk[0] = -dz - h1
        pk[1] = -dz
        pk[2] = -dz + h1
        pts = np.empty(6)
        pts[0] = -h2
        pts[1] = h2
        pts[2] = 0.0
        for i in range(3):
            pts[3 + i] = pk[i] if (pk[i] > -h2 and pk[i] < h2) else -h2
        pts.sort()
        scale = 1e-12 * max(h1, h2)
        flag = np.zeros(6, dtype=np.bool_)
        for i in range(6):
            for j in range(3):
                if abs(pts[i] - pk[j]) <= scale:
                    flag[i] = True
        ckh1 = math.cos(k * h1)
        total = 0j
        for i in range(5):
            s = pts[i]
            e = pts[i + 1]
            mid = 0.5 * (s + e)
            total += _half_nb(s, mid, flag[i], rho, dz, h1, h2, k, ckh1, panels, nodes, weights)
            total += _half_nb(e, mid, flag[i + 1], rho, dz, h1, h2, k, ckh1, panels, nodes, weights)
        return total

    @njit(cache=True, parallel=True, nogil=True)
    def _mutual_nb(rho, dz, h1, h2, k, rtol, atol, min_panels, max_panels, nodes, weights,
                   out, err, ok):
        for i in prange(rho.size):
            norm = 1j * ETA_OVER_4PI / (math.sin(k * h1[i]) * math.sin(k * h2[i]))
            panels = min_panels
            prev = _emf_sum_nb(rho[i], dz[i], h1[i], h2[i], k, panels, nodes, weights) * norm
            while True:
                panels *= 2
                cur = _emf_sum_nb(rho[i], dz[i], h1[i], h2[i], k, panels, nodes, weights) * norm
                diff = abs(cur - prev)
                if diff <= atol + rtol * abs(cur):
                    out[i] = cur
                    err[i] = diff
                    ok[i] = True
                    break
                if panels >= max_panels:
                    out[i] = cur
                    err[i] = diff
                    ok[i] = False
                    break
                prev = cur

    @njit(cache=True, parallel=True, nogil=True)
    def _fixed_nb(rho, dz, h1, h2, k, panels, nodes, weights, out):
        for i in prange(rho.size):
            norm = 1j * ETA_OVER_4PI / (math.sin(k * h1[i]) * math.sin(k * h2[i]))
            out[i] = _emf_sum_nb(rho[i], dz[i], h1[i], h2[i], k, panels, nodes, weights) * norm

    @njit(cache=True, parallel=True, nogil=True)
    def _array_factor_nb(cur_re, cur_im, px, py, pz, ux, uy, uz, k, out):
        n = cur_re.size
        for g in prange(ux.size):
            sr = 0.0
            si = 0.0
            for i in range(n):
                ph = k * (px[i] * ux[g] + py[i] * uy[g] + pz[i] * uz[g])
                c = math.cos(ph)
                s = math.sin(ph)
                sr += cur_re[i] * c - cur_im[i] * s
                si += cur_re[i] * s + cur_im[i] * c
            out[g] = math.sqrt(sr * sr + si * si)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def _as_pairs(rho, dz, h1, h2):
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (rho, dz, h1, h2)))
    return [np.ascontiguousarray(a.ravel()) for a in arrs]


def mutual_impedance_batch(rho, dz, h1, h2, k, *, rtol=1e-10, atol=1e-12,
                           min_panels=2, max_panels=512, backend=None):
    """Adaptive induced-EMF mutual impedance for many dipole pairs.

    ``rho`` is the lateral distance, ``dz`` the axial offset of the receiving
    dipole's center from the source's, ``h1``/``h2`` the half-lengths. All in
    meters; ``k`` in rad/m. Returns ``(z, err, converged)`` flat arrays.
    """
    rho, dz, h1, h2 = _as_pairs(rho, dz, h1, h2)
    if _pick(backend) == "numba":
        out = np.empty(rho.size, dtype=np.complex128)
        err = np.empty(rho.size)
        ok = np.zeros(rho.size, dtype=np.bool_)
        _mutual_nb(rho, dz, h1, h2, float(k), float(rtol), float(atol), int(min_panels),
                   int(max_panels), GL_NODES, GL_WEIGHTS, out, err, ok)
        return out, err, ok
    return _mutual_np(rho, dz, h1, h2, float(k), rtol, atol, int(min_panels), int(max_panels))


def mutual_impedance_fixed(rho, dz, h1, h2, k, panels, *, backend=None):
    """Same integral with a fixed panel count (no adaptivity)."""
    rho, dz, h1, h2 = _as_pairs(rho, dz, h1, h2)
    if _pick(backend) == "numba":
        out = np.empty(rho.size, dtype=np.complex128)
        _fixed_nb(rho, dz, h1, h2, float(k), int(panels), GL_NODES, GL_WEIGHTS, out)
        return out
    return _fixed_np(rho, dz, h1, h2, float(k), int(panels))


def array_factor(currents, positions, directions, k, *, backend=None):
    """``|sum_n i_n exp(j k p_n . u_g)|`` for every unit vector ``u_g``.

    ``positions`` is (N, 3), ``directions`` is (G, 3).
    """
    currents = np.ascontiguousarray(currents, dtype=np.complex128)
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    directions = np.ascontiguousarray(directions, dtype=np.float64)
    if _pick(backend) == "numba":
        out = np.empty(directions.shape[0])
        _array_factor_nb(
            np.ascontiguousarray(currents.real), np.ascontiguousarray(currents.imag),
            np.ascontiguousarray(positions[:, 0]), np.ascontiguousarray(positions[:, 1]),
            np.ascontiguousarray(positions[:, 2]),
            np.ascontiguousarray(directions[:, 0]), np.ascontiguousarray(directions[:, 1]),
            np.ascontiguousarray(directions[:, 2]), float(k), out,
        )
        return out
    return _array_factor_np(currents, positions, directions, float(k))
