"""Winding number, phase diagram and exceptional points of the walk."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import EPSingular, GridError, NoConvergence, NotAnEP
from .pt import rotation_r
from .spectral import (
    PAULI,
    SUBLATTICE_AXIS,
    TWO_PI,
    ModelParams,
    bloch_bands,
    canonical_from_operator,
    eigensystem,
    hopping_from_params,
    q_grid,
    step_operator,
    step_operators,
    wrap_q,
)

SQRT2 = np.sqrt(2.0)
SHALLOW_INFIDELITY = 0.9


def _check_uniform(q, n):
    q = np.asarray(q, dtype=float)
    if len(q) != n:
        raise GridError("q grid and samples differ in length")
    step = TWO_PI / n
    gaps = np.diff(np.concatenate([q, [q[0] + TWO_PI]]))
    if np.max(np.abs(gaps - step)) > 1e-9:
        raise GridError("winding number needs a uniform grid covering one Brillouin zone")


def winding_number(n_samples, q=None) -> complex:
    """Discretized winding of the Bloch vector around the sublattice axis.

    ``(1/2 pi) sum_k (n_k x dn_k) . s`` with periodic central differences and
    complex bilinear products.  The quasi-energy chart is defined up to
    ``(E, n) -> (-E, -n)``, and principal branches flip that sign where the
    spectrum crosses a branch cut, so each neighbour is sign-matched to n_k
    before differencing (a pure sign flip contributes nothing to the
    continuum integrand).  The real part is the invariant; the imaginary part
    is a discretization/noise diagnostic.
    """
    n = np.asarray(n_samples, dtype=complex)
    if n.ndim != 2 or n.shape[1] != 3 or len(n) < 8:
        raise GridError("need at least 8 three-component samples")
    if not np.all(np.isfinite(n)):
        raise GridError("non-finite Bloch vector samples (exceptional point on the grid?)")
    if q is not None:
        _check_uniform(q, len(n))
    nxt = np.roll(n, -1, axis=0)
    prv = np.roll(n, 1, axis=0)

    def matched(nb):
        flip = np.linalg.norm(nb + n, axis=1) < np.linalg.norm(nb - n, axis=1)
        return np.where(flip[:, None], -nb, nb)

    dn = 0.5 * (matched(nxt) - matched(prv))
    return complex(np.sum(np.cross(n, dn) @ SUBLATTICE_AXIS) / TWO_PI)


def sublattice_residual(n_samples) -> float:
    n = np.asarray(n_samples, dtype=complex).reshape(-1, 3)
    if len(n) == 0:
        raise ValueError("no samples")
    return float(np.nanmax(np.abs(n[:, 1] - n[:, 2])))


@dataclass
class PhaseDiagram:
    delta_grid: np.ndarray
    eta_grid: np.ndarray
    nu: np.ndarray  # real part, shape (len(delta_grid), len(eta_grid))
    nu_imag_residual: np.ndarray

    def rows(self):
        for i, d in enumerate(self.delta_grid):
            for j, e in enumerate(self.eta_grid):
                yield float(d), float(e), float(self.nu[i, j]), float(self.nu_imag_residual[i, j])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta", "eta", "nu_re", "nu_im"])
            for row in self.rows():
                w.writerow([repr(v) for v in row])


def winding_at(p: ModelParams, n_q=90) -> complex:
    _, n = bloch_bands(p, q_grid(n_q))
    if not np.all(np.isfinite(n)):
        return complex(np.nan, np.nan)
    return winding_number(n)


def phase_diagram(delta_range=(0.0, TWO_PI), eta_range=(0.0, 1.4), resolution=64, n_q=360) -> PhaseDiagram:
    """Winding number of the closed-form bands over a (delta, eta) grid.

    Cells whose momentum grid lands exactly on a band touching are nan.
    """
    res = (resolution, resolution) if np.isscalar(resolution) else tuple(resolution)
    if min(res) < 8:
        raise ValueError("resolution must be >= 8 per axis")
    deltas = np.linspace(*delta_range, res[0])
    etas = np.linspace(*eta_range, res[1])
    nu = np.empty(res, dtype=complex)
    for i, d in enumerate(deltas):
        for j, e in enumerate(etas):
            nu[i, j] = winding_at(ModelParams(d, e), n_q)
    return PhaseDiagram(deltas, etas, nu.real, nu.imag)


# ---------------------------------------------------------------------------
# exceptional points


@dataclass
class EPRecord:
    q_c: float
    eta_c: float
    branch: str  # which rotated-frame off-diagonal vanishes: "z_a" or "z_b"
    residual: float
    delta: float = float("nan")
    sign: int = 1

    def to_dict(self):
        return asdict(self)


def _ep_equation(delta, q, eta, sign):
    c = hopping_from_params(ModelParams(delta, eta))
    return c.alpha - c.beta * np.cos(q) - sign * SQRT2


def _dual_residual(delta, q, eta):
    c = hopping_from_params(ModelParams(delta, eta))
    x = c.alpha - c.beta * np.cos(q)
    return abs(2.0 - x * x)


def rotated_generator(delta, eta, q):
    """Off-diagonals of r (i m . sigma) r^+, the traceless step generator in the sublattice frame."""
    cs = canonical_from_operator(step_operator(hopping_from_params(ModelParams(delta, eta)), q))
    r = rotation_r()
    h = 1j * np.einsum("k,kij->ij", cs.m, PAULI)
    hr = r @ h @ r.conj().T
    return hr[0, 1], hr[1, 0]


def _coarse_scan(delta, eta_max, nq=361, neta=401):
    qs = np.linspace(0.0, np.pi, nq)
    etas = np.linspace(0.0, eta_max, neta)
    z = 0.5 * (delta + 1j * etas[:, None])
    x = np.cos(z) - np.sin(z) * np.cos(qs[None, :])
    dist = np.abs(2.0 - x * x)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return qs[j], etas[i], int(np.sign(x[i, j].real) or 1)


def find_exceptional_points(delta, q_init=None, eta_init=None, eta_max=3.0, tol=1e-13, max_iter=60, h=1e-7):
    """Locate the exceptional-point pair at fixed ``delta``.

    Solves ``alpha(eta) - beta(eta) cos q = +-sqrt 2`` (real and imaginary
    parts, unknowns q and eta) by damped Newton with a central-difference
    Jacobian, bootstrapped from a coarse scan when no initial guess is given.
    Each root is cross-checked in the rotated sublattice frame, where exactly
    one off-diagonal of the generator must vanish.  Returns records for q_c
    and 2 pi - q_c.
    """
    if q_init is None or eta_init is None:
        q0, e0, sign = _coarse_scan(delta, eta_max)
        q_init = q0 if q_init is None else q_init
        eta_init = e0 if eta_init is None else eta_init
    else:
        c = hopping_from_params(ModelParams(delta, eta_init))
        sign = 1 if (c.alpha - c.beta * np.cos(q_init)).real >= 0 else -1

    def f(v):
        z = _ep_equation(delta, v[0], v[1], sign)
        return np.array([z.real, z.imag])

    v = np.array([float(q_init), float(eta_init)])
    fv = f(v)
    for _ in range(max_iter):
        if np.linalg.norm(fv) <= tol:
            break
        jac = np.empty((2, 2))
        for k in range(2):
            dv = np.zeros(2)
            dv[k] = h
            jac[:, k] = (f(v + dv) - f(v - dv)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -fv)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian at {v}") from exc
        lam = 1.0
        while lam > 1e-6:
            trial = v + lam * step
            ft = f(trial)
            if np.linalg.norm(ft) < np.linalg.norm(fv):
                break
            lam *= 0.5
        v, fv = trial, ft
    if np.linalg.norm(fv) > max(tol, 1e-11):
        raise NoConvergence(f"EP search stalled at residual {np.linalg.norm(fv):.3g}")

    q_c, eta_c = float(wrap_q(v[0])), float(v[1])
    records = []
    for q in (q_c, float(wrap_q(TWO_PI - q_c))):
        za, zb = rotated_generator(delta, eta_c, q)
        small_a, small_b = abs(za) <= 1e-9, abs(zb) <= 1e-9
        if small_a and small_b:
            raise NotAnEP(f"both off-diagonals vanish at (q={q:.6f}, eta={eta_c:.6f}): diabolic point")
        if not (small_a or small_b):
            raise NoConvergence("root does not make a single off-diagonal vanish")
        records.append(EPRecord(q, eta_c, "z_a" if small_a else "z_b", float(_dual_residual(delta, q, eta_c)), float(delta), sign))
    return records


def save_ep_records(records, path):
    Path(path).write_text(json.dumps([r.to_dict() for r in records], indent=1) + "\n")


@dataclass
class CriticalMomentum:
    q: float
    q_mirror: float
    infidelity: float
    shallow: bool

    def __iter__(self):
        return iter((self.q, self.q_mirror))


def eigen_infidelity(p: ModelParams, q):
    """1 - |<psi1|psi2>|^2 of the right eigenvectors along ``q`` (0 at EPs)."""
    out = np.empty(len(q))
    for k, u in enumerate(step_operators(p, np.asarray(q, dtype=float))):
        try:
            out[k] = 1.0 - eigensystem(canonical_from_operator(u)).overlap
        except EPSingular:
            out[k] = 0.0
    return out


def critical_momentum(delta, eta, n_q=90) -> CriticalMomentum:
    """Grid momentum of minimal eigenvector infidelity and its mirror 2 pi - q*.

    Equals the exceptional-point momentum only at eta = eta_c; ``shallow``
    marks curves whose minimum stays close to 1 (nearly orthogonal states).
    """
    if n_q < 8:
        raise ValueError("n_q must be >= 8")
    q = q_grid(n_q)
    inf = eigen_infidelity(ModelParams(delta, eta), q)
    k = int(np.argmin(inf))
    qs = float(q[k])
    mirror = float(wrap_q(TWO_PI - qs))
    if qs > mirror:
        qs, mirror = mirror, qs
    return CriticalMomentum(qs, mirror, float(inf[k]), bool(inf[k] > SHALLOW_INFIDELITY))
