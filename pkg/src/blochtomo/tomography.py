"""Per-momentum process tomography of the walk step from 18 polarimetric ratios.

The unknown is the canonical pair ``(m0, m)`` (8 real numbers) subject to
``m0^2 - m.m = 1``, which is the determinant gauge of the quasi-energy chart's
constraint ``n.n = 1`` split into real and imaginary parts.  The ratios do not
depend on the overall complex scale of the operator, so the constraint is
carried as two extra least-squares residuals that only fix the scale, and the
solution is projected exactly onto the constraint afterwards.

Pixels are solved in q order, each warm-started from its neighbour; the first
pixel uses seeded random starts.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from .errors import EPSingular, NotConverged, ScalarOperator
from .polarimetry import INPUTS, PROJECTIONS, STATES, PolarimetrySet
from .spectral import (
    PAULI,
    SIGMA_0,
    CanonicalStep,
    bloch_from_canonical_arrays,
    coin_matrix,
    eigensystem,
    pauli_matrix,
)

log = logging.getLogger(__name__)

# amplitude <j|sigma_k|i> for k = 0..3, rows in RATIO_KEYS order -> (18, 4)
_BASIS = np.concatenate([SIGMA_0[None], PAULI])
_C = np.array([[np.vdot(STATES[j], b @ STATES[i]) for b in _BASIS] for i in INPUTS for j in PROJECTIONS])

SHALLOW_INFIDELITY = 0.9


@dataclass
class SolverConfig:
    max_iterations: int = 200
    cost_tolerance: float = 1e-18
    step_tolerance: float = 1e-15
    restarts: int = 20
    seed: int = 0
    restart_factor: float = 10.0

    def __post_init__(self):
        for name in ("max_iterations", "cost_tolerance", "step_tolerance", "restart_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    @classmethod
    def noisy(cls, **kw):
        kw.setdefault("cost_tolerance", 1e-10)
        return cls(**kw)


@dataclass
class ReconstructionResult:
    canonical: CanonicalStep
    residual: float
    iterations: int
    converged: bool
    ep_suspect: bool = False
    dark_input: bool = False

    @property
    def flags(self):
        return [name for name in ("converged", "ep_suspect", "dark_input") if getattr(self, name)]


def _pack(cs: CanonicalStep):
    xc = np.concatenate([[cs.m0], cs.m])
    return np.concatenate([xc.real, xc.imag])


def _unpack(x):
    return x[:4] + 1j * x[4:]


def _project(xc):
    det = xc[0] ** 2 - np.sum(xc[1:] ** 2)
    return xc / np.sqrt(det)


def model_ratios(xc):
    """Ratios and raw intensities for Pauli coefficients ``xc = (m0, mx, my, mz)``."""
    amp = _C @ xc
    inten = np.abs(amp) ** 2
    pairs = inten.reshape(9, 2)
    return (pairs / pairs.sum(axis=1, keepdims=True)).reshape(18), amp


def _residuals_and_jac(x, data):
    xc = _unpack(x)
    amp = _C @ xc
    inten = np.abs(amp) ** 2
    # dI/dRe x_k = 2 Re(conj(A) C_k),  dI/dIm x_k = -2 Im(conj(A) C_k)
    g = np.conj(amp)[:, None] * _C
    d_int = np.concatenate([2 * g.real, -2 * g.imag], axis=1)
    ia = inten.reshape(9, 2)
    s = ia.sum(axis=1)
    ratios = (ia / s[:, None]).reshape(18)
    da = d_int.reshape(9, 2, 8)
    dsum = da.sum(axis=1)
    d_ratio = (da * s[:, None, None] - ia[:, :, None] * dsum[:, None, :]) / (s[:, None, None] ** 2)
    det = xc[0] ** 2 - np.sum(xc[1:] ** 2)
    ddet_c = np.concatenate([[2 * xc[0]], -2 * xc[1:]])
    ddet = np.concatenate([ddet_c, 1j * ddet_c])
    res = np.concatenate([ratios - data, [det.real - 1.0, det.imag]])
    jac = np.vstack([d_ratio.reshape(18, 8), ddet.real, ddet.imag])
    return res, jac


def cost(candidate: CanonicalStep, data_q) -> float:
    """Sum of squared differences between measured and predicted ratios."""
    xc = np.concatenate([[candidate.m0], candidate.m])
    ratios, _ = model_ratios(xc)
    return float(np.sum((np.asarray(data_q, dtype=float) - ratios) ** 2))


def _random_start(rng):
    while True:
        xc = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        det = xc[0] ** 2 - np.sum(xc[1:] ** 2)
        if abs(det) > 1e-3:
            xc = xc / np.sqrt(det)
            return CanonicalStep(xc[0], xc[1:])


def _solve(data, init: CanonicalStep, cfg: SolverConfig):
    cache = {}

    def fun(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = _residuals_and_jac(x, data)
        return cache[key][0]

    def jac(x):
        fun(x)
        return cache[x.tobytes()][1]

    tol = max(cfg.step_tolerance, 2.3e-16)
    sol = least_squares(
        fun, _pack(init), jac=jac, method="lm", xtol=tol, ftol=tol, gtol=tol, max_nfev=cfg.max_iterations * 10
    )
    xc = _project(_unpack(sol.x))
    cs = CanonicalStep(xc[0], xc[1:])
    c = cost(cs, data)
    converged = sol.status > 0 or c <= cfg.cost_tolerance
    return ReconstructionResult(cs, c, int(sol.njev or sol.nfev), bool(converged))


def reconstruct_pixel(data_q, init: CanonicalStep | None, cfg: SolverConfig | None = None, rng=None, reference_cost=None):
    """Constrained least-squares fit of one pixel.

    Starts from ``init`` (random when None).  When that run does not converge,
    or lands far above ``reference_cost``, seeded random restarts are tried
    and the lowest-cost result is kept.  Raises :class:`NotConverged` with the
    best attempt attached when no run converged.
    """
    cfg = cfg or SolverConfig()
    data_q = np.asarray(data_q, dtype=float)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    cold = init is None
    best = _solve(data_q, init if not cold else _random_start(rng), cfg)
    total_iter = best.iterations

    def good_enough(r):
        if r.residual <= cfg.cost_tolerance:
            return True
        if cold or not r.converged:
            return False
        return reference_cost is None or r.residual <= cfg.restart_factor * max(reference_cost, cfg.cost_tolerance)

    attempts = 1
    while not good_enough(best) and attempts < cfg.restarts:
        trial = _solve(data_q, _random_start(rng), cfg)
        total_iter += trial.iterations
        attempts += 1
        if trial.residual < best.residual or (trial.converged and not best.converged):
            best = trial
    best.iterations = total_iter
    if not best.converged:
        raise NotConverged(f"no converged fit after {attempts} attempts", best=best)
    return best


def _implied_half_angle_sign(u, q):
    # T(q) = U W^+ = alpha s0 + i beta (e^{iq}|A><B| + e^{-iq}|B><A|) with
    # alpha + i beta = exp(i w); the delta in [0, 2 pi) gauge needs Re w in [0, pi)
    t = u @ coin_matrix().conj().T
    alpha = 0.5 * (t[0, 0] + t[1, 1])
    beta = (t[0, 1] * np.exp(-1j * q) + t[1, 0] * np.exp(1j * q)) / 2j
    key = alpha.imag + beta.real
    if abs(key) <= 1e-9 * max(1.0, abs(alpha) + abs(beta)):
        key = alpha.real
    return 1.0 if key >= 0 else -1.0


def branch_align(steps, q=None):
    """Resolve the +-U ambiguity along the Brillouin zone.

    Consecutive pixels are sign-flipped to minimise ||U_k - U_{k-1}||_F, then a
    global sign is chosen so that the hopping angle implied by the first pixel
    has real part in [0, pi), matching delta in [0, 2 pi).  Idempotent.
    """
    steps = list(steps)
    if not steps:
        raise ValueError("branch_align needs at least one pixel")
    q0 = 0.0 if q is None else float(q[0])
    out = [steps[0]]
    for cs in steps[1:]:
        prev = out[-1].matrix()
        u = cs.matrix()
        out.append(cs.negated() if np.linalg.norm(u + prev) < np.linalg.norm(u - prev) else cs)
    if _implied_half_angle_sign(out[0].matrix(), q0) < 0:
        out = [cs.negated() for cs in out]
    return out


def _infidelity(cs):
    try:
        es = eigensystem(cs)
    except (EPSingular, ScalarOperator):
        return 0.0
    return 1.0 - es.overlap


@dataclass
class BZReconstruction:
    """Arrays over the momentum grid produced by :func:`reconstruct_bz`."""

    q: np.ndarray
    results: list

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        m0 = np.array([r.canonical.m0 for r in self.results])
        m = np.array([r.canonical.m for r in self.results])
        dark = self.dark
        m0[dark] = np.nan
        m[dark] = np.nan
        self.E, self.n = bloch_from_canonical_arrays(m0, m)

    @property
    def m0(self):
        return np.array([r.canonical.m0 for r in self.results])

    @property
    def m(self):
        return np.array([r.canonical.m for r in self.results])

    @property
    def residual(self):
        return np.array([r.residual for r in self.results])

    @property
    def iterations(self):
        return np.array([r.iterations for r in self.results])

    @property
    def converged(self):
        return np.array([r.converged for r in self.results])

    @property
    def ep_suspect(self):
        return np.array([r.ep_suspect for r in self.results])

    @property
    def dark(self):
        return np.array([r.dark_input for r in self.results])

    def operators(self):
        return pauli_matrix(self.m0, self.m)

    def infidelity(self):
        return np.array([np.nan if r.dark_input else _infidelity(r.canonical) for r in self.results])

    def to_records(self):
        def pair(z):
            return None if not np.isfinite(z) else [float(z.real), float(z.imag)]

        recs = []
        for k, (q, r) in enumerate(zip(self.q, self.results)):
            E = self.E[k]
            n = self.n[k]
            ok = np.isfinite(E) and np.all(np.isfinite(n))
            recs.append(
                {
                    "k": k,
                    "q": float(q),
                    "m0": pair(r.canonical.m0),
                    "m": [pair(z) for z in r.canonical.m],
                    "E": pair(E) if ok else None,
                    "n": [pair(z) for z in n] if ok else None,
                    "residual": float(r.residual) if np.isfinite(r.residual) else None,
                    "iterations": int(r.iterations),
                    "flags": r.flags,
                }
            )
        return recs

    @classmethod
    def from_records(cls, records):
        def z(p):
            return complex(np.nan, np.nan) if p is None else complex(p[0], p[1])

        results, qs = [], []
        for rec in sorted(records, key=lambda r: r["k"]):
            qs.append(rec["q"])
            cs = CanonicalStep(z(rec["m0"]), [z(p) for p in rec["m"]])
            flags = set(rec["flags"])
            results.append(
                ReconstructionResult(
                    cs, np.nan if rec["residual"] is None else rec["residual"], rec.get("iterations", 0), "converged" in flags, "ep_suspect" in flags, "dark_input" in flags
                )
            )
        return cls(np.array(qs), results)

    def save(self, path):
        payload = self.to_records()
        Path(path).write_text(json.dumps(payload, indent=1) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_records(json.loads(Path(path).read_text()))


def _sweep(ratios, dark, indices, cfg, rng):
    out = {}
    prev, prev_cost = None, None
    for k in indices:
        if dark[k]:
            nan = complex(np.nan, np.nan)
            out[k] = ReconstructionResult(CanonicalStep(nan, [nan] * 3), float("nan"), 0, False, False, True)
            continue
        try:
            res = reconstruct_pixel(ratios[k], prev, cfg, rng=rng, reference_cost=prev_cost)
        except NotConverged as exc:
            log.warning("pixel %d did not converge (cost %.3g)", k, exc.best.residual)
            res = exc.best
        out[k] = res
        prev, prev_cost = res.canonical, res.residual
    return out


def reconstruct_bz(data: PolarimetrySet, cfg: SolverConfig | None = None, segments=1, max_workers=None) -> BZReconstruction:
    """Reconstruct every pixel with continuation along q.

    ``segments > 1`` splits the zone into contiguous blocks solved
    independently (each cold-started, optionally in parallel threads) and then
    stitched by :func:`branch_align`.
    """
    cfg = cfg or SolverConfig()
    n = len(data)
    if n < 2:
        raise ValueError("need at least two quasi-momentum samples")
    segments = max(1, min(int(segments), n))
    blocks = np.array_split(np.arange(n), segments)
    seeds = np.random.SeedSequence(cfg.seed).spawn(segments)

    def run(b):
        return _sweep(data.ratios, data.dark, blocks[b], cfg, np.random.default_rng(seeds[b]))

    if segments == 1:
        parts = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(run, range(segments)))
    merged = {}
    for part in parts:
        merged.update(part)
    results = [merged[k] for k in range(n)]

    live = [k for k in range(n) if not results[k].dark_input]
    if live:
        aligned = branch_align([results[k].canonical for k in live], q=data.q[live])
        for k, cs in zip(live, aligned):
            results[k].canonical = cs
    _flag_ep_suspects(results)
    return BZReconstruction(data.q, results)


def _flag_ep_suspects(results):
    # chart singularities, plus strict local minima of the eigenvector
    # infidelity that are deep enough to signal near-coalescence
    inf = np.array([np.nan if r.dark_input else _infidelity(r.canonical) for r in results])
    n = len(inf)
    for k, r in enumerate(results):
        if r.dark_input:
            continue
        m0 = r.canonical.m0
        if abs(np.sin(np.arccos(m0))) <= 1e-10:
            r.ep_suspect = True
            continue
        left, right = inf[(k - 1) % n], inf[(k + 1) % n]
        if inf[k] < SHALLOW_INFIDELITY and inf[k] < left and inf[k] < right:
            r.ep_suspect = True
