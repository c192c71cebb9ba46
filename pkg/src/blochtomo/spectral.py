"""Forward model of a single non-unitary quantum-walk step in momentum space.

The walk step is ``U(q) = T(q) W`` with a balanced coin rotation ``W`` and a
coin-dependent translation whose hopping amplitudes are

    alpha = cos((delta + i eta) / 2),   beta = sin((delta + i eta) / 2).

Every 2x2 operator is stored in the coin basis ordered (|A>, |B>), which maps
to left/right circular polarization (L, R).

Internally a step operator is represented by its determinant-normalized Pauli
decomposition ``u = m0 s0 + m . s`` (:class:`CanonicalStep`).  The quasi-energy
chart ``u = cos E s0 - i sin E (n . s)`` is derived from it and breaks down at
exceptional points, where the canonical form stays perfectly regular.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateOperator, EPSingular, ScalarOperator, ZeroOperator, ZeroVector

TWO_PI = 2.0 * np.pi

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

# sublattice axis s = (0, 1, -1)/sqrt(2); S = s . sigma satisfies S H S = -H
SUBLATTICE_AXIS = np.array([0.0, 1.0, -1.0]) / np.sqrt(2.0)
SUBLATTICE_OPERATOR = np.einsum("k,kij->ij", SUBLATTICE_AXIS, PAULI)


def wrap_q(q):
    """Reduce quasi-momenta into [0, 2 pi)."""
    q = np.mod(q, TWO_PI)
    # mod returns exactly 2 pi for tiny negative inputs
    q = np.where(q >= TWO_PI, 0.0, q)
    return float(q) if q.ndim == 0 else q


def q_grid(n_q):
    """Uniform periodic grid 2 pi k / n_q, k = 0 .. n_q - 1."""
    return TWO_PI * np.arange(n_q) / n_q


def pauli_matrix(m0, m):
    """Build ``m0 s0 + m . s``; broadcasts over leading axes of ``m0``."""
    m0 = np.asarray(m0, dtype=complex)
    m = np.asarray(m, dtype=complex)
    return m0[..., None, None] * SIGMA_0 + np.einsum("...k,kij->...ij", m, PAULI)


def pauli_coefficients(u):
    """Return ``(m0, m)`` with ``u = m0 s0 + m . s`` (vectorized over leading axes)."""
    u = np.asarray(u, dtype=complex)
    m0 = 0.5 * np.trace(u, axis1=-2, axis2=-1)
    m = 0.5 * np.einsum("kij,...ji->...k", PAULI, u)
    return m0, m


def bilinear(a, b):
    """Complex bilinear dot product (no conjugation) along the last axis."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


@dataclass(frozen=True)
class ModelParams:
    """Birefringence ``delta`` (radians) and dichroism ``eta`` of the walk."""

    delta: float
    eta: float

    def __post_init__(self):
        delta, eta = float(self.delta), float(self.eta)
        if not (np.isfinite(delta) and np.isfinite(eta)):
            raise ValueError(f"non-finite model parameters ({delta}, {eta})")
        # keep delta = 2 pi itself, the closed interval is meaningful
        if not 0.0 <= delta <= TWO_PI:
            delta = float(np.mod(delta, TWO_PI))
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def cascade(cls, deltas, etas):
        """Two (or more) stacked plates act as one with summed settings."""
        return cls(float(np.sum(deltas)), float(np.sum(etas)))


@dataclass(frozen=True)
class HoppingCoeffs:
    alpha: complex
    beta: complex


@dataclass(frozen=True)
class CanonicalStep:
    """Pauli decomposition ``u = m0 s0 + m . s`` in the gauge det(u) = 1.

    ``scale`` is the factor that was applied to the raw operator to reach the
    unit-determinant gauge (1 when none was needed).
    """

    m0: complex
    m: np.ndarray
    scale: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "m0", complex(self.m0))
        object.__setattr__(self, "m", np.asarray(self.m, dtype=complex).reshape(3))

    @property
    def det(self):
        return self.m0 * self.m0 - bilinear(self.m, self.m)

    def matrix(self):
        return pauli_matrix(self.m0, self.m)

    def negated(self):
        return CanonicalStep(-self.m0, -self.m, -self.scale)


@dataclass(frozen=True)
class BlochDecomposition:
    E: complex
    n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "E", complex(self.E))
        object.__setattr__(self, "n", np.asarray(self.n, dtype=complex).reshape(3))

    def canonical(self):
        """Exponential map back to the canonical form."""
        return CanonicalStep(np.cos(self.E), -1j * np.sin(self.E) * self.n)

    def hamiltonian(self):
        return self.E * np.einsum("k,kij->ij", self.n, PAULI)


@dataclass(frozen=True)
class Eigensystem:
    lambda1: complex
    lambda2: complex
    psi1: np.ndarray
    psi2: np.ndarray
    coalesced: bool
    overlap: float = field(default=0.0)


# ---------------------------------------------------------------------------
# hopping, coin, translation, step


def hopping_from_params(p: ModelParams) -> HoppingCoeffs:
    z = 0.5 * (p.delta + 1j * p.eta)
    return HoppingCoeffs(complex(np.cos(z)), complex(np.sin(z)))


def hopping_arrays(p: ModelParams):
    c = hopping_from_params(p)
    return c.alpha, c.beta


def coin_matrix():
    """Balanced coin W = (s0 + i sx)/sqrt(2)."""
    return (SIGMA_0 + 1j * SIGMA_X) / np.sqrt(2.0)


def translation_symbol(c: HoppingCoeffs, q):
    """Momentum-space translation T(q) = alpha s0 + i beta (e^{iq}|A><B| + e^{-iq}|B><A|).

    Both off-diagonals carry the same ``beta``; the two hoppings are reciprocal
    but not complex conjugates of each other.  Vectorized over ``q``.
    """
    q = np.asarray(q, dtype=float)
    t = np.zeros(q.shape + (2, 2), dtype=complex)
    t[..., 0, 0] = c.alpha
    t[..., 1, 1] = c.alpha
    t[..., 0, 1] = 1j * c.beta * np.exp(1j * q)
    t[..., 1, 0] = 1j * c.beta * np.exp(-1j * q)
    return t


def step_operator(c: HoppingCoeffs, q):
    """U(q) = T(q) W.  Accepts scalar or array ``q``."""
    return translation_symbol(c, q) @ coin_matrix()


def step_operators(p: ModelParams, q):
    return step_operator(hopping_from_params(p), q)


# ---------------------------------------------------------------------------
# quasi-energy chart


def bloch_closed_form(c: HoppingCoeffs, q, tol=1e-10) -> BlochDecomposition:
    """Closed-form quasi-energy and Bloch vector at a single ``q``.

    ``E = arccos(x / sqrt 2)`` and ``n = (-(alpha + beta cos q), beta sin q,
    beta sin q) / sqrt(2 - x^2)`` with ``x = alpha - beta cos q``, using the
    principal complex branches.
    """
    x = c.alpha - c.beta * np.cos(q)
    den2 = 2.0 - x * x
    if abs(den2) <= tol:
        raise EPSingular(f"exceptional point at q={q}: 2 - (alpha - beta cos q)^2 = {den2}")
    E = np.arccos(complex(x / np.sqrt(2.0)))
    # sqrt(2) sin E == sqrt(2 - x^2) on principal branches; this spelling also
    # agrees with bloch_from_canonical on the arccos branch cut (signed zeros)
    den = np.sqrt(2.0) * np.sin(E)
    s = c.beta * np.sin(q)
    n = np.array([-(c.alpha + c.beta * np.cos(q)), s, s]) / den
    return BlochDecomposition(E, n)


def bloch_bands(p: ModelParams, q):
    """Vectorized closed form: arrays ``E`` (N,) and ``n`` (N, 3).

    Points at an exceptional point come back as nan.
    """
    a, b = hopping_arrays(p)
    q = np.asarray(q, dtype=float)
    x = a - b * np.cos(q)
    den2 = 2.0 - x * x
    with np.errstate(divide="ignore", invalid="ignore"):
        E = np.arccos(x / np.sqrt(2.0))
        den = np.sqrt(2.0) * np.sin(E)
        s = b * np.sin(q)
        n = np.stack([-(a + b * np.cos(q)), s, s], axis=-1) / den[..., None]
    n[np.abs(den2) <= 1e-14] = np.nan
    return E, n


def canonical_from_operator(u, tol=1e-12) -> CanonicalStep:
    """Pauli decomposition of ``u`` rescaled into the det = 1 gauge."""
    u = np.asarray(u, dtype=complex)
    m0, m = pauli_coefficients(u)
    det = m0 * m0 - bilinear(m, m)
    if abs(det) <= 1e-14:
        raise DegenerateOperator("operator is singular; cannot normalize its determinant")
    if abs(det - 1.0) <= tol:
        return CanonicalStep(m0, m)
    scale = 1.0 / np.sqrt(complex(det))
    return CanonicalStep(m0 * scale, m * scale, scale)


def canonical_from_bloch(b: BlochDecomposition) -> CanonicalStep:
    return b.canonical()


def _arccos_and_sin(m0):
    E = np.arccos(complex(m0))
    return E, np.sin(E)


def bloch_from_canonical(cs: CanonicalStep, tol=1e-10) -> BlochDecomposition:
    """Invert the exponential map: E = arccos(m0), n = i m / sin E."""
    E, sin_e = _arccos_and_sin(cs.m0)
    if abs(sin_e) <= tol:
        if np.linalg.norm(cs.m) <= tol:
            raise ScalarOperator("step operator is +-identity; Bloch vector undefined")
        raise EPSingular("sin E vanishes with nonzero m: Jordan-block step operator")
    return BlochDecomposition(E, 1j * cs.m / sin_e)


def bloch_from_canonical_arrays(m0, m, tol=1e-10):
    """Vectorized inverse map; singular points come back as nan."""
    m0 = np.asarray(m0, dtype=complex)
    m = np.asarray(m, dtype=complex)
    E = np.arccos(m0)
    sin_e = np.sin(E)
    bad = np.abs(sin_e) <= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        n = 1j * m / sin_e[..., None]
    n[bad] = np.nan
    return E, n


def effective_hamiltonian(cs: CanonicalStep):
    """H with U = exp(-i H) and Tr H = 0, i.e. H = i (E / sin E) m . s.

    Regular at E -> 0 (the exceptional points where the eigenvalues vanish),
    undefined at m0 = -1 with m != 0 where no traceless logarithm exists.
    """
    E, sin_e = _arccos_and_sin(cs.m0)
    if abs(sin_e) > 1e-6:
        factor = E / sin_e
    elif cs.m0.real > 0:
        factor = 1.0 + E * E / 6.0
    else:
        if np.linalg.norm(cs.m) <= 1e-10:
            raise ScalarOperator("U = -I has no traceless logarithm of interest")
        raise EPSingular("U = -I + nilpotent has no traceless logarithm")
    return 1j * factor * np.einsum("k,kij->ij", cs.m, PAULI)


def hermitian_split(h):
    """Split ``h = H + i Delta`` with both parts Hermitian.

    Returns ``(H, Delta, ||[H, Delta]||_F)``.
    """
    h = np.asarray(h, dtype=complex)
    hh = 0.5 * (h + h.conj().T)
    delta = (h - h.conj().T) / 2j
    comm = hh @ delta - delta @ hh
    return hh, delta, float(np.linalg.norm(comm))


# ---------------------------------------------------------------------------
# eigenvectors and fidelities


def _normalize(v):
    v = np.asarray(v, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(v)
    if nrm == 0 or not np.isfinite(nrm):
        raise ZeroVector("state vector has zero (or non-finite) norm")
    return v / nrm


def phase_gauge(v, tol=1e-12):
    """Normalize and rotate so the first non-negligible component is real >= 0."""
    v = _normalize(v)
    idx = np.flatnonzero(np.abs(v) > tol)
    k = idx[0] if len(idx) else 0
    ph = v[k] / abs(v[k])
    out = v / ph
    out[k] = abs(v[k])
    return out


def _eigvec(h, mu):
    # null vector of (h . sigma - mu); pick the better-conditioned candidate
    hx, hy, hz = h
    va = np.array([hz + mu, hx + 1j * hy])
    vb = np.array([hx - 1j * hy, mu - hz])
    return va if np.linalg.norm(va) >= np.linalg.norm(vb) else vb


def eigensystem(h, coalesce_tol=1e-8) -> Eigensystem:
    """Right eigenpairs of a 2x2 Hamiltonian (or of H_eff for a CanonicalStep).

    For a :class:`CanonicalStep` the eigenvalues are ``+E`` and ``-E`` in that
    order.  The pair is flagged ``coalesced`` when the eigenvector overlap
    exceeds ``1 - coalesce_tol`` (exceptional point).
    """
    lam1 = None
    if isinstance(h, CanonicalStep):
        E, _ = _arccos_and_sin(h.m0)
        h = effective_hamiltonian(h)
        lam1 = E
    h = np.asarray(h, dtype=complex)
    h0, hv = pauli_coefficients(h)
    mu = np.sqrt(complex(bilinear(hv, hv))) if lam1 is None else lam1
    scale = max(np.linalg.norm(hv), 1e-300)
    if np.linalg.norm(hv) <= 1e-14 * max(1.0, abs(h0)):
        e1 = np.array([1, 0], dtype=complex)
        e2 = np.array([0, 1], dtype=complex)
        return Eigensystem(h0 + mu, h0 - mu, e1, e2, False, 0.0)
    v1 = _eigvec(hv, mu)
    v2 = _eigvec(hv, -mu)
    jordan = abs(mu) <= 1e-12 * scale
    if np.linalg.norm(v1) <= 1e-300:
        v1 = v2
    if np.linalg.norm(v2) <= 1e-300:
        v2 = v1
    psi1, psi2 = phase_gauge(v1), phase_gauge(v2)
    ov = float(abs(np.vdot(psi1, psi2)) ** 2)
    coalesced = jordan or ov > 1.0 - coalesce_tol
    return Eigensystem(complex(h0 + mu), complex(h0 - mu), psi1, psi2, bool(coalesced), ov)


def state_fidelity(psi1, psi2):
    """|<psi1|psi2>|^2 for normalized copies of the inputs."""
    a, b = _normalize(psi1), _normalize(psi2)
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def operator_fidelity(u_th, u_exp):
    """Normalized Hilbert-Schmidt overlap |Tr(A^+ B)| / sqrt(Tr A^+A Tr B^+B)."""
    a = np.asarray(u_th, dtype=complex)
    b = np.asarray(u_exp, dtype=complex)
    na = np.sqrt(np.trace(a.conj().T @ a).real)
    nb = np.sqrt(np.trace(b.conj().T @ b).real)
    if na == 0 or nb == 0:
        raise ZeroOperator("operator fidelity needs nonzero operators")
    return float(min(1.0, abs(np.trace(a.conj().T @ b)) / (na * nb)))


def operator_fidelities(u_th, u_exp):
    """Vectorized :func:`operator_fidelity` over a stack of operators."""
    a = np.asarray(u_th, dtype=complex)
    b = np.asarray(u_exp, dtype=complex)
    num = np.abs(np.einsum("...ij,...ij->...", a.conj(), b))
    na = np.sqrt(np.einsum("...ij,...ij->...", a.conj(), a).real)
    nb = np.sqrt(np.einsum("...ij,...ij->...", b.conj(), b).real)
    return np.minimum(1.0, num / (na * nb))


def stokes(psi):
    """Stokes vector <psi|sigma_k|psi> / <psi|psi>."""
    v = _normalize(psi)
    return np.real(np.einsum("i,kij,j->k", v.conj(), PAULI, v))
