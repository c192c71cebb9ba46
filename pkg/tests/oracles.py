"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test.  Each routine takes a different
route to the same quantity (explicit real/imaginary trig, scalar loops,
matrix logarithms, generic eigensolvers, phase-increment counting).
"""

import cmath
import math

import numpy as np
from scipy.linalg import logm

S2 = math.sqrt(2.0)
REFERENCE_SETTINGS = [(math.pi / 4, 0.9), (1.3, 0.3), (1.3, 0.6), (1.3, 1.4), (math.pi, 0.25)]
ALL_SETTINGS = REFERENCE_SETTINGS + [(1.3, 0.0)]
THEORY_WINDING = {(math.pi / 4, 0.9): 0, (1.3, 0.3): 0, (1.3, 0.6): 0, (1.3, 1.4): 1, (math.pi, 0.25): 1}


def hopping(delta, eta):
    """cos and sin of (delta + i eta)/2 from the real-argument expansions."""
    x, y = delta / 2.0, eta / 2.0
    alpha = complex(math.cos(x) * math.cosh(y), -math.sin(x) * math.sinh(y))
    beta = complex(math.sin(x) * math.cosh(y), math.cos(x) * math.sinh(y))
    return alpha, beta


def matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)] for i in range(2)]


def step_matrix(delta, eta, q):
    """T(q) W built entry by entry with plain complex arithmetic."""
    a, b = hopping(delta, eta)
    t = [[a, 1j * b * cmath.exp(1j * q)], [1j * b * cmath.exp(-1j * q), a]]
    w = [[1 / S2, 1j / S2], [1j / S2, 1 / S2]]
    return np.array(matmul(t, w), dtype=complex)


PAULI = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def pauli_coeffs(h):
    return np.array([np.trace(p @ h) / 2 for p in PAULI])


def bloch_from_logm(u):
    """(E, n) from the matrix logarithm, H = i log U, E = +sqrt(-det H)."""
    h = 1j * logm(u)
    h = h - np.trace(h) / 2 * np.eye(2)
    e = cmath.sqrt(-np.linalg.det(h))
    return e, pauli_coeffs(h) / e


def same_up_to_sign(e1, n1, e2, n2):
    """Distance between two (E, n) charts modulo (E, n) -> (-E, -n)."""
    d_plus = abs(e1 - e2) + np.max(np.abs(np.asarray(n1) - np.asarray(n2)))
    d_minus = abs(e1 + e2) + np.max(np.abs(np.asarray(n1) + np.asarray(n2)))
    return min(d_plus, d_minus)


def hamiltonian(delta, eta, q):
    return 1j * logm(step_matrix(delta, eta, q))


def eig_pairs(h):
    """Eigenvalues and unit right eigenvectors from LAPACK."""
    vals, vecs = np.linalg.eig(h)
    return vals, [vecs[:, k] / np.linalg.norm(vecs[:, k]) for k in range(2)]


KETS = {
    "L": np.array([1, 0], dtype=complex),
    "R": np.array([0, 1], dtype=complex),
    "H": np.array([1, 1], dtype=complex) / S2,
    "V": np.array([1, -1], dtype=complex) / (S2 * 1j),
    "D": np.array([1, 1j], dtype=complex) / S2,
    "A": np.array([1, -1j], dtype=complex) / S2,
}
PARTNER = {"L": "R", "R": "L", "H": "V", "V": "H", "D": "A", "A": "D"}
KEYS = [i + j for i in "LHD" for j in "LRHVDA"]


def intensity(u, i, j, i0=1.0):
    out = u @ KETS[i]
    amp = sum(KETS[j][k].conjugate() * out[k] for k in range(2))
    return i0 * abs(amp) ** 2


def ratios(u):
    return [intensity(u, k[0], k[1]) / (intensity(u, k[0], k[1]) + intensity(u, k[0], PARTNER[k[1]])) for k in KEYS]


def winding_phase_increment(n):
    """Winding from summed phase increments of w = n_x + i sqrt2 n_y.

    n lies in the plane orthogonal to the sublattice axis (n_y = n_z); in the
    basis e1 = x, e2 = (y + z)/sqrt2 with e1 x e2 = -s the integrand is minus
    the angle increment.  Squared ratios make the count blind to n -> -n.
    """
    n = np.asarray(n)
    w = n[:, 0] + 1j * (n[:, 1] + n[:, 2]) / S2
    ratio = np.roll(w, -1) / w
    return -float(np.sum(np.angle(ratio**2)) / 2.0) / (2 * math.pi)


def closed_form_bands(delta, eta, q):
    """Closed-form quasi-energy and Bloch vector with principal cmath branches."""
    a, b = hopping(delta, eta)
    x = a - b * math.cos(q)
    e = cmath.acos(x / S2)
    den = cmath.sqrt(2 - x * x)
    n = np.array([-(a + b * math.cos(q)), b * math.sin(q), b * math.sin(q)]) / den
    return e, n


def ep_closed_form(delta):
    """Exceptional point from alpha - beta cos q = sqrt2 solved by hand.

    The imaginary part vanishes iff cos q = -tan(delta/2); then the real part
    gives cosh(eta/2) = sqrt2 cos(delta/2).
    """
    q_c = math.acos(-math.tan(delta / 2))
    eta_c = 2 * math.acosh(S2 * math.cos(delta / 2))
    return q_c, eta_c


def ep_dense_scan(delta, nq=2001, neta=2001, eta_max=2.0):
    """Brute-force minimiser of |2 - (alpha - beta cos q)^2| on a grid over [0, pi] x [0, eta_max]."""
    qs = np.linspace(0, math.pi, nq)
    etas = np.linspace(0, eta_max, neta)
    z = 0.5 * (delta + 1j * etas[:, None])
    x = np.cos(z) - np.sin(z) * np.cos(qs[None, :])
    d = np.abs(2 - x * x)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return qs[j], etas[i], qs[1] - qs[0], etas[1] - etas[0]


R_ORACLE = np.array([[math.cos(math.pi / 8), 1j * math.sin(math.pi / 8)], [1j * math.sin(math.pi / 8), math.cos(math.pi / 8)]])


def rotated_offdiagonals(delta, eta, q):
    h = hamiltonian(delta, eta, q)
    hr = R_ORACLE @ h @ R_ORACLE.conj().T
    return hr, hr[0, 1], hr[1, 0]
