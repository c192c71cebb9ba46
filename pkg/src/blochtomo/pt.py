"""PT-symmetry analysis of sublattice-symmetric 2x2 Hamiltonians.

The rotation ``r = sqrt(W)`` takes the sublattice operator ``S = s . sigma``
to ``-sigma_z``, so a sublattice-symmetric Hamiltonian becomes purely
off-diagonal in the rotated frame.  The off-diagonals ``(z_a, z_b)`` are
written as ``z_a = e^{i phi'} a e^{i phi}``, ``z_b = e^{i phi'} b e^{-i phi}``
with ``a, b >= 0``; ``phi'`` decides whether the spectrum is real or
imaginary and ``phi`` fixes the antiunitary symmetry ``V K``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SublatticeViolation, ZeroMatrix, ZeroVector
from .spectral import SIGMA_0, SIGMA_X, SUBLATTICE_OPERATOR, eigensystem

ROTATED_SUBLATTICE_SIGN = -1
W_COIN = (SIGMA_0 + 1j * SIGMA_X) / np.sqrt(2.0)


def rotation_r():
    return np.cos(np.pi / 8) * SIGMA_0 + 1j * np.sin(np.pi / 8) * SIGMA_X


def rotated_sublattice_operator():
    r = rotation_r()
    return r @ SUBLATTICE_OPERATOR @ r.conj().T


@dataclass
class RotatedForm:
    h_r: np.ndarray
    z_a: complex
    z_b: complex
    diag_residual: float
    violation: bool


def rotate_hamiltonian(h, expect_sublattice=True, tol=1e-6) -> RotatedForm:
    """``H_r = r H r^+``; warns with SublatticeViolation if the diagonal survives."""
    h = np.asarray(h, dtype=complex)
    r = rotation_r()
    hr = r @ h @ r.conj().T
    diag = float(max(abs(hr[0, 0]), abs(hr[1, 1])))
    bad = diag > tol
    if bad and expect_sublattice:
        warnings.warn(f"rotated Hamiltonian keeps a diagonal of size {diag:.3g}", SublatticeViolation, stacklevel=2)
    return RotatedForm(hr, complex(hr[0, 1]), complex(hr[1, 0]), diag, bad)


def _wrap(x):
    """Wrap into (-pi, pi]."""
    y = np.mod(x + np.pi, 2 * np.pi) - np.pi
    return float(np.pi if y == -np.pi else y)


@dataclass
class PTDecomposition:
    phi: float
    phi_prime: float
    a: float
    b: float
    one_sided: bool = False

    def reconstruct(self):
        e = np.exp(1j * self.phi_prime)
        return e * self.a * np.exp(1j * self.phi), e * self.b * np.exp(-1j * self.phi)

    def symmetry_angle(self):
        """Angle of the V K symmetry of the rotated Hamiltonian.

        With ``phi' = 0`` it is ``phi``.  With ``phi' = +-pi/2`` the prefactor
        is absorbed into signed couplings and the angle shifts by pi/2 (only
        defined mod pi, since V(phi + pi) = -V(phi)).  Off these two values
        the nearer one decides, which keeps the angle continuous in q around
        the exceptional momentum.
        """
        if abs(self.phi_prime) > np.pi / 4:
            return _wrap(self.phi + np.pi / 2)
        return self.phi


def pt_decompose(z_a, z_b, tol=1e-12) -> PTDecomposition:
    """Normal form with ``a, b >= 0`` and ``phi'`` folded into (-pi/2, pi/2].

    Folding ``phi'`` by pi forces a simultaneous pi shift of ``phi``, so
    ``phi`` itself lives in (-pi, pi].
    """
    za, zb = complex(z_a), complex(z_b)
    ra, rb = abs(za), abs(zb)
    if ra <= tol and rb <= tol:
        raise ZeroMatrix("both off-diagonal entries vanish")
    if rb <= tol:
        return PTDecomposition(_wrap(np.angle(za)), 0.0, ra, 0.0, True)
    if ra <= tol:
        return PTDecomposition(_wrap(-np.angle(zb)), 0.0, 0.0, rb, True)
    ta, tb = np.angle(za), np.angle(zb)
    phi_p = 0.5 * (ta + tb)
    phi = 0.5 * (ta - tb)
    while phi_p > np.pi / 2:
        phi_p -= np.pi
        phi -= np.pi
    while phi_p <= -np.pi / 2:
        phi_p += np.pi
        phi += np.pi
    return PTDecomposition(_wrap(phi), float(phi_p), ra, rb)


def vk_matrix(phi):
    return np.diag([np.exp(1j * phi), np.exp(-1j * phi)])


def vk_apply(phi, psi):
    return vk_matrix(phi) @ np.conj(np.asarray(psi, dtype=complex))


def order_parameter(psi, phi) -> float:
    """``1 - |<psi| V K |psi>|`` for a normalized state; 0 when psi is V K invariant up to phase."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ZeroVector("zero state")
    psi = psi / nrm
    return float(min(1.0, max(0.0, 1.0 - abs(np.vdot(psi, vk_apply(phi, psi))))))


@dataclass
class PTClassification:
    phase: str  # "Unbroken" | "Broken" | "ExceptionalPoint" | "Indeterminate"
    spectrum: str  # "RealPair" | "ImaginaryPair" | "Zero" | "Mixed"
    eigenvalues: tuple
    order_parameter: float
    decomposition: PTDecomposition

    def to_dict(self):
        d = self.decomposition
        return {
            "phi": d.phi,
            "phi_prime": d.phi_prime,
            "a": d.a,
            "b": d.b,
            "order_parameter": self.order_parameter,
            "phase": self.phase,
            "lambda": [[complex(v).real, complex(v).imag] for v in self.eigenvalues],
        }


_PHASE = {"RealPair": "Unbroken", "ImaginaryPair": "Broken", "Zero": "ExceptionalPoint", "Mixed": "Indeterminate"}


def classify_phase(form: RotatedForm, tol=1e-6, abs_floor=1e-12) -> PTClassification:
    za, zb = form.z_a, form.z_b
    lam = np.sqrt(za * zb + 0j)
    scale = float(np.linalg.norm(form.h_r))
    dec = pt_decompose(za, zb, tol=abs_floor)
    mag = abs(lam)
    if mag <= max(abs_floor, tol * scale):
        spectrum = "Zero"
    elif abs(lam.imag) <= tol * mag:
        spectrum = "RealPair"
    elif abs(lam.real) <= tol * mag:
        spectrum = "ImaginaryPair"
    else:
        spectrum = "Mixed"
    es = eigensystem(form.h_r)
    op = order_parameter(es.psi1, dec.symmetry_angle())
    return PTClassification(_PHASE[spectrum], spectrum, (complex(lam), complex(-lam)), op, dec)


def pt_equivalent(a, b, phi):
    """Standard PT form of ``[[0, a e^{i phi}], [b e^{-i phi}, 0]]`` and the unitary linking them.

    ``H_PT = (1/2)[[i(b - a), b + a], [b + a, -i(b - a)]] = R_phi H R_phi^+``
    with ``R_phi = W U_phi^+`` and ``U_phi = diag(e^{i phi/2}, e^{-i phi/2})``.
    """
    h_pt = 0.5 * np.array([[1j * (b - a), b + a], [b + a, -1j * (b - a)]], dtype=complex)
    u_phi = np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)])
    return h_pt, W_COIN @ u_phi.conj().T


def pt_equivalence_residual(a, b, phi) -> float:
    h = np.array([[0, a * np.exp(1j * phi)], [b * np.exp(-1j * phi), 0]], dtype=complex)
    h_pt, r = pt_equivalent(a, b, phi)
    return float(np.linalg.norm(r @ h @ r.conj().T - h_pt))
