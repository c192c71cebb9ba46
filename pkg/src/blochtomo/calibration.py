"""Recover the retardance and dichroism of a liquid-crystal plate from power readings.

A plate with complex half-angle ``(delta + i eta)/2`` transmits circular light
with amplitude ``alpha`` into the same handedness and ``beta`` into the
opposite one.  Linear light along the optic axis picks up ``e^{eta/2}`` and
perpendicular light ``e^{-eta/2}`` (up to a common factor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidReading, OutOfDomain
from .spectral import ModelParams, hopping_from_params


@dataclass(frozen=True)
class CalibrationReading:
    i_ll: float = float("nan")
    i_lr: float = float("nan")
    i_ord: float = float("nan")
    i_ext: float = float("nan")


def _check(*vals):
    for v in vals:
        if not np.isfinite(v) or v < 0:
            raise InvalidReading(f"reading must be finite and non-negative, got {v}")


def calibrate_delta_plain(i_ll, i_lr) -> float:
    """Retardance in [0, pi) of a lossless plate from co- and cross-circular power."""
    _check(i_ll, i_lr)
    if i_ll == 0:
        raise InvalidReading("co-circular reading must be positive")
    return float(2.0 * np.arctan(np.sqrt(i_lr / i_ll)))


def calibrate_eta(i_ord, i_ext) -> float:
    _check(i_ord, i_ext)
    if i_ord == 0 or i_ext == 0:
        raise InvalidReading("both linear readings must be positive")
    return float(0.5 * np.log(i_ord / i_ext))


def calibrate_delta_dichroic(i_ll, i_lr, eta) -> float:
    """Retardance of a dichroic plate, ``cos delta = cosh(eta) (I_LL - I_LR)/(I_LL + I_LR)``."""
    _check(i_ll, i_lr)
    if i_ll + i_lr == 0:
        raise InvalidReading("no transmitted power")
    c = np.cosh(eta) * (i_ll - i_lr) / (i_ll + i_lr)
    if abs(c) > 1.0 + 1e-12:
        raise OutOfDomain(f"cos(delta) = {c:.6g} lies outside [-1, 1]")
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def calibrate(reading: CalibrationReading) -> ModelParams:
    """Full calibration: eta from the linear pair (0 if absent), then delta."""
    if np.isfinite(reading.i_ord) or np.isfinite(reading.i_ext):
        eta = calibrate_eta(reading.i_ord, reading.i_ext)
    else:
        eta = 0.0
    return ModelParams(calibrate_delta_dichroic(reading.i_ll, reading.i_lr, eta), eta)


def forward_reading(p: ModelParams, i0=1.0) -> CalibrationReading:
    """Ideal readings a plate with parameters ``p`` would produce."""
    c = hopping_from_params(p)
    return CalibrationReading(
        i_ll=float(i0 * abs(c.alpha) ** 2),
        i_lr=float(i0 * abs(c.beta) ** 2),
        i_ord=float(i0 * np.exp(p.eta)),
        i_ext=float(i0 * np.exp(-p.eta)),
    )
