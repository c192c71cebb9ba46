import json
import math
from pathlib import Path

import pytest

from blochtomo.calibration import (
    CalibrationReading,
    calibrate,
    calibrate_delta_dichroic,
    calibrate_delta_plain,
    calibrate_eta,
    forward_reading,
)
from blochtomo.errors import InvalidReading, OutOfDomain
from blochtomo.spectral import ModelParams

GOLD = json.loads((Path(__file__).parent / "golden" / "oracle.json").read_text())


def test_delta_plain_examples():
    assert calibrate_delta_plain(1, 0) == 0
    assert calibrate_delta_plain(0.5, 0.5) == pytest.approx(math.pi / 2)
    assert calibrate_delta_plain(0.146, 0.854) == pytest.approx(GOLD["calibrate_plain_0.146_0.854"], rel=1e-14)
    for bad in ((0, 1), (-1, 1), (float("nan"), 1)):
        with pytest.raises(InvalidReading):
            calibrate_delta_plain(*bad)


def test_eta_examples():
    assert calibrate_eta(2.0, 2.0) == 0
    assert calibrate_eta(math.e**2, 1.0) == pytest.approx(1.0)
    assert calibrate_eta(math.exp(2.8), 1.0) == pytest.approx(1.4)
    with pytest.raises(InvalidReading):
        calibrate_eta(0.0, 1.0)


def test_delta_dichroic_examples():
    assert calibrate_delta_dichroic(0.5, 0.5, 0.0) == pytest.approx(math.pi / 2)
    for eta in (0.0, 0.7, 1.4):
        assert calibrate_delta_dichroic(0.3, 0.3, eta) == pytest.approx(math.pi / 2)
    with pytest.raises(OutOfDomain):
        calibrate_delta_dichroic(0.9, 0.1, 2.0)


def test_forward_round_trip():
    r = forward_reading(ModelParams(1.3, 0.6))
    assert calibrate_delta_dichroic(r.i_ll, r.i_lr, calibrate_eta(r.i_ord, r.i_ext)) == pytest.approx(1.3, abs=1e-10)
    for d in (0.1, 1.3, 2.0, 3.0):
        for e in (0.0, 0.3, 1.4):
            p = calibrate(forward_reading(ModelParams(d, e), i0=2.5))
            assert p.delta == pytest.approx(d, abs=1e-10) and p.eta == pytest.approx(e, abs=1e-10)
    assert calibrate_delta_plain(*(lambda r: (r.i_ll, r.i_lr))(forward_reading(ModelParams(1.3, 0.0)))) == pytest.approx(1.3)


def test_calibrate_without_linear_pair():
    p = calibrate(CalibrationReading(i_ll=0.5, i_lr=0.5))
    assert p.eta == 0 and p.delta == pytest.approx(math.pi / 2)
