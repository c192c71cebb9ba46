import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

import oracles as O
from blochtomo.cli import load_schema
from blochtomo.errors import GridError, NoConvergence, NotAnEP
from blochtomo.polarimetry import synthesize_dataset
from blochtomo.spectral import ModelParams, bloch_bands, canonical_from_operator, eigensystem, q_grid, step_operator, hopping_from_params
from blochtomo.tomography import reconstruct_bz
from blochtomo.topology import (
    critical_momentum,
    eigen_infidelity,
    find_exceptional_points,
    phase_diagram,
    rotated_generator,
    save_ep_records,
    sublattice_residual,
    winding_at,
    winding_number,
)

GOLD = json.loads((Path(__file__).parent / "golden" / "oracle.json").read_text())


def closed_n(delta, eta, n_q=90):
    return bloch_bands(ModelParams(delta, eta), q_grid(n_q))[1]


@pytest.mark.parametrize("delta,eta", O.REFERENCE_SETTINGS)
def test_winding_reference_settings(delta, eta):
    nu = winding_number(closed_n(delta, eta), q_grid(90))
    assert abs(nu.real - O.THEORY_WINDING[(delta, eta)]) <= 0.02
    assert abs(nu.imag) <= 0.02


def test_winding_matches_phase_increment_oracle():
    for d, e in [(0.4, 0.2), (2.0, 0.1), (3.5, 0.7), (1.3, 1.2), (5.0, 0.3)]:
        n = closed_n(d, e, 360)
        assert abs(winding_number(n).real - O.winding_phase_increment(n)) < 0.02


def test_winding_immune_to_chart_sign_flips():
    n = closed_n(1.3, 1.4)
    flipped = n.copy()
    flipped[::7] *= -1
    assert winding_number(flipped) == pytest.approx(winding_number(n), abs=1e-12)


def test_winding_grid_stable():
    for d, e in O.REFERENCE_SETTINGS:
        a, b = winding_at(ModelParams(d, e), 90), winding_at(ModelParams(d, e), 720)
        assert abs(a.real - b.real) <= 0.01


def test_winding_grid_errors():
    n = closed_n(1.3, 0.6)
    with pytest.raises(GridError):
        winding_number(n[:7])
    q = q_grid(90)
    q[5] += 0.01
    with pytest.raises(GridError):
        winding_number(n, q)
    with pytest.raises(GridError):
        winding_number(n, q_grid(91)[:90])
    bad = n.copy()
    bad[3] = np.nan
    with pytest.raises(GridError):
        winding_number(bad)


def test_sublattice_residual():
    n = closed_n(1.3, 1.4)
    assert sublattice_residual(n) <= 1e-12
    n[10, 2] = -n[10, 1]
    assert sublattice_residual(n) == pytest.approx(abs(2 * n[10, 1]))
    with pytest.raises(ValueError):
        sublattice_residual(np.empty((0, 3)))


def test_phase_diagram_anchors():
    nu = lambda d, e: winding_at(ModelParams(d, e)).real  # noqa: E731
    assert abs(nu(math.pi / 4, 0.0)) < 0.02
    assert abs(nu(math.pi, 0.0) - 1) < 0.02
    # at delta = 1.3 the jump happens between eta = 0.98 and 1.00; fine grid to resolve it
    lo = winding_at(ModelParams(1.3, 0.98), 720).real
    hi = winding_at(ModelParams(1.3, 1.00), 720).real
    assert abs(lo) < 0.05 and abs(hi - 1) < 0.1


def test_phase_diagram_hermitian_line_and_symmetry(tmp_path):
    pd = phase_diagram((0.0, 2 * math.pi), (0.0, 1.4), (33, 15), 180)
    assert pd.nu.shape == (33, 15)
    j0 = 0
    for i, d in enumerate(pd.delta_grid):
        if abs(d - math.pi / 2) < 0.15 or abs(d - 3 * math.pi / 2) < 0.15:
            continue
        expect = 1 if math.pi / 2 < d < 3 * math.pi / 2 else 0
        assert abs(pd.nu[i, j0] - expect) < 0.02
    finite = np.isfinite(pd.nu) & np.isfinite(pd.nu[::-1])
    assert np.max(np.abs(pd.nu - pd.nu[::-1])[finite]) < 1e-9
    pd.to_csv(tmp_path / "pd.csv")
    lines = (tmp_path / "pd.csv").read_text().splitlines()
    assert lines[0] == ",".join(load_schema("csv_columns.json")["phase_diagram.csv"])
    assert len(lines) == 1 + 33 * 15


def test_phase_diagram_near_integers_away_from_boundary():
    pd = phase_diagram((0.2, 1.2), (0.0, 0.6), (8, 8), 90)
    assert np.max(np.abs(pd.nu - np.round(pd.nu))) <= 0.05
    with pytest.raises(ValueError):
        phase_diagram(resolution=4)


def test_ep_at_delta_1p3():
    recs = find_exceptional_points(1.3)
    gold = GOLD["ep_1.3"]
    q_dense, eta_dense, dq, deta = O.ep_dense_scan(1.3)
    assert len(recs) == 2
    assert recs[0].q_c == pytest.approx(gold["q_c"], abs=1e-9)
    assert recs[1].q_c == pytest.approx(gold["q_mirror"], abs=1e-9)
    assert abs(recs[0].q_c - q_dense) <= dq and abs(recs[0].eta_c - eta_dense) <= deta
    assert recs[0].eta_c == pytest.approx(gold["eta_c"], abs=1e-9)
    assert abs(recs[0].eta_c - 0.99) <= 0.01
    assert {r.branch for r in recs} == {"z_a", "z_b"}
    for r in recs:
        assert r.residual <= 1e-9
        za, zb = rotated_generator(1.3, r.eta_c, r.q_c)
        assert min(abs(za), abs(zb)) <= 1e-9 < max(abs(za), abs(zb))
        es = eigensystem(canonical_from_operator(step_operator(hopping_from_params(ModelParams(1.3, r.eta_c)), r.q_c)))
        assert es.coalesced and 1 - es.overlap <= 1e-6


def test_ep_from_initial_guess_and_other_delta():
    recs = find_exceptional_points(1.3, q_init=2.3, eta_init=0.8)
    assert recs[0].q_c == pytest.approx(GOLD["ep_1.3"]["q_c"], abs=1e-9)
    for d in (0.5, math.pi / 4, 1.0):
        q_c, eta_c = O.ep_closed_form(d)
        r = find_exceptional_points(d)[0]
        assert r.q_c == pytest.approx(q_c, abs=1e-9) and r.eta_c == pytest.approx(eta_c, abs=1e-9)


def test_diabolic_point_is_not_an_ep():
    with pytest.raises(NotAnEP):
        find_exceptional_points(math.pi / 2, q_init=math.pi, eta_init=0.0)


def test_ep_no_convergence():
    # delta = pi has no exceptional point (cos q_c = -tan(pi/2) has no solution)
    with pytest.raises(NoConvergence):
        find_exceptional_points(math.pi, max_iter=30)


def test_ep_json(tmp_path):
    save_ep_records(find_exceptional_points(1.3), tmp_path / "ep.json")
    jsonschema.validate(json.loads((tmp_path / "ep.json").read_text()), load_schema("ep.schema.json"))


def test_critical_momentum():
    cm = critical_momentum(1.3, 1.4)
    assert not cm.shallow
    assert abs(cm.q + cm.q_mirror - 2 * math.pi) <= 2 * math.pi / 90 + 1e-12
    inf = eigen_infidelity(ModelParams(1.3, 1.4), q_grid(90))
    minima = [k for k in range(90) if inf[k] < inf[k - 1] and inf[k] < inf[(k + 1) % 90]]
    assert len(minima) == 2
    weak = critical_momentum(math.pi, 0.25)
    assert weak.shallow and weak.infidelity > 0.9
    for d, e in O.REFERENCE_SETTINGS:
        cm = critical_momentum(d, e)
        assert abs(cm.q + cm.q_mirror - 2 * math.pi) <= 2 * math.pi / 90 + 1e-12
    with pytest.raises(ValueError):
        critical_momentum(1.3, 1.4, 4)


def test_critical_momentum_tends_to_ep():
    q_c, eta_c = O.ep_closed_form(1.3)
    cm = critical_momentum(1.3, eta_c, 720)
    assert abs(cm.q - q_c) <= 2 * math.pi / 720


def test_reconstructed_winding_matches_closed_form():
    for d, e in O.REFERENCE_SETTINGS:
        rec = reconstruct_bz(synthesize_dataset(ModelParams(d, e), 90))
        assert abs(winding_number(rec.n) - winding_number(closed_n(d, e))) <= 0.02
