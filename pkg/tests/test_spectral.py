import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticedelta.multiplier import Fractional, HigherOrder, Identity, Relativistic, catalogue
from latticedelta.spectral import (
    TABLE_HEADER,
    Behavior,
    BehaviorRow,
    NoCouplingError,
    Reason,
    behavior_from_exponent,
    behavior_table,
    classify_edge,
    coupling_for_energy,
    eigencurve,
    eigenvector_profile,
    energy_for_coupling,
    exponent_table,
    is_eigenvalue,
    table_to_csv,
    thresholds,
)

from oracles import (
    TWO_PI,
    WATSON_W3,
    identity_bessel,
    identity_d1_energy,
    identity_green_bessel,
)
from reference_tables import TABLE_EXPONENTS, TABLE_FRACTIONAL, TABLE_IDENTITY, as_strings, cells

CATALOGUE = catalogue()
IDS = [s.label for s in CATALOGUE]

# ---------------------------------------------------------------- criterion


def test_is_eigenvalue_examples():
    assert is_eigenvalue(Identity(), 1, 1.0).reason is Reason.INTERIOR
    ok = is_eigenvalue(Identity(), 1, 3.0)
    assert ok.is_eigenvalue and ok.reason is Reason.OK
    assert ok.coupling == pytest.approx(math.sqrt(3.0), rel=1e-12)
    res = is_eigenvalue(Identity(), 3, 2.0)
    assert not res.is_eigenvalue and res.reason is Reason.I_DIVERGENT
    mode = is_eigenvalue(Identity(), 5, 2.0)
    assert mode.is_eigenvalue and mode.coupling == pytest.approx(thresholds(Identity(), 5).v2, rel=1e-12)


@pytest.mark.parametrize("spec", CATALOGUE, ids=IDS)
@pytest.mark.parametrize("d", [1, 2, 3])
def test_interior_never_eigenvalue(spec, d):
    rng = np.random.default_rng(d)
    width = spec.top - spec.bottom
    for E in rng.uniform(spec.bottom + 1e-3 * width, spec.top - 1e-3 * width, 10):
        assert is_eigenvalue(spec, d, E).reason is Reason.INTERIOR


def test_coupling_examples():
    assert coupling_for_energy(Identity(), 1, 3.0) == pytest.approx(math.sqrt(3.0), rel=1e-12)
    assert coupling_for_energy(Identity(), 3, 2.0) == pytest.approx(1.0 / WATSON_W3, rel=1e-9)
    assert coupling_for_energy(Identity(), 3, 2.0) == pytest.approx(0.6594626, abs=1e-7)
    assert coupling_for_energy(Identity(), 1, 1e3) == pytest.approx(1e3 - 1.0, rel=2e-3)


def test_coupling_errors():
    with pytest.raises(NoCouplingError):
        coupling_for_energy(Identity(), 2, 2.0)
    with pytest.raises(NoCouplingError):
        coupling_for_energy(Identity(), 2, 1.0)


# ---------------------------------------------------------------- branches


@pytest.mark.parametrize("v", [0.1, 1.0, 10.0, -0.1, -1.0, -10.0])
def test_identity_d1_branch(v):
    pt = energy_for_coupling(Identity(), 1, v)
    assert pt.E == pytest.approx(identity_d1_energy(v), abs=1e-12)
    assert pt.resolved and not pt.at_edge


def test_energy_examples():
    assert energy_for_coupling(Identity(), 1, 1.0).E == pytest.approx(2.41421356, abs=1e-8)
    assert energy_for_coupling(Identity(), 1, -1.0).E == pytest.approx(-0.41421356, abs=1e-8)
    assert energy_for_coupling(Identity(), 3, 0.5) is None


def test_identity_d3_branch_against_bessel():
    pt = energy_for_coupling(Identity(), 3, 1.0)
    assert pt.E > 2.0
    # (2 pi)^3 / J(E) = 1 with J from the independent Laplace representation
    assert identity_bessel(3, pt.E) == pytest.approx(TWO_PI**3, rel=1e-9)


def test_zero_coupling_rejected():
    with pytest.raises(ValueError):
        energy_for_coupling(Identity(), 1, 0.0)


def test_mode_at_threshold_returns_edge():
    v2 = thresholds(Identity(), 5).v2
    pt = energy_for_coupling(Identity(), 5, v2)
    assert pt.at_edge and pt.E == 2.0
    # resonance edge: the threshold itself carries no eigenvalue
    v2_3 = thresholds(Identity(), 3).v2
    assert energy_for_coupling(Identity(), 3, v2_3) is None
    # just past the threshold the branch leaves the edge
    pt = energy_for_coupling(Identity(), 5, v2 * 1.01)
    assert pt.E > 2.0 and not pt.at_edge


def test_roots_below_float_resolution():
    # J diverges only logarithmically at d = 2, so E - 2 ~ exp(-pi / v)
    pt = energy_for_coupling(Identity(), 2, 0.01)
    assert pt.resolved and not pt.at_edge
    assert pt.E == 2.0
    assert 1e-145 < pt.offset < 1e-130
    assert pt.log_offset == pytest.approx(math.log(pt.offset), rel=1e-14)
    assert -pt.log_offset == pytest.approx(math.pi / 0.01, rel=0.01)
    assert coupling_for_energy(Identity(), 2, pt.E, offset=pt.offset) == pytest.approx(0.01, rel=1e-10)


def test_roots_below_double_range():
    # the offset underflows; log_offset still locates the root
    pt = energy_for_coupling(Identity(), 2, 0.004)
    assert pt.resolved and pt.offset == 0.0 and pt.E == 2.0
    assert -pt.log_offset == pytest.approx(math.pi / 0.004, rel=0.01)
    assert coupling_for_energy(Identity(), 2, pt.E, log_offset=pt.log_offset) == pytest.approx(0.004, rel=1e-10)
    pt = energy_for_coupling(HigherOrder(2.0), 2, 0.01)
    assert pt.resolved and pt.offset == 0.0
    # kappa = 4 at the top edge: log(1/t) ~ 4 pi / v
    assert -pt.log_offset == pytest.approx(4 * math.pi / 0.01, rel=0.01)
    back = coupling_for_energy(HigherOrder(2.0), 2, pt.E, log_offset=pt.log_offset)
    assert back == pytest.approx(0.01, rel=1e-10)


def test_unresolved_roots_are_flagged():
    # power-law edge: t = v^2 / 2 lies below the smallest reliable offset
    pt = energy_for_coupling(Identity(), 1, 1e-160)
    assert not pt.resolved
    assert coupling_for_energy(Identity(), 1, pt.E, offset=pt.offset) > 1e-160
    # log-critical edge beyond the supported log offset
    pt = energy_for_coupling(Identity(), 2, 1e-7)
    assert not pt.resolved
    assert pt.log_offset < -1e6
    assert coupling_for_energy(Identity(), 2, pt.E, log_offset=pt.log_offset) > 1e-7


@pytest.mark.parametrize("spec", CATALOGUE, ids=IDS)
@pytest.mark.parametrize("d", [1, 2, 3])
def test_roundtrip_and_bracket(spec, d):
    report = thresholds(spec, d)
    for v in np.concatenate([np.geomspace(0.05, 50, 6), -np.geomspace(0.05, 50, 6)]):
        pt = energy_for_coupling(spec, d, v, threshold=report.v2 if v > 0 else report.v0)
        if pt is None:
            assert (0 < v <= report.v2) or (report.v0 <= v < 0)
            continue
        assert pt.resolved
        # 0 < t <= |v| in log form; E itself may round to the edge
        assert math.isfinite(pt.log_offset) and pt.log_offset <= math.log(abs(v))
        if v > 0:
            assert spec.top <= pt.E <= spec.top + v
        else:
            assert spec.bottom + v <= pt.E <= spec.bottom
        back = coupling_for_energy(spec, d, pt.E, log_offset=pt.log_offset)
        assert back == pytest.approx(v, rel=1e-6)
        if pt.offset > 1e-6:
            assert coupling_for_energy(spec, d, pt.E) == pytest.approx(v, rel=1e-6)


@pytest.mark.parametrize("spec", [Identity(), Fractional(1.0), HigherOrder(2.0)], ids=lambda s: s.label)
def test_branches_monotone(spec):
    d = 3
    r = thresholds(spec, d)
    ups = [p.E for _, p in eigencurve(spec, d, r.v2 * 1.001 + np.linspace(0.1, 8.0, 12)) if p is not None]
    assert len(ups) == 12 and np.all(np.diff(ups) > 0)
    downs = [p.E for _, p in eigencurve(spec, d, r.v0 * 1.001 - np.linspace(0.1, 8.0, 12)) if p is not None]
    assert len(downs) == 12 and np.all(np.diff(downs) < 0)


@settings(max_examples=30, deadline=None)
@given(v=st.floats(1e-2, 1e2), sign=st.sampled_from([1.0, -1.0]))
def test_identity_d1_branch_property(v, sign):
    pt = energy_for_coupling(Identity(), 1, sign * v)
    assert pt.E == pytest.approx(identity_d1_energy(sign * v), abs=1e-10)


# ---------------------------------------------------------------- thresholds


def test_threshold_examples():
    r = thresholds(Identity(), 1)
    assert (r.v0, r.v2) == (0.0, 0.0)
    r = thresholds(Identity(), 3)
    assert r.v2 == pytest.approx(0.6594626, abs=1e-7)
    assert r.v0 == pytest.approx(-0.6594626, abs=1e-7)
    r = thresholds(Fractional(1.0), 2)
    assert r.v2 == 0.0 and r.v0 < 0


@pytest.mark.parametrize("spec", CATALOGUE, ids=IDS)
def test_threshold_signs(spec):
    for d in range(1, 7):
        r = thresholds(spec, d)
        ex = spec.exponents()
        assert r.v2 >= 0 >= r.v0
        assert (r.v2 > 0) == (d > 2 * ex.b)
        assert (r.v0 < 0) == (d > 2 * ex.a)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_identity_threshold_symmetry(d):
    r = thresholds(Identity(), d)
    assert r.v0 == pytest.approx(-r.v2, rel=1e-6)


def test_fractional_asymmetry():
    r = thresholds(Fractional(1.0), 3)
    err = r.top.abs_error / abs(r.top.value) * r.v2 + r.bottom.abs_error / abs(r.bottom.value) * abs(r.v0)
    assert abs(-r.v0 - r.v2) > 10 * err
    assert -r.v0 == pytest.approx(0.8965710, abs=1e-5)
    assert r.v2 == pytest.approx(0.2586407, abs=1e-5)


def test_threshold_report_json():
    d = thresholds(Identity(), 3).to_dict()
    assert set(d) == {"v0", "v2", "bottom_J", "top_J"}


# ---------------------------------------------------------------- classification


def test_classify_examples():
    assert classify_edge(Identity(), 4, +1).behavior is Behavior.RESONANCE
    assert classify_edge(Fractional(1.0), 3, -1).behavior is Behavior.MODE
    assert classify_edge(Fractional(1.0), 5, +1).behavior is Behavior.MODE
    assert classify_edge(Fractional(1.0), 3, +1).behavior is Behavior.RESONANCE
    top = classify_edge(Identity(), 1, +1)
    assert top.behavior is Behavior.UNCONDITIONAL and top.threshold == 0.0
    with pytest.raises(ValueError):
        classify_edge(Identity(), 3, 0)


def test_table_1():
    assert cells(behavior_table(Identity(), range(1, 6))) == TABLE_IDENTITY


def test_table_2():
    assert cells(behavior_table(Fractional(1.0), range(1, 6))) == TABLE_FRACTIONAL


def test_massive_and_massless():
    assert cells(behavior_table(Relativistic(1.0, 1.0), range(1, 6))) == TABLE_IDENTITY
    assert cells(behavior_table(Relativistic(1.0, 0.0), range(1, 6))) == TABLE_FRACTIONAL


@pytest.mark.parametrize("a,b", list(TABLE_EXPONENTS))
def test_exponent_table(a, b):
    assert as_strings(exponent_table(a, b, range(1, 9))) == TABLE_EXPONENTS[(a, b)]


@pytest.mark.parametrize("spec", CATALOGUE, ids=IDS)
def test_classification_consistency(spec):
    for d in range(1, 7):
        for side, e in ((+1, spec.exponents().b), (-1, spec.exponents().a)):
            assert classify_edge(spec, d, side, with_threshold=False).behavior is behavior_from_exponent(e, d)


def test_table_csv():
    text = table_to_csv(behavior_table(Identity(), [1, 5]))
    lines = text.splitlines()
    assert lines[0] == ",".join(TABLE_HEADER) == "d,top_mode,top_resonance,bottom_mode,bottom_resonance"
    assert lines[1] == "1,no,no,no,no"
    assert lines[2] == "5,yes,no,yes,no"
    assert BehaviorRow(1, False, False, False, False) == behavior_table(Identity(), [1])[0]


# ---------------------------------------------------------------- eigenvectors


def test_eigenvector_d1_closed_form():
    r = 2.0 - math.sqrt(3.0)
    xs = list(range(-50, 51))
    phi = eigenvector_profile(Identity(), 1, 3.0, [(x,) for x in xs])
    expected = (0.75) ** 0.25 * r ** np.abs(xs)
    np.testing.assert_allclose(phi, expected, rtol=1e-9, atol=1e-14)
    assert float(np.sum(phi**2)) == pytest.approx(1.0, abs=1e-10)
    assert phi[50] == pytest.approx(0.93060486, abs=1e-8)
    assert phi[49] == phi[51]


@pytest.mark.parametrize("E", [2.5, 4.0, -0.7])
def test_eigenvector_d3_against_bessel(E):
    sites = [(0, 0, 0), (1, 0, 0), (0, 1, 1), (2, -1, 0), (4, 2, 0)]
    phi = eigenvector_profile(Identity(), 3, E, sites)
    # below the band the symbol reflection theta -> theta + pi maps E to 2 - E
    # and multiplies site x by (-1)^(sum x)
    Eref = E if E > 2 else 2.0 - E
    parity = np.array([1.0 if E > 2 else (-1.0) ** sum(x) for x in sites])
    norm = math.sqrt(identity_bessel(3, Eref, 2) / TWO_PI**3)
    ref = parity * np.array([identity_green_bessel(x, Eref) for x in sites]) / norm
    np.testing.assert_allclose(phi, ref, rtol=1e-8, atol=1e-13)


@pytest.mark.parametrize("E", [2.0, 0.0])
def test_mode_edge_eigenvector(E):
    sites = [(0,) * 5, (1, 0, 0, 0, 0), (0, 0, 1, 1, 0), (2, 1, 0, 0, 1), (3, 0, 0, 0, 0)]
    phi = eigenvector_profile(Identity(), 5, E, sites)
    norm = math.sqrt(identity_bessel(5, 2.0, 2) / TWO_PI**5)
    parity = np.array([1.0 if E == 2.0 else (-1.0) ** sum(x) for x in sites])
    ref = parity * np.array([identity_green_bessel(x, 2.0) for x in sites]) / norm
    np.testing.assert_allclose(phi, ref, rtol=1e-6)
    assert phi[0] > 0


def test_eigenvector_symmetries():
    spec = Fractional(1.0)
    E = spec.top + 0.4
    phi = eigenvector_profile(spec, 2, E, [(1, 2), (2, 1), (-1, 2), (1, -2), (-2, -1)])
    np.testing.assert_allclose(phi, phi[0], rtol=1e-10)
    assert np.isrealobj(phi)


def test_eigenvector_rejects_non_eigenvalue():
    with pytest.raises(NoCouplingError):
        eigenvector_profile(Identity(), 3, 2.0, [(0, 0, 0)])
    with pytest.raises(NoCouplingError):
        eigenvector_profile(Identity(), 1, 1.0, [(0,)])
    with pytest.raises(ValueError):
        eigenvector_profile(Identity(), 2, 3.0, [(0,)])
