import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavecrest import euler
from wavecrest import expr as ex
from wavecrest import liealg as la
from wavecrest import vfield as vf

XYZ = ex.Chart(["x", "y", "z"])


def heis():
    return la.StructureConstants.from_brackets(3, {(0, 1): [0, 0, 1]})


def aff():
    return la.StructureConstants.from_brackets(3, {(0, 2): [0, 0, 1]})


def test_extract_heisenberg_realization():
    fr = vf.Frame([vf.VectorField.parse(t, XYZ) for t in (["1", "0", "0"], ["0", "1", "x"], ["0", "0", "1"])],
                  vf.SampleDomain(vf.POSITIVE_BOX))
    C = la.extract_structure_constants(fr)
    want = np.zeros((3, 3, 3))
    want[0, 1, 2], want[1, 0, 2] = 1, -1
    assert np.allclose(C.c, want, atol=1e-12)


def test_extract_commuting_frame():
    CH = euler.CHART
    fr = vf.Frame([vf.VectorField.parse(t, CH) for t in (["rho", "0", "0"], ["0", "p", "0"], ["0", "0", "1"])],
                  vf.SampleDomain(vf.EULER_BOX))
    assert np.all(np.abs(la.extract_structure_constants(fr).c) < 1e-12)


def test_extract_raw_euler_frame_is_non_constant():
    with pytest.raises(la.NonConstantError) as info:
        la.extract_structure_constants(euler.eigenstructure(3.0).frame())
    assert "non-constant" in str(info.value)


def test_antisymmetry_enforced():
    c = np.zeros((3, 3, 3))
    c[0, 1, 2] = 1
    with pytest.raises(ValueError):
        la.StructureConstants(c)


def test_jacobi_examples():
    assert la.jacobi_residual(la.StructureConstants(np.zeros((3, 3, 3)))) == 0
    assert la.jacobi_residual(heis()) == 0
    bad = la.StructureConstants.from_brackets(3, {(0, 1): [1, 0, 0], (1, 2): [0, 1, 0], (0, 2): [0, 0, -1]})
    assert la.jacobi_residual(bad) > 0.1
    with pytest.raises(la.JacobiViolation):
        la.classify3d(bad)


def test_classify_examples():
    assert la.classify3d(la.StructureConstants(np.zeros((3, 3, 3)))).label == "abelian3"
    assert la.classify3d(heis()).label == "heisenberg3"
    assert la.classify3d(aff()).label == "aff1_plus_R"
    sl2 = la.StructureConstants.from_brackets(3, {(0, 1): [0, 0, 1], (0, 2): [0, 1, 0], (1, 2): [1, 0, 0]})
    assert la.classify3d(sl2).label == "other"


@pytest.mark.parametrize("C", [heis(), aff(), la.StructureConstants(np.zeros((3, 3, 3)))])
def test_classification_invariant_under_basis_change(C):
    rng = np.random.default_rng(11)
    label = la.classify3d(C).label
    for _ in range(20):
        P = rng.normal(size=(3, 3))
        while abs(np.linalg.det(P)) < 0.2:
            P = rng.normal(size=(3, 3))
        C2 = C.transform(P)
        assert la.jacobi_residual(C2) < 1e-9
        assert la.classify3d(C2).label == label


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=9, max_size=9))
@settings(max_examples=60, deadline=None)
def test_bracket_antisymmetric_bilinear(v):
    C = aff()
    x, y = np.array(v[:3]), np.array(v[3:6])
    assert np.allclose(C.bracket(x, y), -C.bracket(y, x))


def test_commuting_frame_extracts_zero():
    Z = euler.z_fields()
    h = euler.rescaling_functions()
    fr = vf.Frame([X.scale(f) for X, f in zip(Z, h)], vf.SampleDomain(vf.EULER_BOX))
    C = la.extract_structure_constants(fr)
    assert np.max(np.abs(C.c)) < 1e-9
    assert la.classify3d(C).label == "abelian3"


def test_truncated_family_table():
    rep = la.verify_truncated_family(3.0, 2)
    assert rep.max_deviation < 1e-9
    row = rep.table[(("a", 0), ("a", 1))]
    assert row["expected"] == {("a", 1): -1}
    assert row["fitted"] == pytest.approx({("a", 1): -1.0})
    assert rep.notes


def test_truncated_kappa_one_relations():
    rep = la.verify_truncated_family(1.0, 3)
    assert rep.max_kappa1_residual < 1e-9
    assert rep.kappa1_relations[("X+", 2)] < 1e-9
    assert rep.kappa1_relations[("ZZ", 1, 3)] < 1e-9
    # direct spot check: [X+, rho^-2 Z] = -2 rho^-2 Z
    es = euler.eigenstructure(1.0)
    rho = ex.Sym("rho")
    Z2 = (es.X_plus - es.X_minus).scale(rho ** -2)
    pt = [1.7, 0.8, 0.3]
    assert np.allclose(vf.lie_bracket_at(es.X_plus, Z2, pt), -2 * Z2(pt), rtol=1e-12)


def test_truncated_n_bound():
    with pytest.raises(ValueError):
        la.verify_truncated_family(1.0, 9)
