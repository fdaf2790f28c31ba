import numpy as np
import pytest

from upsc.admittance import AdmittanceModel
from upsc.blocks import ControllerParams
from upsc.errors import Inconclusive, InvalidParameter, PoleProximity
from upsc.grid import GridImpedance
from upsc.passivity import passivity_index_array
from upsc.simulator import SimConfig, linearize
from upsc.stability import NyquistGrid, eig2, eval_Zg, match_loci, nyquist

EYE = lambda w: np.broadcast_to(np.eye(2, dtype=complex), (len(w), 2, 2))


def cubic(k):
    return lambda w: (k / (1j * w + 1) ** 3)[:, None, None] * np.eye(2)


def rhp(A):
    return int(np.sum(np.linalg.eigvals(A).real > 1e-7))


# -- grid impedance -------------------------------------------------------------

def test_inductor_dq_matrix():
    Z = eval_Zg(GridImpedance("stiff-inductive", L_g=0.1), 0.1).m
    np.testing.assert_allclose(Z, [[0.01j, -0.1], [0.1, 0.01j]], atol=1e-15)


def test_resistor_dq_matrix():
    Z = GridImpedance("series-RL", R_g=0.2).matrix([0.01, 3.0])
    np.testing.assert_allclose(Z, np.broadcast_to(0.2 * np.eye(2), Z.shape), atol=1e-15)


def test_series_rl_is_sum():
    w = np.geomspace(1e-3, 5, 30)
    rl = GridImpedance("series-RL", R_g=0.03, L_g=0.2).matrix(w)
    r = GridImpedance("series-RL", R_g=0.03).matrix(w)
    l = GridImpedance("stiff-inductive", L_g=0.2).matrix(w)
    np.testing.assert_allclose(rl, r + l, atol=1e-14)


@pytest.mark.parametrize("g", [
    GridImpedance("series-RL", R_g=0.01, L_g=0.1),
    GridImpedance("series-RLC", R_g=0.01, L_g=0.1, C_g=2.0),
    GridImpedance("parallel-RC-behind-RL", R_g=0.01, L_g=0.1, C_g=0.5, R_c=0.05),
])
def test_grid_is_passive_and_conjugate_symmetric(g):
    w = np.geomspace(1e-3, 5, 200)
    Z = g.matrix(w)
    assert np.all(passivity_index_array(Z) >= -1e-12)
    np.testing.assert_allclose(g.matrix(-w), np.conj(Z), rtol=1e-12)


def test_parallel_kind_reduces_at_fundamental():
    g = GridImpedance("parallel-RC-behind-RL", R_g=0.01, L_g=0.1, C_g=1e-9, R_c=0.0)
    # a vanishing capacitor leaves the RL path
    assert g.steady_state() == pytest.approx(0.01 + 0.1j, rel=1e-6)


@pytest.mark.parametrize("kw", [
    dict(kind="bogus", L_g=0.1), dict(L_g=-0.1), dict(), dict(kind="series-RLC", L_g=0.1),
    dict(kind="stiff-inductive", R_g=0.1, L_g=0.1), dict(L_g=float("nan")),
])
def test_grid_validation(kw):
    with pytest.raises(InvalidParameter):
        GridImpedance(**kw)


def test_eval_zg_rejects_nonpositive():
    with pytest.raises(InvalidParameter):
        eval_Zg(GridImpedance(L_g=0.1), 0.0)


# -- eigenloci and encirclements --------------------------------------------------

def test_eig2_matches_numpy(rng):
    M = rng.normal(size=(50, 2, 2)) + 1j * rng.normal(size=(50, 2, 2))
    ours = np.sort_complex(eig2(M))
    ref = np.sort_complex(np.linalg.eigvals(M))
    np.testing.assert_allclose(ours, ref, atol=1e-12)


def test_match_loci_unswaps():
    lam = np.array([[1, 2], [2.01, 1.01], [1.02, 2.02]], dtype=complex)
    np.testing.assert_allclose(match_loci(lam)[:, 0], [1, 1.01, 1.02])


@pytest.mark.parametrize("k", [2.0, 4.0, 7.5, 8.5, 10.0, 20.0])
def test_cubic_matches_root_locus(k):
    # closed-loop poles of k/(s+1)^3 under unity feedback solve (s+1)^3 + k = 0
    poles = np.roots([1, 3, 3, 1 + k])
    unstable_poles = int(np.sum(poles.real > 0))
    r = nyquist(cubic(k), EYE)
    # the diagonal embedding doubles every scalar count
    assert r.encirclements == 2 * unstable_poles
    assert r.verdict == ("unstable" if unstable_poles else "stable")


def test_cubic_reference_counts():
    assert nyquist(cubic(4.0), EYE).encirclements == 0
    assert nyquist(cubic(10.0), EYE).encirclements == 4


def test_marginal_case_is_inconclusive():
    with pytest.raises(Inconclusive) as exc:
        nyquist(cubic(8.0 * (1 - 1e-4)), EYE)
    assert exc.value.distance < 1e-3
    assert exc.value.omega == pytest.approx(np.sqrt(3), rel=1e-3)


def test_guard_is_configurable():
    r = nyquist(cubic(8.0 * (1 - 1e-2)), EYE)
    assert r.verdict == "stable"
    # the locus crosses the axis obliquely, so the closest approach is below 1 - k/8
    assert 1e-3 < r.min_distance < 1e-2
    with pytest.raises(Inconclusive):
        nyquist(cubic(8.0 * (1 - 1e-2)), EYE, guard=0.05)


def test_open_loop_rhp_poles_recorded():
    r = nyquist(cubic(4.0), EYE, open_loop_rhp_poles=2)
    assert r.assumptions == {"open_loop_rhp_poles": 2}
    assert r.verdict == "unstable"


def test_result_shape_and_closure():
    r = nyquist(cubic(4.0), EYE, NyquistGrid(points=100))
    assert r.loci.shape == (100, 2)
    c = r.closed_loci()
    assert c.shape == (200, 2)
    np.testing.assert_allclose(c[:100], np.conj(r.loci[::-1]))


def test_base_against_inductive_grid(base_model):
    r = nyquist(base_model, GridImpedance("series-RL", R_g=0.01, L_g=0.05))
    assert r.verdict == "stable" and r.encirclements == 0
    assert r.min_distance > 1e-3


@pytest.mark.parametrize("pq", [(0, 0), (1, 0.5)])
@pytest.mark.parametrize("mods", [{}, dict(K_P=0.05, K_Q=0.05, alpha_a=0.075)])
@pytest.mark.parametrize("RL", [(0.01, 0.05), (0.03, 0.01), (0.0, 0.2), (0.01, 1.0)])
def test_verdict_matches_closed_loop_jacobian(pq, mods, RL):
    p = ControllerParams(P_ref=pq[0], Q_ref=pq[1], **mods)
    g = GridImpedance("series-RL", R_g=RL[0], L_g=RL[1])
    open_loop = rhp(linearize(p)[0])
    closed = rhp(linearize(p, SimConfig(mode="grid", grid=g))[0])
    r = nyquist(AdmittanceModel.from_params(p), g, open_loop_rhp_poles=open_loop)
    assert r.encirclements + open_loop == closed
    assert r.verdict == ("stable" if closed == 0 else "unstable")


def test_rejects_unknown_inputs():
    with pytest.raises(TypeError):
        nyquist(object(), EYE)


def test_series_capacitor_pole_on_contour(base_model):
    g = GridImpedance("series-RLC", R_g=0.01, L_g=0.1, C_g=2.0)
    assert g.axis_poles() == (1.0,)
    with pytest.raises(PoleProximity) as exc:
        nyquist(base_model, g)
    assert exc.value.omega == 1.0
    # a range that excludes the pole is fine
    nyquist(base_model, g, NyquistGrid(1e-3, 0.5, 500))
