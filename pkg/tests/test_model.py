import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jjsim import characteristic as ch
from jjsim.integrate import IntegratorConfig, integrate
from jjsim.model import (
    CODATA,
    DimensionlessParams,
    Drive,
    MdmState,
    PhysicalParams,
    State3,
    autonomous_kernel,
    dimensionless_to_mdm,
    external_current_from_rates,
    mdm_kernel,
    mdm_kernel_params,
    mdm_to_dimensionless,
    nondimensionalize,
    rhs_autonomous,
    rhs_driven,
    rhs_mdm_full,
    rhs_vz,
    total_number_relaxation,
)

k = CODATA


class TestParams:
    def test_unit_junction(self):
        dp, sc = nondimensionalize(PhysicalParams(R=1.0, C=1.0))
        assert sc.V_tilde == pytest.approx(k.hbar / (2 * k.e), rel=1e-15)
        assert dp.alpha == 0.0 and dp.i_tot == 0.0

    def test_alpha_two(self):
        g = 1.0 / (2.0 * 5.0)
        dp, _ = nondimensionalize(PhysicalParams(R=2.0, C=5.0, K=g * math.sqrt(2)))
        assert dp.alpha == pytest.approx(2.0, rel=1e-15)

    def test_hand_scales(self):
        R, C = 50.0, 3e-13
        g = 1 / (R * C)
        V_t = k.hbar / (2 * k.e * R * C)
        I_t = V_t / R
        dp, sc = nondimensionalize(PhysicalParams(R=R, C=C, K=3 * g, I=30 * I_t, gamma=g))
        assert dp.alpha == pytest.approx(9.0, rel=1e-14)
        assert dp.i_tot == pytest.approx(30.0, rel=1e-14)
        assert sc.I_tilde == pytest.approx(I_t, rel=1e-15)
        assert sc.t_scale == pytest.approx(R * C, rel=1e-15)

    @pytest.mark.parametrize("kw", [dict(R=0, C=1), dict(R=1, C=-1), dict(R=1, C=1, gamma=0.0),
                                    dict(R=1, C=1, gamma=2.0), dict(R=1, C=1, gamma_up_1=-1.0)])
    def test_rejects_bad_params(self, kw):
        with pytest.raises(ValueError):
            PhysicalParams(**kw)

    def test_rejects_negative_alpha_and_bad_drive(self):
        with pytest.raises(ValueError):
            DimensionlessParams(alpha=-1.0)
        with pytest.raises(ValueError):
            Drive(v_f=1.0, omega_f=0.0)


class TestAutonomous:
    def test_origin(self):
        assert rhs_autonomous(DimensionlessParams(2.0, 3.5), State3(0, 0, 0)) == (3.5, 0.0, 0.0)

    def test_hand_value(self):
        assert rhs_autonomous(DimensionlessParams(0.0, 0.0), State3(1, 1, 1)) == (-2.0, -2.0, 0.0)

    def test_fixed_point_residual(self):
        i = float(ch.i_of_v(2.2, 30.0))
        for fp in ch.fixed_point(2.2, i):
            d = rhs_autonomous(DimensionlessParams(2.2, i), fp.state())
            assert np.linalg.norm(d) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 10), st.floats(-50, 50))
    def test_fixed_points_are_equilibria(self, alpha, i):
        for fp in ch.fixed_point(alpha, i):
            d = rhs_autonomous(DimensionlessParams(alpha, i), fp.state())
            assert np.linalg.norm(d) < 1e-10 * max(1.0, abs(i), alpha) ** 2


class TestDriven:
    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 5), st.floats(-10, 10), st.floats(-5, 5), st.floats(-5, 5),
           st.floats(-5, 5), st.floats(0, 100))
    def test_zero_drive_bitwise(self, a, i, v, ij, is_, tau):
        s = State3(v, ij, is_)
        p = DimensionlessParams(a, i, Drive(0.0, 3.0))
        assert rhs_driven(p, s, tau) == rhs_autonomous(DimensionlessParams(a, i), s)

    def test_drive_node(self):
        w = 20.0
        tau = math.pi / (2 * w)
        s = State3(1.3, -0.4, 2.0)
        a = rhs_driven(DimensionlessParams(3.0, 5.0, Drive(300.0, w)), s, tau)
        b = rhs_autonomous(DimensionlessParams(3.0, 5.0), s)
        assert np.allclose(a, b, rtol=0, atol=1e-12)

    def test_zero_coherence(self):
        d = rhs_driven(DimensionlessParams(3.0, 7.0, Drive(300.0, 20.0)), State3(0, 0, 0), 0.0)
        assert d == (7.0, 0.0, 0.0)

    def test_requires_drive(self):
        with pytest.raises(ValueError):
            rhs_driven(DimensionlessParams(1.0), State3(0, 0, 0), 0.0)


class TestMdm:
    p = PhysicalParams(R=50.0, C=3e-13, K=2e10 * np.exp(0.4j), I=1e-6)

    def test_stationary(self):
        d = rhs_mdm_full(self.p.__class__(R=50.0, C=3e-13), k, MdmState(10.0, 4.0, 0j), 10.0, 4.0)
        assert d == (0.0, 0.0, 0j)

    def test_negative_population_rejected(self):
        with pytest.raises(ValueError):
            rhs_mdm_full(self.p, k, MdmState(-1.0, 1.0, 0j), 0.0, 0.0)

    def test_decoupled_relaxation(self):
        p = PhysicalParams(R=1.0, C=1.0)  # gamma = 1, K = 0
        m0 = MdmState(5.0, 1.0, 0.5 + 0.5j)
        cfg = IntegratorConfig(rtol=1e-12, atol=1e-12, dt_out=0.5)
        tr = integrate(mdm_kernel, m0.as_array(), (0.0, 3.0), cfg, mdm_kernel_params(p, 2.0, 3.0))
        t = tr.t
        assert np.allclose(tr.states[:, 0], 2.0 + 3.0 * np.exp(-t), atol=1e-10)
        assert np.allclose(tr.states[:, 1], 3.0 - 2.0 * np.exp(-t), atol=1e-10)
        mag = np.hypot(tr.states[:, 2], tr.states[:, 3])
        assert np.allclose(mag, abs(m0.z) * np.exp(-t), atol=1e-10)

    def test_total_number_decouples(self):
        p = PhysicalParams(R=50.0, C=3e-13, K=3e10)
        g = p.rate
        m0 = MdmState(600.0, 400.0, 30.0 + 10j)
        cfg = IntegratorConfig(rtol=1e-11, atol=1e-9, dt_out=0.05)
        tr = integrate(mdm_kernel, m0.as_array(), (0.0, 5.0), cfg,
                       mdm_kernel_params(p, 520.0, 530.0, k, time_unit=1 / g))
        N = tr.states[:, 0] + tr.states[:, 1]
        assert np.allclose(N, total_number_relaxation(1000.0, 1050.0, 1.0, tr.t), atol=1e-7)

    def test_round_trip(self):
        s = State3(12.0, 0.7, 8.1)
        m = dimensionless_to_mdm(s, 2e3, self.p)
        assert np.allclose(mdm_to_dimensionless(m, self.p), s, rtol=1e-12, atol=1e-12)
        assert m.N == pytest.approx(2e3)

    def test_round_trip_needs_k(self):
        with pytest.raises(ValueError):
            dimensionless_to_mdm(State3(1, 1, 1), 10.0, PhysicalParams(R=1.0, C=1.0))

    def test_vz_form_matches_mdm(self):
        # the (V, z) system is the MDM system rewritten with V = -e n / C
        p = self.p
        m = MdmState(5e5 + 20.0, 5e5 - 20.0, 3.0 - 2.0j)
        dn = -p.I / (k.e * p.rate)
        d = rhs_mdm_full(p, k, m, (1e6 + dn) / 2, (1e6 - dn) / 2)
        V = -k.e * m.n / p.C
        dV, dz = rhs_vz(p, k, V, m.z)
        assert dV == pytest.approx(-k.e * (d.n1 - d.n2) / p.C, rel=1e-9)
        assert dz == pytest.approx(d.z, rel=1e-9)

    def test_state_helpers(self):
        m = MdmState(3.0, 1.0, 1.0 + 1.0j)
        assert m.n == 2.0 and m.N == 4.0
        assert m.phi == pytest.approx(math.pi / 4)
        assert m.is_physical()
        assert not MdmState(1.0, 1.0, 2.0 + 0j).is_physical()
        assert m.energy_difference(1.0) == pytest.approx(4 * k.e**2)
        assert MdmState.from_array(m.as_array()) == m


class TestRates:
    def test_symmetric(self):
        assert external_current_from_rates(3.0, 3.0) == 0.0

    def test_sign(self):
        assert external_current_from_rates(0.0, 5.0) == pytest.approx(k.e * 5.0)
        assert external_current_from_rates(10.0, 5.0) == pytest.approx(-k.e * 5.0)

    def test_relaxation(self):
        assert np.all(total_number_relaxation(7.0, 7.0, 2.0, np.linspace(0, 5, 6)) == 7.0)
        assert total_number_relaxation(9.0, 3.0, 1.0, 1e4) == pytest.approx(3.0)
        assert total_number_relaxation(5.0, 3.0, 2.0, math.log(2) / 2) == pytest.approx(4.0)
        with pytest.raises(ValueError):
            total_number_relaxation(1.0, 1.0, 0.0, 1.0)


def test_equivalence_over_tau_100():
    alpha, v0 = 1.5, 4.0
    R, C = 20.0, 1e-12
    g = 1 / (R * C)
    K = math.sqrt(alpha) * g * 1j
    _, sc = nondimensionalize(PhysicalParams(R=R, C=C, K=K))
    i = float(ch.i_of_v(alpha, v0)) + 0.3
    I = i * sc.I_tilde
    p = PhysicalParams(R=R, C=C, K=K, I=I)
    N = 1e7
    dn = -I / (k.e * g)
    s0 = State3(v0, 0.2, 1.0)
    m0 = dimensionless_to_mdm(s0, N, p)
    cfg = IntegratorConfig(rtol=1e-12, atol=1e-12, dt_out=0.5)
    ref = integrate(autonomous_kernel, s0, (0, 100), cfg, np.array([alpha, i]))
    z = abs(m0.z)
    tr = integrate(mdm_kernel, m0.as_array(), (0, 100), cfg.replace(atol=[1e-4, 1e-4, 1e-12 * z, 1e-12 * z]),
                   mdm_kernel_params(p, (N + dn) / 2, (N - dn) / 2, k, 1 / g))
    mapped = np.array([mdm_to_dimensionless(MdmState.from_array(y), p) for y in tr.states])
    assert np.max(np.abs(mapped - ref.states)) < 1e-6
