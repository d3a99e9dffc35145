"""Tests for the Abel-averaged transport routes and moment sums."""

import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.integrate
import scipy.special

from qptransport.arithmetic import (construct_liouville_frequency,
                                    continued_fraction_expansion)
from qptransport.errors import InputError, TruncationError
from qptransport.operator import (AmoSampling, Chain, PeriodicModel,
                                  ZeroSampling, finite_operator,
                                  periodic_model)
from qptransport import transport as tr

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
FREE_CHAIN = Chain(ZeroSampling(), GOLDEN, 0.0)


def bessel_abel_oracle(displacement, time_scale):
    """Independent free-lattice value of P(n; T): both entries carry the
    amplitude (-i)^|n| J_|n|(2t), integrated with the Abel weight."""
    n = abs(displacement)

    def igr(t):
        return math.exp(-2.0 * t / time_scale) * \
            scipy.special.jv(n, 2.0 * t) ** 2

    upper = 0.5 * time_scale * math.log(4e12)
    val, _ = scipy.integrate.quad(igr, 0.0, upper, limit=400)
    return 2.0 * (2.0 / time_scale) * val


class TestRadii:
    def test_horizon_formula(self):
        assert tr.abel_horizon(10.0, 1e-6) == pytest.approx(
            5.0 * math.log(4e6))

    def test_radius_grows_with_time(self):
        assert tr.truncation_radius(20.0) > tr.truncation_radius(5.0)

    def test_radius_includes_extent(self):
        assert tr.truncation_radius(5.0, n_extent=100) == \
            tr.truncation_radius(5.0, n_extent=0) + 100

    def test_bad_inputs(self):
        with pytest.raises(InputError):
            tr.abel_horizon(0.0)
        with pytest.raises(InputError):
            tr.abel_horizon(5.0, tail_tolerance=2.0)


class TestEvolution:
    def test_free_amplitude_against_bessel(self):
        t = np.array([0.0, 0.7, 2.5])
        np.testing.assert_allclose(tr.free_lattice_amplitude(0, t),
                                   scipy.special.jv(0, 2 * t), atol=1e-14)
        np.testing.assert_allclose(
            tr.free_lattice_amplitude(2, t),
            -scipy.special.jv(2, 2 * t), atol=1e-14)

    def test_evolve_is_unitary(self):
        op = finite_operator(Chain(AmoSampling(1.0), GOLDEN, 0.2), 30)
        psi = tr.evolve(op, [0.0, 1.0, 3.7])
        np.testing.assert_allclose(np.linalg.norm(psi, axis=1), 1.0,
                                   atol=1e-11)

    def test_evolve_matches_free_amplitudes(self):
        op = finite_operator(FREE_CHAIN, 40)
        psi = tr.evolve(op, [3.0])[0]
        for n in (-2, 0, 1, 5):
            assert psi[op.site_index(n)] == pytest.approx(
                complex(tr.free_lattice_amplitude(n, 3.0)), abs=1e-10)

    def test_amplitude_matches_evolve_entry(self):
        op = finite_operator(Chain(AmoSampling(0.7), GOLDEN, 0.0), 25)
        amp = tr.amplitude(op, 1, 4, [2.2])[0]
        psi = tr.evolve(op, [2.2], source=1)[0]
        assert amp == pytest.approx(psi[op.site_index(4)], abs=1e-12)

    def test_boundary_mass_detects_escape(self):
        small = finite_operator(FREE_CHAIN, 12)
        big = finite_operator(FREE_CHAIN, 80)
        assert tr.boundary_mass(small, 10.0) > 0.01
        assert tr.boundary_mass(big, 10.0) < 1e-12


class TestTimeRoute:
    def test_short_time_limit_is_two(self):
        p = tr.abel_probability_time(FREE_CHAIN, 0, 0.01)
        assert p == pytest.approx(2.0, abs=5e-4)

    def test_free_lattice_bessel_oracle(self):
        mine = tr.abel_probability_time(FREE_CHAIN, 3, 4.0)
        assert mine == pytest.approx(bessel_abel_oracle(3, 4.0), rel=1e-6)

    def test_reflection_symmetric_potential(self):
        assert tr.abel_probability_time(FREE_CHAIN, -3, 4.0) == \
            pytest.approx(tr.abel_probability_time(FREE_CHAIN, 3, 4.0),
                          rel=1e-10)

    def test_undersized_radius_raises(self):
        with pytest.raises(TruncationError):
            tr.abel_probability_time(FREE_CHAIN, 0, 20.0, radius=10)

    def test_distribution_mass_two(self):
        d = tr.probability_distribution(FREE_CHAIN, 3.0)
        assert d.total_mass == pytest.approx(2.0, rel=1e-6)
        assert not d.single_entry

    def test_single_entry_mass_one(self):
        d = tr.probability_distribution(FREE_CHAIN, 3.0, single_entry=True)
        assert d.total_mass == pytest.approx(1.0, rel=1e-6)

    def test_distribution_accessor(self):
        d = tr.probability_distribution(FREE_CHAIN, 3.0)
        k = tr.abel_probability_time(FREE_CHAIN, 2, 3.0)
        assert d.probability(2) == pytest.approx(k, rel=1e-10)
        with pytest.raises(InputError):
            d.probability(10 ** 6)

    def test_free_second_moment_closed_form(self):
        # sum_n n^2 J_n(2t)^2 = 2 t^2, so the two-entry Abel average is
        # exactly 2 T^2
        m = tr.moments(FREE_CHAIN, 6.0, orders=(0, 2))
        assert m.moment(0) == pytest.approx(2.0, rel=1e-6)
        assert m.moment(2) == pytest.approx(2.0 * 36.0, rel=1e-5)

    def test_moment_order_validation(self):
        with pytest.raises(InputError):
            tr.moments(FREE_CHAIN, 3.0, orders=(-1,))


class TestResolventRoute:
    def test_free_lattice_bessel_oracle(self):
        mine = tr.abel_probability_resolvent(FREE_CHAIN, 3, 4.0)
        assert mine == pytest.approx(bessel_abel_oracle(3, 4.0), rel=5e-4)

    def test_matches_time_route_periodic(self):
        model = periodic_model(AmoSampling(1.0), Fraction(1, 2), 0.0)
        a = tr.abel_probability_time(model, 2, 5.0)
        b = tr.abel_probability_resolvent(model, 2, 5.0)
        assert b == pytest.approx(a, rel=1e-6)

    def test_matches_time_route_quasiperiodic(self):
        chain = Chain(AmoSampling(1.0), GOLDEN, 0.3)
        a = tr.abel_probability_time(chain, 1, 5.0)
        b = tr.abel_probability_resolvent(chain, 1, 5.0)
        assert b == pytest.approx(a, rel=1e-4)

    def test_profile_matches_singles(self):
        chain = Chain(AmoSampling(1.0), GOLDEN, 0.3)
        disp = [0, 1, 4]
        prof = tr.abel_resolvent_profile(chain, disp, 5.0)
        assert prof.shape == (3,)
        for i, d in enumerate(disp):
            single = tr.abel_probability_resolvent(chain, d, 5.0)
            assert prof[i] == pytest.approx(single, rel=1e-7)

    def test_profile_rejects_empty(self):
        with pytest.raises(InputError):
            tr.abel_resolvent_profile(FREE_CHAIN, [], 5.0)


class TestFloquetRoute:
    MODEL = periodic_model(AmoSampling(1.0), Fraction(1, 2), 0.0)

    def test_energy_route_matches_time_route(self):
        a = tr.abel_probability_time(self.MODEL, 2, 5.0)
        b = tr.abel_probability_floquet(self.MODEL, 2, 5.0, route="energy")
        assert b == pytest.approx(a, rel=1e-6)

    def test_kernel_route_matches_time_route(self):
        a = tr.abel_probability_time(self.MODEL, 2, 5.0)
        b = tr.abel_probability_floquet(self.MODEL, 2, 5.0, route="kernel")
        assert b == pytest.approx(a, rel=1e-9)

    def test_routes_agree_at_moderate_time(self):
        model = periodic_model(AmoSampling(2.0), Fraction(8, 13), 0.0)
        a = tr.abel_probability_floquet(model, 13, 150.0, route="energy")
        b = tr.abel_probability_floquet(model, 13, 150.0, route="kernel")
        assert a == pytest.approx(b, rel=1e-6)

    def test_period_one_model(self):
        m1 = PeriodicModel.from_potential([0.0])
        a = tr.abel_probability_time(FREE_CHAIN, 2, 7.0)
        for route in ("energy", "kernel"):
            assert tr.abel_probability_floquet(m1, 2, 7.0, route=route) == \
                pytest.approx(a, rel=1e-8)

    def test_auto_switches_to_kernel(self):
        val_auto = tr.abel_probability_floquet(self.MODEL, 0, 300.0)
        val_kernel = tr.abel_probability_floquet(self.MODEL, 0, 300.0,
                                                 route="kernel")
        assert val_auto == val_kernel

    def test_explicit_grid_honored(self):
        a = tr.abel_probability_floquet(self.MODEL, 2, 5.0, route="kernel",
                                        kappa_points=512)
        b = tr.abel_probability_floquet(self.MODEL, 2, 5.0, route="kernel")
        assert a == pytest.approx(b, rel=1e-6)

    def test_large_time_narrow_bands(self):
        # the kernel route stays cheap where the energy route would need
        # millions of quadrature points
        model = periodic_model(AmoSampling(2.0), Fraction(8, 13), 0.0)
        p = tr.abel_probability_floquet(model, 13, 3.6e4, route="kernel")
        assert 0.0 < p < 2.0

    def test_bad_inputs(self):
        with pytest.raises(InputError):
            tr.abel_probability_floquet(FREE_CHAIN, 0, 5.0)
        with pytest.raises(InputError):
            tr.abel_probability_floquet(self.MODEL, 0, 5.0, route="magic")
        with pytest.raises(InputError):
            tr.abel_probability_floquet(self.MODEL, 0, -1.0)


class TestSubsequenceTimes:
    def test_fast_growth_frequency_schedule(self):
        freq = construct_liouville_frequency(2.0, 2, 3)
        sch = tr.subsequence_times(freq, gamma0=math.log(1.05), delta=0.45,
                                   eps_prime=0.1256)
        assert sch.indices == (1, 2)
        assert sch.denominators[0] == 2
        assert sch.times[0] == pytest.approx(2.17, rel=0.01)
        assert sch.times[1] == pytest.approx(1.81e9, rel=0.01)
        assert sch.threshold == pytest.approx(
            3.0 * (math.log(1.05) + 2 * 0.1256) / 0.45)

    def test_slow_growth_gives_empty_schedule(self):
        golden = continued_fraction_expansion(Fraction(89, 144))
        sch = tr.subsequence_times(golden, gamma0=0.1, delta=0.25,
                                   eps_prime=0.02)
        assert sch.size == 0
        assert sch.threshold == pytest.approx(3.0 * (0.1 + 0.04) / 0.25)

    def test_astronomical_time_reported_as_inf(self):
        big = 10 ** 4000
        freq = continued_fraction_expansion(Fraction(big, 3000 * big + 1))
        sch = tr.subsequence_times(freq, gamma0=0.1, delta=0.45,
                                   eps_prime=0.05)
        assert sch.size >= 1
        assert sch.times[0] == math.inf

    def test_parameter_validation(self):
        freq = construct_liouville_frequency(2.0, 2, 3)
        with pytest.raises(InputError):
            tr.subsequence_times(freq, gamma0=0.1, delta=0.6, eps_prime=0.1)
        with pytest.raises(InputError):
            tr.subsequence_times(freq, gamma0=-0.1, delta=0.4, eps_prime=0.1)
        with pytest.raises(InputError):
            tr.subsequence_times(freq, gamma0=0.1, delta=0.4, eps_prime=0.0)
