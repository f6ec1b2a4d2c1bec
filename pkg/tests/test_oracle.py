import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from periodic_asep import kernel
from periodic_asep.errors import DomainError, ResourceError
from periodic_asep.kernel import GeneralRhoProfile, RhoProfile, XiVector
from periodic_asep.oracle import (IDENTITIES, brute_double_sum, brute_y_average, lucky_formula,
                                  run_identity_suite)
from periodic_asep.scalars import ModelParams, SiteSet

F = Fraction
P3 = ModelParams(F(1, 3), F(2, 3))
HALF = RhoProfile([F(1, 2)])


def params_for_tau(tau):
    return ModelParams(tau / (1 + tau), 1 / (1 + tau))


def naive_y_average(S, N, rho, params):
    """Textbook enumeration with Fractions, used only to cross-check the integer oracle."""
    import itertools
    free = [n for n in range(1, N + 1) if n not in S]
    total = F(0)
    for bits in itertools.product([0, 1], repeat=len(free)):
        Y = sorted(set(S) | {n for n, b in zip(free, bits) if b})
        prob = F(1)
        for n in range(1, N + 1):
            r = F(rho.at(n))
            prob *= r if n in Y else 1 - r
        sigma = sum(1 for u in S for v in Y if u >= v)
        total += prob * F(params.tau) ** sigma
    return total


class TestBruteYAverage:
    def test_examples(self):
        assert brute_y_average(SiteSet([1]), 2, HALF, P3) == F(1, 4)
        assert brute_y_average(SiteSet([2]), 2, HALF, P3) == F(3, 16)

    @pytest.mark.parametrize("N", [0, 3, 7])
    def test_empty_set(self, N):
        assert brute_y_average([], N, RhoProfile([F(1, 3), F(3, 4)]), P3) == 1

    def test_caps(self):
        with pytest.raises(ResourceError):
            brute_y_average(SiteSet([1]), 21, HALF, P3)
        with pytest.raises(DomainError):
            brute_y_average(SiteSet([5]), 3, HALF, P3)

    @given(st.lists(st.sampled_from([F(0), F(1, 4), F(1, 2), F(2, 3), F(1)]), min_size=6, max_size=6),
           st.sets(st.integers(1, 6), max_size=3), st.sampled_from([F(0), F(1, 3), F(1, 2)]))
    def test_matches_naive_enumeration(self, values, S, tau):
        rho = GeneralRhoProfile(values)
        params = params_for_tau(tau)
        S = sorted(S)
        assert brute_y_average(S, 6, rho, params) == naive_y_average(S, 6, rho, params)


class TestLuckyFormula:
    def test_examples(self):
        assert lucky_formula(SiteSet([1]), HALF, P3) == F(1, 4)
        assert lucky_formula(SiteSet([2]), HALF, P3) == F(3, 16)
        assert lucky_formula(SiteSet([2, 3]), RhoProfile([F(0), F(1, 2)]), P3) == 0

    @given(st.lists(st.sampled_from([F(1, 4), F(1, 2), F(1)]), min_size=8, max_size=8),
           st.sets(st.integers(1, 8), min_size=1, max_size=3),
           st.sampled_from([F(0), F(1, 3), F(2, 3)]))
    def test_agrees_with_brute_force_for_every_horizon(self, values, S, tau):
        rho = GeneralRhoProfile(values)
        params = params_for_tau(tau)
        S = SiteSet(sorted(S))
        closed = lucky_formula(S, rho, params)
        for N in range(S[-1], 9):
            assert brute_y_average(S, N, rho, params) == closed


class TestDoubleSum:
    def test_examples(self):
        rho = GeneralRhoProfile([F(1, 2)] * 2)
        assert brute_double_sum(1, 2, rho, XiVector([F(2)]), P3) == F(11, 64)
        assert brute_double_sum(3, 2, rho, XiVector([F(2)] * 3), P3) == 0

    def test_long_horizon_geometric(self):
        # past the enumeration cap the B-product is the reference; compare to the geometric sum
        rho = GeneralRhoProfile([F(1, 2)] * 30)
        expected = F(1, 2) * F(2, 5) * (1 - F(3, 8) ** 30)
        assert P3.tau * kernel.general_factor_truncated(1, XiVector([F(2)]), rho, P3) == expected
        with pytest.raises(ResourceError):
            brute_double_sum(1, 30, rho, XiVector([F(2)]), P3)

    def test_short_horizon_geometric(self):
        rho = GeneralRhoProfile([F(1, 2)] * 10)
        assert brute_double_sum(1, 10, rho, XiVector([F(2)]), P3) == \
            F(1, 2) * F(2, 5) * (1 - F(3, 8) ** 10)


class TestSuite:
    def test_smoke(self):
        reports = run_identity_suite(seed=1, trials=1, k_max=1, m_max=1, n_max=3)
        assert [r.identity for r in reports] == list(IDENTITIES)
        assert all(r.equal for r in reports)

    def test_all_equal(self):
        reports = run_identity_suite(seed=3, trials=100, k_max=3, m_max=4, n_max=12)
        assert len(reports) == 100 * len(IDENTITIES)
        failures = [r for r in reports if not r.equal]
        assert not failures, failures[:3]

    def test_detects_injected_fault(self):
        def bad_phi(i, n, k, rho, params):
            return kernel.phi(i, n, k, rho, params) * F(101, 100)
        reports = run_identity_suite(seed=5, trials=20, phi_fn=bad_phi)
        y = [r for r in reports if r.identity == "y_average"]
        assert any(not r.equal for r in y)
        assert all(r.equal for r in reports if r.identity != "y_average")

    def test_deterministic_in_seed(self):
        a = [r.to_json() for r in run_identity_suite(seed=9, trials=5)]
        b = [r.to_json() for r in run_identity_suite(seed=9, trials=5)]
        assert a == b
        assert a != [r.to_json() for r in run_identity_suite(seed=10, trials=5)]

    def test_json(self):
        report = run_identity_suite(seed=2, trials=1)[0]
        data = json.loads(report.to_json())
        assert set(data) == {"identity", "instance", "left", "right", "equal"}
        assert F(data["left"]) == F(data["right"])
        assert data["instance"]["trial"] == 0
