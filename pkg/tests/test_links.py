import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balint import Identity, Link, LinkDomainError, Log, Logit, link_by_name

LINKS = [Identity(), Log(), Logit()]


def _domain_grid(link: Link) -> np.ndarray:
    if isinstance(link, Log):
        return np.geomspace(1e-8, 1e6, 41)
    if isinstance(link, Logit):
        return np.concatenate([np.linspace(1e-7, 1 - 1e-7, 37), [0.5]])
    return np.linspace(-1e6, 1e6, 41)


class TestRoundTrip:
    @pytest.mark.parametrize("link", LINKS, ids=lambda l: l.name)
    def test_invert_after_apply(self, link):
        mu = _domain_grid(link)
        back = link.invert(link.apply(mu))
        assert np.all(np.abs(back - mu) <= 1e-12 * np.maximum(1.0, np.abs(mu)))

    @pytest.mark.parametrize("link", LINKS, ids=lambda l: l.name)
    def test_scalar_in_scalar_out(self, link):
        mu = 0.25
        eta = link.apply(mu)
        assert isinstance(eta, float)
        assert isinstance(link.invert(eta), float)

    @pytest.mark.parametrize("link", LINKS, ids=lambda l: l.name)
    def test_array_in_array_out(self, link):
        eta = np.array([-0.5, 0.0, 0.5])
        out = link.invert(eta)
        assert isinstance(out, np.ndarray)
        assert out.shape == (3,)


class TestPointValues:
    def test_identity_is_identity(self):
        assert Identity().apply(0.37) == 0.37
        assert Identity().invert(-4.2) == -4.2

    def test_log_points(self):
        assert Log().apply(1.0) == 0.0
        assert Log().invert(0.0) == 1.0
        assert Log().apply(math.e) == pytest.approx(1.0, rel=1e-15)

    def test_logit_points(self):
        assert Logit().apply(0.5) == 0.0
        assert Logit().invert(0.0) == 0.5
        assert Logit().apply(0.75) == pytest.approx(math.log(3.0), rel=1e-14)


class TestMonotonicity:
    @pytest.mark.parametrize("link", LINKS, ids=lambda l: l.name)
    def test_apply_order_preserving(self, link):
        rng = np.random.default_rng(11)
        grid = _domain_grid(link)
        lo, hi = grid.min(), grid.max()
        a = rng.uniform(lo, hi, 10_000)
        b = rng.uniform(lo, hi, 10_000)
        swap = a > b
        a[swap], b[swap] = b[swap], a[swap].copy()
        strict = a < b
        fa, fb = link.apply(a), link.apply(b)
        assert np.all(fa[strict] < fb[strict])

    @pytest.mark.parametrize("link", LINKS, ids=lambda l: l.name)
    def test_invert_order_preserving(self, link):
        rng = np.random.default_rng(12)
        a = np.sort(rng.uniform(-30, 30, 10_000))
        out = link.invert(a)
        assert np.all(np.diff(out) >= 0)


class TestDomainErrors:
    @pytest.mark.parametrize("mu", [0.0, -1.0, -1e-300])
    def test_log_rejects_nonpositive(self, mu):
        with pytest.raises(LinkDomainError):
            Log().apply(mu)

    @pytest.mark.parametrize("mu", [0.0, 1.0, -0.2, 1.3])
    def test_logit_rejects_outside_open_interval(self, mu):
        with pytest.raises(LinkDomainError):
            Logit().apply(mu)

    def test_array_domain_violation_detected(self):
        with pytest.raises(LinkDomainError):
            Log().apply(np.array([1.0, 0.0, 2.0]))
        with pytest.raises(LinkDomainError):
            Logit().apply(np.array([0.5, 1.0]))


class TestExtremeStability:
    def test_logit_invert_saturates_without_overflow(self):
        with np.errstate(over="raise", invalid="raise"):
            hi = Logit().invert(800.0)
            lo = Logit().invert(-800.0)
        assert hi == 1.0
        assert lo == 0.0

    def test_logit_invert_moderate_tail_accuracy(self):
        # 1/(1+e^30) without cancellation
        assert Logit().invert(-30.0) == pytest.approx(math.exp(-30.0), rel=1e-12)

    def test_log_invert_overflow_is_inf(self):
        assert Log().invert(800.0) == math.inf
        assert Log().invert(-800.0) == 0.0


class TestLogitSymmetry:
    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50, 50))
    def test_invert_complements(self, eta):
        s = Logit().invert(eta) + Logit().invert(-eta)
        assert abs(s - 1.0) <= 1e-12


class TestRegistry:
    def test_lookup(self):
        for name in ("identity", "log", "logit"):
            assert link_by_name(name).name == name

    def test_unknown_name(self):
        with pytest.raises(Exception, match="unknown link"):
            link_by_name("probit")
