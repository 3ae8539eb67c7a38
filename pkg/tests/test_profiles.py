import numpy as np
import pytest

from wasep.profiles import SmoothFunction, TimeWeight, make_function, parse_test_function


def test_constant_family():
    f = make_function("constant", {"value": 2.5})
    assert np.allclose(f(np.linspace(0, 1, 7)), 2.5)


def test_cosine_family():
    f = make_function("cosine", {"offset": 0.5, "amplitude": 0.2, "k": 2, "phase": 0.1})
    u = np.linspace(0, 1, 11)
    assert np.allclose(f(u), 0.5 + 0.2 * np.cos(4 * np.pi * u + 0.1))


def test_fourier_family_matches_manual_sum():
    f = make_function("fourier", {"offset": 1.0, "terms": [(1, 0.3, 0.0), (3, 0.0, -0.2)]})
    u = np.linspace(0, 1, 13)
    expect = 1.0 + 0.3 * np.cos(2 * np.pi * u) - 0.2 * np.sin(6 * np.pi * u)
    assert np.allclose(f(u), expect)


def test_bump_support_and_smoothness():
    f = make_function("bump", {"height": 1.0, "center": 0.5, "width": 0.4})
    u = np.linspace(0, 1, 2001)
    v = f(u)
    assert v.max() == pytest.approx(1.0, abs=1e-12)  # exp(1 - 1/(1-0)) = 1 at the center
    outside = (np.abs(((u - 0.5 + 0.5) % 1.0) - 0.5) >= 0.2)
    assert np.all(v[outside] == 0.0)
    assert np.all(v >= 0.0)


def test_bump_wraps_around_torus():
    f = make_function("bump", {"height": 2.0, "center": 0.0, "width": 0.2})
    assert f(np.array(0.95)) > 0.0
    assert f(np.array(0.05)) > 0.0
    assert f(np.array(0.5)) == 0.0


def test_unknown_family_rejected():
    with pytest.raises(ValueError, match="unknown function family"):
        SmoothFunction("spline", {})


def test_time_weight_bounds():
    q = TimeWeight(make_function("cosine", {"offset": 2.0, "amplitude": 1.0, "k": 1}), 0.5)
    M = q.bound_factor()
    v = q(np.linspace(0, 0.5, 512))
    assert np.all(v <= M + 1e-12)
    assert np.all(v >= 1.0 / M - 1e-12)


def test_time_weight_must_be_positive():
    q = TimeWeight(make_function("cosine", {"offset": 0.5, "amplitude": 1.0, "k": 1}), 1.0)
    with pytest.raises(ValueError, match="positive"):
        q.bound_factor()


def test_parse_test_function_grammar():
    u = np.linspace(0, 1, 9)
    f = parse_test_function("fourier:k=1")
    assert np.allclose(f(u), np.sqrt(2) * np.cos(2 * np.pi * u))
    g = parse_test_function("fourier:k=2:sin")
    assert np.allclose(g(u), np.sqrt(2) * np.sin(4 * np.pi * u))
    c = parse_test_function("constant:c=3")
    assert np.allclose(c(u), 3.0)
    with pytest.raises(ValueError):
        parse_test_function("wavelet:j=1")
    with pytest.raises(ValueError):
        parse_test_function("fourier:k=0")


def test_unit_l2_norm_of_fourier_modes():
    u = np.arange(64) / 64
    f = parse_test_function("fourier:k=1")(u)
    assert np.mean(f * f) == pytest.approx(1.0, abs=1e-12)
