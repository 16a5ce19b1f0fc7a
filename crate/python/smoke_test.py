"""Smoke test for the lpen Python bindings: run with pytest or python."""

import math

import pytest

import lpen_py

PEN = {"a": 0.0, "b": 1.0, "lambda_a": 1.0, "lambda_b": 2.0, "gamma": 0.25}


def test_bm_h_is_absolute_value():
    h = lpen_py.HFunction()
    for x in (-2.0, -0.5, 0.0, 1.5):
        assert abs(h.h(x) - abs(x)) < 1e-8
    assert h.model == {"kind": "bm", "sigma": 1.0}


def test_stable_scaling_and_psi():
    h = lpen_py.HFunction({"kind": "stable", "alpha": 1.5})
    assert abs(h.h(4.0) / h.h(1.0) - 2.0) < 1e-6
    assert h.psi(2.0) == pytest.approx(2.0**1.5)


def test_hitting_probabilities():
    h = lpen_py.HFunction()
    assert h.hit_prob(0.25, 1.0, -1.0) == pytest.approx(0.625, abs=1e-8)
    total = h.hit_prob3(0.1, -1.0, 0.5, 2.0) + h.hit_prob3(0.1, 0.5, -1.0, 2.0) + h.hit_prob3(0.1, 2.0, -1.0, 0.5)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_phi_and_clocks():
    h = lpen_py.HFunction()
    up = h.phi(dict(PEN, gamma=1.0), 0.3)
    down = h.phi(dict(PEN, gamma=-1.0), 0.3)
    assert h.phi(PEN, 0.3) == pytest.approx(0.625 * up + 0.375 * down, rel=1e-10)
    parts = h.expect_two_point(PEN, 0.5, 3.0, 2.0)
    assert parts["restricted_c"] + parts["restricted_d"] == pytest.approx(parts["total"])
    assert h.expect(PEN, {"kind": "two_point", "c": 3.0, "d": 2.0}, 0.5) == pytest.approx(parts["total"])
    assert h.expect(PEN, {"kind": "exponential", "q": 0.1}, 0.5) is None


def test_estimate_matches_exact():
    h = lpen_py.HFunction()
    clock = {"kind": "hitting", "c": 2.0}
    exact = h.expect(PEN, clock, 0.5)
    est = lpen_py.estimate(PEN, clock, 0.5, mc={"n_paths": 2000, "seed": 4})
    assert est["n"] == 2000
    assert abs(est["mean"] - exact) < 4 * est["std_err"] + 0.02
    again = lpen_py.estimate(PEN, clock, 0.5, mc={"n_paths": 2000, "seed": 4})
    assert again == est


def test_errors():
    with pytest.raises(ValueError):
        lpen_py.HFunction({"kind": "stable", "alpha": 0.5})
    h = lpen_py.HFunction()
    with pytest.raises(ValueError):
        h.phi(dict(PEN, lambda_a=-1.0), 0.0)
    with pytest.raises(ValueError):
        h.expect(PEN, {"kind": "hitting", "c": 1.0}, 0.0)


def test_verify_exact_criteria():
    report = lpen_py.verify({"criteria": [1, 2]})
    assert report["passed"] is True
    assert [c["id"] for c in report["criteria"]] == [1, 2]
    assert all(math.isfinite(ch["observed"]) for c in report["criteria"] for ch in c["checks"])


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
