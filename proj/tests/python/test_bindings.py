import math

import numpy as np
import pytest

import nsum


def test_special_functions():
    assert nsum.log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
    assert nsum.log_beta(2.0, 3.0) == pytest.approx(math.log(1.0 / 12.0), rel=1e-13)
    assert nsum.log_choose(10.0, 3) == pytest.approx(math.log(120.0), rel=1e-13)
    assert nsum.reflect_into(1.2, 0.0, 1.0) == pytest.approx(0.8)
    with pytest.raises(nsum.NsumError):
        nsum.log_gamma(-1.0)


def test_beta_parameterisation_and_prior_quantiles():
    a, b = nsum.beta_mr_to_shapes(0.5, 1.0 / 3.0)
    assert a == pytest.approx(1.0)
    assert b == pytest.approx(1.0)
    lo, mid, hi = nsum.prior_quantiles(0.542, 0.011)
    assert abs(lo - 0.438) < 0.002
    assert abs(mid - 0.542) < 0.002
    assert abs(hi - 0.644) < 0.002


def test_scaleup():
    degrees, size = nsum.scaleup([[1, 3, 0], [0, 0, 4]], [100, 200], 1000)
    assert degrees[0] == pytest.approx(1000.0 * 4 / 300)
    assert size == pytest.approx(300.0)
    with pytest.raises(nsum.NsumError):
        nsum.scaleup([[1, -1, 0]], [100, 200], 1000)


def test_summaries_and_diagnostics():
    s = nsum.summarize(list(np.arange(1.0, 10001.0)))
    assert s["ci95"][0] == pytest.approx(250.975)
    assert s["ci95"][1] == pytest.approx(9750.025)
    rng = np.random.default_rng(1)
    chains = [list(rng.normal(size=2000)), list(rng.normal(size=2000))]
    assert 0.99 < nsum.gelman_rubin(chains) < 1.05
    assert nsum.effective_sample_size(chains[0]) > 1000


def test_recall_calibration():
    sizes = np.exp(np.linspace(math.log(1e3), math.log(1e6), 10))
    estimates = np.exp(6.7 + 0.5 * np.log(sizes))
    fit = nsum.fit_recall_calibration(list(estimates), [0.0] * 10, list(sizes))
    assert fit["a"] == pytest.approx(6.7, abs=1e-3)
    assert fit["b"] == pytest.approx(0.5, abs=1e-3)
    adjusted = nsum.recall_adjust_draws([13.4], 6.7, 0.5, 0.0)
    assert adjusted[0] == 13.4


def test_simulate_and_fit():
    sim = nsum.simulate("no_bias", n_respondents=100, seed=3)
    assert len(sim["responses"]) == 100
    assert len(sim["known_sizes"]) == 20
    out = nsum.fit(sim["responses"], sim["known_sizes"], sim["total_population"], model="degree",
                   iterations=1500, chains=2, seed=4)
    draws = out["draws"]["N_K"]
    assert len(draws) == 2 * 1350
    assert np.all(draws > 0)
    assert out["size"]["ci95"][0] <= out["size"]["median"] <= out["size"]["ci95"][1]
    again = nsum.fit(sim["responses"], sim["known_sizes"], sim["total_population"], model="degree",
                     iterations=1500, chains=2, seed=4)
    assert np.array_equal(draws, again["draws"]["N_K"])


def test_transmission_needs_a_prior():
    sim = nsum.simulate("transmission", n_respondents=50, seed=5)
    with pytest.raises(nsum.NsumError):
        nsum.fit(sim["responses"], sim["known_sizes"], sim["total_population"], model="transmission",
                 iterations=1000)
