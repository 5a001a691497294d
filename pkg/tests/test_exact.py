import itertools
import math

import numpy as np
import pytest

from isingcoex.exact import (
    EnumerationTooLarge,
    GibbsEngine,
    MeasureSpec,
    SpinConfig,
    conditional,
    covariance,
    expectation,
    log_partition,
    measure,
    prob,
)
from isingcoex.lattice import Box, Region, build_region


def brute_log_z(spec):
    """Sum over itertools.product, independent of the id encoding."""
    region = spec.region
    edges = [(region.sites[i], region.sites[j]) for i, j in region.edges()]
    h = spec.effective_field()
    total = 0.0
    for vals in itertools.product((-1, 1), repeat=len(region)):
        s = dict(zip(region.sites, vals))
        e = spec.beta * sum(s[a] * s[b] for a, b in edges) + sum(h[i] * v for i, v in enumerate(vals))
        total += math.exp(e)
    return math.log(total)


def line(kind, k):
    return Region.from_sites(kind, [(i, 0, 0) for i in range(k)])


def test_uniform_three_sites(kind):
    spec = measure(line(kind, 3), 0.0)
    assert log_partition(spec) == pytest.approx(math.log(8), abs=1e-14)
    eng = GibbsEngine(spec)
    sigma = SpinConfig(spec.region, [1, -1, 1])
    assert prob(eng, sigma) == pytest.approx(1 / 8, abs=1e-15)


def test_product_measure(kind):
    h0 = 0.37
    spec = measure(line(kind, 5), 0.0, h0)
    assert log_partition(spec) == pytest.approx(5 * math.log(2 * math.cosh(h0)), abs=1e-12)
    eng = GibbsEngine(spec)
    assert expectation(eng, eng.spin((2, 0, 0))) == pytest.approx(math.tanh(h0), abs=1e-14)


def test_single_edge(kind):
    spec = measure(line(kind, 2), 0.7)
    assert log_partition(spec) == pytest.approx(math.log(2 * math.exp(0.7) + 2 * math.exp(-0.7)), abs=1e-14)
    eng = GibbsEngine(spec)
    x, y = (0, 0, 0), (1, 0, 0)
    assert expectation(eng, eng.spin(x) * eng.spin(y)) == pytest.approx(math.tanh(0.7), abs=1e-14)


@pytest.mark.parametrize("bc", ["free", "plus", "minus"])
def test_log_z_against_bruteforce(kind, bc):
    region = Region.from_sites(kind, [(a, b, c) for a in range(2) for b in range(2) for c in range(2)])
    rng = np.random.default_rng(3)
    spec = measure(region, 0.45, rng.normal(0, 0.5, len(region)), bc)
    assert log_partition(spec) == pytest.approx(brute_log_z(spec), abs=1e-12)


def test_normalization(patch, rng):
    for _ in range(20):
        spec = measure(patch, rng.uniform(0, 2), rng.uniform(-2, 2, len(patch)))
        eng = GibbsEngine(spec)
        assert abs(eng.probs.sum() - 1) < 1e-12


def test_covariance_examples(kind):
    eng = GibbsEngine(measure(line(kind, 2), 0.0))
    x, y = (0, 0, 0), (1, 0, 0)
    assert covariance(eng, eng.spin(x), eng.spin(x)) == pytest.approx(1.0)
    assert covariance(eng, eng.spin(x), eng.spin(y)) == pytest.approx(0.0, abs=1e-15)


def test_covariance_with_own_plus_event(kind):
    from isingcoex.events import plus_at

    eng = GibbsEngine(measure(line(kind, 3), 0.4, 0.2))
    x = (1, 0, 0)
    up = expectation(eng, plus_at(x))
    assert covariance(eng, eng.spin(x), plus_at(x)) == pytest.approx(2 * up * (1 - up), abs=1e-14)


def test_conditional(kind):
    beta, hx = 0.6, 0.25
    spec = measure(line(kind, 2), beta, np.array([hx, -0.1]))
    eng = GibbsEngine(spec)
    c = conditional(eng, {(1, 0, 0): 1})
    want = math.exp(beta + hx) / (math.exp(beta + hx) + math.exp(-beta - hx))
    assert expectation(c, c.spin((0, 0, 0)) > 0) == pytest.approx(want, abs=1e-14)


def test_conditional_at_beta_zero_is_product(kind):
    spec = measure(line(kind, 3), 0.0, np.array([0.3, -0.2, 0.5]))
    c = conditional(GibbsEngine(spec), {(0, 0, 0): 1})
    assert expectation(c, c.spin((2, 0, 0))) == pytest.approx(math.tanh(0.5), abs=1e-14)


def test_condition_everything_is_point_mass(patch):
    eng = GibbsEngine(measure(patch, 0.3, 0.1))
    cons = {s: (1 if i % 2 else -1) for i, s in enumerate(patch.sites)}
    c = conditional(eng, cons)
    assert max(c.probs) == pytest.approx(1.0)


def test_contradictory_constraints(patch):
    eng = GibbsEngine(measure(patch, 0.3))
    with pytest.raises(ValueError):
        conditional(eng, {(0, 0, 0): 2})


def test_plus_boundary_drives_all_plus(patch):
    vals = []
    for beta in (0.5, 1.0, 2.0):
        eng = GibbsEngine(measure(patch, beta, 0.0, "plus"))
        vals.append(prob(eng, SpinConfig.constant(patch, 1)))
    assert vals[0] < vals[1] < vals[2]


def test_enumeration_cap(kind, b1):
    with pytest.raises(EnumerationTooLarge, match="enumeration too large"):
        GibbsEngine(measure(b1, 0.1))


def test_spec_validation(kind, patch):
    with pytest.raises(ValueError):
        MeasureSpec(patch, -0.1, 0.0)
    with pytest.raises(ValueError):
        MeasureSpec(patch, 0.1, np.zeros(3))
    with pytest.raises(ValueError):
        MeasureSpec(patch, 0.1, 0.0, {(0, 0, 0): 1})
    with pytest.raises(ValueError):
        SpinConfig(patch, np.zeros(len(patch)))


def test_config_ids(patch):
    sigma = SpinConfig.from_id(patch, 0b101)
    assert sigma.config_id() == 0b101
    assert sigma[patch.sites[0]] == 1 and sigma[patch.sites[1]] == -1
