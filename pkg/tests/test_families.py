import json

import numpy as np
import pytest

from soco_lab import (
    estimate_condition_constants,
    instance_from_spec,
    instance_to_spec,
    make_glb,
    make_polyhedral,
    make_ripple,
    make_strongly_convex,
)
from soco_lab.families import EstimationError


def test_polyhedral_values_and_constants():
    inst = make_polyhedral(2.0, [[0.0]], p=2, start=[0.0])
    assert inst.hitting[0]([1.0]) == pytest.approx(2.0)
    assert inst.hitting[0]([0.0]) == 0.0
    assert inst.lam == pytest.approx(1.0)          # alpha / 2
    assert inst.movement.eta == 1.0
    one = make_polyhedral(1.0, [[0.0]])
    assert one.lam == pytest.approx(0.5)


def test_polyhedral_rejects_bad_alpha():
    with pytest.raises(ValueError):
        make_polyhedral(0.0, [[0.0]])
    with pytest.raises(ValueError):
        make_polyhedral(-1.0, [[0.0]])


def test_strongly_convex_values_and_constants():
    inst = make_strongly_convex(2.0, [[0.0]], start=[0.0])
    assert inst.hitting[0]([1.0]) == pytest.approx(1.0)  # (m/2) * 1
    assert inst.hitting[0]([0.0]) == 0.0
    assert inst.lam == pytest.approx(1.0)
    assert inst.movement.eta == 2.0
    assert inst.hitting[0].convexifier_bound == 0.0
    with pytest.raises(ValueError):
        make_strongly_convex(0.0, [[0.0]])


def test_glb_values_and_constants():
    inst = make_glb([1.0], [2.0], [2.0 + 1e-6], [[0.0]], start=[0.0])
    assert inst.lam == pytest.approx(0.25)         # e0 / (2 beta)
    assert inst.hitting[0]([0.0]) == 0.0
    inst2 = make_glb([1.0], [2.0], [2.0], [[1.0]], start=[0.0])
    assert inst2.hitting[0]([3.0]) == pytest.approx(7.0)  # 3 + 2*|3-1|
    with pytest.raises(ValueError):
        make_glb([1.0], [2.0], [0.9], [[0.0]])     # mu <= e0
    with pytest.raises(ValueError):
        make_glb([1.0], [2.0], [2.0], [[-1.0]])    # negative minimizer


def test_glb_exceeds_linear_floor(rng):
    inst = make_glb([1.0, 0.5], [2.0, 1.0], [1.5, 0.8], rng.uniform(0, 2, (4, 2)))
    e0 = np.array([1.0, 0.5])
    for _ in range(2000):
        x = rng.uniform(0, 4, size=2)
        t = rng.integers(0, 4)
        assert inst.hitting[t](x) >= float(e0 @ x) - 1e-12


def test_glb_penalizes_outside_orthant():
    inst = make_glb([1.0], [2.0], [2.0], [[1.0]])
    assert inst.hitting[0]([-0.5]) >= 1e11


def test_ripple_reduces_to_quadratic_when_flat(rng):
    path = rng.uniform(-1, 1, (3, 2))
    rip = make_ripple(1.5, 0.0, 2.0, path)
    quad = make_strongly_convex(1.5, path)
    for _ in range(200):
        x = rng.uniform(-3, 3, size=2)
        t = rng.integers(0, 3)
        assert rip.hitting[t](x) == pytest.approx(quad.hitting[t](x), abs=1e-12)


def test_ripple_minimizer_and_convexifier():
    rip = make_ripple(1.0, 1.0, 2.0, [[0.5]])
    assert rip.hitting[0]([0.5]) == 0.0
    assert rip.hitting[0].convexifier_bound == pytest.approx(3.0)  # eps k^2 - m


def test_ripple_convexified_midpoint_inequality(rng):
    # f(x) + (alpha/2) x^2 is midpoint-convex along 1000 random 1-D segments
    rip = make_ripple(1.0, 1.0, 2.0, [[0.0]])
    f, alpha = rip.hitting[0], 3.0

    def g(x):
        return f([x]) + 0.5 * alpha * x * x

    for _ in range(1000):
        a, b = rng.uniform(-4, 4, size=2)
        assert g(0.5 * (a + b)) <= 0.5 * (g(a) + g(b)) + 1e-9


def test_ripple_rejects_bad_params():
    with pytest.raises(ValueError):
        make_ripple(-1.0, 1.0, 2.0, [[0.0]])
    with pytest.raises(ValueError):
        make_ripple(1.0, 1.0, 0.0, [[0.0]])


FAMILY_INSTANCES = [
    lambda rng: make_polyhedral(2.0, rng.uniform(-2, 2, (5, 1)), p=2),
    lambda rng: make_polyhedral(0.7, rng.uniform(-2, 2, (5, 2)), p=1),
    lambda rng: make_strongly_convex(2.0, rng.uniform(-2, 2, (5, 2))),
    lambda rng: make_glb([1.0], [2.0], [1.5], rng.uniform(0, 2, (5, 1))),
    lambda rng: make_ripple(1.0, 1.0, 6.0, rng.uniform(-2, 2, (5, 1))),
]


@pytest.mark.parametrize("build", FAMILY_INSTANCES)
def test_family_minimizer_is_global(build, rng):
    inst = build(rng)
    lo = 0.0 if inst.family_tag == "glb" else -4.0
    pts = rng.uniform(lo, 4.0, size=(10_000, inst.dim))
    for t in (0, len(inst.hitting) - 1):
        cost = inst.hitting[t]
        assert cost(cost.minimizer) == cost.min_value
        values = cost.values(pts)
        assert np.all(values >= cost.min_value - 1e-12)
        assert np.all(values >= 0.0)


@pytest.mark.parametrize("build", FAMILY_INSTANCES)
def test_family_order_of_growth(build, rng):
    # f_t(x) >= lam * (c(x, v_t) + c(v_t, x)) on 10^4 random pairs
    inst = build(rng)
    c, lam = inst.movement, inst.lam
    lo = 0.0 if inst.family_tag == "glb" else -4.0
    pts = rng.uniform(lo, 4.0, size=(10_000, inst.dim))
    t_idx = rng.integers(0, len(inst.hitting), size=10_000)
    for x, t in zip(pts[:2000], t_idx[:2000]):
        cost = inst.hitting[t]
        v = cost.minimizer
        assert cost(x) >= lam * (c(x, v) + c(v, x)) - 1e-9


@pytest.mark.parametrize("build", FAMILY_INSTANCES)
def test_family_estimated_constants(build, rng):
    inst = build(rng)
    lam_hat, eta_hat = estimate_condition_constants(inst, 3.0, 4000, rng)
    assert lam_hat >= inst.lam - 1e-6
    assert eta_hat <= inst.movement.eta + 1e-6


def test_estimator_exact_on_tight_families(rng):
    poly = make_polyhedral(2.0, rng.uniform(-2, 2, (4, 1)))
    lam_hat, eta_hat = estimate_condition_constants(poly, 3.0, 3000, rng)
    assert lam_hat == pytest.approx(1.0, abs=1e-9)
    assert eta_hat == pytest.approx(1.0, abs=1e-9)
    quad = make_strongly_convex(2.0, rng.uniform(-2, 2, (4, 2)))
    lam_hat, eta_hat = estimate_condition_constants(quad, 3.0, 3000, rng)
    assert lam_hat == pytest.approx(1.0, abs=1e-9)
    assert eta_hat == pytest.approx(2.0, abs=1e-9)  # midpoint triples are tight


def test_estimator_l2_norm_eta(rng):
    inst = make_polyhedral(1.0, rng.uniform(-2, 2, (4, 2)), p=2)
    _, eta_hat = estimate_condition_constants(inst, 3.0, 4000, rng)
    assert eta_hat <= 1.0 + 1e-6


def test_estimator_failure_when_everything_skipped(rng):
    inst = make_strongly_convex(2.0, [[0.0]])
    with pytest.raises(EstimationError):
        estimate_condition_constants(inst, 1e-14, 50, rng)


def test_estimator_rejects_bad_args(rng):
    inst = make_strongly_convex(2.0, [[0.0]])
    with pytest.raises(ValueError):
        estimate_condition_constants(inst, 1.0, 0, rng)
    with pytest.raises(ValueError):
        estimate_condition_constants(inst, -1.0, 10, rng)


def test_instance_spec_roundtrip(rng):
    for build in FAMILY_INSTANCES:
        inst = build(rng)
        spec = instance_to_spec(inst)
        again = instance_from_spec(json.loads(json.dumps(spec)))
        assert again.lam == pytest.approx(inst.lam)
        x = rng.uniform(0, 2, size=inst.dim)
        for t in range(inst.horizon):
            assert again.hitting[t](x) == pytest.approx(inst.hitting[t](x))


def test_instance_spec_validates_shapes():
    spec = instance_to_spec(make_strongly_convex(1.0, [[0.0], [1.0]]))
    spec["hitting"]["minimizers"] = [[0.0]]
    with pytest.raises(ValueError):
        instance_from_spec(spec)
