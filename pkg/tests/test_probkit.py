"""Unit and property tests for the probability kernel."""
import numpy as np
import pytest

from codepop.errors import (
    AbsoluteContinuityError,
    DegenerateConditioningError,
    UsageError,
    ValidationError,
)
from codepop.probkit import (
    Dist1,
    Dist2,
    Dist3,
    conditional_mutual_information,
    entropy,
    js_divergence,
    kl_divergence,
    mutual_information,
)

# Frozen reference values, computed independently by direct summation.
H_QUARTER = 0.8112781244591328  # H(0.25, 0.75)
JSD_POINT_VS_UNIFORM = 0.3112781244591328


def test_entropy_known_values():
    assert entropy(Dist1([0.25, 0.75])) == pytest.approx(H_QUARTER, abs=1e-12)
    assert entropy(Dist1([0.25] * 4)) == pytest.approx(2.0, abs=1e-12)
    assert entropy(Dist1([1.0, 0.0])) == 0.0


def test_mutual_information_known_values():
    assert mutual_information(Dist2([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(1.0, abs=1e-12)
    assert mutual_information(Dist2(np.full((2, 2), 0.25))) == 0.0
    # product distribution with non-uniform marginals
    px = np.array([0.2, 0.8])
    py = np.array([0.3, 0.3, 0.4])
    assert mutual_information(Dist2(np.outer(px, py))) == pytest.approx(0.0, abs=1e-12)


def test_kl_divergence_known_values():
    a = Dist2([[1.0, 0.0], [0.0, 0.0]])
    b = Dist2([[0.125, 0.375], [0.25, 0.25]])
    assert kl_divergence(a, b) == pytest.approx(3.0, abs=1e-12)
    assert kl_divergence(b, b) == 0.0


def test_kl_divergence_requires_absolute_continuity():
    a = Dist2([[0.5, 0.5], [0.0, 0.0]])
    b = Dist2([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(AbsoluteContinuityError):
        kl_divergence(a, b)


def test_kl_divergence_shape_mismatch():
    with pytest.raises(UsageError):
        kl_divergence(Dist2(np.full((2, 2), 0.25)), Dist2(np.full((2, 3), 1 / 6)))


def test_js_divergence_known_values():
    assert js_divergence(Dist1([1.0, 0.0]), Dist1([0.0, 1.0])) == pytest.approx(1.0, abs=1e-12)
    assert js_divergence(Dist1([1.0, 0.0]), Dist1([0.5, 0.5])) == pytest.approx(
        JSD_POINT_VS_UNIFORM, abs=1e-12
    )
    d = Dist1([0.3, 0.7])
    assert js_divergence(d, d) == 0.0


def test_conditional_mutual_information_axis_handling():
    # X and Y independent given Z, dependent marginally.
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 0] = 0.25
    p[0, 0, 1] = p[1, 1, 1] = 0.25
    j = Dist3(p)
    # here X determines Y outright, so conditioning on Z changes nothing
    assert conditional_mutual_information(j, target=0, given=2) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UsageError):
        conditional_mutual_information(j, target=1, given=1)
    with pytest.raises(UsageError):
        conditional_mutual_information(j, target=3, given=0)


def test_conditional_mutual_information_screened_off():
    # Y is a noisy copy of Z, X = Z: I(X;Y) > 0 but I(X;Y|Z) = 0.
    p = np.zeros((2, 2, 2))
    for z in range(2):
        for y in range(2):
            p[z, y, z] = 0.5 * (0.9 if y == z else 0.1)
    j = Dist3(p)
    assert conditional_mutual_information(j, target=0, given=2) == pytest.approx(0.0, abs=1e-12)


def test_validation_rejects_bad_distributions():
    with pytest.raises(ValidationError):
        Dist1([0.5, -0.5, 1.0])
    with pytest.raises(ValidationError):
        Dist1([0.5, 0.5 + 1e-6])
    with pytest.raises(ValidationError):
        Dist1([[0.5, 0.5]])
    with pytest.raises(ValidationError):
        Dist1([])


def test_validation_renormalizes_small_drift():
    d = Dist1([0.5, 0.5 + 1e-10])
    assert d.p.sum() == pytest.approx(1.0, abs=1e-15)


def test_marginals_and_conditionals_stay_normalized():
    rng = np.random.default_rng(11)
    for _ in range(50):
        shape = tuple(rng.integers(2, 5, size=3))
        j = Dist3(rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))
        for axis in range(3):
            assert j.marginal(axis).p.sum() == pytest.approx(1.0, abs=1e-12)
            assert j.sum_out(axis).p.sum() == pytest.approx(1.0, abs=1e-12)
        pair = j.sum_out(2)
        for axis in range(2):
            assert pair.marginal(axis).p.sum() == pytest.approx(1.0, abs=1e-12)
        idx = int(np.argmax(pair.p.sum(axis=1)))
        cond = pair.condition(0, idx)
        assert cond.p.sum() == pytest.approx(1.0, abs=1e-12)


def test_condition_on_zero_probability_event():
    pair = Dist2([[0.5, 0.5], [0.0, 0.0]])
    with pytest.raises(DegenerateConditioningError):
        pair.condition(0, 1)


def test_mutual_information_properties():
    rng = np.random.default_rng(7)
    for _ in range(200):
        kx = int(rng.integers(2, 5))
        ky = int(rng.integers(2, 5))
        j = Dist2(rng.dirichlet(np.ones(kx * ky)).reshape(kx, ky))
        i_xy = mutual_information(j)
        i_yx = mutual_information(Dist2(j.p.T))
        assert i_xy >= 0.0
        assert i_xy == pytest.approx(i_yx, abs=1e-12)
        hx = entropy(j.marginal(0))
        hy = entropy(j.marginal(1))
        assert i_xy <= min(hx, hy) + 1e-12


def test_chain_rule():
    rng = np.random.default_rng(13)
    for _ in range(100):
        shape = tuple(rng.integers(2, 4, size=3))
        p = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
        j = Dist3(p)
        # I(A; B,C) = I(A;B) + I(A;C|B)
        i_joint = mutual_information(Dist2(p.reshape(shape[0], -1)))
        i_ab = mutual_information(j.sum_out(2))
        i_ac_given_b = conditional_mutual_information(j, target=0, given=1)
        assert i_joint == pytest.approx(i_ab + i_ac_given_b, abs=1e-9)


def test_js_divergence_properties():
    rng = np.random.default_rng(17)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        a, b, c = (Dist1(rng.dirichlet(np.ones(k))) for _ in range(3))
        dab = js_divergence(a, b)
        assert 0.0 <= dab <= 1.0 + 1e-12
        assert dab == pytest.approx(js_divergence(b, a), abs=1e-12)
        # sqrt(JSD) satisfies the triangle inequality
        dac = js_divergence(a, c)
        dcb = js_divergence(c, b)
        assert np.sqrt(dab) <= np.sqrt(dac) + np.sqrt(dcb) + 1e-9


def test_kl_nonnegative_on_shared_support():
    rng = np.random.default_rng(19)
    for _ in range(200):
        k = int(rng.integers(2, 5))
        a = Dist2(rng.dirichlet(np.ones(k * k)).reshape(k, k))
        b = Dist2(rng.dirichlet(np.ones(k * k)).reshape(k, k))
        assert kl_divergence(a, b) >= 0.0
