import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from passync.errors import NonFiniteInput
from passync.plant import PlantParams, PlantState, paper_params, plant_deriv


def test_paper_params():
    p = paper_params(8)
    assert p.J[7] == pytest.approx(1.3) and p.B[7] == pytest.approx(-2.1)
    p1 = paper_params(1)
    assert p1.J[0] == pytest.approx(0.6) and p1.B[0] == pytest.approx(-1.4)
    assert np.all(paper_params(250).J > 0)
    with pytest.raises(ValueError):
        paper_params(0)


@pytest.mark.parametrize(
    "J, B, u, d, v, expected",
    [
        (1.0, 0.0, 1.0, 0.0, 0.0, 1.0),
        (2.0, -1.0, 0.0, 0.0, 1.0, 0.5),
        (1.0, 0.0, 0.0, 0.25, 0.0, 0.25),
    ],
)
def test_vector_field_examples(J, B, u, d, v, expected):
    xd, vd = plant_deriv(PlantParams([J], [B]), PlantState([0.0], [v]), [u], [d])
    assert xd[0] == v
    assert vd[0] == pytest.approx(expected, abs=0)


def test_pure_function():
    s = PlantState(np.array([1.0, 2.0]), np.array([0.5, -0.5]))
    xd, _ = plant_deriv(paper_params(2), s, [0.0, 0.0], [0.0, 0.0])
    xd[0] = 99.0
    assert s.v[0] == 0.5


def test_validation():
    with pytest.raises(ValueError):
        PlantParams([0.0], [1.0])
    with pytest.raises(NonFiniteInput):
        plant_deriv(paper_params(1), PlantState([np.nan], [0.0]), [0.0], [0.0])
    with pytest.raises(NonFiniteInput):
        plant_deriv(paper_params(1), PlantState([0.0], [0.0]), [np.inf], [0.0])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(0.1, 5), min_size=1, max_size=5),
    st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5),
)
def test_linearity_in_input(J, b, u1, u2):
    m = len(J)
    p = PlantParams(J, np.full(m, b))
    s = PlantState(np.zeros(m), np.linspace(-1, 1, m))
    _, a = plant_deriv(p, s, np.full(m, u1 + u2), np.zeros(m))
    _, c = plant_deriv(p, s, np.full(m, u1), np.zeros(m))
    np.testing.assert_allclose(a - c, u2 / np.asarray(J), rtol=1e-12, atol=1e-12)


def test_open_loop_instability():
    p = paper_params(3)
    s = PlantState(np.zeros(3), np.full(3, 0.1))
    dt = 1e-3
    for _ in range(2000):
        xd, vd = plant_deriv(p, s, np.zeros(3), np.zeros(3))
        s = PlantState(s.x + dt * xd, s.v + dt * vd)
    assert np.all(np.abs(s.v) > 1.0)
