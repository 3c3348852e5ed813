import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_eikonal.grid import (
    Grid, InitialProfile, ProfileError, State, discrete_gradient, project_initial, slope_LP,
)


def test_grid_nodes():
    g = Grid(10.0, 100)
    assert g.dx == 0.1
    assert g.ring_size == 200
    assert g.x[0] == -10.0
    assert g.x[-1] == pytest.approx(10.0 - 0.1)
    assert g.wrap(200) == 0 and g.wrap(-1) == 199


@pytest.mark.parametrize("P,N", [(0.5, 10), (10, 0)])
def test_grid_rejects(P, N):
    with pytest.raises(ValueError):
        Grid(P, N)


def test_arctan_slope():
    prof = InitialProfile()
    for P in (10, 50):
        assert slope_LP(prof, P) == pytest.approx(2 * math.atan(P) / (math.pi * P))
    assert prof.sup_norm == 2.0


def test_projection_is_periodic_ansatz():
    g = Grid(10.0, 100)
    prof = InitialProfile()
    s = project_initial(prof, g)
    assert np.allclose(s.u + s.L_P * g.x, prof(g.x))
    # u extends 2P periodically: u(-P) == v0(P) - L^P P
    assert s.u[0] == pytest.approx(prof(10.0) - s.L_P * 10.0)
    assert discrete_gradient(s, g.dx).min() + s.L_P >= 0


def test_table_profile_validation(tmp_path):
    with pytest.raises(ProfileError):
        InitialProfile.from_table([0, 1], [1, 0])
    with pytest.raises(ProfileError):
        InitialProfile.from_table([1, 0], [0, 1])
    path = tmp_path / "p.csv"
    path.write_text("x,v\n-5,0\n0,0.5\n5,2\n")
    prof = InitialProfile.from_csv(path)
    assert prof(0.0) == 0.5 and prof(100.0) == 2.0


@given(st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_nondecreasing_tables_project_nonnegative(incs):
    v = np.cumsum(incs)
    x = np.linspace(-10, 10, len(v))
    s = project_initial(InitialProfile.from_table(x, v), Grid(10.0, 50))
    assert (discrete_gradient(s, 0.2) + s.L_P).min() >= -1e-12


def test_state_is_read_only(tmp_path):
    s = State(0, 0.0, np.arange(4.0), 0.1)
    with pytest.raises(ValueError):
        s.u[0] = 1.0
    s.save(tmp_path / "s.npz")
    back = State.load(tmp_path / "s.npz")
    assert np.array_equal(back.u, s.u) and back.L_P == 0.1
    nxt = s.advanced(np.zeros(4), 0.5)
    assert (nxt.n, nxt.t) == (1, 0.5)
