import math

import pytest

from pqslab.ensemble import moments
from pqslab.errors import ConfigError, NonConvergenceError, StateFactoryError
from pqslab.sweeps import (
    DEFAULT_G_GRID,
    SweepSpec,
    build_ensemble,
    critical_sweep_point,
    evaluate_point,
    fig3_inset_point,
    figure_fig4,
    run_sweep,
)


@pytest.mark.parametrize("kwargs,field", [
    ({"state": "cat"}, "state"),
    ({"number_model": "binomial"}, "number_model"),
    ({"number_model": "fixed", "n": 3.5}, "n"),
    ({"n": 0}, "n"),
    ({"tail_mass": 0.1}, "tail_mass"),
    ({"g_over_kappa": ()}, "g_over_kappa"),
    ({"g_over_kappa": (math.inf,)}, "g_over_kappa"),
    ({"kappa": 0.0}, "kappa"),
    ({"sigma_m": -1.0}, "sigma_m"),
])
def test_spec_validation(kwargs, field):
    with pytest.raises(ConfigError) as info:
        SweepSpec(**kwargs)
    assert info.value.field == field


def test_default_grid_shape():
    assert len(DEFAULT_G_GRID) == 50
    assert DEFAULT_G_GRID[0] == pytest.approx(-1e3) and DEFAULT_G_GRID[-1] == pytest.approx(1e3)
    assert all(g != 0 for g in DEFAULT_G_GRID)


def test_non_ground_states_ignore_grid():
    assert SweepSpec(state="phase", g_over_kappa=(1.0, 2.0)).grid == (None,)


def test_evaluate_point_columns():
    spec = SweepSpec(state="coherent", number_model="fixed", n=16, phi_over_pi=(0.0, 0.5))
    row = evaluate_point(spec, None)
    assert row["e_hz"] == pytest.approx(0.5)
    assert row["dphi@0pi"] is None
    assert row["dphi@0.5pi"] == pytest.approx(0.25)


def test_run_sweep_is_thread_independent():
    spec = SweepSpec(state="ground", number_model="poisson", n=30, g_over_kappa=(-0.5, 0.2, 3.0), mz=True)
    assert run_sweep(spec, 1) == run_sweep(spec, 3)


def test_mz_ground_state_is_aligned():
    ens, phase = build_ensemble(SweepSpec(n=40, g_over_kappa=(0.5,), mz=True), 0.5)
    m = moments(ens)
    assert phase is not None and m.mean_jx_t > 0 and abs(m.mean_jy_t) < 1e-12


def test_pqs_optimal_non_convergence():
    spec = SweepSpec(state="pqs-optimal", number_model="fixed", n=37, pqs_max_iters=1)
    with pytest.raises(StateFactoryError) as info:
        build_ensemble(spec)
    assert isinstance(info.value.cause, NonConvergenceError) and info.value.n == 37


def test_fig3_inset_point_fields():
    row = fig3_inset_point(25)
    assert row["target"] == pytest.approx(math.sqrt(2))
    assert row["xi_s_y_sqrt_n_fixed"] > 0 and row["xi_s_ph_y_sqrt_n"] > 0


def test_critical_point_is_sub_shot_noise():
    assert critical_sweep_point(43.6)["e_ph"] < 0.2


def test_fig4_rows_mark_divergent_offsets():
    rows, crit, meta = figure_fig4([0.0, 0.5], (43.6,), [40.0, 45.0])
    assert rows[0]["dphi_ng43.6"] is None and rows[1]["dphi_ng43.6"] > 0
    assert len(crit) == 2 and meta["critical_sweep"]["argmin_ng_over_kappa"] in (40.0, 45.0)
