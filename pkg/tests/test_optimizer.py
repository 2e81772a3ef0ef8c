import numpy as np
import pytest

from pairpillar import layered, optimizer
from pairpillar.errors import GridCapExceededError, InvalidParameterError
from pairpillar.layered import GAAS, SIO2
from pairpillar.optimizer import DesignPoint

BASELINE = DesignPoint(2.02, 5, 18)


class TestEvaluateDesign:
    def test_deterministic(self, default_model):
        a = optimizer.evaluate_design(BASELINE, default_model)
        b = optimizer.evaluate_design(BASELINE, default_model)
        assert a == b

    def test_baseline_figures(self, default_model):
        ev = optimizer.evaluate_design(BASELINE, default_model)
        assert 150.0 <= ev.quality_factor <= 400.0
        assert ev.pair_compatible
        assert ev.beta > 0.8
        assert 0.0 <= ev.eta_int <= 1.0
        assert ev.resonance_nm < 910.0

    def test_bounds_validation(self):
        with pytest.raises(InvalidParameterError):
            DesignPoint(0.2, 5, 18)
        with pytest.raises(InvalidParameterError):
            DesignPoint(2.0, 0, 18)
        with pytest.raises(InvalidParameterError):
            DesignPoint(2.0, 5, 99)


class TestSweep:
    def test_empty_grid_gives_empty_table(self, default_model):
        table = optimizer.sweep({}, model=default_model, base=BASELINE)
        assert table.points == ()
        assert table.evaluations == ()

    def test_empty_axis_gives_empty_table(self, default_model):
        table = optimizer.sweep({"diameter_um": []}, model=default_model, base=BASELINE)
        assert table.points == ()

    def test_cap_refusal(self, default_model):
        with pytest.raises(GridCapExceededError):
            optimizer.sweep(
                {"diameter_um": np.linspace(1.0, 3.0, 400)},
                model=default_model, cap=100,
            )

    def test_unknown_field(self, default_model):
        with pytest.raises(InvalidParameterError):
            optimizer.sweep({"wavelength": [910.0]}, model=default_model)

    def test_bottom_pairs_monotone(self, default_model):
        table = optimizer.sweep(
            {"n_bottom_pairs": list(range(18, 26))}, model=default_model, base=BASELINE
        )
        eta_top = table.column("eta_top")
        eta_int = table.column("eta_int")
        assert np.all(np.diff(eta_top) >= -1e-12)
        assert np.all(np.diff(eta_int) >= -1e-12)

    def test_reproducible_bitwise(self, default_model):
        grid = {"diameter_um": np.arange(1.5, 2.5001, 0.1)}
        t1 = optimizer.sweep(grid, model=default_model, base=BASELINE)
        t2 = optimizer.sweep(grid, model=default_model, base=BASELINE)
        assert t1.points == t2.points
        assert t1.evaluations == t2.evaluations

    def test_physical_bounds(self, default_model):
        table = optimizer.sweep(
            {"diameter_um": np.arange(1.0, 3.01, 0.25),
             "substrate": [GAAS, SIO2]},
            model=default_model, base=BASELINE,
        )
        eta = table.column("eta_int")
        assert np.all((eta >= 0.0) & (eta <= 1.0))

    def test_parallel_jobs_match_serial(self, default_model):
        grid = {"diameter_um": np.arange(1.9, 2.1001, 0.05)}
        serial = optimizer.sweep(grid, model=default_model, base=BASELINE, jobs=1)
        parallel = optimizer.sweep(grid, model=default_model, base=BASELINE, jobs=2)
        assert serial.points == parallel.points
        assert serial.evaluations == parallel.evaluations


class TestOptimize:
    def test_singleton_bounds_return_baseline(self, default_model):
        res = optimizer.optimize(
            {"diameter_um": (2.02, 2.02)}, objective="eta_int",
            model=default_model, base=BASELINE,
        )
        assert res.best_point == BASELINE

    def test_dominates_user_grid(self, default_model):
        grid = {"diameter_um": np.arange(1.8, 2.2001, 0.05)}
        table = optimizer.sweep(grid, model=default_model, base=BASELINE)
        res = optimizer.optimize(
            {"diameter_um": (1.8, 2.2)}, objective="eta_int",
            model=default_model, base=BASELINE, coarse_diameter_steps=9,
        )
        assert res.best_evaluation.eta_int >= table.column("eta_int").max() - 1e-12

    def test_refinement_beats_coarse(self, default_model):
        res = optimizer.optimize(
            {"diameter_um": (1.9, 2.1)}, objective="eta_int",
            model=default_model, base=BASELINE, coarse_diameter_steps=5,
        )
        assert res.best_evaluation.eta_int >= res.coarse_best

    def test_pair_compatible_constraint(self, default_model):
        res = optimizer.optimize(
            {"diameter_um": (1.9, 2.1), "n_top_pairs": (5, 7)},
            objective="eta_int_pair_compatible",
            model=default_model,
            base=DesignPoint(2.02, 5, 25, SIO2),
            coarse_diameter_steps=5,
        )
        assert res.best_evaluation.pair_compatible
        assert res.best_evaluation.linewidth_nm > optimizer.PAIR_SPLITTING_NM

    def test_unknown_objective(self, default_model):
        with pytest.raises(InvalidParameterError):
            optimizer.optimize({}, objective="throughput", model=default_model)
