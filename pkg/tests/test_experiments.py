import numpy as np
import pytest

from bdris import (
    Architecture,
    ExperimentPlan,
    InvalidPlanError,
    SolverConfig,
    SystemDims,
    baseline_identity,
    baseline_random,
    generate,
    run_cdf,
    run_element_sweep,
    run_grad_check,
    run_power_sweep,
    sum_rate,
    uniform_power_beamformer,
    write_results_csv,
)
from bdris.experiments import RESULTS_CSV_HEADER, run_convergence


def tiny_plan(**overrides):
    defaults = dict(
        architectures=(Architecture.parse("sc"), Architecture.parse("gc:2")),
        p_max_dbm_grid=(20.0,),
        r_grid=(4, 8),
        trials=2,
        base_seed=0,
        users=3,
        antennas=3,
        elements=8,
        solver=SolverConfig(max_iters=40),
    )
    defaults.update(overrides)
    return ExperimentPlan(**defaults)


class TestArchitecture:
    def test_parse_forms(self):
        assert Architecture.parse("sc").label == "SC"
        assert Architecture.parse("fc").label == "FC"
        gc = Architecture.parse("gc:4")
        assert gc.label == "GC(4)" and gc.group_size == 4

    def test_groups_by_kind(self):
        assert Architecture.parse("sc").groups(32) == 32
        assert Architecture.parse("fc").groups(32) == 1
        assert Architecture.parse("gc:2").groups(32) == 16
        assert Architecture.parse("gc:4").groups(8) == 2

    def test_invalid_forms(self):
        with pytest.raises(ValueError):
            Architecture.parse("mesh")
        with pytest.raises(ValueError):
            Architecture.parse("gc:1")

    def test_divisibility(self):
        arch = Architecture.parse("gc:8")
        assert arch.divides(16) and not arch.divides(12)
        with pytest.raises(InvalidPlanError):
            arch.groups(12)


class TestBaselines:
    def test_random_baseline_feasible_and_deterministic(self):
        plan = tiny_plan()
        dims = SystemDims(3, 3, 8, 2)
        channels = generate(plan.recipe(8, 0))
        bf = uniform_power_beamformer(dims, 0.1)
        theta_a, rate_a = baseline_random(channels, bf, dims, seed=3)
        theta_b, rate_b = baseline_random(channels, bf, dims, seed=3)
        assert theta_a.is_feasible()
        assert rate_a == rate_b
        np.testing.assert_array_equal(theta_a.blocks, theta_b.blocks)

    def test_identity_baseline_rate(self):
        plan = tiny_plan()
        dims = SystemDims(3, 3, 8, 4)
        channels = generate(plan.recipe(8, 0))
        bf = uniform_power_beamformer(dims, 0.1)
        theta, rate = baseline_identity(channels, bf, dims)
        assert rate == pytest.approx(sum_rate(channels, theta, bf), rel=1e-14)
        np.testing.assert_array_equal(theta.blocks, np.broadcast_to(np.eye(2), (4, 2, 2)))

    def test_optimized_beats_random_baseline(self):
        plan = tiny_plan(solver=SolverConfig(max_iters=300))
        dims = SystemDims(3, 3, 8, 2)
        channels = generate(plan.recipe(8, 1))
        bf = uniform_power_beamformer(dims, 0.1)
        _, baseline = baseline_random(channels, bf, dims, seed=1)
        rows = run_power_sweep(
            tiny_plan(
                architectures=(Architecture.parse("gc:4"),),
                trials=1,
                base_seed=1,
                solver=SolverConfig(max_iters=300, seed=1),
            )
        )
        assert rows[0].sum_rate > baseline


class TestPowerSweep:
    def test_single_cell_single_row(self):
        plan = tiny_plan(architectures=(Architecture.parse("fc"),), trials=1)
        rows = run_power_sweep(plan)
        assert len(rows) == 1
        row = rows[0]
        assert row.architecture == "FC"
        assert row.trial == 0 and row.p_max_dbm == 20.0 and row.elements == 8
        assert row.sum_rate >= 0.0 and row.termination in ("tolerance", "max-iters")

    def test_row_count_and_order(self):
        plan = tiny_plan(p_max_dbm_grid=(10.0, 20.0))
        rows = run_power_sweep(plan)
        assert len(rows) == 2 * 2 * 2  # arch x power x trial
        labels = [r.architecture for r in rows]
        assert labels == ["SC"] * 4 + ["GC(2)"] * 4

    def test_channels_paired_across_architectures(self):
        plan = tiny_plan()
        a = generate(plan.recipe(8, 1))
        b = generate(plan.recipe(8, 1))
        np.testing.assert_array_equal(a.bs_to_ris, b.bs_to_ris)
        np.testing.assert_array_equal(a.ris_to_users, b.ris_to_users)

    def test_baseline_rows_opt_in(self):
        plan = tiny_plan(architectures=(Architecture.parse("sc"),), trials=1)
        rows = run_power_sweep(plan, baselines=True)
        algorithms = {r.algorithm for r in rows}
        assert algorithms == {"cga", "random", "identity"}

    def test_parallel_matches_serial(self):
        plan = tiny_plan()
        serial = run_power_sweep(plan, n_jobs=1)
        parallel = run_power_sweep(plan, n_jobs=2)
        assert [r.sum_rate for r in serial] == [r.sum_rate for r in parallel]
        assert [r.iterations for r in serial] == [r.iterations for r in parallel]


class TestCdf:
    def test_sorted_support_points(self):
        plan = tiny_plan(trials=3)
        curves, rows = run_cdf(plan, 20.0)
        assert set(curves) == {"SC", "GC(2)"}
        for rates in curves.values():
            assert rates.size == 3
            assert (np.diff(rates) >= 0).all()
        assert len(rows) == 2 * 3

    def test_single_trial_single_point(self):
        plan = tiny_plan(architectures=(Architecture.parse("sc"),), trials=1)
        curves, _ = run_cdf(plan, 10.0)
        assert curves["SC"].shape == (1,)


class TestElementSweep:
    def test_rows_across_grid(self):
        plan = tiny_plan(r_grid=(4, 8), trials=1)
        rows = run_element_sweep(plan, p_max_dbm=20.0)
        assert len(rows) == 2 * 2
        assert sorted({r.elements for r in rows}) == [4, 8]

    def test_divisibility_violation_lists_pairs(self):
        plan = tiny_plan(
            architectures=(Architecture.parse("gc:8"),), r_grid=(8, 12), trials=1
        )
        with pytest.raises(InvalidPlanError) as err:
            run_element_sweep(plan)
        assert err.value.pairs == [(12, "GC(8)")]

    def test_default_power_is_grid_max(self):
        plan = tiny_plan(
            architectures=(Architecture.parse("sc"),),
            p_max_dbm_grid=(0.0, 20.0),
            r_grid=(8,),
            trials=1,
        )
        explicit = run_element_sweep(plan, p_max_dbm=20.0)
        default = run_element_sweep(plan)
        assert default[0].p_max_dbm == 20.0
        assert default[0].sum_rate == explicit[0].sum_rate


class TestConvergenceRunner:
    def test_traces_per_architecture(self):
        plan = tiny_plan(trials=1)
        traces = run_convergence(plan, 20.0)
        assert set(traces) == {"SC", "GC(2)"}
        for trace in traces.values():
            assert trace.iterations >= 1


class TestGradCheck:
    def test_small_grid_passes(self):
        dims_list = [SystemDims(3, 3, 8, g) for g in (1, 2, 4, 8)]
        rows = run_grad_check(dims_list, seeds=[0, 1])
        assert len(rows) == 4 * 2 * 2  # dims x seeds x nus
        assert all(r.passed for r in rows)
        assert max(max(r.groupwise_err, r.coupled_err) for r in rows) <= 1e-6
        assert max(r.lemma1_err for r in rows) <= 1e-7
        assert max(r.lemma2_err for r in rows) <= 1e-7
        assert max(r.diag_power_gap for r in rows) <= 1e-12

    def test_large_elements_rejected(self):
        with pytest.raises(ValueError):
            run_grad_check([SystemDims(3, 3, 32, 2)], seeds=[0])


class TestResultsCsv:
    def test_deterministic_output_modulo_wall_ms(self, tmp_path):
        plan = tiny_plan()
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results_csv(run_power_sweep(plan), first)
        write_results_csv(run_power_sweep(plan), second)

        def strip_wall(path):
            lines = path.read_text().splitlines()
            assert lines[0] == RESULTS_CSV_HEADER
            idx = lines[0].split(",").index("wall_ms")
            return [
                ",".join(f for i, f in enumerate(line.split(",")) if i != idx)
                for line in lines
            ]

        assert strip_wall(first) == strip_wall(second)

    def test_header_schema(self):
        assert RESULTS_CSV_HEADER == (
            "algorithm,architecture,p_max_dbm,R,trial,sum_rate,iterations,wall_ms,termination"
        )
