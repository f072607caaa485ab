"""Remote-almost-periodicity diagnostics, Bebutov distance, audits."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trichotomy.grid import GridFunction
from trichotomy.hyperbolicity import WindowTooSmall
from trichotomy.rap import (
    DEFAULT_T_SCHEDULE,
    almost_period_scan,
    bebutov_distance,
    lagrange_report,
    remote_period_residual,
    solution_rap_audit,
)


@pytest.fixture(scope="module")
def sine():
    return GridFunction.from_callable(np.sin, -45.0, 45.0, 0.02)


@pytest.fixture(scope="module")
def arctan():
    return GridFunction.from_callable(np.arctan, -60.0, 60.0, 0.02)


@pytest.fixture(scope="module")
def drift():
    return GridFunction.from_callable(lambda t: t, -45.0, 45.0, 0.02)


@pytest.fixture(scope="module")
def quasi():
    return GridFunction.from_callable(
        lambda t: np.sin(t) + np.sin(np.sqrt(2.0) * t), -40.0, 40.0, 0.02
    )


class TestResidual:
    def test_exact_period_of_sine(self):
        # fine grid: the residual at an exact period is pure interpolation
        # noise, which must sit below 1e-9 at this resolution
        fine = GridFunction.from_callable(np.sin, -50.0, 50.0, 0.01)
        assert remote_period_residual(fine, 2.0 * np.pi, 10.0) <= 1e-9

    def test_arctan_tail_difference(self, arctan):
        res = remote_period_residual(arctan, 1.0, 10.0)
        assert res == pytest.approx(0.01099, abs=1e-4)
        # the worst side is the negative one, at the horizon itself
        assert res == pytest.approx(np.arctan(-9.0) - np.arctan(-10.0), abs=1e-9)

    def test_drift_never_improves(self, drift):
        assert remote_period_residual(drift, 1.0, 10.0) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_single_side_selection(self, arctan):
        plus = remote_period_residual(arctan, 1.0, 10.0, side="+")
        minus = remote_period_residual(arctan, 1.0, 10.0, side="-")
        both = remote_period_residual(arctan, 1.0, 10.0, side="both")
        assert both == pytest.approx(max(plus, minus), abs=1e-15)
        assert minus > plus  # arctan flattens slower on the side it came from

    def test_window_must_reach_past_horizon(self, sine):
        with pytest.raises(WindowTooSmall, match="increase window"):
            remote_period_residual(sine, 45.0, 10.0, side="+")

    def test_negative_horizon_rejected(self, sine):
        with pytest.raises(ValueError):
            remote_period_residual(sine, 1.0, -1.0)

    def test_unknown_side_rejected(self, sine):
        with pytest.raises(ValueError):
            remote_period_residual(sine, 1.0, 10.0, side="up")


class TestScan:
    def test_sine_accepts_only_near_its_period(self, sine):
        rep = almost_period_scan(sine, 0.05, (0.5, 8.0), 0.25)
        assert rep.accepted == [6.25]
        assert rep.L_hat[6.25] == 5.0
        assert rep.ell_hat == pytest.approx(5.75)
        assert rep.not_relatively_dense is False
        assert rep.two_sided is True

    def test_arctan_horizon_ladder(self, arctan):
        rep = almost_period_scan(
            arctan, 0.011, (0.5, 3.0), 0.5, schedule=(5.0, 10.0, 20.0)
        )
        # every shift is eventually accepted, but larger shifts need to look
        # farther out before the tail difference drops below eps
        assert rep.accepted == [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        assert rep.L_hat[0.5] == 10.0
        assert rep.L_hat[3.0] == 20.0
        assert all(
            rep.L_hat[a] <= rep.L_hat[b]
            for a, b in zip(rep.accepted, rep.accepted[1:])
        )
        assert math.isfinite(rep.ell_hat)

    def test_drift_accepts_nothing(self, drift):
        rep = almost_period_scan(drift, 0.4, (0.5, 8.0), 0.5)
        assert rep.accepted == []
        assert rep.not_relatively_dense is True
        assert math.isinf(rep.ell_hat)

    def test_quasi_periodic_has_sparse_but_finite_gaps(self, quasi):
        # sin t + sin(sqrt(2) t): good shifts need 2 pi k with sqrt(2) k near
        # an integer; k = 5 (tau ~ 31.4) is the first one under 35
        rep = almost_period_scan(quasi, 0.5, (0.5, 35.0), 0.1, schedule=(5.0, 10.0))
        assert len(rep.accepted) >= 1
        assert all(30.0 <= tau <= 33.0 for tau in rep.accepted)
        assert math.isfinite(rep.ell_hat)
        assert 25.0 <= rep.ell_hat <= 34.5

    def test_report_serialization(self, sine):
        rep = almost_period_scan(sine, 0.05, (0.5, 8.0), 0.25)
        data = rep.to_json()
        assert data["accepted"] == [6.25]
        assert data["not_relatively_dense"] is False
        assert len(data["residual_curves"]) == len(rep.tau_values)
        assert data["T_schedule"] == [5.0, 10.0, 20.0, 40.0]

    def test_csv_layout(self, sine, tmp_path):
        rep = almost_period_scan(sine, 0.05, (0.5, 8.0), 0.25)
        path = tmp_path / "residuals.csv"
        rep.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "tau,T_5,T_10,T_20,T_40"
        assert len(lines) == 1 + len(rep.tau_values)

    def test_bad_parameters_rejected(self, sine):
        with pytest.raises(ValueError):
            almost_period_scan(sine, -0.1, (0.5, 8.0), 0.5)
        with pytest.raises(ValueError):
            almost_period_scan(sine, 0.1, (0.5, 8.0), 0.0)
        coarse = GridFunction.from_callable(np.sin, -45.0, 45.0, 0.5)
        with pytest.raises(ValueError, match="coarser"):
            almost_period_scan(coarse, 0.1, (0.5, 8.0), 0.1)


class TestBebutov:
    def test_identical_functions(self, sine):
        assert bebutov_distance(sine, sine) == 0.0

    def test_constant_offset(self):
        a = GridFunction.from_callable(lambda t: 0.0 * t, -50.0, 50.0, 0.05)
        b = GridFunction.from_callable(lambda t: 0.0 * t + 1.0, -50.0, 50.0, 0.05)
        assert bebutov_distance(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_growing_difference_balances_at_unit_scale(self):
        a = GridFunction.from_callable(lambda t: 0.0 * t, -50.0, 50.0, 0.05)
        b = GridFunction.from_callable(lambda t: np.abs(t), -50.0, 50.0, 0.05)
        # min(L, 1/L) peaks at L = 1; the log grid lands close to it
        d = bebutov_distance(a, b)
        assert 0.9 <= d <= 1.0

    def test_symmetry(self, sine, quasi):
        f = GridFunction.from_callable(np.cos, -45.0, 45.0, 0.02)
        assert bebutov_distance(sine, f) == bebutov_distance(f, sine)

    def test_bounded_by_sup_difference_and_grid_cap(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(size=(201, 2))
        a = GridFunction(-10.0, 10.0, vals)
        b = GridFunction(-10.0, 10.0, vals + rng.normal(size=(201, 2)))
        d = bebutov_distance(a, b)
        assert d <= (a - b).sup_norm + 1e-12
        assert d <= 10.0  # 1 / L_min

    def test_resolution_mismatch_is_interpolated(self):
        a = GridFunction.from_callable(np.sin, -20.0, 20.0, 0.02)
        b = GridFunction.from_callable(np.sin, -20.0, 20.0, 0.01)
        assert bebutov_distance(a, b) <= 1e-6

    def test_window_and_dim_must_match(self, sine):
        other = GridFunction.from_callable(np.sin, -40.0, 40.0, 0.02)
        with pytest.raises(ValueError, match="window"):
            bebutov_distance(sine, other)
        two = GridFunction.from_callable(
            lambda t: np.stack([np.sin(t), np.cos(t)], axis=-1), -45.0, 45.0, 0.02
        )
        with pytest.raises(ValueError, match="dimension"):
            bebutov_distance(sine, two)


class TestLagrange:
    def test_sine_is_stable(self, sine):
        rep = lagrange_report(sine)
        assert rep.bounded is True
        assert rep.uc_doubtful is False
        assert rep.lagrange_stable is True
        assert rep.slope == pytest.approx(1.0, abs=0.2)
        assert rep.omega_hat == sorted(rep.omega_hat)

    def test_drift_grows_at_the_edges(self, drift):
        rep = lagrange_report(drift)
        assert rep.bounded is False
        assert rep.lagrange_stable is False

    def test_unresolved_oscillation_flags_continuity(self):
        chirp = GridFunction.from_callable(
            lambda t: np.sin(t**2), -40.0, 40.0, 0.02
        )
        rep = lagrange_report(chirp)
        assert rep.bounded is True
        assert rep.uc_doubtful is True
        assert rep.lagrange_stable is False
        assert rep.slope < 0.5

    def test_constant_function(self):
        flat = GridFunction.from_callable(lambda t: 0.0 * t + 2.0, -10.0, 10.0, 0.02)
        rep = lagrange_report(flat)
        assert rep.bounded is True
        assert rep.uc_doubtful is False
        assert rep.slope == 1.0

    def test_ladder_layout(self, sine):
        rep = lagrange_report(sine)
        h = sine.h
        assert rep.delta_ladder == pytest.approx([h, 2 * h, 4 * h, 8 * h, 16 * h])
        assert rep.window == (sine.a, sine.b)


class TestAudit:
    def test_periodic_data_periodic_solution(self, sine):
        const = GridFunction.from_callable(lambda t: 0.0 * t - 1.0, -45.0, 45.0, 0.02)
        report = solution_rap_audit(
            phi=sine,
            inputs={"A_0_0": const, "f_1": sine},
            eps_ladder=[0.1, 0.05],
            tau_range=(0.5, 8.0),
            tau_step=0.25,
        )
        for eps in (0.1, 0.05):
            entry = report.entries[eps]
            assert entry["input_accepted"]["A_0_0"] == list(
                np.arange(0.5, 8.01, 0.25)
            )
            assert entry["common_input_accepted"] == entry["input_accepted"]["f_1"]
            assert entry["missing"] == []
            assert entry["compatible_evidence"] is True

    def test_incompatible_solution_is_reported(self, drift):
        const = GridFunction.from_callable(lambda t: 0.0 * t + 1.0, -45.0, 45.0, 0.02)
        report = solution_rap_audit(
            phi=drift,
            inputs={"f_1": const},
            eps_ladder=[0.1],
            tau_range=(1.0, 3.0),
            tau_step=1.0,
        )
        entry = report.entries[0.1]
        assert entry["common_input_accepted"] == [1.0, 2.0, 3.0]
        assert entry["solution_accepted"] == []
        assert entry["missing"] == [1.0, 2.0, 3.0]
        assert entry["compatible_evidence"] is False

    def test_inputs_must_share_window(self, sine):
        small = GridFunction.from_callable(np.sin, -10.0, 10.0, 0.02)
        with pytest.raises(ValueError, match="window"):
            solution_rap_audit(
                sine, {"f_1": small}, [0.1], (0.5, 2.0), 0.5
            )

    def test_json_shape(self, sine):
        report = solution_rap_audit(
            sine, {"f_1": sine}, [0.2], (0.5, 2.0), 0.5
        )
        data = report.to_json()
        assert data["eps_ladder"] == [0.2]
        assert data["scan_params"]["T_schedule"] == list(DEFAULT_T_SCHEDULE)
        assert "0.2" in data["per_eps"]
        assert data["per_eps"]["0.2"]["compatible_evidence"] is True


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=0, max_value=400),
    st.integers(min_value=0, max_value=400),
)
def test_residual_triangle_inequality(quasi, k1, k2):
    h = quasi.h
    tau1, tau2 = k1 * h, k2 * h
    T = 10.0
    lhs = remote_period_residual(quasi, tau1 + tau2, T)
    rhs = remote_period_residual(quasi, tau1, T) + remote_period_residual(
        quasi, tau2, T - tau1
    )
    assert lhs <= rhs + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=6), st.integers(min_value=0, max_value=6))
def test_bebutov_triangle_inequality(i, j):
    fns = [
        lambda t: np.sin(t),
        lambda t: np.cos(0.7 * t),
        lambda t: np.tanh(t),
        lambda t: 0.0 * t + 0.3,
        lambda t: np.sin(t) * np.exp(-np.abs(t) / 10.0),
        lambda t: np.arctan(t),
        lambda t: 0.1 * t,
    ]
    a = GridFunction.from_callable(fns[i], -20.0, 20.0, 0.05)
    b = GridFunction.from_callable(fns[j], -20.0, 20.0, 0.05)
    mid = GridFunction.from_callable(np.cos, -20.0, 20.0, 0.05)
    d_ab = bebutov_distance(a, b)
    assert d_ab <= bebutov_distance(a, mid) + bebutov_distance(mid, b) + 1e-12
    assert d_ab == bebutov_distance(b, a)
    if i == j:
        assert d_ab == 0.0