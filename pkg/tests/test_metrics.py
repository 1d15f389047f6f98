"""Trip statistics, communication accounting, and CSV/SVG emission."""

import csv
import math

import numpy as np
import pytest

from hfrl.metrics import (
    CommBreakdown,
    CommCostModel,
    EpisodeRecord,
    add_breakdowns,
    architecture_of,
    comm_cost,
    travel_time_stats,
    trip_stats,
    waiting_time_stats,
    write_csv,
)
from hfrl.svgplot import heatmap, line_chart
from hfrl.traffic import build_network, build_sim, step
from hfrl.traffic.scenarios import get_scenario


def run_scenario(name: str, steps: int, action: int = 1, seed: int = 0):
    sc = get_scenario(name)
    net = build_network(sc.network)
    state = build_sim(net, sc.sim, sc.demand, seed=seed, horizon_s=steps)
    names = list(state.signals)
    for _ in range(steps):
        step(state, {n: action for n in names})
    return state


class TestTripStats:
    def test_hand_values(self):
        stats = trip_stats([10.0, 20.0, 30.0, 40.0, 100.0])
        assert stats.count == 5
        assert stats.mean_s == pytest.approx(40.0)
        assert stats.median_s == pytest.approx(30.0)
        assert stats.p90_s == pytest.approx(np.percentile([10, 20, 30, 40, 100], 90))
        assert stats.max_s == 100.0

    def test_empty_is_nan_with_zero_count(self):
        stats = trip_stats([])
        assert stats.count == 0
        assert math.isnan(stats.mean_s)

    def test_simulated_trips_have_positive_times(self):
        state = run_scenario("grid1x1", steps=240)
        ts = travel_time_stats(state)
        ws = waiting_time_stats(state)
        assert ts.count > 0
        assert ts.mean_s >= 20.0  # free-flow bound for a 200 m trip at 10 m/s
        assert ws.count == ts.count
        assert ws.mean_s >= 0.0

    def test_entry_wait_only_adds_time(self):
        state = run_scenario("grid1x1", steps=240)
        base = travel_time_stats(state, include_entry_wait=False)
        full = travel_time_stats(state, include_entry_wait=True)
        assert full.mean_s >= base.mean_s


class TestCommCost:
    def test_federated_component_formulas(self):
        model = CommCostModel()
        got = comm_cost(
            "federated", n_agents=9, steps=600, completed_trips=100, rounds=2, param_dim=819,
        )
        assert got.upload_bytes == 2 * 9 * 819 * 4
        assert got.download_bytes == 2 * 9 * 819 * 4
        assert got.action_bytes == 600 * 9 * model.bytes_per_action
        assert got.obs_bytes == 600 * 9 * model.bytes_per_obs
        assert got.report_bytes == 100 * model.bytes_per_report
        assert got.total_bytes == sum(
            [got.upload_bytes, got.download_bytes, got.action_bytes, got.obs_bytes, got.report_bytes]
        )

    def test_centralized_doubles_hops_and_drops_params(self):
        got = comm_cost("centralized", n_agents=9, steps=600, completed_trips=100, rounds=2, param_dim=819)
        assert got.upload_bytes == 0
        assert got.download_bytes == 0
        assert got.action_bytes == 2 * 600 * 9 * 4
        assert got.obs_bytes == 2 * 600 * 9 * 32
        assert got.report_bytes == 100 * 16

    def test_decentralized_pays_single_hop_only(self):
        got = comm_cost("decentralized", n_agents=9, steps=600, completed_trips=100)
        assert got.upload_bytes == got.download_bytes == 0
        assert got.action_bytes == 600 * 9 * 4
        assert got.obs_bytes == 600 * 9 * 32

    def test_federated_minus_decentralized_is_param_traffic(self):
        fed = comm_cost("federated", 9, 600, 77, rounds=2, param_dim=819)
        dec = comm_cost("decentralized", 9, 600, 77)
        assert fed.total_bytes - dec.total_bytes == 2 * 819 * 4 * 9 * 2

    def test_additivity_over_windows(self):
        a = comm_cost("federated", 9, 300, 40, rounds=1, param_dim=819)
        b = comm_cost("federated", 9, 300, 37, rounds=1, param_dim=819)
        whole = comm_cost("federated", 9, 600, 77, rounds=2, param_dim=819)
        assert add_breakdowns(a, b) == whole

    def test_desk_scale_ordering_centralized_most_expensive(self):
        # the margin criterion: with 16x16 hidden layers (819 parameters)
        # federated sharing every 300 steps undercuts hauling raw traffic
        fed = comm_cost("federated", 9, 600, 150, rounds=2, param_dim=819)
        cen = comm_cost("centralized", 9, 600, 150)
        dec = comm_cost("decentralized", 9, 600, 150)
        assert dec.total_bytes < fed.total_bytes < cen.total_bytes

    def test_architecture_mapping(self):
        assert architecture_of("fedavg") == "federated"
        assert architecture_of("cluster") == "federated"
        assert architecture_of("fomo") == "federated"
        assert architecture_of("centralized") == "centralized"
        assert architecture_of("fixed") == "decentralized"
        assert architecture_of("actuated") == "decentralized"
        assert architecture_of("decentralized") == "decentralized"
        with pytest.raises(ValueError):
            architecture_of("smoke-signals")

    def test_rejects_negative_counts_and_unknown_architecture(self):
        with pytest.raises(ValueError):
            comm_cost("federated", -1, 0, 0)
        with pytest.raises(ValueError):
            comm_cost("mesh", 1, 1, 1)


class TestEmission:
    def test_write_csv_roundtrip(self, tmp_path):
        rows = [
            EpisodeRecord(
                method="fedavg", seed=7,
                episode=1, phase="train", round=2, steps=600, spawned=100,
                completed=90, mean_travel_s=55.5, mean_wait_s=12.25,
                mean_reward=-0.5, comm_upload_bytes=600, comm_download_bytes=600,
                comm_action_bytes=20, comm_obs_bytes=10, comm_report_bytes=4,
                comm_total_bytes=1234,
            ),
            EpisodeRecord(
                method="fedavg", seed=7,
                episode=2, phase="eval", round=2, steps=600, spawned=0,
                completed=0, mean_travel_s=float("nan"), mean_wait_s=float("nan"),
                mean_reward=0.0, comm_upload_bytes=0, comm_download_bytes=0,
                comm_action_bytes=0, comm_obs_bytes=0, comm_report_bytes=0,
                comm_total_bytes=0,
            ),
        ]
        path = tmp_path / "episodes.csv"
        write_csv(path, rows)
        with open(path) as fh:
            got = list(csv.DictReader(fh))
        assert got[0]["mean_travel_s"] == "55.5"
        assert got[0]["phase"] == "train"
        assert got[0]["method"] == "fedavg"
        assert got[0]["seed"] == "7"
        assert got[0]["comm_upload_bytes"] == "600"
        assert got[1]["mean_travel_s"] == ""  # NaN becomes an empty cell
        assert len(got) == 2

    def test_write_csv_rejects_empty(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(tmp_path / "x.csv", [])

    def test_line_chart_deterministic_and_wellformed(self):
        series = {"fedavg": [(0, -1.0), (1, -0.8)], "fixed": [(0, -1.2), (1, -1.2)]}
        a = line_chart(series, title="reward", x_label="round", y_label="mean reward")
        b = line_chart(series, title="reward", x_label="round", y_label="mean reward")
        assert a == b
        assert a.startswith("<svg") and a.endswith("</svg>")
        assert a.count("<polyline") == 2
        assert "fedavg" in a and "fixed" in a

    def test_line_chart_rejects_empty(self):
        with pytest.raises(ValueError):
            line_chart({})
        with pytest.raises(ValueError):
            line_chart({"a": [(0.0, float("nan"))]})

    def test_heatmap_annotates_cells(self):
        svg = heatmap([[1.0, 0.5], [0.5, 1.0]], ["A0", "B1"], ["A0", "B1"], title="sim")
        assert svg.count("<rect") == 5  # background + 4 cells
        assert svg.count("1.00") == 2
        assert svg == heatmap([[1.0, 0.5], [0.5, 1.0]], ["A0", "B1"], ["A0", "B1"], title="sim")

    def test_heatmap_validates_labels(self):
        with pytest.raises(ValueError):
            heatmap([[1.0]], ["a", "b"], ["c"])
