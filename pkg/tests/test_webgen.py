import csv
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qgram_art.navmodel import ModelExecutor, PathGenerator, load_bundled, load_model
from qgram_art.selectors import StoppingCriterion, run_random
from qgram_art.webgen import (
    SUMMARY_FIELDS,
    CoverageTrajectory,
    TechniqueConfig,
    auc,
    hard_targets,
    length_trajectory,
    run_campaign,
    run_technique,
    unique_targets,
    write_campaign,
)

TIMING = {"mean_exec_time", "mean_gen_time"}


def traj(covered, total=10):
    return CoverageTrajectory([(i + 1, c) for i, c in enumerate(covered)], total)


def chain_model(depth=8):
    """Home hub with decoys; the chain only advances after `depth` repetitions of `step`."""
    edges = [{"id": "step", "source": "H", "dest": "H", "method": "step", "effects": [["inc", "k"]]}]
    for i in range(6):
        edges.append({"id": f"decoy{i}", "source": "H", "dest": f"D{i}", "method": f"decoy{i}"})
        edges.append({"id": f"ret{i}", "source": f"D{i}", "dest": "H", "method": "ret"})
    edges.append({"id": "enter", "source": "H", "dest": "C1", "method": "enter",
                  "guard": ["ge", ["var", "k"], depth]})
    edges.append({"id": "tail1", "source": "C1", "dest": "C2", "method": "next"})
    edges.append({"id": "tail2", "source": "C2", "dest": "H", "method": "done"})
    edges.append({"id": "never", "source": "H", "dest": "H", "method": "never", "guard": ["false"]})
    nodes = ["H", "C1", "C2"] + [f"D{i}" for i in range(6)]
    return load_model({"schema": 1, "name": "chain", "nodes": nodes, "home": "H",
                       "state": {"variables": {"k": 0}, "collections": {}}, "edges": edges})


class TestAuc:
    def test_full_rectangle(self):
        assert auc(traj([10] * 50)) == pytest.approx(1.0, abs=1e-15)

    def test_zero(self):
        assert auc(traj([0] * 50)) == 0.0

    @pytest.mark.parametrize("n", [2, 11, 101, 1000])
    def test_linear_ramp(self, n):
        t = CoverageTrajectory([(i + 1, i) for i in range(n)], n - 1)
        assert auc(t) == pytest.approx(0.5, abs=1 / (2 * n))

    def test_padding_with_last_value(self):
        short = traj([10] * 5)
        assert auc(short, max_executions=20) == pytest.approx(1.0)
        half = traj([0] * 10 + [10])
        padded = auc(half, max_executions=21)
        # 0 over the first 10 steps, one ramp step of area 0.5, then 10 full steps, over 20 steps
        assert padded == pytest.approx((0.5 + 10) / 20)

    def test_prefix_fraction(self):
        t = traj([0, 10, 10, 10, 10, 10, 10, 10, 10, 10])
        # first ceil(0.2 * 10) = 2 points -> one trapezoid of height 0..100 -> 50 / (100 * 9)
        assert auc(t, 0.2) == pytest.approx(50 / 900)

    @given(st.lists(st.integers(0, 10), min_size=1, max_size=60), st.floats(0.01, 1.0))
    def test_bounds(self, steps, frac):
        covered = sorted(steps)
        t = traj(covered)
        a = auc(t)
        assert 0.0 <= auc(t, frac) <= a + 1e-12 <= 1.0 + 1e-12

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=40))
    def test_dominance(self, pairs):
        lo = sorted(min(a, b) for a, b in pairs)
        hi = sorted(max(a, b) + 5 for a, b in pairs)
        lo_t, hi_t = traj(lo), traj(hi)
        assert auc(hi_t) >= auc(lo_t)

    def test_errors(self):
        with pytest.raises(ValueError):
            auc(CoverageTrajectory([], 5))
        with pytest.raises(ValueError):
            auc(traj([1, 2]), 0.0)
        with pytest.raises(ValueError):
            auc(traj([1, 2, 3]), max_executions=2)


class TestUniqueTargets:
    def test_equal_sets(self):
        assert unique_targets({"a": {1, 2}, "b": {1, 2}}) == {"a": 0, "b": 0}

    def test_example(self):
        got = unique_targets({"A": {1, 2, 3}, "B": {2}, "C": {2}, "D": set()})
        assert got == {"A": 2, "B": 0, "C": 0, "D": 0}

    @given(st.dictionaries(st.sampled_from("abcd"), st.frozensets(st.integers(0, 15)), min_size=1))
    def test_set_oracle(self, sets):
        got = unique_targets(sets)
        for name, s in sets.items():
            expected = sum(1 for t in s if not any(t in o for k, o in sets.items() if k != name))
            assert got[name] == expected
        union = set().union(*sets.values())
        assert sum(got.values()) <= len(union)


class TestLengthTrajectory:
    def test_constant(self):
        assert {v for _, v in length_trajectory([4] * 300)} == {4.0}

    def test_window_one(self):
        xs = [3, 1, 4, 1, 5]
        assert [v for _, v in length_trajectory(xs, window=1)] == xs

    def test_ramp(self):
        pts = length_trajectory(list(range(1, 201)), window=100)
        assert pts[99] == (100, 50.5)
        assert pts[199] == (200, sum(range(101, 201)) / 100)

    def test_bad_window(self):
        with pytest.raises(ValueError):
            length_trajectory([1], window=0)


class TestHardTargets:
    def test_rand_covers_everything(self):
        m = load_bundled("menu-flat")
        runs = [run_random(PathGenerator(m), ModelExecutor(m), StoppingCriterion.executions(300), rng=s)
                for s in range(2)]
        assert hard_targets(m, runs) == set()

    def test_deep_chain(self):
        m = chain_model()
        runs = [run_random(PathGenerator(m, max_walk_len=6), ModelExecutor(m), StoppingCriterion.executions(40),
                           rng=s) for s in range(5)]
        hard = hard_targets(m, runs)
        assert {"enter", "tail1", "tail2", "never"} <= hard
        assert "step" not in hard

    def test_always_false(self):
        m = chain_model(depth=1)
        runs = [run_random(PathGenerator(m), ModelExecutor(m), StoppingCriterion.executions(500), rng=0)]
        assert hard_targets(m, runs) == {"never"}

    def test_accepts_sets(self):
        m = chain_model()
        assert hard_targets(m, [set(m.targets)]) == set()
        with pytest.raises(ValueError):
            hard_targets(m, [])


class TestTechniqueConfig:
    def test_args(self):
        assert TechniqueConfig("rand", W=99, Q=7).strategy_args() == {"strategy": "rand"}
        assert "q" not in TechniqueConfig("dist").strategy_args()
        si = TechniqueConfig("qgrams_si", W=12).strategy_args()
        assert si["mode"] == "sequence_plus_inputs" and si["w_size"] == 12 and si["q"] == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            TechniqueConfig("bogus")
        with pytest.raises(ValueError):
            TechniqueConfig("rand", max_executions=None, budget_secs=None)

    def test_budget_mode(self):
        rec = run_technique(load_bundled("notes-app"),
                            TechniqueConfig("qgrams_s", max_executions=None, budget_secs=0.2), seed=0)
        assert rec.stop_reason == "wall_budget"


@pytest.fixture(scope="module")
def small_campaign():
    techs = [TechniqueConfig(t, W=6, max_executions=60) for t in ("rand", "dist", "qgrams_s", "qgrams_si")]
    return run_campaign(["petclinic-like", "shop-like", "missing-model"], techs, repetitions=2, seed=3)


class TestCampaign:
    def test_single_cell(self):
        c = run_campaign(["notes-app"], [TechniqueConfig("qgrams_s", W=4, max_executions=30)], repetitions=1)
        (cell,) = c.cells
        assert len(cell.trajectory.points) == cell.exec_tests == 30
        assert cell.diversity_evals == 4 * 29
        # nothing to compare against, so every covered target is unique
        assert cell.unique_targets == len(cell.covered)

    def test_errors_are_reported(self, small_campaign):
        assert list(small_campaign.errors) == ["missing-model"]
        assert small_campaign.models() == ["petclinic-like", "shop-like"]

    def test_cell_invariants(self, small_campaign):
        for c in small_campaign.cells:
            assert 0.0 <= c.coverage_pct <= 100.0
            assert 0.0 <= c.auc_at_20 <= c.auc <= 1.0
            assert c.exec_tests == 60
            assert c.trajectory.points[-1][1] == len(c.covered)
            if c.technique == "dist":
                assert c.distance_calls == 6 * 60 * 59 // 2
            if c.technique.startswith("qgrams"):
                assert c.diversity_evals == 6 * 59

    def test_uniques_match_oracle(self, small_campaign):
        for m in small_campaign.models():
            for rep in range(2):
                group = [c for c in small_campaign.select(m) if c.rep == rep]
                sets = {c.technique: c.covered for c in group}
                assert {c.technique: c.unique_targets for c in group} == unique_targets(sets)

    def test_deterministic(self, small_campaign):
        techs = [TechniqueConfig(t, W=6, max_executions=60) for t in ("rand", "dist", "qgrams_s", "qgrams_si")]
        again = run_campaign(["petclinic-like", "shop-like"], techs, repetitions=2, seed=3)
        strip = lambda rows: [{k: v for k, v in r.items() if k not in TIMING} for r in rows]  # noqa: E731
        assert strip(c.row() for c in again.cells) == strip(c.row() for c in small_campaign.cells)

    def test_seeds_differ_per_cell(self, small_campaign):
        seeds = [c.seed for c in small_campaign.cells]
        assert len(set(seeds)) == len(seeds)

    def test_write(self, small_campaign, tmp_path):
        out = write_campaign(small_campaign, tmp_path)
        with open(out / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(small_campaign.cells)
        assert tuple(rows[0]) == SUMMARY_FIELDS
        with open(out / "uniques.csv") as fh:
            uniq = list(csv.DictReader(fh))
        assert len(uniq) == 4 and set(uniq[0]) >= {"rand", "dist", "qgrams_s", "qgrams_si"}
        traj_file = out / "trajectories" / "shop-like_qgrams_si_1.csv"
        with open(traj_file) as fh:
            lines = list(csv.reader(fh))
        assert lines[0] == ["executions", "covered", "length"] and len(lines) == 61
        assert (out / "errors.csv").exists()

    def test_rejects_zero_reps(self):
        with pytest.raises(ValueError):
            run_campaign(["notes-app"], ["rand"], repetitions=0)

    def test_model_paths(self, tmp_path):
        doc_path = tmp_path / "m.json"
        doc_path.write_text(json.dumps({
            "schema": 1, "name": "two", "nodes": ["A", "B"], "home": "A",
            "edges": [{"id": "ab", "source": "A", "dest": "B", "method": "go"},
                      {"id": "ba", "source": "B", "dest": "A", "method": "back"}]}))
        c = run_campaign([str(doc_path), str(tmp_path)], [TechniqueConfig("rand", max_executions=20)], 1, seed=4)
        assert [x.model for x in c.cells] == ["two", "two"]
        assert all(x.coverage_pct == 100.0 for x in c.cells)
