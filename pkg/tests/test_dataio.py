import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svcrank.dataio import (
    Dataset,
    format_number,
    generate_synthetic,
    load_observations,
    load_ranking,
    load_trace,
    save_observations,
    save_ranking,
    save_trace,
    truth_path,
)
from svcrank.errors import DuplicateObservationError, InvalidParameterError, InvalidValueError, ParseError
from svcrank.ranking import ObservationSet, RankedList, correspondence_value, rank_from_observations
from svcrank.sim import random_config, run

HEADER = "consumer_id,service_id,response_time_ms\n"


def write(tmp_path, text, name="obs.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadObservations:
    def test_single_consumer(self, tmp_path):
        ds = load_observations(write(tmp_path, HEADER + "u1,s1,100\nu1,s2,50.5\n"))
        assert len(ds.consumers) == 1
        assert ds.consumers[0] == ObservationSet("u1", {"s1": 100.0, "s2": 50.5})
        assert ds.services == ("s1", "s2") and ds.ground_truth is None

    def test_header_only(self, tmp_path):
        ds = load_observations(write(tmp_path, HEADER))
        assert ds.consumers == () and ds.services == ()

    def test_negative_value(self, tmp_path):
        with pytest.raises(InvalidValueError) as info:
            load_observations(write(tmp_path, HEADER + "u1,s1,10\nu1,s2,-5\n"))
        assert info.value.line == 3

    @pytest.mark.parametrize("raw", ["0", "nan", "inf"])
    def test_non_positive_or_non_finite(self, tmp_path, raw):
        with pytest.raises(InvalidValueError):
            load_observations(write(tmp_path, HEADER + f"u1,s1,{raw}\n"))

    def test_duplicate(self, tmp_path):
        with pytest.raises(DuplicateObservationError) as info:
            load_observations(write(tmp_path, HEADER + "u1,s1,10\nu2,s1,10\nu1,s1,12\n"))
        assert info.value.line == 4

    def test_malformed_row(self, tmp_path):
        with pytest.raises(ParseError) as info:
            load_observations(write(tmp_path, HEADER + "u1,s1\n"))
        assert info.value.line == 2

    def test_not_a_number(self, tmp_path):
        with pytest.raises(ParseError) as info:
            load_observations(write(tmp_path, HEADER + "u1,s1,fast\n"))
        assert info.value.line == 2

    def test_unknown_column(self, tmp_path):
        with pytest.raises(ParseError) as info:
            load_observations(write(tmp_path, "consumer_id,service_id,response_time_ms,region\nu,s,1,eu\n"))
        assert info.value.line == 1

    def test_empty_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_observations(write(tmp_path, ""))

    def test_picks_up_ground_truth_sidecar(self, tmp_path):
        path = write(tmp_path, HEADER + "u1,a,1\nu1,b,2\n")
        truth_path(path).write_text(json.dumps({"ground_truth": ["b", "c", "a"]}))
        ds = load_observations(path)
        assert ds.ground_truth.ordering == ("b", "c", "a")
        assert ds.services == ("a", "b", "c")


positive_decimals = st.decimals(min_value="0.000001", max_value="100000", places=6).map(float)


class TestRoundTrip:
    def test_format_number(self):
        assert format_number(100.0) == "100"
        assert format_number(0.1234567) == "0.123457"
        assert format_number(2.5) == "2.5"

    @settings(max_examples=50)
    @given(st.dictionaries(st.sampled_from(["u1", "u2", "u3"]),
                           st.dictionaries(st.sampled_from(["s1", "s2", "s3", "s4"]), positive_decimals,
                                           min_size=1),
                           min_size=1))
    def test_dataset(self, tmp_path_factory, data):
        consumers = tuple(ObservationSet(c, s) for c, s in data.items())
        services = tuple(sorted({s for per in data.values() for s in per}))
        ds = Dataset(services, consumers)
        path = tmp_path_factory.mktemp("rt") / "data.csv"
        save_observations(ds, path)
        assert load_observations(path) == ds

    def test_generated_dataset(self, tmp_path):
        ds = generate_synthetic(3, 6, 4, 0.2)
        save_observations(ds, tmp_path / "g.csv")
        assert load_observations(tmp_path / "g.csv") == ds

    def test_ranking(self, tmp_path):
        r = RankedList(("A", "B"))
        save_ranking(r, {"A": 1, "B": -1}, tmp_path / "r.json")
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["ordering"] == ["A", "B"]
        assert doc["priority_values"] == {"A": 1, "B": -1}
        assert set(doc) == {"ordering", "priority_values", "generated_by"}
        loaded, pv = load_ranking(tmp_path / "r.json")
        assert loaded == r and pv == {"A": 1, "B": -1}

    def test_ranking_mismatch_writes_nothing(self, tmp_path):
        with pytest.raises(ValueError):
            save_ranking(RankedList(("A", "B")), {"A": 1}, tmp_path / "r.json")
        assert not (tmp_path / "r.json").exists()

    def test_trace(self, tmp_path):
        trace = run(random_config(8))
        save_trace(trace, tmp_path / "t.json")
        assert load_trace(tmp_path / "t.json") == trace
        doc = json.loads((tmp_path / "t.json").read_text())
        assert set(doc) == {"events", "observations", "migration_counts"}
        assert set(doc["events"][0]) == {"t", "kind", "detail"}
        assert set(doc["observations"][0]) == {"consumer", "service", "response_time_ms"}


class TestGenerateSynthetic:
    def test_noiseless_consumers_agree_with_truth(self):
        ds = generate_synthetic(1, 12, 6, 0.0)
        truth = ds.ground_truth
        reference = ObservationSet("truth", {s: float(i + 1) for i, s in enumerate(truth.ordering)})
        for obs in ds.consumers:
            assert correspondence_value(obs, reference).cv == 1.0

    def test_seed_determinism(self, tmp_path):
        save_observations(generate_synthetic(42, 8, 5, 0.3), tmp_path / "a.csv")
        save_observations(generate_synthetic(42, 8, 5, 0.3), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert truth_path(tmp_path / "a.csv").read_bytes() == truth_path(tmp_path / "b.csv").read_bytes()

    def test_different_seeds_differ(self):
        assert generate_synthetic(1, 8, 3, 0.3) != generate_synthetic(2, 8, 3, 0.3)

    def test_observation_probability(self):
        full = generate_synthetic(5, 10, 20, 0.1, observe_prob=1.0)
        assert all(len(o) == 10 for o in full.consumers)
        partial = generate_synthetic(5, 10, 200, 0.1, observe_prob=0.8)
        share = sum(len(o) for o in partial.consumers) / (10 * 200)
        assert share == pytest.approx(0.8, abs=0.03)

    @pytest.mark.parametrize("noise", [0.1, 0.3, 0.7, 0.9])
    def test_adjacent_flip_rate(self, noise):
        ds = generate_synthetic(9, 10, 400, noise, observe_prob=1.0)
        truth = ds.ground_truth.ordering
        flips = trials = 0
        for obs in ds.consumers:
            for x, y in zip(truth, truth[1:]):
                trials += 1
                flips += obs.samples[x] > obs.samples[y]
        # binomial standard error is ~0.008 at 3600 trials
        assert flips / trials == pytest.approx(noise, abs=0.04)

    def test_half_noise_is_uninformative(self):
        ds = generate_synthetic(4, 10, 300, 0.5, observe_prob=1.0)
        truth = ds.ground_truth.ordering
        flips = [obs.samples[x] > obs.samples[y] for obs in ds.consumers for x, y in zip(truth, truth[1:])]
        assert sum(flips) / len(flips) == pytest.approx(0.5, abs=0.04)

    def test_values_stay_positive(self):
        ds = generate_synthetic(2, 20, 50, 0.49)
        assert all(rt > 0 and math.isfinite(rt) for o in ds.consumers for rt in o.samples.values())

    @pytest.mark.parametrize("kwargs", [
        dict(n_services=1), dict(n_consumers=0), dict(noise=-0.1), dict(noise=1.5), dict(seed=-1),
    ])
    def test_invalid_parameters(self, kwargs):
        args = dict(seed=0, n_services=4, n_consumers=2, noise=0.0) | kwargs
        with pytest.raises(InvalidParameterError):
            generate_synthetic(**args)

    def test_ground_truth_not_trivially_sorted(self):
        # tie-breaking by id must not be able to fake recovery
        truths = {generate_synthetic(s, 6, 1, 0.0).ground_truth.ordering for s in range(5)}
        assert len(truths) > 1

    def test_own_ranking_matches_truth_when_noiseless(self):
        ds = generate_synthetic(6, 7, 1, 0.0, observe_prob=1.0)
        (obs,) = ds.consumers
        assert rank_from_observations(obs, ds.services) == ds.ground_truth
