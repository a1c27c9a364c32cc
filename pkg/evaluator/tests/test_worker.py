import pytest

from archeval.config import DEFAULT_PRIORS, WorkerConfig
from archeval.worker import RequestError, _parse_request, simulate_accuracy

from helpers import make_request, model_source


class TestSimulateAccuracy:
    def test_deterministic(self):
        config = WorkerConfig()
        source = model_source("cifar10")
        a = simulate_accuracy(source, "cifar10", 7, config)
        b = simulate_accuracy(source, "cifar10", 7, config)
        assert a == b

    def test_within_prior_band(self):
        config = WorkerConfig()
        for dataset, (mean, spread) in DEFAULT_PRIORS.items():
            for seed in range(40):
                value = simulate_accuracy(
                    model_source(dataset, tag=str(seed)), dataset, seed, config
                )
                assert mean - spread <= value <= min(1.0, mean + spread)

    def test_one_line_change_moves_the_score(self):
        config = WorkerConfig()
        base = model_source("cifar10")
        patched = base.replace(
            "        self.body = nn.Linear(3072, 10)",
            "        self.body = nn.Linear(3072, 10)\n"
            "        self.norm = nn.BatchNorm1d(10)",
        )
        assert patched != base
        assert simulate_accuracy(base, "cifar10", 7, config) != simulate_accuracy(
            patched, "cifar10", 7, config
        )

    def test_seed_moves_the_score(self):
        config = WorkerConfig()
        source = model_source("cifar10")
        assert simulate_accuracy(source, "cifar10", 1, config) != simulate_accuracy(
            source, "cifar10", 2, config
        )

    def test_config_seed_shifts_the_family(self):
        source = model_source("cifar10")
        assert simulate_accuracy(
            source, "cifar10", 7, WorkerConfig(seed=0)
        ) != simulate_accuracy(source, "cifar10", 7, WorkerConfig(seed=1))

    def test_clamped_to_one(self):
        config = WorkerConfig(priors={"easy": (0.999, 0.5)})
        values = [
            simulate_accuracy(model_source("mnist", tag=str(i)), "easy", i, config)
            for i in range(60)
        ]
        assert all(value <= 1.0 for value in values)
        assert max(values) == 1.0

    def test_clamped_to_zero(self):
        config = WorkerConfig(priors={"hard": (0.001, 0.5)})
        values = [
            simulate_accuracy(model_source("mnist", tag=str(i)), "hard", i, config)
            for i in range(60)
        ]
        assert all(value >= 0.0 for value in values)
        assert min(values) == 0.0


class TestParseRequest:
    def test_valid(self):
        import json

        data = _parse_request(json.dumps(make_request()))
        assert data["dataset"] == "cifar10"

    def test_not_json(self):
        with pytest.raises(RequestError, match="not JSON"):
            _parse_request("{truncated")

    def test_not_an_object(self):
        with pytest.raises(RequestError, match="object"):
            _parse_request("[1, 2]")

    @pytest.mark.parametrize(
        "missing", ["candidate_id", "patched_source", "dataset", "eval_seed"]
    )
    def test_missing_field(self, missing):
        import json

        request = make_request()
        del request[missing]
        with pytest.raises(RequestError, match=missing):
            _parse_request(json.dumps(request))

    def test_wrong_type(self):
        import json

        request = make_request()
        request["eval_seed"] = "seven"
        with pytest.raises(RequestError, match="eval_seed"):
            _parse_request(json.dumps(request))
