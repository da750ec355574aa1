import pytest

from config import ConfigError, PipelineConfig, Strategy, load_config, parse_config
from query_clustering import Linkage


def test_defaults():
    config = PipelineConfig()
    assert config.k == 3
    assert config.linkage is Linkage.SINGLE
    assert config.cost_model().call_latency == 50.0
    assert config.weights().exact()[0] == 1


def test_parse_flat_file():
    config = parse_config(
        "# shards\n"
        "k = 4\n"
        "linkage = average\n"
        "w7 = 2.5\n"
        "strategy = random\n"
        "endpoint.1 = http://db-1/sparql\n"
    )
    assert config.k == 4
    assert config.linkage is Linkage.AVERAGE
    assert config.w7 == 2.5
    assert config.strategy is Strategy.RANDOM
    assert config.endpoints == {1: "http://db-1/sparql"}


def test_endpoint_map_fills_from_template():
    config = parse_config("endpoint.1 = http://db-1/sparql\nendpoint_template = http://node{shard}/q\n")
    assert config.endpoint_map(3) == {0: "http://node0/q", 1: "http://db-1/sparql", 2: "http://node2/q"}


@pytest.mark.parametrize("text", [
    "shards = 4\n",
    "k = 0\n",
    "k = many\n",
    "linkage = ward\n",
    "cut_distance = 1.5\n",
    "endpoint.x = http://db/sparql\n",
])
def test_rejected_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_all_zero_weights():
    text = "".join(f"w{i} = 0\n" for i in range(1, 8))
    with pytest.raises(ConfigError, match="w1..w7"):
        parse_config(text)


def test_overrides_beat_file(tmp_path):
    path = tmp_path / "wawpart.conf"
    path.write_text("k = 4\nseed = 9\n")
    config = load_config(path, k=2, seed=None)
    assert config.k == 2
    assert config.seed == 9


def test_with_overrides_ignores_none():
    config = PipelineConfig(k=5).with_overrides(k=None, linkage="complete")
    assert config.k == 5
    assert config.linkage is Linkage.COMPLETE


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "absent.conf")
