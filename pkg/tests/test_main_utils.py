import json
import numpy as np
import pytest
import yaml
from from_root import from_root

from src.exception import CustomException, ConfigError
from src.entity.artifact_entity import ColumnSpec, ResultTable
from src.utils.main_utils import (read_yaml_file, config_hash, save_object, load_object, write_result_table,
                                  read_result_table, write_trajectory_binary, read_trajectory_binary)


def write_yaml(path, content):
    path.write_text(yaml.safe_dump(content))
    return path


def test_yaml_include_is_merged_under_own_keys(tmp_path):
    write_yaml(tmp_path / "base.yaml", {"selections": {"a": {"name": "quadratic"}}, "steady": {"max_iterations": 50, "grid_oracle": True}})
    main = write_yaml(tmp_path / "main.yaml", {"include": ["base.yaml"], "steady": {"max_iterations": 80}})
    merged = read_yaml_file(str(main))
    assert "include" not in merged
    assert merged["selections"]["a"]["name"] == "quadratic"
    assert merged["steady"] == {"max_iterations": 80, "grid_oracle": True}


def test_yaml_errors_are_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_yaml_file(str(tmp_path / "missing.yaml"))
    broken = tmp_path / "broken.yaml"
    broken.write_text("selection: [quadratic\n")
    with pytest.raises(ConfigError):
        read_yaml_file(str(broken))
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        read_yaml_file(str(listing))


def test_shipped_configs_resolve_the_selection_library():
    merged = read_yaml_file(str(from_root("config", "sweep.yaml")))
    assert "mild_double_well" in merged["selections"]


def test_config_hash_tracks_content_and_seed():
    config = {"selection": "quadratic", "epsilons": [0.1, 0.05]}
    digest = config_hash(config, 1)
    assert digest == config_hash(dict(reversed(list(config.items()))), 1)
    assert digest != config_hash(config, 2)
    assert digest != config_hash({**config, "epsilons": [0.1]}, 1)
    assert len(digest) == 64


def test_dill_round_trip_of_closures(tmp_path):
    scale = 3.0
    path = tmp_path / "nested" / "object.pkl"
    save_object(str(path), {"f": lambda x: scale * x})
    assert load_object(str(path))["f"](2.0) == 6.0
    with pytest.raises(CustomException):
        load_object(str(tmp_path / "absent.pkl"))


def test_result_table_and_sidecar(tmp_path):
    table = ResultTable("steady", [ColumnSpec("eps"), ColumnSpec("residual", provenance= "coefficient residual"), ColumnSpec("status")],
                        metadata= {"selection": "quadratic"})
    table.add_row(eps= 0.1, residual= 1e-13, status= "ok")
    table.add_row(eps= 0.05, residual= float("nan"), status= "divergence")
    with pytest.raises(KeyError):
        table.add_row(rate= 1.0)

    csv_path, meta_path = write_result_table(table, str(tmp_path), "abc123", 0.5)
    frame = read_result_table(csv_path)
    assert list(frame.columns) == ["eps", "residual", "status"]
    assert frame["residual"].isna().tolist() == [False, True]
    assert list(frame["status"]) == ["ok", "divergence"]

    with open(meta_path) as f:
        metadata = json.load(f)
    assert metadata["config_hash"] == "abc123"
    assert metadata["selection"] == "quadratic"
    assert [column["name"] for column in metadata["schema"]] == ["eps", "residual", "status"]


def test_trajectory_binary(tmp_path):
    path = str(tmp_path / "run.ifsm")
    states = [np.arange(4, dtype= float) * t for t in (0.0, 0.5, 1.0)]
    write_trajectory_binary(path, [0.0, 0.5, 1.0], states, 10)
    with open(path, "rb") as f:
        assert f.read(4) == b"IFSM"
    times, read_back, stride = read_trajectory_binary(path)
    np.testing.assert_array_equal(times, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(read_back[2], states[2])
    assert stride == 10


def test_trajectory_binary_rejects_foreign_files(tmp_path):
    path = tmp_path / "other.bin"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(CustomException):
        read_trajectory_binary(str(path))
    with pytest.raises(CustomException):
        write_trajectory_binary(str(tmp_path / "ragged.ifsm"), [0.0, 1.0], [np.zeros(3), np.zeros(4)], 1)
