import json

import pytest

from sparse_deloc.manifest import RunManifest, atomic_write_text, read_config_file, write_manifest


def test_config_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# header\n\nN = 100   # trailing\nkappa-test=0.2\nwindows = 0:0.3,0.3:1.7\n")
    assert read_config_file(p) == {"N": "100", "kappa_test": "0.2", "windows": "0:0.3,0.3:1.7"}
    p.write_text("just words\n")
    with pytest.raises(ValueError):
        read_config_file(p)


def test_manifest_round_trip(tmp_path):
    m = RunManifest(command="sample", config={"N": 10, "b": 1.5}, seed=3, started="t0", finished="t1",
                    output_paths=["edges.txt"])
    p = tmp_path / "manifest.json"
    write_manifest(p, m)
    assert RunManifest.load(p) == m
    assert list(json.loads(p.read_text())) == sorted(json.loads(p.read_text()))


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "x.txt"
    atomic_write_text(p, "a")
    atomic_write_text(p, "b")
    assert p.read_text() == "b"
    assert [q.name for q in tmp_path.iterdir()] == ["x.txt"]
