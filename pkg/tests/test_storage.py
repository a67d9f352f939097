from pcroc.storage import ResultStore


def test_file_round_trip(tmp_path):
    store = ResultStore(tmp_path / "results")
    assert store.backend == "file"
    assert store.read("missing") == {}
    store.write("limits", {"c_wl": 0.8})
    assert store.read("limits") == {"c_wl": 0.8}
    assert not list((tmp_path / "results").glob("*.tmp"))


def test_save_run(tmp_path):
    store = ResultStore(tmp_path)
    run = store.save_run("r1", "roc", {"c_wl": 0.7, "c_sw": 0.5})
    stored = store.read("r1")
    assert stored["command"] == "roc"
    assert stored["payload"] == {"c_wl": 0.7, "c_sw": 0.5}
    assert stored["created"] == run.created
