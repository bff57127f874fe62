import json

import numpy as np
import pytest

from dcrct.io import PipelineConfig, load_array
from dcrct.pipeline import make_dataset

SMALL_CFG = PipelineConfig.from_dict({
    "geometry": {"n_views": 90, "n_det": 96, "det_spacing": 6.25,
                 "n_det_virtual": 160},
    "grid": {"nx": 64, "ny": 64, "dx": 5.0, "dy": 5.0},
    "noise": {"enabled": False},
})


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    manifest = make_dataset(out, n_train=3, n_test=2, seed=7, config=SMALL_CFG)
    return out, manifest


class TestLayout:
    def test_manifest(self, dataset):
        out, manifest = dataset
        assert manifest["splits"]["train"]["count"] == 3
        assert manifest["splits"]["test"]["count"] == 2
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk == manifest

    def test_triples_exist(self, dataset):
        out, _ = dataset
        for split, n in (("train", 3), ("test", 2)):
            for idx in range(n):
                for kind in ("reference", "artifact", "wce"):
                    assert (out / split / f"{kind}_{idx:04d}.json").exists()
                    assert (out / split / f"{kind}_{idx:04d}.raw").exists()

    def test_disjoint_splits(self, dataset):
        _, manifest = dataset
        train = {e["seed"] for e in manifest["splits"]["train"]["entries"]}
        test = {e["seed"] for e in manifest["splits"]["test"]["entries"]}
        assert not train & test


class TestContents:
    def test_float32_residual_identity(self, dataset):
        out, _ = dataset
        for idx in range(3):
            _, ref = load_array(out / "train" / f"reference_{idx:04d}.json")
            _, art = load_array(out / "train" / f"artifact_{idx:04d}.json")
            _, wce = load_array(out / "train" / f"wce_{idx:04d}.json")
            assert np.array_equal(art + ref, wce)

    def test_artifact_nonzero(self, dataset):
        out, _ = dataset
        _, art = load_array(out / "train" / "artifact_0000.json")
        assert np.abs(art).max() > 1.0  # truncation artifacts are substantial

    def test_deterministic(self, dataset, tmp_path):
        out, manifest = dataset
        again = make_dataset(tmp_path / "again", n_train=3, n_test=2, seed=7,
                             config=SMALL_CFG)
        assert again == manifest
        a = (out / "train" / "wce_0002.raw").read_bytes()
        b = (tmp_path / "again" / "train" / "wce_0002.raw").read_bytes()
        assert a == b

    def test_seed_changes_data(self, dataset, tmp_path):
        _, manifest = dataset
        other = make_dataset(tmp_path / "other", n_train=1, n_test=1, seed=8,
                             config=SMALL_CFG)
        assert other["splits"]["train"]["entries"][0]["seed"] != \
            manifest["splits"]["train"]["entries"][0]["seed"]

    def test_invalid_counts(self, tmp_path):
        with pytest.raises(ValueError):
            make_dataset(tmp_path / "x", n_train=0, n_test=1, seed=0,
                         config=SMALL_CFG)
