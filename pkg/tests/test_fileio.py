"""Binary format round trips and tamper detection."""

import numpy as np
import pytest

from covert_decode import fileio
from covert_decode.containers import Condition, EegRecording, EpochSet, FeatureTensor
from covert_decode.errors import FileFormatError
from covert_decode.network import build_model, classifier_specs


def sample_recording():
    rng = np.random.default_rng(0)
    return EegRecording(
        data=rng.standard_normal((3, 500)).astype(np.float32).astype(np.float64),
        sample_rate_hz=500.0,
        channel_labels=["Fz", "Cz", "Pz"],
        markers=[(10, 0), (200, 4)],
    )


def sample_epochs():
    rng = np.random.default_rng(1)
    return EpochSet(
        data=rng.standard_normal((4, 50, 3)).astype(np.float32).astype(np.float64),
        labels=np.array([0, 1, 2, 1]),
        condition=Condition.COVERT,
        sample_rate_hz=500.0,
        class_names=["a", "b", "c"],
    )


def sample_features():
    rng = np.random.default_rng(2)
    return FeatureTensor(
        data=rng.standard_normal((5, 20, 6)).astype(np.float32),
        labels=np.array([0, 1, 2, 3, 4]),
        condition=Condition.OVERT,
        class_names=[f"k{i}" for i in range(5)],
    )


class TestRecordingFormat:
    def test_round_trip(self, tmp_path):
        rec = sample_recording()
        path = fileio.write_recording(rec, tmp_path / "r.eegr")
        loaded = fileio.read_recording(path)
        np.testing.assert_array_equal(loaded.data, rec.data)
        assert loaded.sample_rate_hz == rec.sample_rate_hz
        assert loaded.channel_labels == rec.channel_labels
        assert loaded.markers == rec.markers

    def test_write_is_idempotent(self, tmp_path):
        rec = sample_recording()
        p1 = fileio.write_recording(rec, tmp_path / "a.eegr")
        p2 = fileio.write_recording(fileio.read_recording(p1), tmp_path / "b.eegr")
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.eegr"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FileFormatError, match="bad.eegr"):
            fileio.read_recording(path)

    def test_truncated(self, tmp_path):
        rec = sample_recording()
        path = fileio.write_recording(rec, tmp_path / "t.eegr")
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(FileFormatError, match="truncated"):
            fileio.read_recording(path)

    def test_unicode_labels(self, tmp_path):
        rec = sample_recording()
        rec.channel_labels = ["Fp1", "Öz", "Pθ"]
        loaded = fileio.read_recording(fileio.write_recording(rec, tmp_path / "u.eegr"))
        assert loaded.channel_labels == rec.channel_labels


class TestEpochsFormat:
    def test_round_trip(self, tmp_path):
        epochs = sample_epochs()
        loaded = fileio.read_epochs(fileio.write_epochs(epochs, tmp_path / "e.epoc"))
        np.testing.assert_array_equal(loaded.data, epochs.data)
        np.testing.assert_array_equal(loaded.labels, epochs.labels)
        assert loaded.condition == Condition.COVERT
        assert loaded.class_names == epochs.class_names
        assert loaded.sample_rate_hz == 500.0


class TestFeatureFormat:
    def test_round_trip(self, tmp_path):
        tensor = sample_features()
        loaded = fileio.read_features(fileio.write_features(tensor, tmp_path / "f.ften"))
        np.testing.assert_array_equal(loaded.data, tensor.data)
        np.testing.assert_array_equal(loaded.labels, tensor.labels)
        assert loaded.condition == Condition.OVERT
        assert loaded.n_features == 6

    def test_byte_identical_rewrites(self, tmp_path):
        tensor = sample_features()
        p1 = fileio.write_features(tensor, tmp_path / "1.ften")
        p2 = fileio.write_features(tensor, tmp_path / "2.ften")
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_names_file(self, tmp_path):
        path = tmp_path / "zz.ften"
        path.write_bytes(b"ABCD" + b"\x00" * 32)
        with pytest.raises(FileFormatError, match="zz.ften"):
            fileio.read_features(path)


class TestModelCheckpoint:
    def test_bit_exact_round_trip(self, tmp_path):
        specs = classifier_specs("bilstm", 6, hidden=(5, 4), dropout=(0.3, 0.2), n_classes=3)
        model = build_model(specs, seed=11)
        model.set_frozen(0, True)
        p1 = fileio.save_model(model, tmp_path / "m1.rmdl")
        loaded = fileio.load_model(p1)
        p2 = fileio.save_model(loaded, tmp_path / "m2.rmdl")
        assert p1.read_bytes() == p2.read_bytes()
        assert loaded.freeze_flags() == model.freeze_flags()
        assert loaded.rng_seed == model.rng_seed
        for (ka, pa), (kb, pb) in zip(model.param_blocks(), loaded.param_blocks()):
            assert ka == kb
            np.testing.assert_array_equal(pa, pb)

    def test_forward_identical_after_reload(self, tmp_path):
        specs = classifier_specs("bigru", 4, hidden=(4,), dropout=(0.2,), n_classes=2)
        model = build_model(specs, seed=12)
        loaded = fileio.load_model(fileio.save_model(model, tmp_path / "m.rmdl"))
        x = np.random.default_rng(13).standard_normal((3, 7, 4)).astype(np.float32)
        np.testing.assert_array_equal(
            model.forward(x, training=False), loaded.forward(x, training=False)
        )

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.rmdl"
        path.write_bytes(b"JUNK" + b"\x00" * 16)
        with pytest.raises(FileFormatError):
            fileio.load_model(path)


class TestJsonHelpers:
    def test_dump_is_deterministic(self, tmp_path):
        obj = {"b": 2, "a": [1.5, {"z": True, "y": None}]}
        p1 = fileio.dump_json(obj, tmp_path / "1.json")
        p2 = fileio.dump_json(obj, tmp_path / "2.json")
        assert p1.read_bytes() == p2.read_bytes()

    def test_provenance_records_hashes(self, tmp_path):
        data = tmp_path / "input.bin"
        data.write_bytes(b"hello")
        out = tmp_path / "out.bin"
        out.write_bytes(b"result")
        prov_path = fileio.write_provenance(out, "features", [data], {"seed": 1})
        prov = fileio.load_json(prov_path)
        assert prov["inputs"][0]["sha256"] == fileio.sha256_file(data)
        assert prov["command"] == "features"
