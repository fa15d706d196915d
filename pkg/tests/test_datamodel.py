"""Timing protocol, feature file container, index and batch assembly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anticipation.data import (
    AnticipationProtocol,
    ClassInfo,
    Dataset,
    FeatureSequence,
    FormatError,
    ProtocolError,
    Sample,
    assemble_batch,
    read_feature_file,
    write_feature_file,
    write_index,
    read_index,
)
from anticipation.data.storage import MAGIC


class TestProtocol:
    def setup_method(self):
        self.protocol = AnticipationProtocol()

    def test_published_pairs(self):
        # the two worked examples: steps 5 and 8 observe 9 and 6 steps
        assert self.protocol.observed_steps(5) == 9
        assert self.protocol.observed_steps(8) == 6

    def test_longest_observation(self):
        assert self.protocol.observed_steps(1) == 13

    @pytest.mark.parametrize("n,expected", [(4, 1.0), (8, 2.0), (1, 0.25)])
    def test_anticipation_times(self, n, expected):
        assert self.protocol.anticipation_time(n) == pytest.approx(expected)

    @pytest.mark.parametrize("n", [0, 9, -3])
    def test_out_of_range_step(self, n):
        with pytest.raises(ProtocolError):
            self.protocol.observed_steps(n)
        with pytest.raises(ProtocolError):
            self.protocol.anticipation_time(n)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12))
    def test_conservation(self, s_enc, s_ant):
        protocol = AnticipationProtocol(s_enc=s_enc, s_ant=s_ant)
        for n in protocol.horizons():
            assert protocol.observed_steps(n) + n == s_enc + s_ant

    def test_invalid_construction(self):
        with pytest.raises(ProtocolError):
            AnticipationProtocol(s_enc=0)
        with pytest.raises(ProtocolError):
            AnticipationProtocol(alpha_s=0.0)


class TestFeatureFile:
    def test_roundtrip_f32(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((7, 1024)).astype(np.float32)
        path = tmp_path / "x.vstg"
        write_feature_file(path, arr)
        again = read_feature_file(path)
        assert again.dtype == np.float32
        np.testing.assert_array_equal(arr, again)
        # writing the read-back copy reproduces identical bytes
        path2 = tmp_path / "y.vstg"
        write_feature_file(path2, again)
        assert path.read_bytes() == path2.read_bytes()

    def test_roundtrip_f64(self, tmp_path):
        rng = np.random.default_rng(1)
        arr = rng.standard_normal((5, 9))
        path = tmp_path / "x.vstg"
        write_feature_file(path, arr)
        again = read_feature_file(path)
        assert again.dtype == np.float64
        np.testing.assert_array_equal(arr, again)

    def test_empty_matrix(self, tmp_path):
        path = tmp_path / "empty.vstg"
        write_feature_file(path, np.zeros((0, 0), dtype=np.float32))
        assert path.stat().st_size == 16
        assert read_feature_file(path).shape == (0, 0)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "x.vstg"
        write_feature_file(path, np.ones((4, 4), dtype=np.float32))
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])
        with pytest.raises(FormatError, match="offset"):
            read_feature_file(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.vstg"
        write_feature_file(path, np.ones((2, 2), dtype=np.float32))
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic.*offset 0"):
            read_feature_file(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "x.vstg"
        write_feature_file(path, np.ones((2, 2), dtype=np.float32))
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version.*offset 4"):
            read_feature_file(path)

    def test_rejects_non_finite(self, tmp_path):
        with pytest.raises(FormatError, match="non-finite"):
            write_feature_file(tmp_path / "x.vstg", np.array([[np.inf, 0.0]]))

    def test_magic_is_fixed(self):
        assert MAGIC == b"VSTG"

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 33), st.integers(0, 33), st.integers(0, 2**31 - 1))
    def test_roundtrip_property(self, rows, cols, seed):
        import tempfile

        arr = (
            np.random.default_rng(seed)
            .standard_normal((rows, cols))
            .astype(np.float32)
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = f"{tmp}/prop.vstg"
            write_feature_file(path, arr)
            np.testing.assert_array_equal(arr, read_feature_file(path))


class TestIndex:
    def test_roundtrip(self, tmp_path):
        records = [
            {"segment_id": "a", "features": {"rgb": "features/a.vstg"},
             "obs_label": 1, "target_label": 2, "verb_id": 0, "noun_id": 1,
             "target_start_s": 3.5},
        ]
        path = tmp_path / "train.jsonl"
        write_index(path, records)
        assert read_index(path) == records

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"ok": 1}\nnot json\n')
        with pytest.raises(FormatError, match="bad.jsonl:2"):
            read_index(path)


def _tiny_sample(steps, d_v, label=0, target=1, segment="s0"):
    feats = FeatureSequence(
        steps=np.arange(steps * d_v, dtype=np.float32).reshape(steps, d_v),
        segment_id=segment,
        target_start_s=3.5,
    )
    return Sample(features={"rgb": feats}, obs_label=label, target_label=target)


class TestBatchAssembly:
    def test_lengths_for_every_horizon(self):
        protocol = AnticipationProtocol()
        samples = [_tiny_sample(protocol.total_steps, 3) for _ in range(4)]
        for n in protocol.horizons():
            feats, obs, tgt = assemble_batch(samples, n, protocol)
            assert feats.shape == (4, protocol.observed_steps(n), 3)
            assert feats.dtype == np.float64

    def test_keeps_earliest_steps(self):
        protocol = AnticipationProtocol()
        sample = _tiny_sample(protocol.total_steps, 2)
        stored = sample.features["rgb"].steps
        for n in protocol.horizons():
            feats, _, _ = assemble_batch([sample], n, protocol)
            keep = protocol.observed_steps(n)
            np.testing.assert_array_equal(
                feats[0], stored[:keep].astype(np.float64)
            )

    def test_empty_batch_rejected(self):
        with pytest.raises(ProtocolError):
            assemble_batch([], 1, AnticipationProtocol())


class TestDatasetLoad:
    def test_short_sequences_rejected_and_counted(self, tmp_path, caplog):
        from anticipation.data import SynthConfig, generate

        cfg = SynthConfig(
            n_classes=3, d_v=4, d_s=4,
            samples={"train": 6, "val": 3, "test": 3}, seed=5,
        )
        generate(cfg, tmp_path)
        # shorten one stored sequence below the protocol length
        victim = tmp_path / "features" / "train_00000.vstg"
        arr = read_feature_file(victim)
        write_feature_file(victim, arr[:11])
        with caplog.at_level("WARNING"):
            ds = Dataset.load(tmp_path)
        assert ds.meta["rejected_samples"] == 1
        assert len(ds.split("train")) == 5
        assert "rejected 1 samples" in caplog.text

    def test_class_info_roundtrip(self):
        info = ClassInfo.from_records(
            [
                {"id": 1, "name": "b", "verb_id": 1, "noun_id": 0},
                {"id": 0, "name": "a", "verb_id": 0, "noun_id": 0},
            ]
        )
        assert info.names == ["a", "b"]
        assert info.has_verb_noun
