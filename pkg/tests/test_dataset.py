import numpy as np
import pytest
import torch

from latentmusic.audio import read_wav
from latentmusic.data import (
    SectionPlan,
    batch_loader,
    crop_batch,
    generate_corpus,
    load_manifest,
    synthesize_track,
    window_batch,
)
from latentmusic.dsp import log_mel_frames
from latentmusic.errors import DataError


def plan_for(labels, seconds_per_section=1.0, **kw):
    seeds = {lab: 1000 + ord(lab) for lab in set(labels)}
    return SectionPlan(
        labels=list(labels),
        durations=[seconds_per_section] * len(labels),
        motif_seeds=seeds,
        instruments=kw.pop("instruments", ["synth", "drums"]),
        **kw,
    )


def section_feature(wave, start_s, dur_s):
    sr = wave.sample_rate
    seg = torch.from_numpy(wave.data[:, int(start_s * sr) : int((start_s + dur_s) * sr)]).mean(0)
    mel = log_mel_frames(seg[None, :], sr, n_fft=256, hop=128, n_mels=24)[0]
    return mel.mean(dim=-1)


def cosine(a, b):
    return float(torch.dot(a, b) / (a.norm() * b.norm()))


class TestSynthesizeTrack:
    def test_repeated_sections_nearly_identical(self):
        plan = plan_for("AA", seconds_per_section=1.5)
        w = synthesize_track(plan, 8000, seed=3)
        f1 = section_feature(w, 0.0, 1.5)
        f2 = section_feature(w, 1.5, 1.5)
        assert cosine(f1, f2) > 0.95

    def test_distinct_sections_less_similar(self):
        plan_ab = plan_for("AB", seconds_per_section=1.5)
        w = synthesize_track(plan_ab, 8000, seed=3)
        fa = section_feature(w, 0.0, 1.5)
        fb = section_feature(w, 1.5, 1.5)
        plan_aa = plan_for("AA", seconds_per_section=1.5)
        w2 = synthesize_track(plan_aa, 8000, seed=3)
        fa1 = section_feature(w2, 0.0, 1.5)
        fa2 = section_feature(w2, 1.5, 1.5)
        assert cosine(fa, fb) < cosine(fa1, fa2)

    def test_bit_deterministic(self):
        plan = plan_for("ABA")
        w1 = synthesize_track(plan, 8000, seed=11)
        w2 = synthesize_track(plan, 8000, seed=11)
        assert np.array_equal(w1.data, w2.data)

    def test_zero_duration_rejected(self):
        with pytest.raises(DataError):
            SectionPlan(labels=["A"], durations=[0.0], motif_seeds={"A": 1})

    def test_stereo_output(self):
        w = synthesize_track(plan_for("AB"), 8000, seed=0)
        assert w.channels == 2
        assert not np.array_equal(w.data[0], w.data[1])  # seeded panning


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    return generate_corpus(
        n_tracks=30, length_bounds=(3.0, 6.0), out_dir=out, seed=7, duplicate_fraction=0.1
    )


class TestGenerateCorpus:
    def test_duplicate_count_exact(self, corpus):
        assert len(corpus.duplicate_pairs()) == 3  # floor(30 * 0.1)

    def test_duplicates_are_bit_exact(self, corpus):
        by_id = {r.track_id: r for r in corpus.records}
        for orig_id, dup_id in corpus.duplicate_pairs():
            a = read_wav(corpus.resolve(by_id[orig_id]))
            b = read_wav(corpus.resolve(by_id[dup_id]))
            assert np.array_equal(a.data, b.data)

    def test_rerun_same_seed_identical_manifest(self, tmp_path):
        m1 = generate_corpus(8, (3.0, 4.0), tmp_path / "a", seed=5)
        m2 = generate_corpus(8, (3.0, 4.0), tmp_path / "b", seed=5)
        for r1, r2 in zip(m1.records, m2.records):
            assert r1.to_dict() == r2.to_dict()
            assert np.array_equal(read_wav(m1.resolve(r1)).data, read_wav(m2.resolve(r2)).data)

    def test_lengths_within_bounds(self, corpus):
        for r in corpus.records:
            assert 3.0 - 0.1 <= r.seconds <= 6.0 + 0.1

    def test_splits_disjoint_and_present(self, corpus):
        ids = {}
        for r in corpus.records:
            assert r.track_id not in ids
            ids[r.track_id] = r.split
        assert {"train", "val", "test"} <= set(ids.values())

    def test_manifest_round_trip(self, corpus):
        loaded = load_manifest(corpus.root / "manifest.jsonl")
        assert loaded.sample_rate == corpus.sample_rate
        assert [r.to_dict() for r in loaded.records] == [r.to_dict() for r in corpus.records]

    def test_audio_round_trips_within_quantization(self, corpus):
        rec = corpus.records[0]
        w = read_wav(corpus.resolve(rec))
        from latentmusic.audio import write_wav

        out = corpus.root / "rt.wav"
        write_wav(out, w, fmt="pcm16")
        w2 = read_wav(out)
        assert np.abs(w.data - w2.data).max() <= 1.0 / 32767.0 + 1e-7


class TestBatchLoader:
    def test_short_tracks_padded_with_true_length(self, corpus):
        b = window_batch(corpus, "train", window_seconds=8.0, batch_size=4, seed=0, step=0)
        assert b.waveforms.shape == (4, 2, 8 * corpus.sample_rate)
        for sec, w in zip(b.seconds_total, b.waveforms):
            assert sec < 8.0
            content = int(sec * corpus.sample_rate)
            tail = w[:, content + corpus.sample_rate // 10 :]
            assert float(tail.abs().max()) == 0.0  # silence fill

    def test_long_tracks_excluded(self, corpus):
        with pytest.raises(DataError):
            window_batch(corpus, "train", window_seconds=1.0, batch_size=2, seed=0, step=0)

    def test_uniform_batch_shapes(self, corpus):
        for step in range(3):
            b = crop_batch(corpus, "train", crop_seconds=1.0, batch_size=3, seed=1, step=step)
            assert b.waveforms.shape == (3, 2, corpus.sample_rate)

    def test_deterministic_stream(self, corpus):
        s1 = list(batch_loader(corpus, "train", 8.0, 2, seed=3, n_batches=4))
        s2 = list(batch_loader(corpus, "train", 8.0, 2, seed=3, n_batches=4))
        for b1, b2 in zip(s1, s2):
            assert torch.equal(b1.waveforms, b2.waveforms)
            assert b1.track_ids == b2.track_ids

    def test_empty_split_rejected(self, corpus):
        with pytest.raises(DataError):
            window_batch(corpus, "nope", 8.0, 2, seed=0, step=0)

    def test_crop_includes_silence_tails_sometimes(self, corpus):
        saw_silence_tail = False
        for step in range(20):
            b = crop_batch(corpus, "train", 1.0, 4, seed=2, step=step, silence_tail_prob=0.5)
            for w in b.waveforms:
                last = w[:, -corpus.sample_rate // 10 :]
                if float(last.abs().max()) == 0.0:
                    saw_silence_tail = True
        assert saw_silence_tail
