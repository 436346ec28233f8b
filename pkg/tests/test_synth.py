import numpy as np
import pytest

from batchuni.audio_features import FeatureConfig, extract, frame_count
from batchuni.synth import (
    AnnulusConfig,
    EmptyAnomalyBatch,
    anr_gain,
    build_audio_minibatch,
    gen_annulus,
    mix_region_frames,
    read_manifest,
    rms,
    segment,
    write_manifest,
)

SR = 16000


class TestAnnulus:
    def test_class_ranges(self):
        cfg = AnnulusConfig(n_samples=5000, seed=3)
        rn = np.linalg.norm(gen_annulus(cfg, "normal"), axis=1)
        ra = np.linalg.norm(gen_annulus(cfg, "anomaly"), axis=1)
        assert np.all(rn <= 2.0)
        assert np.all((ra > 2.0) & (ra <= 3.0))

    def test_radius_uniform(self):
        x = gen_annulus(AnnulusConfig(n_samples=10_000, seed=1), "normal")
        frac = np.mean(np.linalg.norm(x, axis=1) <= 1.0)
        assert abs(frac - 0.5) <= 0.02

    def test_mean_near_origin(self):
        x = gen_annulus(AnnulusConfig(n_samples=10_000, seed=2), "normal")
        assert np.all(np.abs(x.mean(axis=0)) < 0.05)

    def test_deterministic(self):
        cfg = AnnulusConfig(n_samples=100, seed=9)
        assert np.array_equal(gen_annulus(cfg), gen_annulus(cfg))
        assert not np.array_equal(gen_annulus(cfg), gen_annulus(AnnulusConfig(100, seed=10)))

    def test_density_inverse_radius(self):
        # histogram of r*p(r): density per unit area times 2 pi r is flat in r
        x = gen_annulus(AnnulusConfig(n_samples=200_000, seed=0), "normal")
        r = np.linalg.norm(x, axis=1)
        counts, edges = np.histogram(r, bins=8, range=(0, 2))
        area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
        centre = 0.5 * (edges[1:] + edges[:-1])
        dens = counts / len(r) / area
        np.testing.assert_allclose(dens * centre, 1 / (4 * np.pi), rtol=0.05)

    def test_bad_class(self):
        with pytest.raises(ValueError):
            gen_annulus(AnnulusConfig(10), "other")


class TestAnrGain:
    def test_equal_rms(self):
        a = np.sin(np.arange(1000) * 0.1)
        assert anr_gain(a, a, 0.0) == pytest.approx(1.0)
        assert anr_gain(a, a, -20.0) == pytest.approx(0.1)

    def test_formula(self):
        n = np.full(100, 0.2)
        e = np.full(100, 0.1)
        assert anr_gain(n, e, -10.0) == pytest.approx(2 * 10**-0.5, rel=1e-12)
        assert anr_gain(n, e, -10.0) == pytest.approx(0.6325, abs=1e-4)

    def test_achieves_ratio(self):
        rng = np.random.default_rng(0)
        n, e = rng.normal(size=4000), 3 * rng.normal(size=4000)
        g = anr_gain(n, e, -15.0)
        assert 20 * np.log10(rms(g * e) / rms(n)) == pytest.approx(-15.0)

    def test_monotone(self):
        rng = np.random.default_rng(1)
        n, e = rng.normal(size=500), rng.normal(size=500)
        gains = [anr_gain(n, e, db) for db in np.linspace(-30, 10, 41)]
        assert all(a < b for a, b in zip(gains, gains[1:]))

    def test_silent(self):
        with pytest.raises(ValueError):
            anr_gain(np.zeros(10), np.ones(10), 0.0)


def test_segment_drops_tail():
    segs = segment(np.arange(10 * SR), 3 * SR)
    assert len(segs) == 3 and all(len(s) == 3 * SR for s in segs)


def test_manifest_roundtrip(tmp_path):
    write_manifest(tmp_path / "m.txt", [("normal", "a.wav"), ("else", "/abs/b.wav")])
    m = read_manifest(tmp_path / "m.txt")
    assert m["normal"] == [tmp_path / "a.wav"]
    assert str(m["else"][0]) == "/abs/b.wav"
    (tmp_path / "bad.txt").write_text("weird a.wav\n")
    with pytest.raises(ValueError):
        read_manifest(tmp_path / "bad.txt")


@pytest.fixture(scope="module")
def corpus():
    rng = np.random.default_rng(0)
    t = np.arange(3 * SR) / SR
    normal = [0.3 * np.sin(2 * np.pi * (150 + 10 * k) * t) + 0.01 * rng.normal(size=len(t)) for k in range(4)]
    other = [rng.normal(size=5 * SR) * 0.1]
    return normal, other


FCFG = FeatureConfig(mel_bands=8, context=2)


def test_minibatch_partition_and_count(corpus):
    normal, other = corpus
    pair = build_audio_minibatch(normal, other, FCFG, seed=4)
    n_total = frame_count(30 * SR, FCFG) - 2 * FCFG.context
    assert len(pair.normal) + len(pair.anomaly) == n_total
    # independent oracle: mark mixed samples, test every frame's span
    marked = np.zeros(30 * SR, dtype=bool)
    marked[pair.meta["mix_start"] : pair.meta["mix_stop"]] = True
    c, hop = FCFG.context, FCFG.hop
    expected = sum(
        marked[(t - c) * hop : (t + c) * hop + FCFG.stft_len].any()
        for t in range(c, c + n_total)
    )
    assert len(pair.anomaly) == expected
    nominal = 5 * SR / hop
    assert abs(len(pair.anomaly) - nominal) <= 2 * c + 1 + FCFG.stft_len / hop


def test_minibatch_rows_match_features(corpus):
    normal, other = corpus
    pair = build_audio_minibatch(normal, other, FCFG, seed=5)
    base = np.concatenate([normal[k] for k in pair.meta["normal_picks"]])
    start, stop = pair.meta["mix_start"], pair.meta["mix_stop"]
    mixed = base.copy()
    mixed[start:stop] += pair.meta["gain"] * other[0]
    seq = extract(mixed, FCFG)
    mask = mix_region_frames(seq, FCFG.context, start, stop)
    np.testing.assert_allclose(pair.anomaly, seq.frames[mask])
    np.testing.assert_allclose(pair.normal, seq.frames[~mask])


def test_minibatch_deterministic(corpus):
    normal, other = corpus
    a = build_audio_minibatch(normal, other, FCFG, seed=7)
    b = build_audio_minibatch(normal, other, FCFG, seed=7)
    assert np.array_equal(a.normal, b.normal) and np.array_equal(a.anomaly, b.anomaly)
    assert a.meta == b.meta


def test_minibatch_anr_in_range(corpus):
    normal, other = corpus
    for s in range(5):
        meta = build_audio_minibatch(normal, other, FCFG, (-30.0, 10.0), seed=s).meta
        assert -30.0 <= meta["anr_db"] <= 10.0


def test_zero_gain_rejected(corpus):
    normal, other = corpus
    with pytest.raises(EmptyAnomalyBatch):
        build_audio_minibatch(normal, other, FCFG, seed=1, gain_override=0.0)


def test_minibatch_errors(corpus):
    normal, other = corpus
    with pytest.raises(ValueError):
        build_audio_minibatch([], other, FCFG)
    with pytest.raises(ValueError, match="longer"):
        build_audio_minibatch(normal, [np.ones(31 * SR)], FCFG)
