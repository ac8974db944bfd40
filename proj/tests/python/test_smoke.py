import math

import numpy as np
import pytest

import stfa


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    spec = stfa.CorpusSpec(clips_per_class=2, frames=4, height=16, width=16, seed=3)
    manifest = stfa.generate_corpus(spec, out)
    return stfa.load_corpus(manifest)


def test_corpus_shapes_and_labels(corpus):
    assert len(corpus) == 4
    assert sorted(c.label for c in corpus) == [0, 0, 1, 1]
    clip = corpus[0]
    assert clip.num_frames == 4
    frame = clip.frame(0)
    assert frame.shape == (16, 16, 3)
    assert frame.min() >= 0.0 and frame.max() <= 1.0
    with pytest.raises(IndexError):
        clip.frame(4)


def test_corpus_regeneration_matches(corpus, tmp_path):
    spec = stfa.CorpusSpec(clips_per_class=2, frames=4, height=16, width=16, seed=3)
    again = stfa.load_corpus(stfa.generate_corpus(spec, tmp_path))
    for a, b in zip(corpus, again):
        assert a.id == b.id
        assert np.array_equal(a.frame(0), b.frame(0))


def test_flow_recovers_translation():
    rng = np.random.default_rng(11)
    prev = rng.random((24, 24))
    prev = (prev + np.roll(prev, 1, 0) + np.roll(prev, 1, 1)) / 3.0  # smooth a little
    nxt = np.roll(prev, 1, axis=1)  # shift right by one pixel
    u, v = stfa.horn_schunck(prev, nxt, alpha=1.0, iters=200)
    interior = u[4:-4, 4:-4]
    assert interior.mean() == pytest.approx(1.0, abs=0.35)
    assert abs(v[4:-4, 4:-4].mean()) < 0.2
    assert stfa.incoherence_score(u, v) >= 0.0


def test_flow_of_identical_frames_is_zero():
    img = np.linspace(0.0, 1.0, 16 * 16).reshape(16, 16)
    u, v = stfa.horn_schunck(img, img, iters=50)
    assert np.all(u == 0.0) and np.all(v == 0.0)
    assert stfa.incoherence_score(u, v) == 0.0


def test_clip_statistics_separate_classes(corpus):
    real = [c for c in corpus if c.label == 0]
    fake = [c for c in corpus if c.label == 1]
    real_inc = np.mean([stfa.clip_incoherence(c, iters=40) for c in real])
    fake_inc = np.mean([stfa.clip_incoherence(c, iters=40) for c in fake])
    assert fake_inc > real_inc
    assert stfa.clip_mean_abs_diff(fake[0]) > 0.0


def test_slice_roughness(corpus):
    clip = corpus[0]
    sl = stfa.extract_slice(clip, "row", 8)
    assert sl.shape == (4, 16)
    assert stfa.slice_roughness(sl) >= 0.0
    with pytest.raises(ValueError):
        stfa.extract_slice(clip, "diagonal", 0)


def test_metrics():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [1, 1, 0, 0]
    assert stfa.auc(scores, labels) == 1.0
    cm = stfa.confusion(scores, labels, threshold=0.5)
    assert cm == {"tp": 2, "fn": 0, "fp": 0, "tn": 2}
    m = stfa.metrics(scores, labels)
    assert m["accuracy"] == 1.0 and m["auc"] == 1.0
    empty_pos = stfa.metrics([0.1, 0.2], [0, 0])
    assert empty_pos["recall"] is None
    assert empty_pos["auc"] is None  # no pairs to rank
    with pytest.raises(ValueError, match="both classes"):
        stfa.auc([0.1, 0.2], [0, 0])


@pytest.fixture(scope="module")
def trained(corpus):
    model = stfa.ModelConfig(input_h=16, input_w=16, flow_iters=20, seed=5)
    train = stfa.TrainConfig(max_epochs=3, patience=3, lr=0.1, seed=9)
    return stfa.train_detector(corpus, model=model, train=train)


def test_training_runs_and_logs(trained, corpus):
    assert trained.log_lines[0].startswith("training ")
    assert trained.log_lines[-1].startswith("best epoch")
    assert trained.best_epoch >= 1
    assert math.isfinite(trained.best_val_loss)
    score = trained.detector.predict_clip(corpus[0])
    assert 0.0 < score < 1.0


def test_training_is_deterministic(trained, corpus):
    model = stfa.ModelConfig(input_h=16, input_w=16, flow_iters=20, seed=5)
    train = stfa.TrainConfig(max_epochs=3, patience=3, lr=0.1, seed=9)
    again = stfa.train_detector(corpus, model=model, train=train)
    assert again.log_lines == trained.log_lines
    assert again.detector.predict_clip(corpus[1]) == trained.detector.predict_clip(corpus[1])


def test_checkpoint_round_trip(trained, corpus, tmp_path):
    path = tmp_path / "model.ckpt"
    trained.detector.save(path)
    loaded = stfa.load_detector(path)
    assert loaded.epoch == trained.detector.epoch
    assert loaded.best_val_loss == trained.detector.best_val_loss
    for clip in corpus:
        assert loaded.predict_clip(clip) == trained.detector.predict_clip(clip)


def test_error_mapping(tmp_path, corpus):
    with pytest.raises(stfa.DataError):
        stfa.load_detector(tmp_path / "absent.ckpt")
    assert issubclass(stfa.DataError, ValueError)
    assert issubclass(stfa.NumericError, ArithmeticError)
    with pytest.raises(ValueError, match="2-d"):
        stfa.horn_schunck(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)))
