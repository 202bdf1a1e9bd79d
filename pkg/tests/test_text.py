import numpy as np
import pytest

from hashattack.data import ImageSample, class_names
from hashattack.text import (
    Caption,
    CaptionProvider,
    HashingTextEncoder,
    MockCaptionProvider,
    MockSimilarityScorer,
    RetryingProvider,
    SimilarityScorer,
    TransportError,
    cosine,
    encode_text,
    filter_captions,
    generate_captions,
    guide_text,
    load_caption_cache,
    save_caption_cache,
)


def image(labels, id_="img0"):
    return ImageSample(id_, np.full((3, 32, 32), 0.5), labels)


class FixedScorer(SimilarityScorer):
    def __init__(self, scores):
        self.scores = dict(scores)

    def score(self, text, image):
        return self.scores[text]


def caps(*texts):
    return [Caption(t, "img0") for t in texts]


def test_mock_provider_is_deterministic_and_sized():
    p = MockCaptionProvider(8, seed=4)
    im = image([1, 0, 0, 0, 0, 0, 0, 1])
    a, b = generate_captions(p, im, 5), generate_captions(p, im, 5)
    assert len(a) == 5
    assert [c.text for c in a] == [c.text for c in b]
    assert all(c.source_image_id == "img0" for c in a)
    assert [c.text for c in generate_captions(MockCaptionProvider(8, seed=5), im, 5)] != [c.text for c in a]


def test_generate_captions_rejects_zero():
    with pytest.raises(ValueError):
        generate_captions(MockCaptionProvider(4), image([1, 0, 0, 0]), 0)


def test_filter_threshold_membership():
    s = FixedScorer({"a": 0.1, "b": 0.3, "c": 0.26})
    kept = filter_captions(caps("a", "b", "c"), s, None, 0.25)
    assert [c.text for c in kept] == ["b", "c"]
    assert [c.score for c in kept] == [0.3, 0.26]


def test_filter_keeps_all_and_fallback():
    s = FixedScorer({"a": 0.5, "b": 0.3, "x": 0.1, "y": 0.2})
    assert len(filter_captions(caps("a", "b"), s, None, 0.25)) == 2
    kept = filter_captions(caps("x", "y"), s, None, 0.25)
    assert [c.text for c in kept] == ["y"]


def test_filter_errors():
    with pytest.raises(ValueError):
        filter_captions([], FixedScorer({}), None)
    with pytest.raises(ValueError):
        filter_captions(caps("a"), FixedScorer({"a": 0}), None, 1.5)


def test_mock_scorer_threshold_separates_topics():
    im = image([0, 0, 1, 0])
    s = MockSimilarityScorer(4)
    scores = [c.score for c in filter_captions(generate_captions(MockCaptionProvider(4), im, 5), s, im, -1)]
    assert all(-1 <= v <= 1 for v in scores)
    assert max(scores) >= 0.25 > min(scores)  # off-topic caption (no mention) falls below the threshold


def test_guide_text_uses_best_and_cache():
    im = image([0, 1, 0, 0])
    cache = {}
    p, s = MockCaptionProvider(4), MockSimilarityScorer(4)
    g = guide_text(p, s, im, cache=cache)
    assert g.score == max(c.score for c in cache["img0"])

    class Boom(CaptionProvider):
        def captions(self, image, n):
            raise AssertionError("cache should have been used")

    assert guide_text(Boom(), s, im, cache=cache) == g


def test_encoder_basics():
    a = encode_text("a red square")
    assert a.shape == (1024,)
    np.testing.assert_array_equal(a, encode_text("a red square"))
    assert np.linalg.norm(a) == pytest.approx(np.sqrt(1024))
    with pytest.raises(ValueError):
        encode_text("  ")


def test_shared_class_token_correlates():
    rng = np.random.default_rng(0)
    names = class_names(8)
    enc = HashingTextEncoder()
    words = "sky tree house road car boat bird lamp door wall cup river hill fence".split()
    shared, rand = [], []
    for _ in range(100):
        c = names[rng.integers(8)]
        w = rng.choice(words, size=4)
        shared.append(cosine(enc(f"{c} near {w[0]} {w[1]}"), enc(f"{c} by {w[2]} {w[3]}")))
        r = rng.choice(words, size=8, replace=False)
        rand.append(cosine(enc(" ".join(r[:4])), enc(" ".join(r[4:]))))
    assert np.mean(shared) > np.mean(rand) + 0.2


def test_retrying_provider_bounded():
    calls, sleeps = [], []

    class Flaky(CaptionProvider):
        name = "flaky"

        def __init__(self, fail_times):
            self.fail_times = fail_times

        def captions(self, image, n):
            calls.append(1)
            if len(calls) <= self.fail_times:
                raise TransportError("down")
            return ["ok"] * n

    assert RetryingProvider(Flaky(2), retries=3, sleep=sleeps.append).captions(None, 2) == ["ok", "ok"]
    assert sleeps == [0.5, 1.0]
    calls.clear()
    with pytest.raises(TransportError):
        RetryingProvider(Flaky(10), retries=2, sleep=lambda s: None).captions(None, 1)
    assert len(calls) == 3


def test_caption_cache_round_trip(tmp_path):
    im = image([1, 0, 0, 0])
    cache = {"img0": filter_captions(generate_captions(MockCaptionProvider(4), im, 5), MockSimilarityScorer(4), im)}
    save_caption_cache(cache, tmp_path / "c.jsonl")
    back = load_caption_cache(tmp_path / "c.jsonl")
    assert back == cache
    save_caption_cache(back, tmp_path / "d.jsonl")
    assert (tmp_path / "c.jsonl").read_bytes() == (tmp_path / "d.jsonl").read_bytes()
