"""Caption generation, similarity filtering and text-to-latent encoding.

The mock components are deterministic and offline. Real captioners and
encoders plug in behind :class:`CaptionProvider` / :class:`SimilarityScorer`.
"""

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass

import numpy as np

from .data import class_names

log = logging.getLogger(__name__)

TEXT_DIM = 1024
CAPTION_PROMPT = "Write a simple five-sentence description of this image."


class TransportError(RuntimeError):
    pass


@dataclass
class Caption:
    text: str
    source_image_id: str
    score: float = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("caption text must be non-empty")


class CaptionProvider:
    """Interface: ``captions(image, n) -> list[str]``."""

    name = "abstract"

    def captions(self, image, n):
        raise NotImplementedError


class SimilarityScorer:
    """Interface: ``score(text, image) -> float`` in [-1, 1]."""

    name = "abstract"

    def score(self, text, image):
        raise NotImplementedError


# ---- text encoder ----

_TOKEN = re.compile(r"[a-z]+")


def tokenize(text):
    return _TOKEN.findall(text.lower())


class HashingTextEncoder:
    """Bag-of-tokens embedding: each token maps to a fixed pseudo-random vector.

    Token vectors are seeded from a digest of (seed, token), so equal strings
    always embed identically and strings sharing tokens are correlated.
    Output is scaled to unit per-coordinate RMS.
    """

    def __init__(self, dim=TEXT_DIM, seed=0, stopwords=("a", "an", "the", "of", "is", "in", "on", "and", "with")):
        self.dim = dim
        self.seed = seed
        self.stopwords = frozenset(stopwords)
        self._cache = {}

    def token_vector(self, token):
        v = self._cache.get(token)
        if v is None:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            v = rng.standard_normal(self.dim)
            self._cache[token] = v
        return v

    def __call__(self, text):
        tokens = [t for t in tokenize(text) if t not in self.stopwords]
        if not tokens:
            raise ValueError(f"no content tokens in {text!r}")
        v = np.zeros(self.dim)
        for t in tokens:
            v += self.token_vector(t)
        return v / np.linalg.norm(v) * np.sqrt(self.dim)


_default_encoder = HashingTextEncoder()


def encode_text(caption, encoder=None):
    text = caption.text if isinstance(caption, Caption) else caption
    if not text or not text.strip():
        raise ValueError("cannot encode empty text")
    return (encoder or _default_encoder)(text)


def cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero vector")
    return float(a @ b / (na * nb))


# ---- mock captioner and scorer ----

_ON_TOPIC = [
    "A {obj} sits on a plain gray background.",
    "The picture shows a {obj} drawn with flat blocky cells.",
    "There is a {obj} in this small image.",
    "In the middle of the noise you can see a {obj}.",
    "This simple image contains a {obj}.",
]
_OFF_TOPIC = [
    "The lighting is soft and the colors look faded.",
    "It looks like a low resolution computer graphic.",
    "Nothing else happens in this scene.",
    "The background has a slightly speckled texture.",
    "Overall it is a quiet and minimal composition.",
]


class MockCaptionProvider(CaptionProvider):
    """Five-sentence descriptions assembled from class names and filler.

    Caption ``i`` mentions every labelled object roughly ``focus[i]`` times, so
    some captions are strongly on topic and some barely are.
    """

    name = "mock"

    def __init__(self, num_classes, seed=0):
        self.names = class_names(num_classes)
        self.seed = seed

    def captions(self, image, n):
        if n < 1:
            raise ValueError("need n >= 1 captions")
        objs = [self.names[c] for c in np.flatnonzero(image.labels)]
        digest = hashlib.sha256(f"{self.seed}:{image.id}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        out = []
        for i in range(n):
            n_on = [3, 2, 1, 0, 2][i % 5]
            picks = list(rng.permutation(len(_ON_TOPIC))[:n_on])
            sentences = [_ON_TOPIC[j].format(obj=" and a ".join(objs)) for j in picks]
            filler = rng.permutation(len(_OFF_TOPIC))[: 5 - n_on]
            sentences += [_OFF_TOPIC[j] for j in filler]
            order = rng.permutation(len(sentences))
            out.append(" ".join(sentences[j] for j in order))
        return out


class RetryingProvider(CaptionProvider):
    """Wraps a flaky provider with bounded retries and exponential backoff."""

    def __init__(self, inner, retries=3, backoff=0.5, sleep=time.sleep):
        self.inner = inner
        self.retries = retries
        self.backoff = backoff
        self.sleep = sleep
        self.name = f"retry({inner.name})"

    def captions(self, image, n):
        last = None
        for attempt in range(self.retries + 1):
            try:
                caps = self.inner.captions(image, n)
            except (TransportError, ConnectionError, TimeoutError) as e:
                last = e
                log.warning("caption provider failed (attempt %d/%d): %s", attempt + 1, self.retries + 1, e)
                if attempt < self.retries:
                    self.sleep(self.backoff * 2**attempt)
                continue
            if len(caps) != n:
                raise TransportError(f"provider returned {len(caps)} captions, expected {n}")
            return caps
        raise TransportError(f"caption provider unavailable after {self.retries + 1} attempts") from last


class HTTPCaptionProvider(CaptionProvider):
    """Thin JSON-over-HTTP client for an external captioning model.

    POSTs ``{"model", "prompt", "n", "image"}`` (image as nested lists) and
    expects ``{"captions": [...]}``. The bearer token is read from the
    environment variable named by ``token_env``.
    """

    name = "http"

    def __init__(self, endpoint, model, timeout=30.0, token_env="CAPTION_API_TOKEN", prompt=CAPTION_PROMPT):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.token_env = token_env
        self.prompt = prompt

    def captions(self, image, n):
        import httpx

        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {"model": self.model, "prompt": self.prompt, "n": n, "image": image.pixels.tolist()}
        try:
            r = httpx.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            r.raise_for_status()
        except httpx.HTTPError as e:
            raise TransportError(str(e)) from e
        return list(r.json()["captions"])


class MockSimilarityScorer(SimilarityScorer):
    """Cosine between the caption embedding and an embedding of the image's class names."""

    name = "mock"

    def __init__(self, num_classes, encoder=None):
        self.names = class_names(num_classes)
        self.encoder = encoder or _default_encoder

    def image_embedding(self, image):
        return self.encoder(" ".join(self.names[c] for c in np.flatnonzero(image.labels)))

    def score(self, text, image):
        return cosine(self.encoder(text), self.image_embedding(image))


# ---- operations ----

def generate_captions(provider, image, n=5):
    if n < 1:
        raise ValueError("need n >= 1 captions")
    texts = provider.captions(image, n)
    if len(texts) != n:
        raise TransportError(f"provider returned {len(texts)} captions, expected {n}")
    return [Caption(t, image.id) for t in texts]


def filter_captions(captions, scorer, image, threshold=0.25):
    """Keep captions scoring at least ``threshold``.

    If none pass, the single best-scoring caption is kept so downstream
    steps always have a guide text.
    """
    if not captions:
        raise ValueError("no captions to filter")
    if not -1 <= threshold <= 1:
        raise ValueError("threshold must lie in [-1, 1]")
    scored = [Caption(c.text, c.source_image_id, scorer.score(c.text, image)) for c in captions]
    kept = [c for c in scored if c.score >= threshold]
    if not kept:
        kept = [max(scored, key=lambda c: c.score)]
    return kept


def best_caption(captions):
    return max(captions, key=lambda c: c.score)


def guide_text(provider, scorer, image, n=5, threshold=0.25, cache=None):
    """Caption an image, filter, and return the best surviving caption."""
    if cache is not None and image.id in cache:
        caps = cache[image.id]
    else:
        caps = filter_captions(generate_captions(provider, image, n), scorer, image, threshold)
        if cache is not None:
            cache[image.id] = caps
    return best_caption(caps)


# ---- caption cache (JSON lines) ----

def save_caption_cache(cache, path):
    with open(path, "w") as f:
        for image_id, caps in cache.items():
            row = {"image_id": image_id, "captions": [{"text": c.text, "score": c.score} for c in caps]}
            f.write(json.dumps(row) + "\n")


def load_caption_cache(path):
    cache = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            row = json.loads(line)
            cache[row["image_id"]] = [Caption(c["text"], row["image_id"], c["score"]) for c in row["captions"]]
    return cache
