import logging
import os
from collections import Counter
from functools import lru_cache

import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer

from src.constants import CONTENT_DIM, KEYWORD_COUNT, PROFILE_DIM
from src.models import clamp_opinion
from src.remote_client import ProviderError, RemoteClient
from src.utils import mean_or_zero

TOKEN_PATTERN = r"(?u)\b\w+\b"
TEMPLATE_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")

STANCE_CENTERS = {"support": 2.0 / 3.0, "neutral": 0.0, "oppose": -2.0 / 3.0}
STANCE_THRESHOLD = 1.0 / 3.0

POSITIVE_WORDS = frozenset({
    "support", "agree", "good", "great", "right", "fair", "welcome", "trust", "hope", "positive",
    "love", "proud", "benefit", "progress", "justice", "yes", "helpful", "reasonable", "win", "better"
})
NEGATIVE_WORDS = frozenset({
    "oppose", "disagree", "bad", "wrong", "unfair", "reject", "distrust", "fear", "negative", "hate",
    "angry", "shame", "harm", "scandal", "lie", "no", "boycott", "outrage", "worse", "fail"
})

STANCE_PHRASES = {
    "support": ("I stand behind this", "Count me in on this one", "This deserves more backing"),
    "neutral": ("Still making up my mind", "Both sides have a point here", "Watching how this develops"),
    "oppose": ("I cannot go along with this", "This is heading the wrong way", "Not convinced at all")
}


@lru_cache(maxsize=None)
def _vectorizer(dim):
    return HashingVectorizer(n_features=dim, alternate_sign=True, norm="l2", lowercase=True,
                             token_pattern=TOKEN_PATTERN, dtype=np.float64)


def tokenize(text):
    return _vectorizer(CONTENT_DIM).build_analyzer()(text or "")


@lru_cache(maxsize=65536)
def _cached_embedding(text, dim):
    vector = _vectorizer(dim).transform([text]).toarray()[0]
    vector.setflags(write=False)
    return vector


def stub_embed(text, dim=CONTENT_DIM):
    """
    Signed feature hashing of lowercased word tokens, L2-normalised. Empty text embeds to zeros.
    """
    if not text or not text.strip():
        return np.zeros(dim)
    return _cached_embedding(text, dim)


class RarityTable:
    """
    Document frequency of tokens over a corpus; unseen tokens count as rarest.
    """

    def __init__(self, document_frequency=None):
        self.document_frequency = Counter(document_frequency or {})

    @classmethod
    def from_texts(cls, texts):
        frequency = Counter()
        for text in texts:
            frequency.update(set(tokenize(text)))
        return cls(frequency)

    def rarest(self, text, count=KEYWORD_COUNT):
        tokens = sorted(set(tokenize(text)), key=lambda token: (self.document_frequency.get(token, 0), token))
        return tokens[:count]


def stub_keywords(text, dim=CONTENT_DIM, rarity=None):
    """
    Hash-embed only the rarest tokens of the text (ties broken lexicographically).
    """
    rarity = rarity or RarityTable()
    return stub_embed(" ".join(rarity.rarest(text)), dim)


def stance_band(opinion):
    if opinion > STANCE_THRESHOLD:
        return "support"
    if opinion < -STANCE_THRESHOLD:
        return "oppose"
    return "neutral"


def stance_text(opinion, topic="this", phrase_index=0):
    band = stance_band(opinion)
    phrases = STANCE_PHRASES[band]
    return f"[stance:{band}] On {topic}: {phrases[phrase_index % len(phrases)]}."


def intended_opinion(memory_opinions, inbox_opinions, bias):
    weighted = 6.0 * mean_or_zero(memory_opinions) + 3.0 * mean_or_zero(inbox_opinions) + 1.0 * bias
    return clamp_opinion(weighted / 10.0)


def stub_generate(profile, news, memories, inbox, rng, rarity=None):
    """
    Deterministic stand-in for persona-conditioned generation: the intended
    opinion mixes remembered (0.6), freshly received (0.3) and personal (0.1)
    stances; the text carries the stance band and the lead memory's keyword.
    """
    opinion = intended_opinion([m.opinion for m in memories], [m.opinion for m in inbox],
                               getattr(profile, "bias", 0.0))
    rarity = rarity or RarityTable()
    if memories:
        keywords = rarity.rarest(memories[0].content, count=1)
    else:
        keywords = rarity.rarest(" ".join(news), count=1) if news else []
    topic = keywords[0] if keywords else "this"

    text = stance_text(opinion, topic, int(rng.integers(len(STANCE_PHRASES["neutral"]))))
    if news:
        text = f"{text} Re: {news[0]}"
    return text, opinion


def stub_score(text):
    """
    Reads the stance marker when present, otherwise averages signed valence words.
    """
    if not text:
        return 0.0
    for band, center in STANCE_CENTERS.items():
        if f"[stance:{band}]" in text:
            return clamp_opinion(center)
    tokens = tokenize(text)
    valence = [1.0 for token in tokens if token in POSITIVE_WORDS] + \
              [-1.0 for token in tokens if token in NEGATIVE_WORDS]
    return clamp_opinion(mean_or_zero(valence))


def load_template(name):
    with open(os.path.join(TEMPLATE_PATH, f"{name}.txt"), "r", encoding="utf-8") as file:
        return file.read()


def _bullets(lines):
    return "\n".join(f"- {line}" for line in lines) if lines else "- (none)"


class StubProviders:
    """
    Offline provider bundle; safe to call from parallel threads.
    """

    kind = "stub"

    def __init__(self, content_dim=CONTENT_DIM, profile_dim=PROFILE_DIM, rarity=None):
        self.content_dim = content_dim
        self.profile_dim = profile_dim
        self.rarity = rarity or RarityTable()

    def embed(self, text):
        return stub_embed(text, self.content_dim)

    def embed_profile(self, text):
        return stub_embed(text, self.profile_dim)

    def keywords(self, text):
        return stub_keywords(text, self.content_dim, self.rarity)

    def generate(self, profile, news, memories, inbox, rng):
        return stub_generate(profile, news, memories, inbox, rng, self.rarity)

    def score(self, text):
        return stub_score(text)


class RemoteProviders(StubProviders):
    """
    Generation and scoring through a chat-completion endpoint; embeddings stay local.
    With `fallback_stub`, any provider error degrades to the stub answer.
    """

    kind = "remote"

    def __init__(self, config, client=None, rarity=None, content_dim=CONTENT_DIM, profile_dim=PROFILE_DIM):
        super().__init__(content_dim, profile_dim, rarity)
        self.config = config
        self.client = client or RemoteClient(config)
        self.persona_template = load_template("persona")
        self.scorer_prompt = load_template("scorer").format(topic=config.topic)

    def persona_prompt(self, profile, news, memories, inbox):
        return self.persona_template.format(
            topic=self.config.topic,
            persona=getattr(profile, "description", "") or "(no description)",
            news=_bullets(news),
            memories=_bullets([m.content for m in memories]),
            inbox=_bullets([m.content for m in inbox])
        )

    def generate(self, profile, news, memories, inbox, rng):
        try:
            text = self.client.chat(self.persona_prompt(profile, news, memories, inbox), "Write your post now.")
            return text, None
        except ProviderError as e:
            if not self.config.fallback_stub:
                raise
            logging.warning(f"Remote generation failed, using stub: {e}")
            return super().generate(profile, news, memories, inbox, rng)

    def score(self, text):
        try:
            return self.client.score(self.scorer_prompt, text)
        except ProviderError as e:
            if not self.config.fallback_stub:
                raise
            logging.warning(f"Remote scoring failed, using stub: {e}")
            return super().score(text)


def build_providers(config, rarity=None, profile_dim=PROFILE_DIM):
    if config.kind == "remote":
        return RemoteProviders(config, rarity=rarity, profile_dim=profile_dim)
    return StubProviders(profile_dim=profile_dim, rarity=rarity)
