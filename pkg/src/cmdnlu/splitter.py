"""Divide a multi-command instruction into one phrase per command.

Part-of-speech tags come from a closed word list.  Principal verbs anchor
the phrases; helper words in front of a verb (``could you``, ``please``)
stay with it, and conjunctions at a boundary are dropped.
"""

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import ValidationError

POS_TAGS = ("VERB", "AUX", "CONJ", "NOUN", "DET", "PREP", "PRON", "ADV", "ADJ", "OTHER")

# tags that may precede a principal verb inside its own clause
_LEADING = {"AUX", "ADV", "PRON"}


@dataclass(frozen=True)
class PosLexicon:
    entries: dict
    default: str = "NOUN"

    def tag(self, word):
        return self.entries.get(word, self.default)

    @classmethod
    def from_dict(cls, data):
        entries = dict(data["entries"])
        bad = {t for t in entries.values() if t not in POS_TAGS}
        if bad:
            raise ValidationError(f"unknown POS tags in lexicon: {sorted(bad)}")
        return cls(entries, data.get("default", "NOUN"))


@lru_cache(maxsize=None)
def _bundled_lexicon():
    text = resources.files("cmdnlu").joinpath("data").joinpath("lexicon.json").read_text(
        encoding="utf-8")
    return PosLexicon.from_dict(json.loads(text))


def load_lexicon(path=None):
    if path is None:
        return _bundled_lexicon()
    with open(path, encoding="utf-8") as f:
        return PosLexicon.from_dict(json.load(f))


@dataclass(frozen=True)
class PhraseSpan:
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(f"empty or negative span [{self.start}, {self.end})")


def pos_tag(tokens, lexicon=None):
    lexicon = lexicon or load_lexicon()
    return [lexicon.tag(tok) for tok in tokens]


def find_principal_verbs(tokens, pos_tags):
    """Indices of verbs that are not auxiliaries.

    A verb counts as auxiliary when it is itself tagged AUX or when an AUX
    word sits immediately before or after it.
    """
    if len(tokens) != len(pos_tags):
        raise ValidationError("tokens and POS tags are not aligned")
    out = []
    for i, tag in enumerate(pos_tags):
        if tag != "VERB":
            continue
        before = pos_tags[i - 1] if i > 0 else None
        after = pos_tags[i + 1] if i + 1 < len(pos_tags) else None
        if "AUX" in (before, after):
            continue
        out.append(i)
    return out


def split(tokens, lexicon=None):
    """Return one PhraseSpan per principal verb (a single span if none)."""
    if not tokens:
        raise ValueError("cannot split an empty token list")
    tags = pos_tag(tokens, lexicon)
    verbs = find_principal_verbs(tokens, tags)
    if len(verbs) <= 1:
        return [PhraseSpan(0, len(tokens))]

    # clause starts: walk left from each later verb over helper words
    starts = [0]
    ends = []
    for prev_verb, verb in zip(verbs, verbs[1:]):
        start = verb
        while start - 1 > prev_verb and tags[start - 1] in _LEADING:
            start -= 1
        end = start
        while end - 1 > prev_verb and tags[end - 1] == "CONJ":
            end -= 1
        ends.append(end)
        starts.append(start)
    ends.append(len(tokens))
    return [PhraseSpan(s, e) for s, e in zip(starts, ends)]


def split_phrases(tokens, lexicon=None):
    """Token lists of each phrase."""
    if not tokens:
        return []
    return [tokens[s.start:s.end] for s in split(tokens, lexicon)]
