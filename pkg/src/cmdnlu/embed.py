"""Vocabularies and word vectors: one-hot, skip-gram (negative sampling), GloVe."""

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .net import AdagradState, AdamState, adagrad_update, adam_update

UNK = "<unk>"
BACKENDS = ("onehot", "skipgram", "glove")


@dataclass
class Vocabulary:
    words: list
    counts: dict
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if not self.words or self.words[-1] != UNK:
            self.words = [w for w in self.words if w != UNK] + [UNK]
        self.index = {w: i for i, w in enumerate(self.words)}

    @property
    def unk_id(self):
        return len(self.words) - 1

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index and word != UNK

    def ids(self, tokens):
        return [self.index.get(t, self.unk_id) for t in tokens]

    def fingerprint(self):
        return hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()[:16]


def _sentences(corpus):
    if corpus and isinstance(corpus[0], str):
        return [list(corpus)]
    return [list(s) for s in corpus]


def build_vocab(tokens, max_size):
    """Keep the ``max_size`` most frequent tokens (ties alphabetical) plus UNK.

    ``tokens`` may be a flat token stream or a list of sentences.
    """
    if max_size < 1:
        raise ValueError("max_size must be at least 1")
    counter = Counter(t for sent in _sentences(list(tokens)) for t in sent)
    counter.pop(UNK, None)
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size]
    return Vocabulary([w for w, _ in ranked], dict(ranked))


def one_hot(word_id, size):
    if not 0 <= word_id < size:
        raise ValueError(f"word id {word_id} out of range for size {size}")
    v = np.zeros(size)
    v[word_id] = 1.0
    return v


def subsample_keep_prob(freq, t):
    """Probability of keeping a word of relative frequency ``freq``."""
    return min(1.0, math.sqrt(t / freq))


@dataclass
class EmbeddingMatrix:
    backend: str
    vectors: np.ndarray
    vocab: Vocabulary
    loss_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.vectors.shape[0] != len(self.vocab):
            raise ValidationError("one vector per vocabulary word required")
        if not np.all(np.isfinite(self.vectors)):
            raise ValidationError("embedding has non-finite entries")

    @property
    def dim(self):
        return self.vectors.shape[1]

    def vector(self, word):
        return self.vectors[self.vocab.index.get(word, self.vocab.unk_id)]


def onehot_embedding(vocab):
    return EmbeddingMatrix("onehot", np.eye(len(vocab)), vocab)


def embed_sentence(tokens, embedding):
    """``dim x T`` matrix of word vectors; unknown words map to the UNK row."""
    ids = embedding.vocab.ids(tokens)
    return embedding.vectors[ids].T.copy() if ids else np.zeros((embedding.dim, 0))


def cosine(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))


def _check_corpus(sentences, vocab):
    seen = {t for s in sentences for t in s}
    missing = [w for w in vocab.words[:-1] if w not in seen]
    if missing:
        raise ValidationError(
            f"vocabulary words absent from corpus (e.g. {missing[:3]}); "
            "build the vocabulary from this corpus")


# -- skip-gram --------------------------------------------------------------

@dataclass(frozen=True)
class SkipgramConfig:
    dim: int = 50
    k: int = 15
    subsample_t: float = 1e-5
    window: int = 5
    lr: float = 0.01
    epochs: int = 5
    seed: int = 0
    batch_size: int = 64

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be at least 1")
        if self.k < 1:
            raise ValidationError("k (negative samples) must be at least 1")
        if not 0 < self.subsample_t < 1:
            raise ValidationError("subsample_t must lie in (0, 1)")
        if self.window < 3 or self.window % 2 == 0:
            raise ValidationError("window must be an odd size of at least 3")


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def train_skipgram(corpus, vocab, config):
    """Skip-gram with negative sampling trained by Adam.

    Each (center, context) pair contributes one positive and ``k`` negative
    logistic terms; negatives are drawn from the unigram distribution raised
    to the 3/4 power.  Pairs are processed in shuffled mini-batches.
    """
    sentences = _sentences(corpus)
    if not any(sentences):
        raise ValidationError("empty corpus")
    _check_corpus(sentences, vocab)
    rng = np.random.default_rng(config.seed)
    V, dim = len(vocab), config.dim
    ids = [np.array(vocab.ids(s), dtype=np.int64) for s in sentences if s]
    counts = np.bincount(np.concatenate(ids), minlength=V).astype(np.float64)
    freq = counts / counts.sum()
    keep = np.array([subsample_keep_prob(f, config.subsample_t) if f > 0 else 0.0
                     for f in freq])
    noise = counts ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    params = {
        "in": rng.uniform(-0.5 / dim, 0.5 / dim, size=(V, dim)),
        "out": np.zeros((V, dim)),
    }
    state = AdamState(lr=config.lr)
    half = config.window // 2
    history = []
    for _ in range(config.epochs):
        centers, contexts = [], []
        for sent in ids:
            sent = sent[rng.random(len(sent)) < keep[sent]]
            for off in range(1, half + 1):
                if len(sent) > off:
                    centers += [sent[:-off], sent[off:]]
                    contexts += [sent[off:], sent[:-off]]
        if not centers:
            history.append(float("nan"))
            continue
        centers = np.concatenate(centers)
        contexts = np.concatenate(contexts)
        order = rng.permutation(len(centers))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            c, o = centers[batch], contexts[batch]
            neg = np.searchsorted(noise_cdf, rng.random((len(batch), config.k)))
            neg = np.minimum(neg, V - 1)
            targets = np.concatenate([o[:, None], neg], axis=1)          # (B, 1+k)
            labels = np.zeros(targets.shape)
            labels[:, 0] = 1.0
            w = params["in"][c]                                           # (B, d)
            u = params["out"][targets]                                    # (B, 1+k, d)
            s = np.einsum("bd,bkd->bk", w, u)
            sign = 2.0 * labels - 1.0
            total -= _log_sigmoid(sign * s).sum()
            # d/ds of -log sigmoid(sign*s) = sigmoid(s) - label
            ds = (1.0 / (1.0 + np.exp(-s)) - labels) / len(batch)
            g_in = np.zeros_like(params["in"])
            g_out = np.zeros_like(params["out"])
            np.add.at(g_in, c, np.einsum("bk,bkd->bd", ds, u))
            np.add.at(g_out, targets.ravel(),
                      (ds[:, :, None] * w[:, None, :]).reshape(-1, dim))
            adam_update(params, {"in": g_in, "out": g_out}, state)
        history.append(total / len(order))
    vectors = params["in"].copy()
    if counts[vocab.unk_id] == 0:
        vectors[vocab.unk_id] = 0.0
    return EmbeddingMatrix("skipgram", vectors, vocab, history)


# -- GloVe ------------------------------------------------------------------

class CoocMatrix:
    """Sparse word-context co-occurrence weights keyed by id pairs."""

    def __init__(self, size, entries=None):
        self.size = size
        self.entries = dict(entries or {})
        if any(v <= 0 for v in self.entries.values()):
            raise ValidationError("co-occurrence entries must be positive")

    def __getitem__(self, key):
        return self.entries.get(key, 0.0)

    def __len__(self):
        return len(self.entries)

    def arrays(self):
        keys = sorted(self.entries)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        vals = np.array([self.entries[k] for k in keys], dtype=np.float64)
        return rows, cols, vals

    def merge(self, other):
        out = CoocMatrix(self.size, self.entries)
        for key, val in other.entries.items():
            out.entries[key] = out.entries.get(key, 0.0) + val
        return out


def build_cooc(corpus, vocab, window=10):
    """Symmetric co-occurrence counts weighted by 1/distance."""
    counts = {}
    for sent in _sentences(corpus):
        ids = vocab.ids(sent)
        for i, wi in enumerate(ids):
            for d in range(1, window + 1):
                if i + d >= len(ids):
                    break
                wj = ids[i + d]
                counts[(wi, wj)] = counts.get((wi, wj), 0.0) + 1.0 / d
                counts[(wj, wi)] = counts.get((wj, wi), 0.0) + 1.0 / d
    return CoocMatrix(len(vocab), counts)


def glove_weight(x, x_max=100.0, alpha=0.75):
    return (x / x_max) ** alpha if x < x_max else 1.0


@dataclass(frozen=True)
class GloveConfig:
    dim: int = 50
    window: int = 10
    x_max: float = 100.0
    alpha: float = 0.75
    lr: float = 0.05
    epochs: int = 25
    seed: int = 0
    batch_size: int = 64

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be at least 1")
        if self.x_max <= 0:
            raise ValidationError("x_max must be positive")
        if not 0 < self.alpha <= 1:
            raise ValidationError("alpha must lie in (0, 1]")


def glove_loss(params, rows, cols, weights, logx):
    pred = (np.einsum("nd,nd->n", params["w"][rows], params["wc"][cols])
            + params["b"][rows] + params["bc"][cols])
    return float((weights * (pred - logx) ** 2).sum())


def _glove_params(size, dim, rng):
    return {
        "w": rng.uniform(-0.5 / dim, 0.5 / dim, size=(size, dim)),
        "wc": rng.uniform(-0.5 / dim, 0.5 / dim, size=(size, dim)),
        "b": np.zeros(size),
        "bc": np.zeros(size),
    }


def fit_glove(cooc, config):
    """Train GloVe parameters by AdaGrad; returns ``(params, loss_history)``."""
    if len(cooc) == 0:
        raise ValidationError("co-occurrence matrix is empty")
    if any(v <= 0 for v in cooc.entries.values()):
        raise ValidationError("co-occurrence entries must be positive")
    rng = np.random.default_rng(config.seed)
    rows, cols, vals = cooc.arrays()
    logx = np.log(vals)
    weights = np.array([glove_weight(x, config.x_max, config.alpha) for x in vals])
    params = _glove_params(cooc.size, config.dim, rng)
    state = AdagradState(lr=config.lr)
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(len(vals))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            r, c = rows[batch], cols[batch]
            wr, wc = params["w"][r], params["wc"][c]
            diff = (np.einsum("nd,nd->n", wr, wc) + params["b"][r] + params["bc"][c]
                    - logx[batch])
            coef = 2.0 * weights[batch] * diff
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            np.add.at(grads["w"], r, coef[:, None] * wc)
            np.add.at(grads["wc"], c, coef[:, None] * wr)
            np.add.at(grads["b"], r, coef)
            np.add.at(grads["bc"], c, coef)
            adagrad_update(params, grads, state)
        history.append(glove_loss(params, rows, cols, weights, logx))
    return params, history


def train_glove(cooc, config, vocab):
    """GloVe vectors (word + context vectors summed) for ``vocab``."""
    if cooc.size != len(vocab):
        raise ValidationError("co-occurrence matrix size does not match vocabulary")
    params, history = fit_glove(cooc, config)
    vectors = params["w"] + params["wc"]
    rows, _, _ = cooc.arrays()
    if vocab.unk_id not in set(rows.tolist()):
        vectors[vocab.unk_id] = 0.0
    return EmbeddingMatrix("glove", vectors, vocab, history)


# -- file format ------------------------------------------------------------

def write_embeddings(embedding, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(embedding.vocab)} {embedding.dim}\n")
        for word, row in zip(embedding.vocab.words, embedding.vectors):
            f.write(word + " " + " ".join(repr(float(x)) for x in row) + "\n")


def read_embeddings(path, backend="glove"):
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        try:
            n, dim = int(header[0]), int(header[1])
        except (IndexError, ValueError):
            raise ParseError("header must be '<V> <dim>'", 1) from None
        words, rows = [], []
        for lineno, line in enumerate(f, 2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ParseError(f"expected {dim} values, got {len(parts) - 1}", lineno)
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise ParseError("non-numeric vector entry", lineno) from None
            words.append(parts[0])
    if len(words) != n:
        raise ParseError(f"header says {n} words but file has {len(words)}")
    vocab = Vocabulary(words, {})
    if vocab.words != words:
        raise ParseError(f"the last word must be {UNK!r}")
    vectors = np.array(rows, dtype=np.float64).reshape(n, dim)
    return EmbeddingMatrix(backend, vectors, vocab)
