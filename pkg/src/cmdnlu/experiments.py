"""Train/evaluate harness: architecture specs, generated splits, the grid."""

import csv
import random
import re
from dataclasses import dataclass, field

import numpy as np

from .action import predict_action, train_action
from .corpus import OTHER, Dataset, generate_command, load_schema
from .embed import (GloveConfig, SkipgramConfig, build_cooc, build_vocab, onehot_embedding,
                    train_glove, train_skipgram)
from .errors import CmdNluError, ConfigurationError, ValidationError
from .net import SequenceModelConfig
from .pipeline import Counts, Pipeline, evaluate
from .slots import decode_frames, train_slot_model

GRID_HEADER = ("architecture", "embedding", "approach", "task", "accuracy", "tp", "tn", "fp", "fn")
TASKS = ("action", "slots", "frame")
# desk-scale corpora are tiny, so the usual 1e-5 subsampling threshold would
# discard nearly every token
DESK_SUBSAMPLE_T = 1e-3

_ARCH = re.compile(r"^(D?)(B?)(RNN|LSTM)\s*(\d+)\s*[x×]\s*(\d+)$", re.IGNORECASE)


@dataclass(frozen=True)
class Architecture:
    cell: str
    layers: int
    hidden: int
    bidirectional: bool = False

    @classmethod
    def parse(cls, text):
        """``"LSTM 1x100"``, ``"BLSTM 1×500"``, ``"DBLSTM 2x250"``; D = deep, B = bidirectional."""
        m = _ARCH.match(text.strip())
        if not m:
            raise ConfigurationError(f"cannot parse architecture {text!r}")
        deep, bi, cell, layers, hidden = m.groups()
        layers, hidden = int(layers), int(hidden)
        if deep and layers < 2:
            raise ConfigurationError(f"{text!r}: a deep network needs at least 2 layers")
        if layers < 1 or hidden < 1:
            raise ConfigurationError(f"{text!r}: layers and width must be positive")
        return cls(cell.lower(), layers, hidden, bool(bi))

    def __str__(self):
        prefix = ("D" if self.layers > 1 and self.bidirectional else "") + \
                 ("B" if self.bidirectional else "")
        return f"{prefix}{self.cell.upper()} {self.layers}x{self.hidden}"

    def config(self, input_dim, output_dim, output_mode="last_step", seed=0):
        return SequenceModelConfig(self.cell, self.layers, self.hidden, self.bidirectional,
                                   input_dim, output_dim, output_mode, seed=seed)


@dataclass
class Split:
    train: Dataset
    validation: Dataset
    test: Dataset
    embed_corpus: list = field(repr=False)
    novel: list = field(default_factory=list, repr=False)


def slot_values(rec):
    return {v for vals in decode_frames(rec.tokens, rec.tags).values().values() for v in vals}


def make_split(schema, n=1000, seed=0, sizes=None, held_out=(), novel_fraction=0.0,
               embed_size=2000):
    """Generate unique commands and split them 80/10/10 (or by explicit sizes).

    With ``held_out`` values the supervised splits never contain them, and a
    ``novel_fraction`` of the test set is replaced by commands that do.  The
    embedding corpus is drawn from the full schema, in-set commands only.
    """
    if isinstance(schema, str):
        schema = load_schema(schema)
    rng = random.Random(seed)
    if sizes is None:
        n_val = n // 10
        sizes = (n - 2 * n_val, n_val, n_val)
    total = sum(sizes)
    if min(sizes) < 1:
        raise ValidationError("every split needs at least one record")
    held = set(held_out)
    restricted = schema.without_values(held) if held else schema
    seen, records = set(), []
    for _ in range(50 * total):
        rec = generate_command(restricted, None, rng)
        if tuple(rec.tokens) not in seen:
            seen.add(tuple(rec.tokens))
            records.append(rec)
            if len(records) == total:
                break
    else:
        raise ValidationError(f"schema cannot produce {total} distinct commands")
    rng.shuffle(records)
    a, b = sizes[0], sizes[0] + sizes[1]
    train, val, test = records[:a], records[a:b], records[b:]
    novel = []
    n_novel = int(round(novel_fraction * len(test)))
    if n_novel:
        if not held_out:
            raise ValidationError("novel test sentences need held-out values")
        for _ in range(1000 * n_novel):
            rec = generate_command(schema, None, rng)
            if slot_values(rec) & held:
                novel.append(rec)
                if len(novel) == n_novel:
                    break
        else:
            raise ValidationError("could not generate commands with the held-out values")
        test = test[:len(test) - n_novel] + novel
    corpus = [generate_command(schema, None, rng).tokens for _ in range(embed_size)]
    return Split(Dataset(schema.name, "train", train), Dataset(schema.name, "validation", val),
                 Dataset(schema.name, "test", test), corpus, novel)


def build_embedding(backend, corpus, seed=0, dim=50, max_vocab=5000, epochs=None):
    """Train word vectors of the given backend on tokenized ``corpus``."""
    vocab = build_vocab(corpus, max_vocab)
    if backend == "onehot":
        return onehot_embedding(vocab)
    if backend == "skipgram":
        config = SkipgramConfig(dim=dim, subsample_t=DESK_SUBSAMPLE_T, seed=seed,
                                epochs=epochs or 5)
        return train_skipgram(corpus, vocab, config)
    if backend == "glove":
        config = GloveConfig(dim=dim, seed=seed, epochs=epochs or 25)
        return train_glove(build_cooc(corpus, vocab, config.window), config, vocab)
    raise ConfigurationError(f"unknown embedding backend {backend!r}")


def action_counts(model, dataset):
    """Action detection counts without an Other detector."""
    counts = Counts()
    for rec in dataset.records:
        pred, _ = predict_action(model, rec.tokens)
        counts.add_decision(rec.action != OTHER, pred != OTHER, pred == rec.action)
    return counts


def train_slot_models(split, arch, embedding, approach, epochs, lr, seed):
    schema = load_schema(split.train.schema_name)
    if approach == 1:
        labels = schema.tag_set()
        cfg = arch.config(embedding.dim, len(labels), "per_step", seed)
        model, _ = train_slot_model(split.train, cfg, embedding, epochs=epochs, lr=lr, seed=seed,
                                    val_dataset=split.validation)
        return model
    models = {}
    for action in schema.action_names:
        labels = schema.tag_set(action)
        cfg = arch.config(embedding.dim, len(labels), "per_step", seed)
        models[action], _ = train_slot_model(split.train, cfg, embedding, action=action,
                                             epochs=epochs, lr=lr, seed=seed,
                                             val_dataset=split.validation)
    return models


@dataclass
class GridRow:
    architecture: str
    embedding: str
    approach: object
    task: str
    counts: Counts = None
    error: str = None

    def as_csv(self):
        if self.counts is None:
            return [self.architecture, self.embedding, self.approach, self.task, "failed",
                    "", "", "", ""]
        c = self.counts
        return [self.architecture, self.embedding, self.approach, self.task,
                repr(c.accuracy), c.tp, c.tn, c.fp, c.fn]


def run_experiment_grid(schema, architectures, embeddings, approaches=(1,), seed=0,
                        tasks=("action",), split=None, n=1000, epochs=10, lr=0.01, dim=50,
                        embed_size=2000, action_architecture=None, out=None, log=None):
    """Train and evaluate every combination; returns a list of GridRow.

    Action rows do not depend on the approach and are emitted once per
    (architecture, embedding) with an empty approach field.  Slot and frame
    rows run the full pipeline; by default its action network has the row's
    architecture, while ``action_architecture`` pins it so that only the slot
    network varies.  A cell whose training fails is recorded as failed and
    the grid moves on.
    """
    if not architectures or not embeddings or not approaches or not tasks:
        raise ValidationError("architecture, embedding, approach and task lists must be non-empty")
    bad = set(tasks) - set(TASKS)
    if bad:
        raise ValidationError(f"unknown tasks {sorted(bad)}")
    if isinstance(schema, str):
        schema = load_schema(schema)

    def parse(a):
        return a if isinstance(a, Architecture) else Architecture.parse(a)

    archs = [parse(a) for a in architectures]
    fixed_action = parse(action_architecture) if action_architecture else None
    split = split or make_split(schema, n=n, seed=seed, embed_size=embed_size)
    slot_tasks = [t for t in tasks if t != "action"]
    rows = []
    for emb_name in embeddings:
        try:
            embedding = build_embedding(emb_name, split.embed_corpus, seed=seed, dim=dim)
        except (CmdNluError, FloatingPointError) as exc:
            rows += [GridRow(str(a), emb_name, "", t, error=str(exc)) for a in archs for t in tasks]
            continue
        cache = {}

        def action_model(arch):
            if arch not in cache:
                cfg = arch.config(embedding.dim, len(schema.action_names), "last_step", seed)
                cache[arch], _ = train_action(split.train, cfg, embedding, epochs=epochs, lr=lr,
                                              seed=seed, val_dataset=split.validation)
            return cache[arch]

        for arch in archs:
            name = str(arch)
            if "action" in tasks:
                try:
                    counts = action_counts(action_model(arch), split.test)
                    rows.append(GridRow(name, emb_name, "", "action", counts))
                except (CmdNluError, FloatingPointError) as exc:
                    rows.append(GridRow(name, emb_name, "", "action", error=str(exc)))
            for approach in approaches if slot_tasks else ():
                try:
                    slot_models = train_slot_models(split, arch, embedding, approach,
                                                    epochs, lr, seed)
                    pipe = Pipeline(schema, action_model(fixed_action or arch), slot_models,
                                    approach)
                    report = evaluate(pipe, split.test)
                except (CmdNluError, FloatingPointError) as exc:
                    rows += [GridRow(name, emb_name, approach, t, error=str(exc))
                             for t in slot_tasks]
                    continue
                for t in slot_tasks:
                    rows.append(GridRow(name, emb_name, approach, t, getattr(report, t)))
            if log:
                log(f"{name} / {emb_name} done")
    if out is not None:
        write_grid(rows, out)
    return rows


def write_grid(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(GRID_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def mean_accuracy(rows, **match):
    accs = [r.counts.accuracy for r in rows if r.counts is not None and
            all(getattr(r, k) == v for k, v in match.items())]
    return float(np.mean(accs)) if accs else float("nan")
