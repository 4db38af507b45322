"""End-to-end command understanding and accuracy evaluation.

An instruction is tokenized and split into phrases.  Each phrase gets an
action from the action network and slot tags from either one shared slot
model (approach 1, followed by the action-aware tag filter) or the slot
model trained for the detected action (approach 2).  The Other detector
can override the action, in which case the slots are erased.
"""

import json
import os
from dataclasses import asdict, dataclass, field

from .action import OtherSvm, apply_other, load_action_model, predict_action
from .corpus import OTHER, Dataset, Instruction, load_schema, tokenize
from .embed import read_embeddings
from .errors import ConfigurationError, ValidationError
from .slots import (SlotFrame, decode_frames, load_slot_model, post_filter, predict_tags,
                    select_slot_model)
from .splitter import load_lexicon, split_phrases


@dataclass
class PipelineConfig:
    approach: int
    schema: str
    embedding_backend: str
    embedding_path: str
    action_checkpoint: str
    slot_checkpoints: object  # path (approach 1) or {action: path} (approach 2)
    other_svm: object = None  # {"w", "b"} or a path to that JSON
    lexicon_path: str = None

    def validate(self):
        if self.approach not in (1, 2):
            raise ConfigurationError(f"approach must be 1 or 2, got {self.approach!r}")
        if self.approach == 1 and not isinstance(self.slot_checkpoints, str):
            raise ConfigurationError("approach 1 takes exactly one slot checkpoint path")
        if self.approach == 2:
            if not isinstance(self.slot_checkpoints, dict):
                raise ConfigurationError("approach 2 takes a map of action -> slot checkpoint")
            missing = set(load_schema(self.schema).action_names) - set(self.slot_checkpoints)
            if missing:
                raise ConfigurationError(f"no slot checkpoint for actions {sorted(missing)}")
        return self

    @classmethod
    def load(cls, path):
        """Read a JSON config; relative paths resolve against its directory."""
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        try:
            config = cls(**data)
        except TypeError as exc:
            raise ConfigurationError(f"bad pipeline config: {exc}") from None
        base = os.path.dirname(os.path.abspath(path))

        def resolve(p):
            return p if p is None or os.path.isabs(p) else os.path.join(base, p)

        config.embedding_path = resolve(config.embedding_path)
        config.action_checkpoint = resolve(config.action_checkpoint)
        config.lexicon_path = resolve(config.lexicon_path)
        if isinstance(config.other_svm, str):
            config.other_svm = resolve(config.other_svm)
        if isinstance(config.slot_checkpoints, dict):
            config.slot_checkpoints = {a: resolve(p) for a, p in config.slot_checkpoints.items()}
        else:
            config.slot_checkpoints = resolve(config.slot_checkpoints)
        return config.validate()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2)


@dataclass
class CommandFrame:
    action: str
    slots: SlotFrame
    confidence: float
    tags: list = field(default_factory=list, repr=False)

    def to_json(self):
        return {"action": self.action, "slots": self.slots.values(),
                "confidence": float(self.confidence)}


class Pipeline:
    """Loaded models for one approach; immutable once built."""

    def __init__(self, schema, action_model, slot_models, approach=1, svm=None, lexicon=None):
        if approach == 1 and not hasattr(slot_models, "labels"):
            raise ConfigurationError("approach 1 needs a single slot model")
        if approach == 2:
            missing = set(schema.action_names) - set(slot_models)
            if missing:
                raise ConfigurationError(f"no slot model for actions {sorted(missing)}")
        self.schema = schema
        self.action_model = action_model
        self.slot_models = slot_models
        self.approach = approach
        self.svm = svm
        self.lexicon = lexicon or load_lexicon()

    @classmethod
    def from_config(cls, config):
        config.validate()
        schema = load_schema(config.schema)
        embedding = read_embeddings(config.embedding_path, config.embedding_backend)
        action_model = load_action_model(config.action_checkpoint, embedding)
        if config.approach == 1:
            slot_models = load_slot_model(config.slot_checkpoints, embedding)
        else:
            slot_models = {a: load_slot_model(p, embedding)
                           for a, p in config.slot_checkpoints.items()}
        svm = config.other_svm
        if isinstance(svm, str):
            with open(svm, encoding="utf-8") as f:
                svm = json.load(f)
        svm = OtherSvm.from_dict(svm) if svm else None
        return cls(schema, action_model, slot_models, config.approach, svm,
                   load_lexicon(config.lexicon_path))

    def understand_phrase(self, tokens):
        action, scores = predict_action(self.action_model, tokens)
        confidence = float(scores.max())
        if self.svm is not None and not apply_other(self.svm, confidence):
            return CommandFrame(OTHER, SlotFrame(), confidence, ["O"] * len(tokens))
        if self.approach == 1:
            tags = post_filter(action, predict_tags(self.slot_models, tokens), self.schema)
        else:
            tags = predict_tags(select_slot_model(self.slot_models, action), tokens)
        return CommandFrame(action, decode_frames(tokens, tags), confidence, tags)

    def understand(self, text):
        tokens = tokenize(text)
        return [self.understand_phrase(p) for p in split_phrases(tokens, self.lexicon)]


def understand(pipeline, text):
    """Frames for each command in ``text``; accepts a Pipeline or PipelineConfig."""
    if isinstance(pipeline, PipelineConfig):
        pipeline = Pipeline.from_config(pipeline)
    return pipeline.understand(text)


# -- evaluation -------------------------------------------------------------

AGGREGATION = (
    "accuracy = (TP + TN) / (TP + TN + FP + FN). "
    "action/frame, per command: TP = in-set gold, predicted correctly; "
    "TN = Other gold, predicted Other; FP = an in-set action predicted wrongly "
    "(wrong action, or Other gold accepted); FN = in-set gold rejected as Other. "
    "slot, per token: TP = slot tag predicted exactly; TN = O predicted O; "
    "FP = a slot tag predicted that is wrong; FN = O predicted for a slot token."
)


@dataclass
class Counts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def add_decision(self, gold, pred, correct):
        """Count one decision; ``gold``/``pred`` are True when not Other/O."""
        if correct:
            if gold:
                self.tp += 1
            else:
                self.tn += 1
        elif pred:
            self.fp += 1
        else:
            self.fn += 1


@dataclass
class EvalReport:
    action: Counts = field(default_factory=Counts)
    slots: Counts = field(default_factory=Counts)
    frame: Counts = field(default_factory=Counts)
    gating_violations: int = 0

    @property
    def action_accuracy(self):
        return self.action.accuracy

    @property
    def slot_token_accuracy(self):
        return self.slots.accuracy

    @property
    def frame_accuracy(self):
        return self.frame.accuracy

    def to_dict(self):
        out = {"aggregation": AGGREGATION, "gating_violations": self.gating_violations}
        for task in ("action", "slots", "frame"):
            c = getattr(self, task)
            out[task] = {"accuracy": c.accuracy, **asdict(c)}
        return out


def _score_command(report, gold, frame):
    gold_in = gold.action != OTHER
    pred_in = frame.action != OTHER
    report.action.add_decision(gold_in, pred_in, gold.action == frame.action)
    if frame.action == OTHER and frame.slots:
        report.gating_violations += 1
    pred_tags = frame.tags or ["O"] * len(gold.tags)
    for g, p in zip(gold.tags, pred_tags):
        report.slots.add_decision(g != "O", p != "O", g == p)
    exact = (gold.action == frame.action and
             (not gold_in or decode_frames(gold.tokens, gold.tags).values() == frame.slots.values()))
    report.frame.add_decision(gold_in, pred_in, exact)


def evaluate(pipeline, data):
    """Score a Dataset of commands or a list of Instructions."""
    report = EvalReport()
    if isinstance(data, Dataset):
        if data.schema_name != pipeline.schema.name:
            raise ValidationError(
                f"dataset schema {data.schema_name!r} != pipeline schema {pipeline.schema.name!r}")
        for rec in data.records:
            _score_command(report, rec, pipeline.understand_phrase(rec.tokens))
        return report
    for inst in data:
        if not isinstance(inst, Instruction):
            raise ValidationError("evaluate takes a Dataset or a list of Instructions")
        frames = pipeline.understand(inst.text)
        for i, gold in enumerate(inst.gold_commands):
            if i < len(frames):
                _score_command(report, gold, frames[i])
            else:
                missing = CommandFrame(OTHER, SlotFrame(), 0.0, ["O"] * len(gold.tokens))
                _score_command(report, gold, missing)
        for _ in frames[len(inst.gold_commands):]:
            report.action.fp += 1
            report.frame.fp += 1
    return report
