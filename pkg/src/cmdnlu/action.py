"""Action classification and the out-of-set ("Other") detector."""

from dataclasses import dataclass

import numpy as np

from .corpus import OTHER, load_schema
from .embed import embed_sentence
from .errors import ConfigurationError, TrainingError, ValidationError
from .net import forward, init_params, load_checkpoint, save_checkpoint, train


@dataclass
class ActionModel:
    config: object
    params: dict
    labels: list
    embedding: object

    def scores(self, tokens):
        """Raw per-action confidence values (no softmax)."""
        return forward(self.config, self.params, embed_sentence(tokens, self.embedding)).scores


def train_action(dataset, config, embedding, labels=None, epochs=30, lr=0.01, seed=0,
                 val_dataset=None, target_loss=None):
    """Train a last-step classifier over the schema's actions.

    Softmax appears only inside the loss; the trained model emits raw
    scores.  Returns ``(model, history)``.
    """
    if labels is None:
        labels = load_schema(dataset.schema_name).action_names
    if config.output_mode != "last_step" or config.output_dim != len(labels):
        raise ValidationError("action model needs last_step output over all actions")
    if config.input_dim != embedding.dim:
        raise ValidationError("model input_dim does not match embedding dimension")
    if not dataset.records:
        raise TrainingError("cannot train an action model on an empty dataset")
    index = {a: i for i, a in enumerate(labels)}
    examples = []
    for i, rec in enumerate(dataset.records):
        if rec.action == OTHER:
            raise ValidationError(f"record {i} is labelled {OTHER!r}; "
                                  "out-of-set commands train the SVM, not the network")
        if rec.action not in index:
            raise ValidationError(f"record {i}: unknown action {rec.action!r}")
        examples.append((embed_sentence(rec.tokens, embedding), index[rec.action]))
    val = None
    if val_dataset is not None:
        val = [(embed_sentence(r.tokens, embedding), index[r.action])
               for r in val_dataset.records if r.action in index]
    params = init_params(config)
    history = train(config, params, examples, epochs, lr=lr, seed=seed,
                    val_examples=val, target_loss=target_loss)
    return ActionModel(config, params, list(labels), embedding), history


def predict_action(model, tokens):
    """Return ``(label, scores)``; ties go to the lowest label index."""
    if not tokens:
        raise ValueError("cannot classify an empty command")
    scores = model.scores(tokens)
    return model.labels[int(np.argmax(scores))], scores


def save_action_model(path, model):
    save_checkpoint(path, model.config, model.params, model.embedding.vocab.fingerprint(),
                    kind="action", labels=model.labels)


def load_action_model(path, embedding):
    config, params, payload = load_checkpoint(path)
    if payload.get("kind") != "action":
        raise ConfigurationError(f"{path} is not an action checkpoint")
    if payload["vocab_fingerprint"] != embedding.vocab.fingerprint():
        raise ConfigurationError(f"{path} was trained with a different vocabulary")
    if config.input_dim != embedding.dim:
        raise ConfigurationError(f"{path} expects {config.input_dim}-dim word vectors")
    return ActionModel(config, params, list(payload["labels"]), embedding)


# -- Other detection --------------------------------------------------------

@dataclass
class OtherSvm:
    """Linear decision on the max raw confidence: in-set iff w*x + b > 0."""

    w: float
    b: float

    @property
    def boundary(self):
        return -self.b / self.w

    def to_dict(self):
        return {"w": self.w, "b": self.b}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["w"]), float(data["b"]))


def _svm_objective(w, b, z, y, lam):
    return 0.5 * lam * w * w + np.maximum(0.0, 1.0 - y * (w * z + b)).mean()


def train_other_svm(in_set_scores, other_scores, lam=0.01, epochs=1000, lr=0.1):
    """Fit a 1-D soft-margin linear SVM by full-batch subgradient descent.

    In-set scores are labelled +1.  The feature is standardized during the
    fit and the solution mapped back to raw-score units; the iterate with
    the lowest objective is returned.
    """
    if len(in_set_scores) == 0 or len(other_scores) == 0:
        raise ValueError("need at least one in-set and one Other score")
    x = np.concatenate([np.asarray(in_set_scores, float), np.asarray(other_scores, float)])
    y = np.concatenate([np.ones(len(in_set_scores)), -np.ones(len(other_scores))])
    mu = x.mean()
    sd = x.std() or 1.0
    z = (x - mu) / sd
    w = b = 0.0
    best = (_svm_objective(w, b, z, y, lam), w, b)
    for _ in range(epochs):
        active = y * (w * z + b) < 1.0
        gw = lam * w - (y[active] * z[active]).sum() / len(z)
        gb = -y[active].sum() / len(z)
        w -= lr * gw
        b -= lr * gb
        obj = _svm_objective(w, b, z, y, lam)
        if obj < best[0]:
            best = (obj, w, b)
    _, w, b = best
    if w == 0.0:
        raise TrainingError("SVM weight is zero; the two score sets are indistinguishable")
    return OtherSvm(w / sd, b - w * mu / sd)


def apply_other(svm, max_confidence):
    """True when the command is in-set; a point on the boundary is rejected."""
    return svm.w * max_confidence + svm.b > 0.0


def max_confidences(model, records):
    return [float(model.scores(r.tokens).max()) for r in records]
