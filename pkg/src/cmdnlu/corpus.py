"""Task schemas, the auto-annotating command generator and dataset I/O.

Commands are produced from per-action templates such as
``"take the {object} to the {destination}"``.  Every placeholder is filled
with a value from the schema's slot lexicon and the value's tokens receive
``B-``/``I-`` tags, so each generated sentence comes annotated for free.
"""

import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import ParseError, SchemaError, ValidationError

OTHER = "Other"
JOINERS = ("and", "then", "and then")
SPLITS = ("train", "validation", "test")
PREFIX_RATE = 0.15
# telegraphic commands ("take coke to kitchen") drop template articles
ARTICLE_DROP_RATE = 0.3
ARTICLES = frozenset({"the", "a", "an"})

_PLACEHOLDER = re.compile(r"^\{(\w+)\}$")
_NON_WORD = re.compile(r"[^\w'\s]|_")


def _split_clitic(word):
    if word.endswith("n't") and len(word) > 3:
        return [word[:-3], "n't"]
    head, sep, tail = word.partition("'")
    return [head, sep + tail] if sep else [word]


def tokenize(text):
    """Lowercase ``text`` and return its alphabetic tokens.

    Punctuation and numbers are dropped.  Clitics are split off at the
    apostrophe (``"don't"`` gives ``"do"`` and ``"n't"``) and the fragment is
    then discarded because it is not alphabetic.
    """
    words = _NON_WORD.sub(" ", text.lower()).split()
    return [tok for word in words for tok in _split_clitic(word) if tok.isalpha()]


def _rng(seed):
    if isinstance(seed, random.Random):
        return seed
    return random.Random(seed)


def placeholder_slot(token):
    """Slot name of a ``{slot}`` template token, or None."""
    m = _PLACEHOLDER.match(token)
    return m.group(1) if m else None


@dataclass(frozen=True)
class ActionSpec:
    name: str
    allowed_slots: frozenset
    templates: tuple

    def __post_init__(self):
        if len(self.templates) < 3:
            raise SchemaError(f"action {self.name!r} needs at least 3 templates")
        for template in self.templates:
            for tok in template:
                slot = placeholder_slot(tok)
                if slot is not None and slot not in self.allowed_slots:
                    raise SchemaError(
                        f"template {' '.join(template)!r} uses slot {slot!r} "
                        f"not allowed for action {self.name!r}")


@dataclass(frozen=True)
class TaskSchema:
    name: str
    actions: tuple
    slot_lexicon: dict
    prefixes: tuple = ()

    def __post_init__(self):
        names = [a.name for a in self.actions]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate action names in schema {self.name!r}")
        for spec in self.actions:
            for template in spec.templates:
                for tok in template:
                    slot = placeholder_slot(tok)
                    if slot is not None and slot not in self.slot_lexicon:
                        raise SchemaError(f"slot {slot!r} missing from lexicon")

    @property
    def action_names(self):
        return [a.name for a in self.actions]

    @property
    def slot_types(self):
        return sorted(self.slot_lexicon)

    def action(self, name):
        for spec in self.actions:
            if spec.name == name:
                return spec
        raise SchemaError(f"unknown action {name!r} for schema {self.name!r}")

    def allowed_slots(self, action):
        return self.action(action).allowed_slots

    def tag_set(self, action=None):
        """IOB labels for all slot types, or for one action's slots."""
        slots = self.slot_types if action is None else sorted(self.allowed_slots(action))
        labels = ["O"]
        for slot in slots:
            labels += [f"B-{slot}", f"I-{slot}"]
        return labels

    def without_values(self, values):
        """Copy of the schema whose lexicon omits the given surface values."""
        values = set(values)
        lexicon = {}
        for slot, words in self.slot_lexicon.items():
            kept = [w for w in words if w not in values]
            if not kept:
                raise SchemaError(f"removing values would empty slot {slot!r}")
            lexicon[slot] = kept
        return TaskSchema(self.name, self.actions, lexicon, self.prefixes)

    @classmethod
    def from_dict(cls, data):
        try:
            actions = tuple(
                ActionSpec(
                    name=a["name"],
                    allowed_slots=frozenset(a["allowed_slots"]),
                    templates=tuple(tuple(t.split()) for t in a["templates"]),
                )
                for a in data["actions"]
            )
            lexicon = {k: list(v) for k, v in data["slot_lexicon"].items()}
            return cls(data["name"], actions, lexicon,
                       tuple(data.get("politeness_prefixes", ())))
        except KeyError as exc:
            raise SchemaError(f"schema file missing key {exc}") from None


def _data_text(name):
    return resources.files("cmdnlu").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def load_schema(name_or_path):
    """Load a bundled schema (``"gpsr"`` / ``"fbm3"``) or a schema JSON file."""
    if name_or_path in ("gpsr", "fbm3"):
        data = json.loads(_data_text(f"{name_or_path}.json"))
    else:
        try:
            with open(name_or_path, encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise SchemaError(f"unknown schema {name_or_path!r}") from None
    if "version" not in data:
        raise SchemaError("schema file has no version field")
    return TaskSchema.from_dict(data)


def _other_inventory():
    return json.loads(_data_text("other.json"))


def validate_tags(tags):
    """Raise ValidationError unless ``tags`` is a well-formed IOB sequence."""
    prev = "O"
    for i, tag in enumerate(tags):
        if tag != "O":
            kind, sep, slot = tag.partition("-")
            if kind not in ("B", "I") or not sep or not slot:
                raise ValidationError(f"bad tag {tag!r} at position {i}")
            if kind == "I" and prev[2:] != slot:
                raise ValidationError(
                    f"{tag!r} at position {i} does not continue a {slot!r} span")
        prev = tag


@dataclass
class TaggedSentence:
    tokens: list
    tags: list
    action: str

    def validate(self):
        if len(self.tokens) != len(self.tags):
            raise ValidationError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags")
        validate_tags(self.tags)
        return self

    def slot_types(self):
        return {t[2:] for t in self.tags if t != "O"}

    def to_json(self):
        return {"tokens": list(self.tokens), "tags": list(self.tags), "action": self.action}


@dataclass
class Instruction:
    text: str
    gold_commands: list
    joiners: list = field(default_factory=list)


@dataclass
class Dataset:
    schema_name: str
    split: str
    records: list

    def validate(self, schema=None):
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}")
        if schema is None and self.schema_name in ("gpsr", "fbm3"):
            schema = load_schema(self.schema_name)
        actions = set(schema.action_names) | {OTHER} if schema else None
        slots = set(schema.slot_lexicon) if schema else None
        for i, rec in enumerate(self.records):
            try:
                rec.validate()
            except ValidationError as exc:
                raise ValidationError(f"record {i}: {exc}") from None
            if actions is not None and rec.action not in actions:
                raise ValidationError(f"record {i}: action {rec.action!r} not in schema")
            if slots is not None and not rec.slot_types() <= slots:
                raise ValidationError(f"record {i}: unknown slot types "
                                      f"{sorted(rec.slot_types() - slots)}")
        return self


def _politeness(schema_prefixes, rng):
    if schema_prefixes and rng.random() < PREFIX_RATE:
        return rng.choice(schema_prefixes).split()
    return []


def generate_command(schema, action=None, seed=None):
    """Generate one annotated command for ``action`` (uniform if None)."""
    rng = _rng(seed)
    spec = schema.action(action) if action is not None else rng.choice(schema.actions)
    template = rng.choice(spec.templates)
    tokens = _politeness(schema.prefixes, rng)
    tags = ["O"] * len(tokens)
    terse = rng.random() < ARTICLE_DROP_RATE
    for tok in template:
        slot = placeholder_slot(tok)
        if slot is None:
            if terse and tok in ARTICLES:
                continue
            tokens.append(tok)
            tags.append("O")
            continue
        words = rng.choice(schema.slot_lexicon[slot]).split()
        tokens.extend(words)
        tags.extend([f"B-{slot}"] + [f"I-{slot}"] * (len(words) - 1))
    return TaggedSentence(tokens, tags, spec.name)


def generate_instruction(schema, n_commands, seed=None):
    """Generate ``n_commands`` commands joined by conjunctions."""
    if n_commands < 1:
        raise ValueError("n_commands must be at least 1")
    rng = _rng(seed)
    commands = [generate_command(schema, None, rng) for _ in range(n_commands)]
    joiners = [rng.choice(JOINERS) for _ in range(n_commands - 1)]
    words = list(commands[0].tokens)
    for joiner, cmd in zip(joiners, commands[1:]):
        words += joiner.split() + cmd.tokens
    return Instruction(" ".join(words), commands, joiners)


def generate_other_commands(count, seed=None):
    """Imperatives outside every schema's action set, labelled ``Other``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = _rng(seed)
    inventory = _other_inventory()
    verbs = sorted(inventory["verbs"])
    out = []
    for _ in range(count):
        tokens = _politeness(inventory["prefixes"], rng)
        verb = rng.choice(verbs)
        tokens += [verb] + rng.choice(inventory["verbs"][verb]).split()
        out.append(TaggedSentence(tokens, ["O"] * len(tokens), OTHER))
    return out


def other_vocabulary():
    """Every word the Other generator can emit."""
    inventory = _other_inventory()
    words = set()
    for phrase in inventory["prefixes"]:
        words.update(phrase.split())
    for verb, args in inventory["verbs"].items():
        words.add(verb)
        for arg in args:
            words.update(arg.split())
    return words


def generate_dataset(schema, n, seed=None, split="train", other_fraction=0.0):
    rng = _rng(seed)
    records = [generate_command(schema, None, rng) for _ in range(n)]
    n_other = int(round(n * other_fraction))
    if n_other:
        records += generate_other_commands(n_other, rng)
        rng.shuffle(records)
    return Dataset(schema.name, split, records)


def write_dataset(dataset, path):
    dataset.validate()
    with open(path, "w", encoding="utf-8") as f:
        for rec in dataset.records:
            row = rec.to_json()
            row["schema"] = dataset.schema_name
            row["split"] = dataset.split
            f.write(json.dumps(row) + "\n")


def read_dataset(path, schema_name=None, split=None):
    """Read a JSON-lines dataset; ``schema``/``split`` keys fill dataset fields."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                rec = TaggedSentence(list(row["tokens"]), list(row["tags"]), row["action"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"malformed record ({exc})", lineno) from None
            if isinstance(row, dict):
                schema_name = schema_name or row.get("schema")
                split = split or row.get("split")
            records.append(rec)
    return Dataset(schema_name or "gpsr", split or "train", records).validate()
