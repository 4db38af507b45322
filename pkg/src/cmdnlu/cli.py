"""Command-line entry point.

Exit status: 0 on success, 1 on a usage error, 2 on a runtime error.
"""

import argparse
import json
import random
import sys

from .action import (load_action_model, max_confidences, save_action_model,
                     train_action, train_other_svm)
from .corpus import (generate_dataset, generate_other_commands, load_schema, read_dataset,
                     tokenize, write_dataset)
from .embed import BACKENDS, read_embeddings, write_embeddings
from .errors import CmdNluError
from .experiments import TASKS, Architecture, build_embedding, run_experiment_grid
from .pipeline import Pipeline, PipelineConfig, evaluate
from .slots import save_slot_model, train_slot_model


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _read_corpus(paths):
    """Token lists from dataset JSONL files or plain text (one sentence per line)."""
    corpus = []
    for path in paths:
        if path.endswith(".jsonl"):
            corpus += [r.tokens for r in read_dataset(path).records]
            continue
        with open(path, encoding="utf-8") as f:
            corpus += [toks for toks in (tokenize(line) for line in f) if toks]
    return corpus


def cmd_gen(args):
    schema = load_schema(args.schema)
    data = generate_dataset(schema, args.n, seed=args.seed, split=args.split,
                            other_fraction=args.other_fraction)
    write_dataset(data, args.out)
    print(f"wrote {len(data.records)} commands to {args.out}")


def cmd_train_embed(args):
    corpus = _read_corpus(args.corpus)
    emb = build_embedding(args.backend, corpus, seed=args.seed, dim=args.dim,
                          max_vocab=args.max_vocab, epochs=args.epochs)
    write_embeddings(emb, args.out)
    print(f"wrote {len(emb.vocab)} x {emb.dim} {args.backend} vectors to {args.out}")


def _model_inputs(args):
    emb = read_embeddings(args.embedding, args.backend)
    train = read_dataset(args.data)
    val = read_dataset(args.val) if args.val else None
    return emb, train, val


def cmd_train_action(args):
    emb, train, val = _model_inputs(args)
    labels = load_schema(train.schema_name).action_names
    cfg = Architecture.parse(args.arch).config(emb.dim, len(labels), "last_step", args.seed)
    model, hist = train_action(train, cfg, emb, epochs=args.epochs, lr=args.lr, seed=args.seed,
                               val_dataset=val)
    save_action_model(args.out, model)
    print(f"final loss {hist.train_loss[-1]:.4f}; saved {args.out}")


def cmd_train_slots(args):
    emb, train, val = _model_inputs(args)
    labels = load_schema(train.schema_name).tag_set(args.action)
    cfg = Architecture.parse(args.arch).config(emb.dim, len(labels), "per_step", args.seed)
    model, hist = train_slot_model(train, cfg, emb, action=args.action, epochs=args.epochs,
                                   lr=args.lr, seed=args.seed, val_dataset=val)
    save_slot_model(args.out, model)
    print(f"final loss {hist.train_loss[-1]:.4f}; saved {args.out}")


def cmd_train_other(args):
    emb = read_embeddings(args.embedding, args.backend)
    model = load_action_model(args.action_model, emb)
    in_set = read_dataset(args.data).records
    other = generate_other_commands(args.n_other, seed=random.Random(args.seed))
    svm = train_other_svm(max_confidences(model, in_set), max_confidences(model, other),
                          lam=args.lam, epochs=args.epochs, lr=args.lr)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(svm.to_dict(), f)
    print(f"boundary {svm.boundary:.4f}; saved {args.out}")


def cmd_eval(args):
    pipe = Pipeline.from_config(PipelineConfig.load(args.config))
    report = evaluate(pipe, read_dataset(args.data))
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)


def cmd_grid(args):
    rows = run_experiment_grid(args.schema, args.arch, args.embedding, args.approach,
                               seed=args.seed, tasks=args.task, n=args.n, epochs=args.epochs,
                               lr=args.lr, dim=args.dim, embed_size=args.embed_size,
                               action_architecture=args.action_arch, out=args.out,
                               log=lambda m: print(m, file=sys.stderr))
    for row in rows:
        print(",".join(str(x) for x in row.as_csv()))


def _frames_json(pipe, text):
    return json.dumps([f.to_json() for f in pipe.understand(text)])


def cmd_parse(args):
    pipe = Pipeline.from_config(PipelineConfig.load(args.config))
    print(_frames_json(pipe, " ".join(args.text)))


def cmd_repl(args):
    pipe = Pipeline.from_config(PipelineConfig.load(args.config))
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            print("> ", end="", flush=True)
        line = sys.stdin.readline()
        if not line:
            break
        if line.strip():
            print(_frames_json(pipe, line), flush=True)


def build_parser():
    p = _Parser(prog="cmdnlu", description="Robot command understanding toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("gen", help="generate an annotated command corpus")
    s.add_argument("--schema", default="gpsr")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--split", default="train", choices=["train", "validation", "test"])
    s.add_argument("--other-fraction", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("train-embed", help="train word vectors")
    s.add_argument("--backend", choices=BACKENDS, required=True)
    s.add_argument("--corpus", nargs="+", required=True,
                   help="dataset .jsonl files or text files, one sentence per line")
    s.add_argument("--dim", type=int, default=50)
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--max-vocab", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_embed)

    for name, func in (("train-action", cmd_train_action), ("train-slots", cmd_train_slots)):
        s = sub.add_parser(name, help=f"train the {name[6:]} network")
        s.add_argument("--data", required=True)
        s.add_argument("--val", default=None)
        s.add_argument("--embedding", required=True)
        s.add_argument("--backend", choices=BACKENDS, default="glove")
        s.add_argument("--arch", default="LSTM 1x100")
        s.add_argument("--epochs", type=int, default=30)
        s.add_argument("--lr", type=float, default=0.01)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", required=True)
        if name == "train-slots":
            s.add_argument("--action", default=None,
                           help="train a per-action model on that action's commands only")
        s.set_defaults(func=func)

    s = sub.add_parser("train-other", help="fit the out-of-set detector")
    s.add_argument("--action-model", required=True)
    s.add_argument("--embedding", required=True)
    s.add_argument("--backend", choices=BACKENDS, default="glove")
    s.add_argument("--data", required=True, help="held-out in-set commands")
    s.add_argument("--n-other", type=int, default=200)
    s.add_argument("--lam", type=float, default=0.01)
    s.add_argument("--epochs", type=int, default=1000)
    s.add_argument("--lr", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_other)

    s = sub.add_parser("eval", help="score a pipeline on a dataset")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("grid", help="architecture / embedding / approach comparison")
    s.add_argument("--schema", default="gpsr")
    s.add_argument("--arch", action="append", required=True)
    s.add_argument("--embedding", action="append", choices=BACKENDS, default=None)
    s.add_argument("--approach", action="append", type=int, choices=[1, 2], default=None)
    s.add_argument("--task", action="append", choices=TASKS, default=None)
    s.add_argument("--action-arch", default=None,
                   help="fixed action network for slot/frame rows (default: the row's)")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--dim", type=int, default=50)
    s.add_argument("--embed-size", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("parse", help="understand one instruction")
    s.add_argument("--config", required=True)
    s.add_argument("text", nargs="+")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("repl", help="read instructions from standard input")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_repl)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return 1
    except SystemExit as exc:  # --help
        return exc.code or 0
    if args.command == "grid":
        args.embedding = args.embedding or ["onehot"]
        args.approach = args.approach or [1]
        args.task = args.task or ["action"]
    try:
        args.func(args)
    except (CmdNluError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
