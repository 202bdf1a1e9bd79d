"""Command-line entry point; one subcommand per pipeline stage."""

import argparse
import logging
import sys

from .config import load_config
from .data import ConfigError
from .experiments import MissingArtifact, Workspace, ablation_sweep


def _workspace(args):
    return Workspace(load_config(args.config), args.out)


def cmd_gen_data(args):
    db, q, _ = _workspace(args).gen_data()
    print(f"{len(db)} database images, {len(q)} queries -> {args.out}")


def cmd_train_hash(args):
    ws = _workspace(args)
    ws.train_hash()
    print(f"hash model and index written to {args.out}")


def cmd_train_align(args):
    ws = _workspace(args)
    ws.train_align()
    a = ws.alignment
    print(f"held-out guide/code Hamming {a['held_out_before']:.3f} -> {a['held_out_after']:.3f}")


def cmd_attack(args):
    ws = _workspace(args)
    ids = [args.query_id] if args.query_id else None
    results = ws.attack(query_ids=ids, target_label=args.target_label)
    for qid, (res, tlab) in results.items():
        print(
            f"{qid}: target class {int(tlab.argmax())}, latent-path dH {res.baseline_hamming:.0f} -> "
            f"{res.trace['hamming'][-1] if res.trace['hamming'] else res.baseline_hamming:.0f}, "
            f"decoded dH {res.trace['decoded_hamming']:.0f} ({res.seconds:.2f}s)"
        )


def cmd_eval(args):
    m = _workspace(args).evaluate()
    print(
        f"t-MAP@{m['K']}: chance {m['t_map_chance']:.4f}  benign {m['t_map_benign']:.4f}  "
        f"adversarial {m['t_map_adversarial']:.4f}"
    )


def cmd_ablate(args):
    cfg = load_config(args.config)
    table = ablation_sweep(cfg, out=args.out)
    print(table.render(), end="")


def cmd_report(args):
    rep = _workspace(args).report()
    print(rep.table(), end="")


COMMANDS = {
    "gen-data": (cmd_gen_data, "render the synthetic shapes dataset"),
    "train-hash": (cmd_train_hash, "train the surrogate hash model and build the retrieval index"),
    "train-align": (cmd_train_align, "caption the database and train the alignment network"),
    "attack": (cmd_attack, "run the latent attack on queries"),
    "eval": (cmd_eval, "t-MAP of benign vs adversarial queries"),
    "ablate": (cmd_ablate, "loss-weight ablation with and without the alignment network"),
    "report": (cmd_report, "collect metrics, timings and plots into a report"),
}


def build_parser():
    p = argparse.ArgumentParser(prog="hashattack")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (fn, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="INI experiment config")
        sp.add_argument("--out", required=True, help="output directory")
        if name == "attack":
            sp.add_argument("--query-id", help="attack only this query (default: all)")
            sp.add_argument("--target-label", type=int, help="override the target class index")
        sp.set_defaults(func=fn)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConfigError, MissingArtifact) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
