"""Operator surface: one subcommand per pipeline stage.

Exit codes: 0 success, 1 configuration or precondition error, 2 runtime
error. Stage progress and results are printed as JSON on stdout; errors go
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import control as C
from . import text as T
from .config import ConfigError, RunConfig, load_config
from .critics import CriticConfig
from .generation import DecodeParams, PrefixSpec
from .pipeline import (
    NgramTrainer,
    best_of_n,
    dataset_statistics,
    expert_iterate,
    export_distillation,
    run_annotate_stage,
    run_filter_stage,
    run_generation_stage,
    stage_name,
)
from .remote import RemoteScorer
from .scoring import NgramBackend, train_ngram
from .store import Store


class PreconditionError(RuntimeError):
    """A stage was invoked before its inputs exist."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infodistill", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="override the worker count")
        p.add_argument("--store", default=None, help="override the store path")
        p.add_argument("--stage-limit", type=int, default=None, help="cap items processed this invocation")
        return p

    add("generate", "sample candidate pairs with the current teacher")
    add("filter", "run the critics over unfiltered candidates")
    add("iterate", "self-train the teacher on accepted pairs")
    add("annotate", "attach control attributes to accepted pairs")
    rank = add("rank", "best-of-n re-ranking of candidate summaries")
    rank.add_argument("--input", required=True, help="JSON lines of {document, candidates[]}")
    rank.add_argument("--output", default=None, help="write selections here instead of stdout")
    export = add("export", "write distillation training files")
    export.add_argument("--mode", choices=("plain", "controlled"), default=None)
    export.add_argument("--output", default=None, help="export file path")
    stats = add("stats", "emit diversity and style statistics as JSON")
    stats.add_argument("--output", default=None)
    return parser


# -- wiring -------------------------------------------------------------------


def corpus_stats(cfg: RunConfig) -> T.CorpusStats:
    docs = corpus_docs(cfg)
    if not docs:
        raise ConfigError(f"corpus file {cfg.corpus!r} has no documents")
    return T.CorpusStats.from_corpus(docs)


def corpus_docs(cfg: RunConfig) -> list[T.TokenSeq]:
    path = Path(cfg.corpus)
    if not path.exists():
        raise ConfigError(f"corpus file not found: {path}")
    return [T.tokenize(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def prefix_spec(cfg: RunConfig) -> PrefixSpec:
    bundled = PrefixSpec.bundled()
    cities = bundled.cities if cfg.cities == "bundled" else _read_lines(cfg.cities)
    media = bundled.media if cfg.media == "bundled" else _read_lines(cfg.media)
    return PrefixSpec(cities=cities, media=media)


def _read_lines(path: str) -> tuple[str, ...]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"list file not found: {p}")
    items = tuple(
        line.strip() for line in p.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    )
    if not items:
        raise ConfigError(f"list file is empty: {p}")
    return items


def critic_config(cfg: RunConfig) -> CriticConfig:
    return CriticConfig(
        tau_s_log=cfg.tau_s_log,
        tau_f_log=cfg.tau_f_log,
        tau_b=cfg.tau_b,
        mask_fraction=cfg.mask_fraction,
        mask_policy=cfg.mask_policy,
        seed=cfg.seed,
    )


def decode_params(cfg: RunConfig) -> DecodeParams:
    return DecodeParams(
        alpha=cfg.alpha,
        top_p=cfg.top_p,
        temperature=cfg.temperature,
        max_doc_tokens=cfg.max_doc_tokens,
        summary_sentences=cfg.summary_sentences or None,
        seed=cfg.seed,
    )


def thresholds(cfg: RunConfig) -> C.ControlThresholds:
    return C.ControlThresholds(
        len_tau1=cfg.len_tau1,
        len_tau2=cfg.len_tau2,
        ext_tau1=cfg.ext_tau1,
        ext_tau2=cfg.ext_tau2,
        spe_tau2=cfg.spe_tau2,
    )


def backend_kind(cfg: RunConfig) -> tuple[str, str]:
    kind, _, rest = cfg.backend.partition(":")
    return kind, rest


def initial_backend(cfg: RunConfig):
    """The round-0 scorer: a reference artifact (trained on demand) or remote."""
    kind, rest = backend_kind(cfg)
    if kind == "remote":
        return RemoteScorer(
            rest,
            auth_token=cfg.remote_auth_token or None,
            top_k=cfg.remote_top_k or None,
        )
    path = Path(rest)
    if path.exists():
        return NgramBackend.load(path)
    docs = [doc.tokens for doc in corpus_docs(cfg)]
    backend = train_ngram(
        docs, order=cfg.ngram_order, smoothing=cfg.smoothing_k, condition_weight=cfg.condition_weight
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    backend.save(path)
    return backend


def current_round(store: Store) -> int:
    return store.load_manifest().get("rounds", {}).get("current", 0)


def round_backend(cfg: RunConfig, store: Store):
    """The teacher for the current round: initial, or the iterated artifact."""
    r = current_round(store)
    if r == 0:
        return initial_backend(cfg), 0
    manifest = store.load_manifest()
    path = manifest["rounds"]["backends"].get(str(r))
    if not path or not Path(path).exists():
        raise PreconditionError(f"no backend artifact recorded for round {r}; run iterate first")
    return NgramBackend.load(path), r


def check_config_digest(store: Store, cfg: RunConfig) -> None:
    manifest = store.load_manifest()
    recorded = manifest.get("config_digest")
    if recorded is None:
        manifest["config_digest"] = cfg.digest()
        store.save_manifest(manifest)
    elif recorded != cfg.digest():
        raise ConfigError(
            "config digest does not match the store manifest; "
            "use a fresh store or restore the original configuration"
        )


# -- commands -------------------------------------------------------------------


def cmd_generate(cfg: RunConfig, args) -> dict:
    store = Store(cfg.store)
    check_config_digest(store, cfg)
    backend, round_tag = round_backend(cfg, store)
    target = cfg.n_candidates
    if args.stage_limit is not None:
        existing = len(store.stage_records(stage_name(round_tag)))
        target = min(target, existing + args.stage_limit)
        if target < 1:
            raise ConfigError("stage limit leaves nothing to generate")
    stats = run_generation_stage(
        backend, prefix_spec(cfg), decode_params(cfg), target, store, round_tag=round_tag, workers=cfg.workers
    )
    return {"stage": f"generate:{stage_name(round_tag)}", **stats.to_dict()}


def cmd_filter(cfg: RunConfig, args) -> dict:
    store = Store(cfg.store)
    check_config_digest(store, cfg)
    r = current_round(store)
    if not store.stage_records(stage_name(r)):
        raise PreconditionError(f"no candidates for stage {stage_name(r)!r}; run generate first")
    scorer = initial_backend(cfg)  # critics always score with the fixed initial model
    stats = run_filter_stage(
        store, critic_config(cfg), scorer, corpus_stats(cfg), round_tag=r,
        workers=cfg.workers, limit=args.stage_limit,
    )
    return {"stage": f"filter:{stage_name(r)}", **stats.to_dict()}


def cmd_iterate(cfg: RunConfig, args) -> dict:
    store = Store(cfg.store)
    check_config_digest(store, cfg)
    r = current_round(store)
    if r >= cfg.iteration_rounds:
        raise PreconditionError(f"iteration_rounds={cfg.iteration_rounds} already reached (round {r})")
    kind, _ = backend_kind(cfg)
    if kind != "reference":
        raise ConfigError("iterate requires a reference backend; remote teachers train out of process")
    base = initial_backend(cfg)
    trainer = NgramTrainer(base=base, mode=cfg.trainer_mode, weight=cfg.trainer_weight)
    try:
        improved = expert_iterate(store, trainer, round_tag=r)
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc
    out_path = store.root / f"backend_round{r + 1}.json"
    improved.save(out_path)
    manifest = store.load_manifest()
    rounds = manifest.setdefault("rounds", {"current": 0, "backends": {}})
    rounds["current"] = r + 1
    rounds.setdefault("backends", {})[str(r + 1)] = str(out_path)
    store.save_manifest(manifest)
    return {"stage": f"iterate:{stage_name(r)}", "next_round": r + 1, "backend": str(out_path)}


def cmd_annotate(cfg: RunConfig, args) -> dict:
    store = Store(cfg.store)
    check_config_digest(store, cfg)
    if not any(rec.get("verdict") for rec in store.view().values()):
        raise PreconditionError("no filtered records; run filter first")
    stats = run_annotate_stage(
        store, corpus_stats(cfg), thresholds(cfg), keyword_count=cfg.keyword_count,
        workers=cfg.workers, limit=args.stage_limit,
    )
    return {"stage": "annotate", **stats.to_dict()}


def cmd_rank(cfg: RunConfig, args) -> dict:
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"rank input not found: {path}")
    scorer = initial_backend(cfg)
    stats = corpus_stats(cfg)
    ccfg = critic_config(cfg)
    selections = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        item = json.loads(line)
        if "document" not in item or "candidates" not in item:
            raise ConfigError(f"rank input line {lineno}: expected {{document, candidates[]}}")
        choice = best_of_n(item["document"], item["candidates"], ccfg, scorer, stats)
        s, f = choice.scores[choice.index]
        selections.append(
            {
                "index": choice.index,
                "summary": choice.summary,
                "saliency_pmi": s,
                "faithfulness_pmi": f,
                "total": s + f,
            }
        )
    out = "\n".join(json.dumps(sel, sort_keys=True) for sel in selections) + "\n"
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return {"stage": "rank", "selections": len(selections)}


def cmd_export(cfg: RunConfig, args) -> dict:
    store = Store(cfg.store)
    check_config_digest(store, cfg)
    mode = args.mode or cfg.export_mode
    sink = args.output or str(store.root / f"export_{mode}.jsonl")
    try:
        manifest = export_distillation(
            store, mode, sink, target_per_bucket=cfg.target_per_bucket or None, seed=cfg.seed
        )
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc
    return {"stage": "export", "sink": sink, **manifest}


def cmd_stats(cfg: RunConfig, args) -> dict:
    store = Store(cfg.store)
    out = dataset_statistics(store, msttr_window=cfg.msttr_window)
    if args.output:
        Path(args.output).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {"stage": "stats", **out}


COMMANDS = {
    "generate": cmd_generate,
    "filter": cmd_filter,
    "iterate": cmd_iterate,
    "annotate": cmd_annotate,
    "rank": cmd_rank,
    "export": cmd_export,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "workers": args.workers, "store": args.store}
    try:
        cfg = load_config(args.config, overrides)
        result = COMMANDS[args.command](cfg, args)
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
