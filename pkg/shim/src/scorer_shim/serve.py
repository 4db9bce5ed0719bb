"""Entry point: pick a provider mode and serve the scoring API."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .providers import HFProvider, NgramProvider, StubProvider


def build_provider(args):
    if args.mode == "stub":
        return StubProvider(vocab_size=args.stub_vocab)
    if args.mode == "ngram":
        if not args.artifact:
            raise SystemExit("ngram mode needs --artifact pointing at a backend file")
        return NgramProvider.from_artifact(args.artifact)
    if args.mode == "hf":
        if not args.causal:
            raise SystemExit("hf mode needs --causal (and optionally --mlm) model paths")
        return HFProvider.from_pretrained(args.causal, args.mlm)
    raise SystemExit(f"unknown mode {args.mode!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scorer-shim", description=__doc__)
    parser.add_argument("--mode", choices=("stub", "ngram", "hf"), default="stub")
    parser.add_argument("--stub-vocab", type=int, default=10, help="stub vocabulary size")
    parser.add_argument("--artifact", help="serialized n-gram backend path (ngram mode)")
    parser.add_argument("--causal", help="causal LM path or name (hf mode)")
    parser.add_argument("--mlm", help="encoder-decoder MLM path for infilling (hf mode)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    parser.add_argument("--max-concurrency", type=int, default=16)
    args = parser.parse_args(argv)

    app = create_app(build_provider(args), max_concurrency=args.max_concurrency)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
