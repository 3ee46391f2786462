"""CLI: ground-adapter [--host 127.0.0.1] [--port 8765] [--rules rules.json]"""

from __future__ import annotations

import argparse
import logging

from ground_adapter.config import AdapterConfig
from ground_adapter.service import make_server
from ground_adapter.stub import StubModel


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--model", default="stub",
                        help="model backend (only 'stub' ships with the adapter)")
    parser.add_argument("--rules", default=None,
                        help="JSON rules file for the stub model")
    parser.add_argument("--score-floor", type=float, default=0.05)
    parser.add_argument("--max-boxes", type=int, default=10)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO)
    if args.model != "stub":
        raise SystemExit(f"unknown model backend {args.model!r}; wrap your model "
                         "with the StubModel interface (load/infer/box_format)")
    model = StubModel.from_rules_file(args.rules) if args.rules else StubModel()
    config = AdapterConfig(model=args.model, score_floor=args.score_floor,
                           max_boxes=args.max_boxes)
    server = make_server(args.host, args.port, model, config)
    model.load()
    logging.info("serving /ground on http://%s:%d (model %s)",
                 args.host, args.port, model.model_tag)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


if __name__ == "__main__":
    main()
