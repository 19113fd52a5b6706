"""Command line entry point: ingest, extract, score, db, train, predict,
design, serve.

Machine output goes to stdout as JSON/JSONL; diagnostics go to stderr.
Exit codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import corpus, pipeline
from .designer import DesignSpec, FallbackEngine, LlmEngine, run_design
from .errors import DiveError
from .evaluate import score_corpus, score_extraction
from .formula import canonical_formula, parse_formula
from .gateway import backend_from_spec, load_config
from .predictor import (
    TrainConfig,
    evaluate_model,
    load_model,
    model_digest,
    predict,
    save_model,
    train,
)
from .records import (
    QUANTITY_FIELDS,
    dumps_record,
    read_jsonl,
    validate_record,
    write_jsonl,
)
from .service import ApiConfig, serve
from .store import QueryFilter, RecordStore


def _emit(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False))


def cmd_ingest(args) -> int:
    failed = 0
    for directory in args.dirs:
        try:
            bundle = corpus.load_bundle(directory)
        except DiveError as exc:
            print(f"{directory}: {exc}", file=sys.stderr)
            failed += 1
            continue
        _emit({
            "dir": str(directory),
            "doi": bundle.doi,
            "title": bundle.title,
            "year": bundle.year,
            "figures": len(bundle.figures),
            "body_chars": len(bundle.body),
        })
    return 1 if failed else 0


def cmd_extract(args) -> int:
    backend = backend_from_spec(args.backend)
    config = pipeline.PipelineConfig(models=load_config(args.config))
    bundles = [corpus.load_bundle(d) for d in args.bundle]

    def run_one(bundle):
        return pipeline.run(bundle, backend, args.mode, config)

    if args.jobs > 1 and len(bundles) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, bundles))
    else:
        results = [run_one(b) for b in bundles]

    records = [r for result in results for r in result.records]
    write_jsonl(records, args.out)
    manifest = {
        "mode": args.mode,
        "backend": args.backend,
        "bundles": [result.manifest for result in results],
        "n_records": len(records),
        "n_failures": sum(len(r.failures) for r in results),
    }
    manifest_path = Path(args.out).with_suffix(Path(args.out).suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, ensure_ascii=False, indent=1) + "\n", "utf-8")
    print(f"wrote {len(records)} records to {args.out}", file=sys.stderr)
    return 0


def cmd_score(args) -> int:
    gold = read_jsonl(args.gold)
    pred = read_jsonl(args.pred)
    if args.corpus:
        by_doi_gold: dict[str, list] = {}
        by_doi_pred: dict[str, list] = {}
        for r in gold:
            by_doi_gold.setdefault(r.provenance.doi, []).append(r)
        for r in pred:
            by_doi_pred.setdefault(r.provenance.doi, []).append(r)
        dois = sorted(set(by_doi_gold) | set(by_doi_pred))
        pairs = [(by_doi_gold.get(d, []), by_doi_pred.get(d, [])) for d in dois]
        report = score_corpus(pairs).to_dict()
        report["dois"] = dois
    else:
        report = score_extraction(gold, pred).to_dict()
    _emit(report)
    return 0


def cmd_db(args) -> int:
    store = RecordStore(args.store)
    if args.db_command == "append":
        appended_total = 0
        skipped_total = 0
        for path in args.files:
            records = read_jsonl(path)
            ids, skipped = store.append(records)
            appended_total += len(ids)
            skipped_total += len(skipped)
        _emit({"appended": appended_total, "skipped_duplicates": skipped_total,
               "total": len(store)})
        return 0
    if args.db_command == "query":
        f = QueryFilter(
            material_class=args.material_class,
            element_contains=set(args.element) if args.element else None,
            capacity_lo=args.cap_min, capacity_hi=args.cap_max,
            doi=args.doi, review_status=args.status,
        )
        for rid, r in store.query(f):
            print(json.dumps({"id": rid, **json.loads(dumps_record(r))}, ensure_ascii=False))
        return 0
    if args.db_command == "export":
        n = store.export_jsonl(args.out)
        _emit({"exported": n, "path": args.out})
        return 0
    if args.db_command == "stats":
        if args.kind == "histogram":
            edges = [float(e) for e in args.edges.split(",")]
            _emit({"edges": edges, "counts": store.capacity_histogram(edges)})
        elif args.kind == "elements":
            ranked = store.element_frequency(args.lo, args.hi)
            _emit({"lo": args.lo, "hi": args.hi,
                   "elements": [{"element": e, "count": c} for e, c in ranked]})
        elif args.kind == "dopants":
            _emit({"base": args.base, "dopants": store.dopant_analysis(args.base, args.k)})
        return 0
    raise AssertionError(f"unhandled db command {args.db_command}")


def cmd_train(args) -> int:
    records = read_jsonl(args.data)
    key_to_attr = {key: attr for attr, key, _ in QUANTITY_FIELDS}
    attr = key_to_attr.get(args.target)
    if attr is None:
        print(f"unknown target field {args.target!r}; choose from "
              f"{', '.join(sorted(key_to_attr))}", file=sys.stderr)
        return 2
    dataset = []
    for r in records:
        quantity = getattr(r, attr)
        dataset.append((r.composition, quantity.canonical_value if quantity else None))
    model, metrics = train(dataset, TrainConfig(seed=args.seed))
    save_model(model, args.out)
    _emit({
        "model": args.out,
        "digest": model_digest(model),
        "metrics": metrics.to_dict(),
        "grid_point": model.training_meta["grid_point"],
        "n_skipped": model.training_meta["n_skipped"],
    })
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    composition = parse_formula(args.formula)
    _emit({
        "formula": args.formula,
        "canonical_formula": canonical_formula(composition),
        "predicted_capacity_wt_pct": predict(model, composition),
    })
    return 0


def cmd_design(args) -> int:
    spec = DesignSpec.from_file(args.spec)
    model = load_model(args.model)
    store = RecordStore(args.store) if args.store else None
    if args.engine == "llm":
        config = load_config(args.config)
        backend = backend_from_spec(args.backend or "http", config)
        engine = LlmEngine(backend, config.model_text)
    else:
        engine = FallbackEngine(spec)
    trace = run_design(spec, engine, model, store)
    payload = trace.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, ensure_ascii=False, indent=1) + "\n", "utf-8")
    if args.report:
        Path(args.report).write_text(trace.markdown_report(), "utf-8")
    _emit(payload["outcome"])
    return 0


def cmd_serve(args) -> int:
    serve(ApiConfig(
        store_path=args.store,
        host=args.host,
        port=args.port,
        model_path=args.model,
        static_dir=args.static,
        manifest_dir=args.manifests,
        auth_token=args.token,
    ))
    return 0


def cmd_validate(args) -> int:
    """Validate raw JSONL records and echo the canonical form."""
    failures = 0
    with open(args.file, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            result = validate_record(json.loads(line))
            if hasattr(result, "issues"):
                failures += 1
                _emit({"invalid": result.raw, "issues": result.issues})
            else:
                print(dumps_record(result))
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dive",
        description="Literature-to-database extraction, scoring, and inverse "
                    "design for solid-state hydrogen storage materials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate converted paper bundles")
    p.add_argument("dirs", nargs="+", help="bundle directories")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="run extraction over bundles")
    p.add_argument("--mode", choices=("direct", "dive"), required=True)
    p.add_argument("--bundle", action="append", required=True, help="bundle directory (repeatable)")
    p.add_argument("--backend", required=True, help="http | cassette:<path> | record:<path>")
    p.add_argument("--out", required=True, help="output record JSONL")
    p.add_argument("--jobs", type=int, default=1, help="parallel bundles")
    p.add_argument("--config", default=None, help="gateway config JSON")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("score", help="score predicted records against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--corpus", action="store_true", help="group records by DOI and score per paper")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("db", help="record store operations")
    p.add_argument("--store", required=True, help="store directory")
    dbsub = p.add_subparsers(dest="db_command", required=True)
    d = dbsub.add_parser("append", help="import record JSONL files")
    d.add_argument("files", nargs="+")
    d = dbsub.add_parser("query", help="filter records")
    d.add_argument("--element", action="append", default=None)
    d.add_argument("--cap-min", type=float, default=None)
    d.add_argument("--cap-max", type=float, default=None)
    d.add_argument("--material-class", default=None)
    d.add_argument("--doi", default=None)
    d.add_argument("--status", default=None)
    d = dbsub.add_parser("export", help="merged JSONL of current record versions")
    d.add_argument("--out", required=True)
    d = dbsub.add_parser("stats", help="histogram / elements / dopants")
    d.add_argument("--kind", choices=("histogram", "elements", "dopants"), required=True)
    d.add_argument("--edges", default="0,4,8,12", help="histogram bin edges")
    d.add_argument("--lo", type=float, default=0.0, help="element-frequency capacity low")
    d.add_argument("--hi", type=float, default=4.0, help="element-frequency capacity high")
    d.add_argument("--base", default="LaNi5", help="dopant-analysis base formula")
    d.add_argument("--k", type=int, default=5, help="dopant-analysis top k")
    p.set_defaults(func=cmd_db)

    p = sub.add_parser("train", help="train the capacity predictor")
    p.add_argument("--data", required=True, help="record JSONL (store export)")
    p.add_argument("--target", default="capacity_wt_pct")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict capacity for one formula")
    p.add_argument("--model", required=True)
    p.add_argument("--formula", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("design", help="run the inverse-design loop")
    p.add_argument("--spec", required=True, help="design spec JSON")
    p.add_argument("--engine", choices=("llm", "fallback"), default="fallback")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--store", default=None, help="store directory for context/novelty")
    p.add_argument("--backend", default=None, help="backend spec for the llm engine")
    p.add_argument("--config", default=None, help="gateway config JSON")
    p.add_argument("--out", default=None, help="trace JSON path")
    p.add_argument("--report", default=None, help="markdown report path")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8380)
    p.add_argument("--model", default=None)
    p.add_argument("--static", default=None, help="static asset directory (review UI build)")
    p.add_argument("--manifests", default=None, help="directory of extraction run manifests")
    p.add_argument("--token", default=None, help="bearer token required on every request")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="validate raw record JSONL")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DiveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
