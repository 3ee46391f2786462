"""Batch command-line front end: split, detect, eval, simulate, report.

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 provider error. Every command snapshots its effective configuration into
its output for provenance, and detect is resumable: scenes whose output
file already exists are skipped unless --force is given.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from igekit import dataset as ds
from igekit import evaluation as ev
from igekit import simulator as sim
from igekit.errors import DataError, ProviderError, UsageConfigError
from igekit.geometry import BoundingBox, ScoredBox
from igekit.pipeline import PipelineConfig, ProviderBundle, run_pipeline
from igekit.providers.chat import (
    ChatClient,
    RemoteChatBackend,
    ReplayChatBackend,
    ScriptedChatBackend,
)
from igekit.providers.embedding import (
    EmbeddingClient,
    HashEmbeddingBackend,
    RemoteEmbeddingBackend,
)
from igekit.providers.grounding import (
    GroundingClient,
    HttpGroundingBackend,
    ReplayGroundingBackend,
    SyntheticGroundingBackend,
)
from igekit.providers.payloads import ImagePayload
from igekit.providers.replay import ReplayStore

log = logging.getLogger(__name__)

DEFAULT_MOCK_CHAT = {
    "PI.1": json.dumps({"app_name": "", "genres": [], "content_theme": "",
                        "device_support": "", "gameplay": "",
                        "interaction_mechanisms": "", "language": ""}),
    "PI.2": json.dumps({"scene_summary": "an unlabeled VR scene"}),
    "PII.1": json.dumps({"candidates": []}),
}


def _read_lines(path: str | None) -> list[str] | None:
    if path is None:
        return None
    return [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()
            if ln.strip()]


def _load_dataset(dataset_path: str, app_meta: str | None) -> ds.DatasetVariant:
    return ds.load_coco(dataset_path, app_metadata=app_meta)


def _fold_scenes(variant: ds.DatasetVariant, manifest_path: str, fold: str):
    split = ds.read_split_manifest(manifest_path)
    wanted = split.fold(fold)
    return [s for s in variant.scenes if s.scene_id in wanted]


def _build_providers(backend: str, replay_dir: str | None,
                     mock_config: str | None, jobs: int) -> ProviderBundle:
    if backend == "replay":
        if not replay_dir:
            raise UsageConfigError("--backend replay requires --replay-dir")
        store = ReplayStore(replay_dir)
        return ProviderBundle(
            chat=ChatClient(ReplayChatBackend(store), concurrency=jobs),
            grounding=GroundingClient(ReplayGroundingBackend(store)))
    if backend == "mock":
        chat_script = dict(DEFAULT_MOCK_CHAT)
        rules = []
        if mock_config:
            doc = json.loads(Path(mock_config).read_text(encoding="utf-8"))
            chat_script.update(doc.get("chat", {}))
            for needle, boxes in doc.get("ground_rules", []):
                rules.append((needle, [
                    ScoredBox(BoundingBox(b["x"], b["y"], b["w"], b["h"]), b["score"])
                    for b in boxes]))
        return ProviderBundle(
            chat=ChatClient(ScriptedChatBackend(chat_script), concurrency=jobs),
            grounding=GroundingClient(SyntheticGroundingBackend(rules)))
    if backend == "remote":
        return ProviderBundle(
            chat=ChatClient(RemoteChatBackend(), concurrency=jobs),
            grounding=GroundingClient(HttpGroundingBackend()))
    raise UsageConfigError(f"unknown backend {backend!r}")


def _load_detection_docs(detections_dir: str) -> dict[str, dict]:
    out = {}
    for path in sorted(Path(detections_dir).glob("*.json")):
        if path.name == "run_ledger.json":
            continue
        doc = json.loads(path.read_text(encoding="utf-8"))
        if "scene_id" in doc:
            out[doc["scene_id"]] = doc
    return out


@click.group()
def cli() -> None:
    """Detection, evaluation, and testing-simulation workflows."""


@cli.command("split")
@click.option("--dataset", required=True, help="COCO detection JSON")
@click.option("--app-meta", default=None, help="app metadata sidecar JSON")
@click.option("--split", "kind", required=True,
              type=click.Choice(ds.SPLIT_KINDS))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--context-categories", default=None,
              help="file with one sampled category per line")
@click.option("--out", required=True, help="manifest output path")
def cmd_split(dataset, app_meta, kind, seed, context_categories, out):
    variant = _load_dataset(dataset, app_meta)
    categories = _read_lines(context_categories)
    if kind == "context_sensitive" and not categories:
        raise UsageConfigError("context_sensitive split requires --context-categories")
    split = ds.make_split(variant, kind, seed, context_categories=categories)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    ds.write_split_manifest(split, out)
    click.echo(f"wrote {out}: train={len(split.train)} val={len(split.val)} "
               f"test={len(split.test)}")


@cli.command("detect")
@click.option("--dataset", required=True)
@click.option("--app-meta", default=None)
@click.option("--images-dir", default=None,
              help="directory containing the scene screenshots")
@click.option("--split-manifest", required=True)
@click.option("--fold", default="test", show_default=True,
              type=click.Choice(["train", "val", "test"]))
@click.option("--backend", default="mock", show_default=True,
              type=click.Choice(["mock", "replay", "remote"]))
@click.option("--replay-dir", default=None)
@click.option("--mock-config", default=None,
              help="JSON with scripted chat answers and grounding rules")
@click.option("--max-iterations", default=3, show_default=True, type=int)
@click.option("--ablate", multiple=True,
              type=click.Choice(["context", "reflection", "classify"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--jobs", default=4, show_default=True, type=int)
@click.option("--force", is_flag=True, help="re-run scenes with existing outputs")
@click.option("--out", required=True, help="output directory")
def cmd_detect(dataset, app_meta, images_dir, split_manifest, fold, backend,
               replay_dir, mock_config, max_iterations, ablate, seed, jobs,
               force, out):
    variant = _load_dataset(dataset, app_meta)
    scenes = _fold_scenes(variant, split_manifest, fold)
    providers = _build_providers(backend, replay_dir, mock_config, jobs)
    config = PipelineConfig(
        max_iterations=max_iterations,
        ablate_context="context" in ablate,
        ablate_reflection="reflection" in ablate,
        ablate_classification="classify" in ablate,
        demo_seed=seed,
    )
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    completed, skipped, failures = [], [], {}
    for scene in scenes:
        target = out_dir / f"{scene.scene_id}.json"
        if target.exists() and not force:
            skipped.append(scene.scene_id)
            continue
        if images_dir and (Path(images_dir) / scene.image_uri).exists():
            image = ImagePayload.from_file(Path(images_dir) / scene.image_uri)
        else:
            image = ImagePayload(data=f"scene:{scene.scene_id}".encode(),
                                 source=scene.image_uri)
        store_text = ""
        if scene.app_id in variant.apps:
            store_text = variant.apps[scene.app_id].store_page_text
        try:
            result = run_pipeline(scene, image, store_text, providers, config)
        except ProviderError as exc:
            failures[scene.scene_id] = f"{type(exc).__name__}: {exc}"
            log.error("scene %s failed: %s", scene.scene_id, exc)
            continue
        target.write_bytes(result.to_json_bytes())
        completed.append(scene.scene_id)

    ledger = {
        "config": {
            "dataset": dataset, "fold": fold, "backend": backend,
            "max_iterations": max_iterations, "ablate": sorted(ablate),
            "seed": seed, "jobs": jobs,
        },
        "completed": completed,
        "skipped_existing": skipped,
        "failures": failures,
        "chat_calls": len(providers.chat.calls),
        "ground_calls": providers.grounding.calls,
    }
    (out_dir / "run_ledger.json").write_text(
        json.dumps(ledger, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"detect: {len(completed)} done, {len(skipped)} skipped, "
               f"{len(failures)} failed")
    if failures:
        raise ProviderError(f"{len(failures)} scene(s) failed; see run_ledger.json")


@cli.command("eval")
@click.option("--dataset", required=True)
@click.option("--app-meta", default=None)
@click.option("--variant", "variant_kind", default="semantics", show_default=True,
              type=click.Choice(ds.VARIANT_KINDS))
@click.option("--context-categories", default=None)
@click.option("--split-manifest", required=True)
@click.option("--fold", default="test", show_default=True,
              type=click.Choice(["train", "val", "test"]))
@click.option("--detections", "detections_dir", required=True)
@click.option("--match-threshold", default=ev.MATCH_THRESHOLD, show_default=True,
              type=float)
@click.option("--iou-thresholds", default=",".join(str(t) for t in ev.IOU_THRESHOLDS),
              show_default=True)
@click.option("--embed-backend", default="mock", show_default=True,
              type=click.Choice(["mock", "remote"]))
@click.option("--out", required=True, help="output directory")
def cmd_eval(dataset, app_meta, variant_kind, context_categories, split_manifest,
             fold, detections_dir, match_threshold, iou_thresholds, embed_backend,
             out):
    base = _load_dataset(dataset, app_meta)
    categories = _read_lines(context_categories)
    if variant_kind == "context" and not categories:
        raise UsageConfigError("context variant requires --context-categories")
    variant = ds.derive_variant(base, variant_kind, context_categories=categories)
    split = ds.read_split_manifest(split_manifest)
    fold_ids = split.fold(fold)

    docs = _load_detection_docs(detections_dir)
    detections = {
        scene_id: [
            ev.Prediction(scene_id=scene_id,
                          box=BoundingBox(d["x"], d["y"], d["w"], d["h"]),
                          category=d["category"], score=d["score"],
                          interactable=d.get("interactable", True))
            for d in doc.get("detections", [])
        ]
        for scene_id, doc in docs.items() if scene_id in fold_ids
    }
    outside = sorted(set(docs) - set(fold_ids))
    if outside:
        log.warning("ignoring detections for %d scene(s) outside the %s fold: %s",
                    len(outside), fold, ", ".join(outside[:5]))

    if embed_backend == "remote":
        embeddings = EmbeddingClient(RemoteEmbeddingBackend())
    else:
        embeddings = EmbeddingClient(HashEmbeddingBackend())
    matcher = ev.SemanticMatcher(embeddings, threshold=match_threshold)
    thresholds = tuple(float(t) for t in iou_thresholds.split(","))
    report = ev.evaluate(variant, fold_ids, detections, matcher,
                         mode=variant_kind, iou_thresholds=thresholds)
    report.metadata.update({"dataset": dataset, "fold": fold,
                            "split_kind": split.kind, "split_seed": split.seed})
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "metrics.csv").write_text(report.to_csv(), encoding="utf-8")
    summary = report.per_threshold[thresholds[0]]["average"]
    click.echo(f"eval[{variant_kind}/{fold}] IoU {thresholds[0]}: "
               f"P={summary['P']:.4f} R={summary['R']:.4f} "
               f"F1={summary['F1']:.4f} mAP={summary['mAP']:.4f}")


@cli.command("simulate")
@click.option("--dataset", required=True)
@click.option("--app-meta", default=None)
@click.option("--split-manifest", required=True)
@click.option("--fold", default="test", show_default=True,
              type=click.Choice(["train", "val", "test"]))
@click.option("--detections", "detections_dir", default=None,
              help="detection directory (required for --strategy guided)")
@click.option("--strategy", default="random", show_default=True,
              type=click.Choice(["random", "guided"]))
@click.option("--duration", default=60.0, show_default=True, type=float)
@click.option("--interval", default=1.0, show_default=True, type=float)
@click.option("--runs", default=5, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, help="output directory")
def cmd_simulate(dataset, app_meta, split_manifest, fold, detections_dir,
                 strategy, duration, interval, runs, seed, out):
    variant = _load_dataset(dataset, app_meta)
    scenes = _fold_scenes(variant, split_manifest, fold)
    anns = variant.annotations_by_scene()

    detections = None
    if detections_dir:
        docs = _load_detection_docs(detections_dir)
        detections = {
            scene_id: [BoundingBox(d["x"], d["y"], d["w"], d["h"])
                       for d in doc.get("detections", []) if d.get("interactable", True)]
            for scene_id, doc in docs.items()
        }
    config = sim.SimulationConfig(duration=duration, interval=interval,
                                  runs=runs, seed=seed, strategy=strategy)
    trace = sim.simulate(scenes, anns, detections, config)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.json").write_text(trace.to_json(), encoding="utf-8")
    (out_dir / "trace.csv").write_text(trace.to_csv(), encoding="utf-8")
    click.echo(f"simulate[{strategy}]: effective={trace.effective_count[-1]:.2f} "
               f"coverage={trace.coverage[-1]:.4f}"
               + (f" (random fallback: {len(trace.guided_fallback)} scene(s))"
                  if trace.guided_fallback else ""))


@cli.command("report")
@click.option("--metrics", "metrics_files", multiple=True, required=True,
              help="metrics.json files produced by eval; repeatable")
@click.option("--label", "labels", multiple=True,
              help="column-group label per metrics file (defaults to file stem)")
@click.option("--out", required=True, help="merged CSV path")
def cmd_report(metrics_files, labels, out):
    if labels and len(labels) != len(metrics_files):
        raise UsageConfigError("--label count must match --metrics count")
    merged: list[tuple[str, dict]] = []
    for i, path in enumerate(metrics_files):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        label = labels[i] if labels else Path(path).parent.name or Path(path).stem
        merged.append((label, doc))

    thrs = sorted({t for _, doc in merged for t in doc["thresholds"]})
    lines = ["metric," + ",".join(f"{label} IoU {t}" for label, _ in merged
                                  for t in thrs)]
    for metric in ("mAP", "P", "R", "F1"):
        cells = [metric]
        for label, doc in merged:
            for t in thrs:
                value = doc["thresholds"].get(t, {}).get("average", {}).get(metric)
                cells.append("" if value is None else f"{100 * value:.2f}")
        lines.append(",".join(cells))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"wrote {out} ({len(merged)} run(s))")


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except (UsageConfigError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except ProviderError as exc:
        click.echo(f"provider error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
