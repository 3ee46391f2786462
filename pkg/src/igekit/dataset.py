"""COCO-format dataset ingestion, variant derivation, and 6:1:3 splits.

The corpus is a set of VR scene screenshots (one right-eye image per scene)
with open-vocabulary interactable-element annotations. A sidecar file maps
each app to its store-page metadata (name, genres, description text).
"""

from __future__ import annotations

import json
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from igekit.errors import (
    BoundsError,
    EmptyFold,
    MissingCounterparts,
    MissingFile,
    SchemaError,
)
from igekit.geometry import BoundingBox

VARIANT_KINDS = ("semantics", "interactability", "context")
SPLIT_KINDS = ("app", "genre", "context_sensitive")
SPLIT_RATIO = (6, 1, 3)
INTERACTABLE_CATEGORY = "interactable"


@dataclass(frozen=True)
class Scene:
    scene_id: str
    app_id: str
    width: float
    height: float
    image_uri: str
    genres: tuple[str, ...] = ()


@dataclass(frozen=True)
class Annotation:
    ann_id: str
    scene_id: str
    box: BoundingBox
    category: str
    interactable: bool = True


@dataclass(frozen=True)
class AppInfo:
    app_id: str
    name: str = ""
    genres: tuple[str, ...] = ()
    store_page_text: str = ""


@dataclass(frozen=True)
class DatasetVariant:
    kind: str
    scenes: tuple[Scene, ...]
    annotations: tuple[Annotation, ...]
    apps: Mapping[str, AppInfo] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant kind {self.kind!r}")

    @property
    def category_universe(self) -> frozenset[str]:
        return frozenset(a.category for a in self.annotations)

    def scene(self, scene_id: str) -> Scene:
        return self._scene_index()[scene_id]

    def _scene_index(self) -> dict[str, Scene]:
        return {s.scene_id: s for s in self.scenes}

    def annotations_by_scene(self) -> dict[str, list[Annotation]]:
        out: dict[str, list[Annotation]] = defaultdict(list)
        for a in self.annotations:
            out[a.scene_id].append(a)
        return out

    def summary(self) -> dict[str, int]:
        return {
            "scenes": len(self.scenes),
            "annotations": len(self.annotations),
            "categories": len(self.category_universe),
            "apps": len({s.app_id for s in self.scenes}),
        }


@dataclass(frozen=True)
class Split:
    kind: str
    seed: int
    train: frozenset[str]
    val: frozenset[str]
    test: frozenset[str]

    def fold(self, name: str) -> frozenset[str]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]

    def to_manifest(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "train": sorted(self.train),
            "val": sorted(self.val),
            "test": sorted(self.test),
        }

    @classmethod
    def from_manifest(cls, doc: Mapping) -> "Split":
        return cls(kind=doc["kind"], seed=int(doc["seed"]),
                   train=frozenset(doc["train"]), val=frozenset(doc["val"]),
                   test=frozenset(doc["test"]))


def write_split_manifest(split: Split, path: str | Path) -> None:
    Path(path).write_text(json.dumps(split.to_manifest(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_split_manifest(path: str | Path) -> Split:
    p = Path(path)
    if not p.exists():
        raise MissingFile(str(p))
    return Split.from_manifest(json.loads(p.read_text(encoding="utf-8")))


# --- ingestion --------------------------------------------------------------

def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise SchemaError(f"{where}: missing field '{key}'")
    return doc[key]


def load_app_metadata(path: str | Path) -> dict[str, AppInfo]:
    p = Path(path)
    if not p.exists():
        raise MissingFile(str(p))
    doc = json.loads(p.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise SchemaError("app metadata: top level must be an object keyed by app_id")
    apps = {}
    for app_id, meta in doc.items():
        apps[app_id] = AppInfo(
            app_id=app_id,
            name=str(meta.get("name", "")),
            genres=tuple(meta.get("genres", [])),
            store_page_text=str(meta.get("store_page_text", "")),
        )
    return apps


def load_coco(path: str | Path, app_metadata: str | Path | None = None,
              on_bounds: str = "reject") -> DatasetVariant:
    """Load a COCO detection file into a semantics-kind dataset.

    Interactability rides in the optional per-annotation "interactable"
    attribute (absent means true). Boxes outside their image either raise
    BoundsError (on_bounds="reject") or are clamped (on_bounds="clamp").
    """
    if on_bounds not in ("reject", "clamp"):
        raise ValueError(f"on_bounds must be 'reject' or 'clamp', got {on_bounds!r}")
    p = Path(path)
    if not p.exists():
        raise MissingFile(str(p))
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{p}: not valid JSON ({exc})") from exc

    images = _require(doc, "images", str(p))
    annotations = _require(doc, "annotations", str(p))
    categories = _require(doc, "categories", str(p))

    cat_names: dict[int, str] = {}
    for c in categories:
        cid = _require(c, "id", "categories[]")
        name = str(_require(c, "name", "categories[]"))
        if not name:
            raise SchemaError("categories[]: empty 'name'")
        cat_names[int(cid)] = name

    apps = load_app_metadata(app_metadata) if app_metadata else {}

    scenes: list[Scene] = []
    seen_ids: set[str] = set()
    for img in images:
        sid = str(_require(img, "id", "images[]"))
        if sid in seen_ids:
            raise SchemaError(f"images[]: duplicate id {sid}")
        seen_ids.add(sid)
        w = float(_require(img, "width", f"images[{sid}]"))
        h = float(_require(img, "height", f"images[{sid}]"))
        if w <= 0 or h <= 0:
            raise SchemaError(f"images[{sid}]: non-positive width/height")
        app_id = str(img.get("app_id", "unknown"))
        genres = apps[app_id].genres if app_id in apps else ()
        scenes.append(Scene(scene_id=sid, app_id=app_id, width=w, height=h,
                            image_uri=str(img.get("file_name", "")), genres=genres))
    scene_by_id = {s.scene_id: s for s in scenes}

    anns: list[Annotation] = []
    for raw in annotations:
        aid = str(_require(raw, "id", "annotations[]"))
        sid = str(_require(raw, "image_id", f"annotations[{aid}]"))
        if sid not in scene_by_id:
            raise SchemaError(f"annotations[{aid}]: unknown image_id {sid}")
        cid = int(_require(raw, "category_id", f"annotations[{aid}]"))
        if cid not in cat_names:
            raise SchemaError(f"annotations[{aid}]: unknown category_id {cid}")
        bbox = _require(raw, "bbox", f"annotations[{aid}]")
        if not (isinstance(bbox, (list, tuple)) and len(bbox) == 4):
            raise SchemaError(f"annotations[{aid}]: bbox must be [x, y, w, h]")
        x, y, w, h = (float(v) for v in bbox)
        if w <= 0 or h <= 0:
            raise SchemaError(f"annotations[{aid}]: non-positive bbox extent")
        scene = scene_by_id[sid]
        box = BoundingBox(x, y, w, h)
        if x < 0 or y < 0 or x + w > scene.width or y + h > scene.height:
            if on_bounds == "reject":
                raise BoundsError(f"annotation {aid} outside scene {sid} "
                                  f"({box.as_tuple()} vs {scene.width}x{scene.height})")
            clamped = box.clamped(scene.width, scene.height)
            if clamped is None:
                raise BoundsError(f"annotation {aid} entirely outside scene {sid}")
            box = clamped
        anns.append(Annotation(ann_id=aid, scene_id=sid, box=box,
                               category=cat_names[cid],
                               interactable=bool(raw.get("interactable", True))))

    return DatasetVariant(kind="semantics", scenes=tuple(scenes),
                          annotations=tuple(anns), apps=apps)


def to_coco_dict(ds: DatasetVariant) -> dict:
    """Serialize back to the COCO detection schema (round-trip form)."""
    cats = sorted(ds.category_universe)
    cat_ids = {name: i + 1 for i, name in enumerate(cats)}
    return {
        "images": [
            {"id": s.scene_id, "file_name": s.image_uri,
             "width": s.width, "height": s.height, "app_id": s.app_id}
            for s in ds.scenes
        ],
        "annotations": [
            {"id": a.ann_id, "image_id": a.scene_id,
             "category_id": cat_ids[a.category],
             "bbox": list(a.box.as_tuple()), "interactable": a.interactable}
            for a in ds.annotations
        ],
        "categories": [{"id": cat_ids[n], "name": n} for n in cats],
    }


# --- variants ---------------------------------------------------------------

def derive_variant(base: DatasetVariant, kind: str,
                   context_categories: Sequence[str] | None = None) -> DatasetVariant:
    """Derive one of the three dataset variants from the semantics base.

    interactability: every category rewritten to "interactable".
    context: restricted to the sampled categories, keeping both their
    interactable annotations and non-interactable counterparts.
    """
    if base.kind != "semantics":
        raise ValueError("variants derive from the semantics base dataset")
    if kind == "semantics":
        return base
    if kind == "interactability":
        anns = tuple(replace(a, category=INTERACTABLE_CATEGORY) for a in base.annotations)
        return DatasetVariant(kind=kind, scenes=base.scenes, annotations=anns, apps=base.apps)
    if kind == "context":
        if context_categories is None:
            raise ValueError("context variant requires the sampled category list")
        sample = set(context_categories)
        anns = tuple(a for a in base.annotations if a.category in sample)
        if not any(not a.interactable for a in anns):
            raise MissingCounterparts(
                "context variant requires non-interactable counterpart annotations")
        return DatasetVariant(kind=kind, scenes=base.scenes, annotations=anns, apps=base.apps)
    raise ValueError(f"unknown variant kind {kind!r}")


# --- splits -----------------------------------------------------------------

def _greedy_assign(groups: Sequence[tuple[str, list[str]]],
                   total_scenes: int) -> dict[str, list[str]]:
    """Assign whole groups to folds, greedily chasing the 6:1:3 targets.

    Each group goes to the fold with the largest remaining deficit relative
    to its target image count (ties favor train, then val, then test), so
    the small val fold is not starved by large apps.
    """
    names = ("train", "val", "test")
    targets = [total_scenes * r / sum(SPLIT_RATIO) for r in SPLIT_RATIO]
    counts = [0, 0, 0]
    folds: dict[str, list[str]] = {n: [] for n in names}
    for _, scene_ids in groups:
        deficits = [(targets[i] - counts[i]) / targets[i] for i in range(3)]
        pick = max(range(3), key=lambda i: (deficits[i], -i))
        folds[names[pick]].extend(scene_ids)
        counts[pick] += len(scene_ids)
    return folds


def make_split(ds: DatasetVariant, kind: str, seed: int,
               context_categories: Sequence[str] | None = None) -> Split:
    """Partition scenes into train/val/test targeting a 6:1:3 ratio.

    app: whole apps assigned to folds. genre: apps stratified by genre
    (most common genres first) before the same assignment. context_sensitive:
    every scene containing a sampled category is forced into test; the rest
    are split 6:1 into train/val.
    """
    if kind not in SPLIT_KINDS:
        raise ValueError(f"unknown split kind {kind!r}")
    if not ds.scenes:
        raise EmptyFold("dataset has no scenes")
    rng = random.Random(seed)
    scenes_by_app: dict[str, list[str]] = defaultdict(list)
    for s in ds.scenes:
        scenes_by_app[s.app_id].append(s.scene_id)

    if kind == "context_sensitive":
        if not context_categories:
            raise ValueError("context_sensitive split requires the sampled category list")
        sample = set(context_categories)
        forced = {a.scene_id for a in ds.annotations if a.category in sample}
        rest = sorted(s.scene_id for s in ds.scenes if s.scene_id not in forced)
        rng.shuffle(rest)
        if not rest and len(ds.scenes) > 1:
            raise EmptyFold("every scene contains a sampled category; train/val empty")
        n_train = round(len(rest) * 6 / 7)
        train, val = rest[:n_train], rest[n_train:]
        return Split(kind=kind, seed=seed, train=frozenset(train),
                     val=frozenset(val), test=frozenset(forced))

    app_ids = sorted(scenes_by_app)
    rng.shuffle(app_ids)
    if kind == "genre":
        # Stratify: bucket apps under their first listed genre, visit genres
        # by descending frequency so common genres spread across folds first.
        genre_of = {}
        for app_id in app_ids:
            info = ds.apps.get(app_id)
            genre_of[app_id] = (info.genres[0] if info and info.genres else "")
        freq = Counter(genre_of.values())
        app_ids = sorted(app_ids, key=lambda a: (-freq[genre_of[a]], genre_of[a],
                                                 app_ids.index(a)))
    if len(app_ids) < 3:
        raise EmptyFold(f"{len(app_ids)} apps cannot populate three folds")

    groups = [(app_id, sorted(scenes_by_app[app_id])) for app_id in app_ids]
    folds = _greedy_assign(groups, len(ds.scenes))
    if not all(folds[n] for n in ("train", "val", "test")):
        raise EmptyFold("dataset too small to honor 6:1:3 at app granularity")
    return Split(kind=kind, seed=seed,
                 train=frozenset(folds["train"]),
                 val=frozenset(folds["val"]),
                 test=frozenset(folds["test"]))
