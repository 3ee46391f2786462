"""igekit: interactable-GUI-element detection toolkit for VR scene screenshots.

Subpackages cover box geometry and post-processing, COCO-style dataset
ingestion with variant/split derivation, provider clients for chat,
embedding and description-grounding backends (with record/replay), the
three-stage detection pipeline, the open-vocabulary metric suite, and a
Monte-Carlo testing simulator.
"""

__version__ = "0.1.0"
