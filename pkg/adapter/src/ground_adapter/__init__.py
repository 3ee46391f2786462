"""Reference grounding adapter.

Serves any open-vocabulary grounding/detection model behind the toolkit's
wire protocol: POST /ground with {"image_b64", "descriptions"} returns
{"results": [{"boxes": [{x, y, w, h, score}]}]} aligned to the descriptions;
GET /health reports 503 until the model is loaded. A regex-rule stub model
ships with the adapter so conformance tests run without any weights.
"""

from ground_adapter.config import AdapterConfig
from ground_adapter.service import make_server, serve_ground
from ground_adapter.stub import StubModel

__all__ = ["AdapterConfig", "StubModel", "make_server", "serve_ground"]
