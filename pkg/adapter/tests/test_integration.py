"""End-to-end: the toolkit's HTTP grounding client against a live adapter."""

import threading
from pathlib import Path

import pytest

igekit = pytest.importorskip("igekit")

from ground_adapter.config import AdapterConfig
from ground_adapter.service import make_server
from ground_adapter.stub import StubModel

DATA = Path(__file__).parent / "data"


@pytest.fixture()
def adapter_url():
    model = StubModel()
    server = make_server("127.0.0.1", 0, model, AdapterConfig())
    model.load()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        thread.join(timeout=5)


def test_toolkit_client_round_trip(adapter_url):
    from igekit.providers.grounding import (
        GroundingClient,
        GroundRequest,
        HttpGroundingBackend,
    )
    from igekit.providers.payloads import ImagePayload

    client = GroundingClient(HttpGroundingBackend(base_url=adapter_url))
    image = ImagePayload.from_file(DATA / "fixture.png")
    req = GroundRequest(image=image,
                        descriptions=("a glazed donut", "an invisible elephant"))
    resp = client.ground(req, image_size=(320, 180))
    assert len(resp.results) == 2
    assert len(resp.results[0]) == 1 and resp.results[0][0].score == 0.9
    assert resp.results[1] == ()
    box = resp.results[0][0].box
    assert box.right <= 320 and box.bottom <= 180
