"""Clients for the three external model capabilities.

chat: multimodal chat completion against a prompt-template registry.
embedding: text embedding with an in-run cache and cosine similarity.
grounding: locating image regions for free-text descriptions over the
/ground wire protocol.

Every capability supports a deterministic offline mode (scripted or
synthetic mocks) and a content-addressed record/replay store.
"""
