"""scoreadapter: inference service behind the relloc remote-scorer contract.

Serves POST /score/frame, /score/relation, /score/qa and GET /health, and
ships an offline extractor that turns frame images into the engine's
feature-record files. Model choice is configuration; the builtin model is
a deterministic embedding+lexical scorer, so recorded responses replay
exactly.
"""

__version__ = "0.1.0"
