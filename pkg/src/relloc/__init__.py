"""relloc: answer entity-relation queries over long videos.

The engine names detected entities against anchor embeddings, scores
sampled frames for relevance to the queried entity, pulls subtitle
context around the best frames, and ranks candidate entities by summed
relation scores. All model-dependent scoring lives behind the
ScorerBackend contract (mock / file replay / remote HTTP service).
"""

__version__ = "0.1.0"
