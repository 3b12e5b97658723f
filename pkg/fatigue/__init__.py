"""
LiteFat: lightweight spatio-temporal graph learning for driver fatigue detection.

Landmark streams are validated and reduced to fixed-length clips
(:mod:`fatigue.ingest`), fused with frame embeddings (:mod:`fatigue.embed`)
and classified per frame by a gated-TCN + adaptive-GCN network
(:mod:`fatigue.network`) trained with Adam (:mod:`fatigue.training`).
"""
