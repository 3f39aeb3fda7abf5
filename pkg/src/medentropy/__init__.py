"""Diagnosis-uncertainty trajectories from procedure-code sequences.

Subpackages: `corpus` (data model, I/O, synthetic generator + oracle),
`nncore` (reverse-mode autodiff), `seq2seq` (GRU predictor), `entropy`
(trend quantification), `metrics`, `analysis` (tables and cluster trends),
`cli`, and `service` (HTTP inference API).
"""

__version__ = "0.1.0"
