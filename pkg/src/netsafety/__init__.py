"""Network-level traffic safety metrics and crash-association analytics.

Pipeline stages, each usable on its own:

- :mod:`netsafety.trajectories` — ingest, repair, smooth, and classify tracks
- :mod:`netsafety.projection` — pixel-to-world homography
- :mod:`netsafety.network_metrics` — per-interval network-level safety metrics
- :mod:`netsafety.surrogate` — pairwise surrogate safety metrics
- :mod:`netsafety.crashes` — crash parsing, binning, validity tests
- :mod:`netsafety.stats` — correlations, regression, chi-square, Shapley
- :mod:`netsafety.association` — the full metrics-vs-crash analysis
- :mod:`netsafety.synth` — synthetic scenario generator with planted effects
"""

__version__ = "0.1.0"
