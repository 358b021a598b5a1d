"""Trading-auction consensus with taxation-like oversight.

Self-interested agents agree on one joint choice through an asset-trading
auction while an outer oversight loop steers outcomes toward system
efficiency and fairness. Includes analytical bound verification, baseline
mechanisms, a synthetic trajectory-coordination case study, and a Monte
Carlo experiment harness.
"""

from . import analysis, baselines, candidates, ctop, harness, model, oversight, taco

__all__ = [
    "analysis",
    "baselines",
    "candidates",
    "ctop",
    "harness",
    "model",
    "oversight",
    "taco",
]
