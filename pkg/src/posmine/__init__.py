"""posmine: a two-miner proof-of-stake longest-chain mining game.

Miner 2 always plays the frontier policy (publish each new block on the
longest chain immediately).  Miner 1 creates each round's block with
probability ``alpha`` and may withhold and re-order its blocks.  The package
provides the block-tree state model, the frontier / withhold-and-overtake
strategies, structural classifiers (timeserving, orderly, checkpoints, ...),
strategy reductions, and exact plus Monte-Carlo revenue analysis.
"""

__version__ = "0.1.0"
