"""Action anticipation from precomputed video features.

Fuses per-window visual feature sequences with a class-level semantic
embedding, encodes the fused sequence with a small Transformer, and
decodes the future action with an iterated GRU whose step count equals
the anticipation horizon.
"""

__version__ = "0.1.0"
