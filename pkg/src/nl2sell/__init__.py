"""NL2SELL: translate natural-language targeting demands into SELL expressions.

SELL (Structured Expression for Labeling Logic) conditions look like
``(key#operator#value)`` and compose with AND/OR. The package covers the
full loop: parsing and printing SELL, validating against a tag catalog,
retrieval-augmented prompt construction, training-corpus synthesis,
evaluation metrics, user selection, and an HTTP service plus CLI.
"""

__version__ = "0.1.0"
