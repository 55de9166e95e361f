"""Zero-shot program-aided reasoning pipeline.

The package turns a natural-language task prompt into an executable script
via staged model calls, runs the script in a subprocess sandbox, and scores
the captured output against typed ground truth. It also ships generators
for four synthetic task datasets with built-in answer oracles, so the full
pipeline can be exercised and scored without any model at all.
"""

__version__ = "0.1.0"
