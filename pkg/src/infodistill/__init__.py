"""infodistill: distill document-summary datasets from small LM backends.

Pipeline: over-generate candidate pairs with product-of-experts decoding,
filter with information-based critics, self-train the teacher on survivors,
annotate control attributes, and export distillation-ready files.
"""

__version__ = "0.1.0"
