"""pipecull: meta-knowledge-guided culling of ML pipeline search spaces.

The package covers the full loop: a tree-structured configuration space
over preprocessor/predictor components, budgeted cross-validated search,
a meta-knowledge base aggregating past evaluations, landmark-based space
culling for new datasets, and rank-based statistical comparison of
experimental settings.
"""

__version__ = "0.1.0"
