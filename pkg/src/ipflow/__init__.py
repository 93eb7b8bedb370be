"""ipflow: integration pattern contract graphs with cost-guarded rewriting,
a timed db-net execution semantics, and functional-equivalence checking."""

__version__ = "0.1.0"
