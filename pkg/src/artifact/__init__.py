"""Flow-analysis laboratory for a labeled lambda calculus.

Concrete and instrumented interpreters, kCFA and monovariant analyses
(0CFA, simple closure analysis, sub-0CFA), linear Boolean encodings,
and generators for circuit, SAT, and Turing-machine flow instances.
"""

__version__ = "0.1.0"
