"""Hardware-aware evolutionary search over decoupled-attention transformers.

The package is organised around one genome format (``ihasearch.genome``) that
every other layer consumes: a numeric attention reference kernel
(``ihasearch.attention``), a trainable accuracy surrogate
(``ihasearch.surrogate``), analytical hardware-cost backends
(``ihasearch.hwcost``), ranking / Pareto diagnostics (``ihasearch.metrics``)
and the NSGA-II engine (``ihasearch.search``). ``ihasearch.cli`` exposes the
whole stack as subcommands.
"""

__version__ = "0.1.0"
