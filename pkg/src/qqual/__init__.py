"""Paired quantum/classical network benchmarks, data-complexity metrics,
and regime-map analysis for model selection.

Submodules: qsim, qdnn, cdnn, optim, datagen, perfmetrics, complexity,
qualifier, dvcs, geometry, svgplot, cli.
"""

__version__ = "0.1.0"
