"""Multi-objective model-based planning for infectious-disease intervention.

The package learns a Bayesian intervention-aware SIR transition model from
surveillance data, searches Pareto-optimal intervention policies over a menu
of trade-off weights, and serves an interactive decision loop where a human
commits actions, observes new data, and re-plans.
"""

__version__ = "0.1.0"
