"""Propaganda-network analysis over tweet corpora.

Polarization scoring from hashtag seeds, keyword-query propaganda items,
retweet graphs, Louvain clustering and centrality rankings.
"""

__version__ = "0.1.0"


class PropnetError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(PropnetError):
    exit_code = 2


class DataError(PropnetError):
    exit_code = 3


class ConvergenceError(PropnetError):
    """An iterative solver ran out of iterations.

    Carries the last iterate and the residual reached.
    """

    exit_code = 4

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
