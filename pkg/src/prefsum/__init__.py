"""Preference-based interactive multi-document summarisation.

Pipeline: a pool of candidate summaries is queried for pairwise preferences
(actively or via baselines), a blended prior/posterior utility is fitted from
the answers, and an RL stage searches for the best summary under the ranking
that utility induces.  A harness reproduces the simulation experiments at
desk scale and an HTTP service hosts live preference sessions.
"""

__version__ = "0.1.0"
