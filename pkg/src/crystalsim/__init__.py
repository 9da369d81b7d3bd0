"""Crystal: Nakamoto consensus with per-block quorum certificates.

Simulation primitives, a discrete-event network simulator and closed-form
analytics for committee security, selfish mining and double-spending.
"""
__version__ = "0.1.0"
