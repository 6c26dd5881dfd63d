"""Detection and characterization of multipath BGP deployments.

Modules: :mod:`mbgp.engine` (route selection and load sharing),
:mod:`mbgp.lgparse` (Looking Glass responses), :mod:`mbgp.campaign`
(detection campaign and aggregation), :mod:`mbgp.trace` (traceroute
analysis), :mod:`mbgp.simulator` (synthetic ground truth) and
:mod:`mbgp.cli`.
"""

__version__ = "0.1.0"
