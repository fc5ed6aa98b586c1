"""aisroutes: mine geo-referenced standard maritime routes from raw AIS data.

The pipeline discovers ports from vessel behavior, cuts each vessel's
history into port-to-port segments with a finite state machine, groups
segments by port pair and vessel class, and walks each group with an
iterative density-clustering pass that emits standard routes and splits
them where the traffic forks.
"""

__version__ = "0.1.0"
