"""Training side of the region-decomposition toolchain.

Consumes example shards, request logs, and score files produced by the
`shred` service and writes score files its pipeline can replay.
"""

__version__ = "0.1.0"
