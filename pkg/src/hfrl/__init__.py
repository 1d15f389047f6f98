"""Federated reinforcement learning for adaptive traffic signal control.

The package is organised around six pieces:

- ``hfrl.traffic``: a seeded, deterministic queue-server simulator for
  signalised grid networks.
- ``hfrl.agents``: small feed-forward actor/critic networks trained with
  advantage actor-critic updates, written directly against numpy so the
  gradients are exact and checkable.
- ``hfrl.federation``: synchronous parameter aggregation across agents
  (plain averaging, k-means cluster averaging, first-order importance
  weighting).
- ``hfrl.metrics``: travel time, waiting time and a byte-level
  communication cost model.
- ``hfrl.analysis``: parameter similarity, hierarchical grouping and
  round snapshot tooling.
- ``hfrl.experiment``: scenario presets, baseline controllers, the run
  orchestrator and the command line interface.
"""

__version__ = "0.1.0"
