"""edgelimits: simulation and verification lab for induced-subgraph edge counts.

The package measures how the edge count e(S) of a uniformly random k-subset S
of a dense graph approaches its Gaussian limit, both in distribution (CLT
scale) and pointwise on the lattice (LLT scale), and verifies the exact
algebraic identities behind those limits against brute-force oracles.

Modules
-------
graphs     uniform M-edge / independent-edge generators, degree statistics
subsets    k-subset states, swap updates, exact enumeration, MC sampling
stein      exchangeable-pair drift/covariance matrices and A/B diagnostics
models     Gaussian and binomial reference models, distance statistics
smoothing  valid triples, interval-length schedules, window concentration
records    flat run-record schemas and deterministic serialization
cli        command-line front door (see `edgelimits --help`)
"""
from __future__ import annotations

__version__ = "0.1.0"
