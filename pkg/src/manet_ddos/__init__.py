"""Discrete-event simulation of a flow-monitoring DDoS defense for wireless ad hoc networks."""

__version__ = "0.1.0"
