"""Binary-firing spiking networks trained by discrete STDP, reward and novelty."""
from .network import NetworkConfig, Network, Role, build_topology

__version__ = "0.1.0"
