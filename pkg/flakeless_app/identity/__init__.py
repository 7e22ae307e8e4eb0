"""
Identity resolution: turn the host's private IPv4 address into a worker ID.
"""

from .derivation import parse_ipv4, salted_worker_id, worker_id_conflicts, worker_id_from_ip
from .hashing import fnv1a_64
from .metadata_client import MetadataClient
from .models import Derivation, MachineIdentity, Provider, ResolverConfig
from .resolver import (
    detect_environment,
    fetch_ip,
    resolve_machine_identity,
    verify_machine_identity,
)

__all__ = [
    "Provider",
    "Derivation",
    "MachineIdentity",
    "ResolverConfig",
    "MetadataClient",
    "fnv1a_64",
    "parse_ipv4",
    "worker_id_from_ip",
    "salted_worker_id",
    "worker_id_conflicts",
    "detect_environment",
    "fetch_ip",
    "resolve_machine_identity",
    "verify_machine_identity",
]
