"""
GenericFallbackStrategy: first usable IPv4 address of the local interfaces.

Interfaces are visited in name order so multi-homed hosts resolve the same
way every time. Loopback, link-local (169.254/16) and IPv6 addresses are
skipped.
"""

import ipaddress
import socket
from typing import Dict, List, Mapping, Optional, Sequence

import psutil

from flakeless_app.errors import NoUsableAddress
from flakeless_app.identity.models import InterfaceSource, Provider, ResolverConfig
from .base_strategy import MetadataStrategy


def local_interface_addresses() -> Dict[str, List[str]]:
    """Map interface name to its IPv4 addresses."""
    return {
        name: [a.address for a in addrs if a.family == socket.AF_INET]
        for name, addrs in psutil.net_if_addrs().items()
    }


def usable_ipv4(interfaces: Mapping[str, Sequence[str]]) -> List[str]:
    candidates = []
    for name in sorted(interfaces):
        for raw in interfaces[name]:
            try:
                address = ipaddress.ip_address(raw.split("%")[0])
            except ValueError:
                continue
            if address.version != 4 or address.is_loopback or address.is_link_local:
                continue
            if address.is_unspecified:
                continue
            candidates.append(str(address))
    return candidates


def read_interfaces(source: Optional[InterfaceSource]) -> Mapping[str, Sequence[str]]:
    return (source or local_interface_addresses)()


class GenericFallbackStrategy(MetadataStrategy):
    name: str = "Generic host"
    description: str = "First non-loopback IPv4 address of the local interfaces"
    provider: Provider = Provider.GENERIC_FALLBACK

    def detects(self, env: Mapping[str, str]) -> bool:
        return True

    def run(self, config: ResolverConfig, metadata_client=None) -> str:
        candidates = usable_ipv4(read_interfaces(config.interface_source))
        if not candidates:
            raise NoUsableAddress("no non-loopback IPv4 address on any local interface")
        return candidates[0]
