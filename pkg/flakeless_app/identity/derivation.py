"""
IPv4 address to 16-bit worker ID.

Raw derivation keeps the last two octets: (octet3 << 8) | octet4.
Salted derivation hashes ip, pod UID and a cluster salt with FNV-1a 64 and
keeps the low 16 bits, which hides the address from anyone reading IDs.
"""

import ipaddress
from typing import Iterable, List, Tuple

from flakeless_app.errors import EmptySaltOrUid, InvalidAddress
from flakeless_app.identity.hashing import fnv1a_64

WORKER_ID_SPACE = 1 << 16
_SEPARATOR = b"\x00"


def parse_ipv4(ip: str) -> ipaddress.IPv4Address:
    if not isinstance(ip, str) or not ip.strip():
        raise InvalidAddress(f"expected a dotted-quad IPv4 string, got {ip!r}")
    text = ip.strip()
    if ":" in text:
        raise InvalidAddress(
            f"{text!r} looks like IPv6; worker IDs are derived from IPv4 octets only"
        )
    try:
        return ipaddress.IPv4Address(text)
    except ipaddress.AddressValueError as e:
        raise InvalidAddress(f"{text!r} is not a valid IPv4 address: {e}") from None


def worker_id_from_ip(ip: str) -> int:
    octets = parse_ipv4(ip).packed
    return (octets[2] << 8) | octets[3]


def salted_worker_id(ip: str, pod_uid: str, salt: bytes) -> int:
    address = parse_ipv4(ip)
    if not pod_uid or not salt:
        raise EmptySaltOrUid("salted derivation needs a non-empty pod_uid and salt")
    if isinstance(salt, str):
        salt = salt.encode("utf-8")

    payload = str(address).encode("ascii") + _SEPARATOR + pod_uid.encode("utf-8") + _SEPARATOR + salt
    return fnv1a_64(payload) % WORKER_ID_SPACE


def worker_id_conflicts(cidrs: Iterable[str]) -> List[Tuple[str, str, int]]:
    """
    Find addresses in different pools that share a worker ID.

    Pools carved out of one /16 never conflict; pools from different /16s
    conflict wherever their last two octets line up. Returns
    (first_address, clashing_address, worker_id) triples.
    """
    seen = {}
    conflicts = []
    for cidr in cidrs:
        try:
            network = ipaddress.ip_network(cidr.strip(), strict=False)
        except ValueError as e:
            raise InvalidAddress(f"{cidr!r} is not a valid CIDR block: {e}") from None
        if network.version != 4:
            raise InvalidAddress(f"{cidr!r} is IPv6; only IPv4 pools are supported")

        for address in network.hosts() if network.prefixlen < 31 else network:
            worker_id = worker_id_from_ip(str(address))
            owner = seen.get(worker_id)
            if owner is None:
                seen[worker_id] = (str(address), str(network))
            elif owner[1] != str(network) and owner[0] != str(address):
                conflicts.append((owner[0], str(address), worker_id))
    return conflicts
