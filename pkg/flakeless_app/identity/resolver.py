"""
Machine identity resolution.

Order of precedence:
1. override_machine_id  -> used as is (derivation Override)
2. override_ip          -> derived locally, no metadata call
3. detect provider -> fetch its address -> derive (salted when salt and pod
   UID are both configured, raw octets otherwise)

Metadata failures degrade to the generic fallback unless strict mode is on.
"""

import logging
from typing import Mapping, Optional

from flakeless_app.errors import (
    FlakelessError,
    InvalidAddress,
    MetadataMalformed,
    MetadataUnreachable,
    ResolutionFailed,
)
from flakeless_app.identity.derivation import parse_ipv4, salted_worker_id, worker_id_from_ip
from flakeless_app.identity.metadata_client import MetadataClient
from flakeless_app.identity.models import (
    Derivation,
    InterfaceSource,
    MachineIdentity,
    Provider,
    ResolverConfig,
)
from flakeless_app.identity.strategies import STRATEGIES, STRATEGY_REGISTRY
from flakeless_app.identity.strategies.fallback_strategy import read_interfaces

logger = logging.getLogger(__name__)


def detect_environment(env: Mapping[str, str]) -> Provider:
    for strategy in STRATEGIES:
        if strategy.detects(env):
            return strategy.provider
    return Provider.GENERIC_FALLBACK


def fetch_ip(provider: Provider, config: ResolverConfig, metadata_client=None) -> str:
    if metadata_client is None:
        metadata_client = MetadataClient(config.metadata_timeout_ms, config.metadata_retries)
    return STRATEGY_REGISTRY[provider].run(config, metadata_client)


def _derive(ip: str, config: ResolverConfig):
    if config.salted:
        return salted_worker_id(ip, config.pod_uid, config.salt), Derivation.SALTED
    return worker_id_from_ip(ip), Derivation.RAW_OCTETS


def resolve_machine_identity(config: ResolverConfig, metadata_client=None) -> MachineIdentity:
    if config.override_machine_id is not None:
        logger.info("[RESOLVER] using explicit machine id %d", config.override_machine_id)
        return MachineIdentity(
            machine_id=config.override_machine_id,
            source_ip="",
            provider=Provider.GENERIC_FALLBACK,
            derivation=Derivation.OVERRIDE,
        )

    try:
        if config.override_ip:
            ip = str(parse_ipv4(config.override_ip))
            machine_id, derivation = _derive(ip, config)
            logger.info("[RESOLVER] using overridden ip, machine id %d", machine_id)
            return MachineIdentity(machine_id, ip, Provider.GENERIC_FALLBACK, derivation)

        provider = detect_environment(config.env)
        degraded_from: Optional[Provider] = None
        try:
            ip = fetch_ip(provider, config, metadata_client)
        except (MetadataUnreachable, MetadataMalformed) as e:
            if config.strict or provider is Provider.GENERIC_FALLBACK:
                raise
            logger.warning("[RESOLVER] %s metadata failed (%s), falling back to local interfaces",
                           provider.value, e)
            degraded_from, provider = provider, Provider.GENERIC_FALLBACK
            ip = fetch_ip(provider, config, metadata_client)

        machine_id, derivation = _derive(ip, config)
    except FlakelessError as e:
        raise ResolutionFailed(f"could not resolve a machine identity: {e}") from e

    identity = MachineIdentity(machine_id, ip, provider, derivation, degraded_from)
    logger.info("[RESOLVER] provider=%s derivation=%s machine_id=%d",
                provider.value, derivation.value, machine_id)
    return identity


def verify_machine_identity(
    identity: MachineIdentity,
    interface_source: Optional[InterfaceSource] = None,
) -> bool:
    """
    Check the identity against the addresses actually bound on this host.

    Overrides carry no address and cannot be verified. A metadata answer that
    does not match any local interface points at spoofed or stale metadata.
    """
    if identity.derivation is Derivation.OVERRIDE or not identity.source_ip:
        return False
    try:
        wanted = parse_ipv4(identity.source_ip)
    except InvalidAddress:
        return False
    for addresses in read_interfaces(interface_source).values():
        for raw in addresses:
            if raw.split("%")[0] == str(wanted):
                return True
    return False
