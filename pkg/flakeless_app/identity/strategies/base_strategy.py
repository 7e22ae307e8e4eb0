"""
Base strategy class for identity resolution.

Every provider strategy inherits from this class and implements run().
"""

from abc import ABC, abstractmethod
from typing import Mapping

from flakeless_app.errors import InvalidAddress, MetadataMalformed
from flakeless_app.identity.derivation import parse_ipv4
from flakeless_app.identity.models import Provider, ResolverConfig


class MetadataStrategy(ABC):
    """
    Abstract base class for all address strategies.

    A strategy knows how to recognise its environment and how to ask that
    environment for the workload's private IPv4 address.

    Attributes:
        name: Human-readable name of the strategy
        description: What the strategy talks to
        provider: The Provider this strategy resolves for
        marker_env: Environment variable whose presence selects the strategy
    """

    name: str = "Base Strategy"
    description: str = "Base strategy description"
    provider: Provider = Provider.GENERIC_FALLBACK
    marker_env: str = ""

    def detects(self, env: Mapping[str, str]) -> bool:
        return bool(self.marker_env) and self.marker_env in env

    @abstractmethod
    def run(self, config: ResolverConfig, metadata_client) -> str:
        """
        Fetch the private IPv4 address.

        Args:
            config: Resolver configuration (env map, endpoint overrides, ...)
            metadata_client: Object with get(url, headers) -> str

        Returns:
            Dotted-quad IPv4 string
        """

    @staticmethod
    def _checked_ip(raw: str, origin: str) -> str:
        text = (raw or "").strip()
        try:
            return str(parse_ipv4(text))
        except InvalidAddress as e:
            raise MetadataMalformed(f"{origin} returned an unusable address: {e}") from None

    def __repr__(self) -> str:
        return f"MetadataStrategy(name={self.name}, provider={self.provider.value})"
