"""
Identity data structures.

Implements:
- Provider: which runtime environment the resolver detected
- Derivation: how the machine ID was obtained
- MachineIdentity: the resolved 16-bit worker ID and its provenance
- MetadataEndpoint / METADATA_ENDPOINTS: the single table of provider URLs
- ResolverConfig: everything resolution depends on
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Mapping, Optional, Sequence

from flakeless_app.errors import InvalidConfig

InterfaceSource = Callable[[], Mapping[str, Sequence[str]]]


class Provider(str, Enum):
    AWS_ECS = "aws_ecs"
    GCP_CLOUD_RUN_OR_GKE = "gcp_cloud_run_or_gke"
    AZURE_AKS = "azure_aks"
    GENERIC_FALLBACK = "generic_fallback"


class Derivation(str, Enum):
    RAW_OCTETS = "raw_octets"
    SALTED = "salted"
    OVERRIDE = "override"


@dataclass(frozen=True)
class MachineIdentity:
    """
    Attributes:
        machine_id: 16-bit worker ID
        source_ip: address the ID came from ("" for an explicit override)
        provider: strategy that produced source_ip
        derivation: raw octets, salted hash, or explicit override
        degraded_from: provider whose metadata failed before falling back
    """
    machine_id: int
    source_ip: str
    provider: Provider
    derivation: Derivation
    degraded_from: Optional[Provider] = None

    @property
    def ip_suffix(self) -> str:
        """octet3.octet4 implied by a raw-octet machine ID."""
        return f"{self.machine_id >> 8}.{self.machine_id & 0xFF}"

    def to_dict(self, include_ip: bool = True) -> Dict:
        data = {
            "machine_id": self.machine_id,
            "provider": self.provider.value,
            "derivation": self.derivation.value,
            "degraded_from": self.degraded_from.value if self.degraded_from else None,
        }
        if include_ip:
            data["source_ip"] = self.source_ip
        return data


@dataclass(frozen=True)
class MetadataEndpoint:
    url: str
    headers: Mapping[str, str] = field(default_factory=dict)


# Documented instance-metadata interfaces. Providers change these over time,
# so every URL lives here and nowhere else. ECS publishes its URL per task via
# ECS_CONTAINER_METADATA_URI_V4 and is therefore not listed.
METADATA_ENDPOINTS: Dict[Provider, MetadataEndpoint] = {
    Provider.GCP_CLOUD_RUN_OR_GKE: MetadataEndpoint(
        url="http://metadata.google.internal/computeMetadata/v1/instance/network-interfaces/0/ip",
        headers={"Metadata-Flavor": "Google"},
    ),
    Provider.AZURE_AKS: MetadataEndpoint(
        url=(
            "http://169.254.169.254/metadata/instance/network/interface/0/ipv4/ipAddress/0/"
            "privateIpAddress?api-version=2021-02-01&format=text"
        ),
        headers={"Metadata": "true"},
    ),
}

ENDPOINT_OVERRIDE_VARS = {
    Provider.GCP_CLOUD_RUN_OR_GKE: "FLAKELESS_GCP_METADATA_URL",
    Provider.AZURE_AKS: "FLAKELESS_AZURE_METADATA_URL",
}

_TRUTHY = {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class ResolverConfig:
    env: Mapping[str, str] = field(default_factory=dict)
    metadata_timeout_ms: int = 1000
    metadata_retries: int = 2
    salt: Optional[bytes] = None
    pod_uid: Optional[str] = None
    override_machine_id: Optional[int] = None
    override_ip: Optional[str] = None
    strict: bool = False
    endpoint_overrides: Mapping[Provider, str] = field(default_factory=dict)
    interface_source: Optional[InterfaceSource] = None

    def __post_init__(self):
        if self.override_machine_id is not None and not 0 <= self.override_machine_id <= 0xFFFF:
            raise InvalidConfig(
                f"override_machine_id {self.override_machine_id} outside [0, 65535]"
            )

    @property
    def salted(self) -> bool:
        return bool(self.salt) and bool(self.pod_uid)

    def endpoint(self, provider: Provider) -> MetadataEndpoint:
        base = METADATA_ENDPOINTS[provider]
        url = self.endpoint_overrides.get(provider)
        return MetadataEndpoint(url=url, headers=base.headers) if url else base

    @classmethod
    def from_env(
        cls,
        env: Mapping[str, str],
        metadata_timeout_ms: int = 1000,
        metadata_retries: int = 2,
        **overrides,
    ) -> "ResolverConfig":
        """Build a config from FLAKELESS_* variables; keyword overrides win."""
        env = dict(env)

        machine_id = env.get("FLAKELESS_MACHINE_ID", "").strip()
        if machine_id:
            try:
                machine_id = int(machine_id)
            except ValueError:
                raise InvalidConfig(
                    f"[ERROR] FLAKELESS_MACHINE_ID must be an integer, got {machine_id!r}"
                ) from None
        salt = env.get("FLAKELESS_SALT") or None

        values = dict(
            env=env,
            metadata_timeout_ms=metadata_timeout_ms,
            metadata_retries=metadata_retries,
            salt=salt.encode("utf-8") if salt else None,
            pod_uid=env.get("FLAKELESS_POD_UID") or None,
            override_machine_id=machine_id if machine_id != "" else None,
            override_ip=env.get("FLAKELESS_IP_OVERRIDE") or None,
            strict=env.get("FLAKELESS_STRICT_RESOLUTION", "").strip().lower() in _TRUTHY,
            endpoint_overrides={
                provider: env[var]
                for provider, var in ENDPOINT_OVERRIDE_VARS.items()
                if env.get(var)
            },
        )
        values.update(overrides)
        return cls(**values)
