"""
GcpStrategy: private IP from the Google Compute metadata server.

K_SERVICE is a Cloud Run variable; GKE pods only match when it is set for
them, which is how detection is specified.
"""

from flakeless_app.identity.models import Provider, ResolverConfig
from .base_strategy import MetadataStrategy


class GcpStrategy(MetadataStrategy):
    name: str = "Google Cloud Run/GKE"
    description: str = "Reads network-interfaces/0/ip from metadata.google.internal"
    provider: Provider = Provider.GCP_CLOUD_RUN_OR_GKE
    marker_env: str = "K_SERVICE"

    def run(self, config: ResolverConfig, metadata_client) -> str:
        endpoint = config.endpoint(self.provider)
        body = metadata_client.get(endpoint.url, headers=endpoint.headers)
        return self._checked_ip(body, "GCP metadata")
