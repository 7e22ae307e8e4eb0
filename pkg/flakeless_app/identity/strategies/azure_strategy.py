"""
AzureStrategy: private IP from the Azure Instance Metadata Service (text format).
"""

from flakeless_app.identity.models import Provider, ResolverConfig
from .base_strategy import MetadataStrategy


class AzureStrategy(MetadataStrategy):
    name: str = "Azure AKS"
    description: str = "Reads interface/0 privateIpAddress from 169.254.169.254"
    provider: Provider = Provider.AZURE_AKS
    marker_env: str = "AZURE_HTTP_USER_AGENT"

    def run(self, config: ResolverConfig, metadata_client) -> str:
        endpoint = config.endpoint(self.provider)
        body = metadata_client.get(endpoint.url, headers=endpoint.headers)
        return self._checked_ip(body, "Azure IMDS")
