"""
AwsEcsStrategy: private IP from the ECS task metadata endpoint (v4).

The container metadata document lists addresses under
Networks[0].IPv4Addresses[0].
"""

import json

from flakeless_app.errors import MetadataMalformed, MetadataUnreachable
from flakeless_app.identity.models import Provider, ResolverConfig
from .base_strategy import MetadataStrategy

ECS_METADATA_ENV = "ECS_CONTAINER_METADATA_URI_V4"


class AwsEcsStrategy(MetadataStrategy):
    name: str = "AWS ECS/Fargate"
    description: str = "Reads the container metadata document at $ECS_CONTAINER_METADATA_URI_V4"
    provider: Provider = Provider.AWS_ECS
    marker_env: str = "AWS_EXECUTION_ENV"

    def run(self, config: ResolverConfig, metadata_client) -> str:
        url = config.env.get(ECS_METADATA_ENV)
        if not url:
            raise MetadataUnreachable(f"{ECS_METADATA_ENV} is not set")

        body = metadata_client.get(url)
        try:
            document = json.loads(body)
            ip = document["Networks"][0]["IPv4Addresses"][0]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise MetadataMalformed(
                f"ECS metadata has no Networks[0].IPv4Addresses[0] ({type(e).__name__}: {e})"
            ) from None
        return self._checked_ip(ip, "ECS metadata")
