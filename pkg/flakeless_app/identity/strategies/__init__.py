"""
Identity strategies package.

STRATEGIES is ordered: detection walks it top to bottom and the generic
fallback always matches last.
"""

from .base_strategy import MetadataStrategy
from .aws_strategy import AwsEcsStrategy
from .gcp_strategy import GcpStrategy
from .azure_strategy import AzureStrategy
from .fallback_strategy import GenericFallbackStrategy

STRATEGIES = (
    AwsEcsStrategy(),
    GcpStrategy(),
    AzureStrategy(),
    GenericFallbackStrategy(),
)

STRATEGY_REGISTRY = {strategy.provider: strategy for strategy in STRATEGIES}

__all__ = [
    "MetadataStrategy",
    "AwsEcsStrategy",
    "GcpStrategy",
    "AzureStrategy",
    "GenericFallbackStrategy",
    "STRATEGIES",
    "STRATEGY_REGISTRY",
]
