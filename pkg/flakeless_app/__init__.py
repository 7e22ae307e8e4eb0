"""
flakeless: stateless Snowflake-style 64-bit IDs whose worker ID comes from
the host's private IPv4 address.
"""

__version__ = "1.0.0"
