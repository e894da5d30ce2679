"""Channel estimation and detection for uplink multi-user MIMO with 1-bit ADCs."""

__version__ = "0.1.0"
