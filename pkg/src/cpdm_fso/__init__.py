"""Monte-Carlo simulator for a CPDM CO-OFDM free-space optical link."""

__version__ = "0.1.0"
