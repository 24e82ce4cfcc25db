"""
Uplink analysis of zero-forcing receivers with imperfect CSI in multicell
massive MIMO.

This package implements the channel model, MMSE estimation under pilot
contamination, ZF detection, the closed-form SINR / rate / outage / SER
expressions and the Monte-Carlo harness that checks them.
"""

__version__ = "0.1.0"
