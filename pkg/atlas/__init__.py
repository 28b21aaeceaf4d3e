"""
Convexity atlas: ML detection error rates in AWGN and where they are convex.

Modules:
- constellation: point sets, priors, bit labels, builders, JSON/CSV I/O
- geometry: decision regions as half-space systems, extents, boundedness
- error_engine: seeded Monte Carlo SER/PEP/BER and closed-form oracles
- curvature: second derivatives in SNR and noise power
- convexity_analysis: thresholds, classification, scans and probes
"""

from atlas.errors import AtlasError

__all__ = ["AtlasError"]
