"""scorer-shim: HTTP sidecar serving causal and masked-infill log-probs."""

__version__ = "0.1.0"
