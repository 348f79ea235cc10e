"""taintforge: static SSRF taint analysis for PHP projects."""

__version__ = "0.1.0"
