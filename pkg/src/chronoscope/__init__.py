"""chronoscope: a reversible meta-debugger built on checkpoint/re-execute."""

__version__ = "0.1.0"
PROTOCOL_VERSION = "chronoscope/1"
