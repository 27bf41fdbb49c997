"""piqlb: confidential, integrity-verifiable aggregate queries over
replicated append-only ledgers, built on function secret sharing."""

__version__ = "0.1.0"
