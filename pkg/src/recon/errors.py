"""Exception types shared across the package."""


class ReconError(Exception):
    """Base class for reconciliation failures."""


class ProtocolError(ReconError):
    """Corrupted or out-of-contract message stream (bad tag, bad order, cap hit)."""


class DecodeCorruptionError(ReconError):
    """Coded-cell decode produced an inconsistency, e.g. one digest recovered
    with both origin signs; indicates a hash collision and aborts the run."""
