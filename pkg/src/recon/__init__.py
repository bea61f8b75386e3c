"""Set reconciliation via rateless Bloom filter and rateless IBLT streams.

The package has three layers:

* data structures: :mod:`recon.hashing`, :mod:`recon.bloom`, :mod:`recon.rbf`
  (slice streams), :mod:`recon.riblt` (coded-cell streams);
* the three-phase hybrid sync protocol over a simulated duplex channel with
  byte-exact metering (:mod:`recon.protocol`) plus comparison baselines
  (:mod:`recon.baselines`);
* the benchmark harness: workload generation with controlled Jaccard
  similarity (:mod:`recon.workload`), sweep orchestration and CSV output
  (:mod:`recon.bench`), and the ``recon`` CLI (:mod:`recon.cli`).
"""

from recon.hashing import check_hash, digest, indexed_hash
from recon.protocol import SyncConfig, run_hybrid

__all__ = [
    "check_hash",
    "digest",
    "indexed_hash",
    "run_hybrid",
    "SyncConfig",
]

__version__ = "0.1.0"
