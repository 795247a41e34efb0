"""Abstract contracts implemented in iqsync.infrastructure."""
