"""Multi-seed repetitions, sweeps and report emission."""
