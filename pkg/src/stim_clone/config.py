"""runtime configuration loaded from environment variables"""

import os

# runtime
THREADS = max(1, int(os.getenv("STIMCLONE_THREADS", str(os.cpu_count() or 1))))
LOG_LEVEL = os.getenv("STIMCLONE_LOG_LEVEL", "INFO").upper()
LOG_SAMPLE_RATE = int(os.getenv("STIMCLONE_LOG_SAMPLE_RATE", "20"))

# fock space
FOCK_CUTOFF = int(os.getenv("STIMCLONE_FOCK_CUTOFF", "6"))
PRUNE_THRESHOLD = float(os.getenv("STIMCLONE_PRUNE_THRESHOLD", "1e-14"))

# numerical tolerances
NORM_TOLERANCE = 1e-12
UNITARY_TOLERANCE = 1e-12
TABLE_SUM_TOLERANCE = 1e-12

# coupling above which first-order perturbation theory gets a warning
KAPPA_T_WARN = 0.1

# output formats
CSV_SCHEMA = "stimclone-scan/1"
MANIFEST_VERSION = 1
FLOAT_FORMAT = "{:.12g}"
