"""Hadamard mask patterns: natural order, scrambled columns, run limits, files.

Run: python3 demos/01_patterns.py
"""
import tempfile
from pathlib import Path

import numpy as np

from pushframe import (ConstraintInfeasibleError, PatternSpec, default_max_run, load_pattern, max_row_run, save_pattern,
                       scramble, sylvester, to_binary_mask)

# The natural Sylvester matrix: entry (j, i) is +1 or -1 and rows are orthogonal.
h = sylvester(8)
print(h)
print("H H^T == 8 I:", np.array_equal(h @ h.T, 8 * np.eye(8, dtype=int)))

# On the mirror array +1 becomes "on" and -1 becomes "off".
print(to_binary_mask(PatternSpec.natural(8)).astype(int))

# Natural order has long runs of equal values along each row; at n = 128 the
# longest run is half the row.
n = 128
natural = PatternSpec.natural(n)
print("natural max row run:", max_row_run(natural))

# Scrambling permutes columns (column 0 stays put) until the runs are short.
limit = default_max_run(n)
p = scramble(sylvester(n), seed=1)
print(f"scrambled max row run: {max_row_run(p)} (limit {limit})")
print("first permuted columns:", p.permutation[:10])

# Tighter limits are searched within a fixed budget; too tight a limit is an error.
print("limit 10 ->", max_row_run(scramble(sylvester(n), seed=1, max_run_limit=10)))
try:
    scramble(sylvester(n), seed=1, max_run_limit=4)
except ConstraintInfeasibleError as err:
    print("limit 4 ->", err)

# The same seed always gives the same permutation.
print("deterministic:", scramble(sylvester(n), seed=1).permutation == p.permutation)

# Patterns serialize to a small text file; the digest ties streams to patterns.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "pattern.txt"
    save_pattern(p, path, comment="demo pattern")
    back = load_pattern(path)
    print("round trip equal:", back == p, "digest", back.digest)
