"""Hadamard sampling patterns for the DMD.

A pattern is a Sylvester-ordered Hadamard matrix whose columns may be
permuted ("scrambled") so that no row contains a long constant run. Column
``i`` of the permuted matrix is the 1D code the scene column meets when it
sits under DMD pattern column ``i``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConstraintInfeasibleError, FormatError, InvalidOrderError

MAX_ORDER = 4096
SCRAMBLE_BUDGET = 10_000
# Swap proposals without improvement before the repair restarts from a fresh draw.
_STALL_LIMIT = 2_000

MAGIC = "PUSHFRAME-PATTERN 1"


def _check_order(n):
    if isinstance(n, (bool, np.bool_)) or not isinstance(n, (int, np.integer)):
        raise InvalidOrderError(f"Hadamard order must be an integer, got {n!r}")
    n = int(n)
    if n < 1 or n > MAX_ORDER or n & (n - 1):
        raise InvalidOrderError(
            f"Hadamard order must be a power of two in [1, {MAX_ORDER}], got {n}"
        )
    return n


def sylvester(n: int) -> np.ndarray:
    """Return the n x n Sylvester Hadamard matrix as int8 entries in {+1, -1}.

    Entry ``(j, i)`` equals ``(-1) ** popcount(j & i)``.
    """
    n = _check_order(n)
    h = np.ones((1, 1), dtype=np.int8)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


def default_max_run(n: int) -> int:
    """Default run-length limit: n/16, floored where that is unreachable.

    Column permutations of small Sylvester matrices cannot get much below
    log2(n), so the limit is never set tighter than that (nor below 2).
    """
    n = _check_order(n)
    return max(n // 16, n.bit_length() - 1, 2)


def _row_runs(matrix):
    """Lengths of every constant run in every row of a 2D array (flattened)."""
    m, n = matrix.shape
    if m == 0 or n == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.ones((m, n + 1), dtype=bool)
    change[:, 1:n] = matrix[:, 1:] != matrix[:, :-1]
    idx = np.flatnonzero(change.ravel())
    row, col = np.divmod(idx, n + 1)
    same_row = row[1:] == row[:-1]
    return (col[1:] - col[:-1])[same_row]


def _max_run_excluding_ones(matrix):
    # Row 0 of a column-permuted Sylvester matrix is the all-ones row.
    runs = _row_runs(matrix[1:])
    return int(runs.max()) if runs.size else 0


def _run_excess(matrix, limit):
    runs = _row_runs(matrix[1:])
    if not runs.size:
        return 0, 0
    return int(np.maximum(runs - limit, 0).sum()), int(runs.max())


@dataclass(frozen=True, eq=False)
class PatternSpec:
    """A (possibly column-permuted) Hadamard pattern.

    Attributes
    ----------
    order : int
        Pattern size n (power of two).
    permutation : tuple of int
        ``permutation[i]`` is the base column shown at pattern column ``i``.
    seed : int or None
        Seed the permutation was drawn from; None for the natural order.
    max_run_limit : int or None
        Run-length limit the permutation was accepted under.
    scale : int
        DMD micromirrors per pattern pixel along each axis.
    """

    order: int
    permutation: tuple = field(default=None)
    seed: int | None = None
    max_run_limit: int | None = None
    scale: int = 4

    def __post_init__(self):
        n = _check_order(self.order)
        object.__setattr__(self, "order", n)
        perm = tuple(range(n)) if self.permutation is None else tuple(int(p) for p in self.permutation)
        if len(perm) != n or sorted(perm) != list(range(n)):
            raise ValueError("permutation must be a bijection on 0..n-1")
        object.__setattr__(self, "permutation", perm)
        if int(self.scale) < 1:
            raise ValueError(f"scale must be a positive integer, got {self.scale}")
        object.__setattr__(self, "scale", int(self.scale))
        if self.max_run_limit is not None and int(self.max_run_limit) < 1:
            raise ValueError("max_run_limit must be positive")

    @classmethod
    def natural(cls, n, scale=4):
        """Unscrambled pattern of order n."""
        return cls(order=n, scale=scale)

    @cached_property
    def base(self) -> np.ndarray:
        return sylvester(self.order)

    @cached_property
    def perm(self) -> np.ndarray:
        return np.asarray(self.permutation, dtype=np.intp)

    @cached_property
    def inverse_perm(self) -> np.ndarray:
        inv = np.empty(self.order, dtype=np.intp)
        inv[self.perm] = np.arange(self.order)
        return inv

    @cached_property
    def matrix(self) -> np.ndarray:
        """The permuted +/-1 matrix; column i is base column permutation[i]."""
        m = self.base[:, self.perm]
        m.setflags(write=False)
        return m

    @property
    def white_column(self) -> int:
        """Pattern column that displays the all-ones base column."""
        return int(self.inverse_perm[0])

    @property
    def is_identity(self) -> bool:
        return self.permutation == tuple(range(self.order))

    def to_text(self) -> str:
        return dumps(self)

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode("ascii")).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, PatternSpec):
            return NotImplemented
        return (self.order, self.permutation, self.seed, self.max_run_limit, self.scale) == (
            other.order, other.permutation, other.seed, other.max_run_limit, other.scale)

    def __hash__(self):
        return hash((self.order, self.permutation, self.seed, self.max_run_limit, self.scale))


def scramble(h, seed: int, max_run_limit: int | None = None, scale: int = 4) -> PatternSpec:
    """Permute the columns of ``h`` until every non-constant row has short runs.

    Column 0 (the all-ones column) stays in place. Each attempt draws a
    uniform permutation of the remaining columns from a generator seeded with
    ``seed`` and then repairs it by random pairwise swaps that never increase
    the total run excess over ``max_run_limit``. Every draw and every swap
    proposal counts against a budget of ``SCRAMBLE_BUDGET`` evaluations.

    Raises
    ------
    ConstraintInfeasibleError
        If the budget runs out; ``best_run`` holds the smallest maximum run
        seen.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidOrderError("expected a square Hadamard matrix")
    n = _check_order(h.shape[0])
    if max_run_limit is None:
        max_run_limit = default_max_run(n)
    max_run_limit = int(max_run_limit)
    if max_run_limit < 2:
        raise ValueError(f"max_run_limit must be >= 2, got {max_run_limit}")
    seed = int(seed)
    if n <= 2:
        return PatternSpec(n, None, seed, max_run_limit, scale)

    rng = np.random.default_rng(seed & 0xFFFF_FFFF_FFFF_FFFF)
    best_run = None
    used = 0
    while used < SCRAMBLE_BUDGET:
        perm = np.concatenate(([0], 1 + rng.permutation(n - 1)))
        cost, run = _run_excess(h[:, perm], max_run_limit)
        used += 1
        best_run = run if best_run is None else min(best_run, run)
        stall = 0
        while cost > 0 and used < SCRAMBLE_BUDGET and stall < _STALL_LIMIT:
            a, b = rng.integers(1, n, size=2)
            if a == b:
                continue
            perm[[a, b]] = perm[[b, a]]
            new_cost, new_run = _run_excess(h[:, perm], max_run_limit)
            used += 1
            if new_cost <= cost:
                stall = 0 if new_cost < cost else stall + 1
                cost, run = new_cost, new_run
                best_run = min(best_run, run)
            else:
                perm[[a, b]] = perm[[b, a]]
                stall += 1
        if cost == 0:
            return PatternSpec(n, tuple(perm.tolist()), seed, max_run_limit, scale)
    raise ConstraintInfeasibleError(
        f"no column permutation of order {n} with row runs <= {max_run_limit} found "
        f"in {SCRAMBLE_BUDGET} attempts (smallest maximum run reached: {best_run})",
        best_run,
    )


def max_row_run(p) -> int:
    """Longest constant run over the rows of the permuted matrix, all-ones row excluded."""
    matrix = p.matrix if isinstance(p, PatternSpec) else np.asarray(p)
    return _max_run_excluding_ones(matrix)


def to_binary_mask(p) -> np.ndarray:
    """Displayed DMD mask: +1 -> 1 (mirror toward detector), -1 -> 0."""
    matrix = p.matrix if isinstance(p, PatternSpec) else np.asarray(p)
    return (matrix > 0).astype(np.uint8)


def dumps(p: PatternSpec, comment: str | None = None) -> str:
    """Pattern file text; ``comment`` lines go after the magic line as '# ...'."""
    lines = [MAGIC]
    if comment:
        lines += ["# " + line for line in comment.splitlines()]
    lines += [
        f"order: {p.order}",
        f"seed: {'none' if p.seed is None else p.seed}",
        f"max_run_limit: {'none' if p.max_run_limit is None else p.max_run_limit}",
        f"scale: {p.scale}",
        "permutation: " + ",".join(str(i) for i in p.permutation),
    ]
    chars = np.where(p.matrix > 0, ord("+"), ord("-")).astype(np.uint8)
    lines.extend(row.tobytes().decode("ascii") for row in chars)
    return "\n".join(lines) + "\n"


def loads(text: str) -> PatternSpec:
    """Parse a pattern file, checking the body against the header."""
    offset = 0
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    offsets = []
    for line in lines:
        offsets.append(offset)
        offset += len(line.encode()) + 1
    # comment lines directly after the magic line carry provenance only
    keep = [k for k in range(len(lines)) if k == 0 or not lines[k].startswith("#")]
    lines = [lines[k] for k in keep]
    offsets = [offsets[k] for k in keep]

    if not lines or lines[0].strip() != MAGIC:
        raise FormatError(f"missing '{MAGIC}' header", 0)
    header = {}
    keys = ("order", "seed", "max_run_limit", "scale", "permutation")
    for k, key in enumerate(keys, start=1):
        if k >= len(lines) or ":" not in lines[k]:
            raise FormatError(f"expected header field '{key}'", offsets[k] if k < len(offsets) else offset)
        name, _, value = lines[k].partition(":")
        if name.strip() != key:
            raise FormatError(f"expected header field '{key}', found '{name.strip()}'", offsets[k])
        header[key] = value.strip()

    def opt_int(key, k):
        v = header[key]
        if v == "none":
            return None
        try:
            return int(v)
        except ValueError:
            raise FormatError(f"bad integer for '{key}': {v!r}", offsets[k]) from None

    try:
        order = int(header["order"])
        scale = int(header["scale"])
        perm = tuple(int(x) for x in header["permutation"].split(","))
    except ValueError as exc:
        raise FormatError(f"bad header value: {exc}", offsets[1]) from None
    try:
        spec = PatternSpec(order, perm, opt_int("seed", 2), opt_int("max_run_limit", 3), scale)
    except (InvalidOrderError, ValueError) as exc:
        raise FormatError(str(exc), offsets[1]) from None

    body = lines[6:]
    if len(body) != order:
        raise FormatError(f"expected {order} pattern rows, found {len(body)}", offset)
    expected = dumps(spec).split("\n")[6:6 + order]
    for j, (got, want) in enumerate(zip(body, expected)):
        if got != want:
            raise FormatError(f"pattern row {j} does not match the permuted Sylvester matrix",
                              offsets[6 + j])
    return spec


def save_pattern(p: PatternSpec, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(p, comment))


def load_pattern(path) -> PatternSpec:
    with open(path, "r", encoding="ascii", newline="\n") as fh:
        return loads(fh.read())
