"""Exposure/gain levels, 2x2 multiplex patterns and equivalence-class enumeration.

A *level* is one ``(tau, alpha)`` setting a control element can take. A
pattern assigns a level to each of the four slots of the 2x2 tile (row-major).
Two patterns are equivalent when one is a slot permutation of the other; each
class is represented by its canonical pattern, whose layout puts the sorted
levels at ``[[1st, 3rd], [4th, 2nd]]``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

M_ELEMENTS = 4

# row-major slot receiving the k-th smallest level in the canonical layout
_CANONICAL_SLOTS = (0, 3, 1, 2)


class Level(NamedTuple):
    tau: float
    alpha: float

    @property
    def product(self) -> float:
        return self.tau * self.alpha

    def sort_key(self) -> tuple[float, float, float]:
        return (self.tau * self.alpha, self.tau, self.alpha)


def _as_level(obj) -> Level:
    if isinstance(obj, Level):
        return obj
    if isinstance(obj, dict):
        return Level(float(obj["tau"]), float(obj["alpha"]))
    tau, alpha = obj
    return Level(float(tau), float(alpha))


def _check_positive(values: Iterable[float], name: str) -> None:
    for v in values:
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} values must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class LevelSet:
    """Ordered set of allowed levels, ascending by ``tau * alpha``.

    Levels with equal products but different ``(tau, alpha)`` are kept apart;
    ties are ordered by tau, then alpha.
    """

    levels: tuple[Level, ...]

    def __post_init__(self):
        levels = tuple(sorted({_as_level(lv) for lv in self.levels}, key=Level.sort_key))
        if not levels:
            raise ValueError("a LevelSet needs at least one level")
        for lv in levels:
            _check_positive(lv, "level")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def cross_product(cls, taus: Sequence[float], gains: Sequence[float]) -> "LevelSet":
        return cls(tuple(Level(float(t), float(a)) for t in taus for a in gains))

    @classmethod
    def default(cls) -> "LevelSet":
        """Nine levels: exposures {0.25, 0.5, 1} x gains {1, 10, 80}.

        Exposure is expressed in units of the global exposure duration (30 ms).
        """
        return cls.cross_product((0.25, 0.5, 1.0), (1.0, 10.0, 80.0))

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self) -> Iterator[Level]:
        return iter(self.levels)

    def __getitem__(self, i: int) -> Level:
        return self.levels[i]

    def __contains__(self, level) -> bool:
        return _as_level(level) in self.levels

    def index(self, level) -> int:
        return self.levels.index(_as_level(level))

    @property
    def taus(self) -> tuple[float, ...]:
        return tuple(sorted({lv.tau for lv in self.levels}))

    def validate(self, pattern: "Pattern") -> None:
        for lv in pattern.levels:
            if lv not in self.levels:
                raise ValueError(f"level {tuple(lv)} is not part of the level set")

    def to_dict(self) -> dict:
        return {"levels": [{"tau": lv.tau, "alpha": lv.alpha} for lv in self.levels]}

    @classmethod
    def from_dict(cls, data) -> "LevelSet":
        if isinstance(data, dict):
            data = data["levels"]
        return cls(tuple(_as_level(item) for item in data))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LevelSet":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Pattern:
    """Row-major 2x2 exposure and gain assignment: slots (0,0), (0,1), (1,0), (1,1)."""

    tau: tuple[float, float, float, float]
    alpha: tuple[float, float, float, float]

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        alpha = tuple(float(a) for a in self.alpha)
        if len(tau) != M_ELEMENTS or len(alpha) != M_ELEMENTS:
            raise ValueError("a 2x2 pattern needs exactly four exposures and four gains")
        _check_positive(tau, "tau")
        _check_positive(alpha, "alpha")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def from_levels(cls, levels: Sequence) -> "Pattern":
        levels = [_as_level(lv) for lv in levels]
        return cls(tuple(lv.tau for lv in levels), tuple(lv.alpha for lv in levels))

    @classmethod
    def uniform(cls, level) -> "Pattern":
        return cls.from_levels([_as_level(level)] * M_ELEMENTS)

    @property
    def levels(self) -> tuple[Level, ...]:
        return tuple(Level(t, a) for t, a in zip(self.tau, self.alpha))

    @property
    def products(self) -> tuple[float, ...]:
        return tuple(t * a for t, a in zip(self.tau, self.alpha))

    def sorted_levels(self) -> tuple[Level, ...]:
        """Levels ascending by product (element 0 is the lowest ``tau * alpha``)."""
        return tuple(sorted(self.levels, key=Level.sort_key))

    def grid(self) -> list[list[Level]]:
        lv = self.levels
        return [[lv[0], lv[1]], [lv[2], lv[3]]]

    def sort_key(self) -> tuple:
        return tuple(itertools.chain.from_iterable((t, a) for t, a in zip(self.tau, self.alpha)))

    def permuted(self, order: Sequence[int]) -> "Pattern":
        lv = self.levels
        return Pattern.from_levels([lv[i] for i in order])

    def to_dict(self) -> dict:
        return {"tau": list(self.tau), "alpha": list(self.alpha)}

    @classmethod
    def from_dict(cls, data: dict) -> "Pattern":
        return cls(tuple(data["tau"]), tuple(data["alpha"]))

    def label(self) -> str:
        return "tau=" + "/".join(f"{t:g}" for t in self.tau) + " alpha=" + "/".join(
            f"{a:g}" for a in self.alpha
        )


def canonicalize(pattern: Pattern) -> Pattern:
    """Return the canonical representative of ``pattern``'s equivalence class.

    Examples
    --------
    >>> canonicalize(Pattern((8, 32, 1, 10), (1, 1, 1, 1))).tau
    (1.0, 10.0, 32.0, 8.0)
    """
    ordered = pattern.sorted_levels()
    slots: list[Level] = [None] * M_ELEMENTS  # type: ignore[list-item]
    for rank, slot in enumerate(_CANONICAL_SLOTS):
        slots[slot] = ordered[rank]
    return Pattern.from_levels(slots)


def is_canonical(pattern: Pattern) -> bool:
    return canonicalize(pattern) == pattern


def class_count(n_levels: int, n_elements: int) -> int:
    """Number of permutation-equivalence classes of ``n_levels ** n_elements`` patterns."""
    if n_levels < 1 or n_elements < 1:
        raise ValueError("both the level count and the element count must be >= 1")
    return sum(
        math.comb(n_levels, k) * math.comb(n_elements - 1, k - 1)
        for k in range(1, min(n_levels, n_elements) + 1)
    )


def combination_iterator(k: int, options: Sequence) -> Iterator[list]:
    """Yield every k-element sub-list of ``options`` once, in lexicographic index order.

    Indices advance with the rightmost-incrementable rule: bump the last index
    that still has room, then reset every index after it to consecutive values.
    """
    n = len(options)
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    indices = list(range(k))
    for _ in range(math.comb(n, k)):
        yield [options[i] for i in indices]
        pivot = None
        for i in range(k - 1, -1, -1):
            if indices[i] < n - k + i:
                indices[i] += 1
                pivot = i
                break
        start = 0 if pivot is None else pivot + 1
        for i in range(start, k):
            indices[i] = indices[i - 1] + 1 if i > 0 else 0


def enumerate_multisets(levels: Sequence, n_elements: int) -> Iterator[tuple]:
    """Enumerate level assignments with one representative per multiset.

    For each number ``k`` of distinct levels used, every k-combination of
    levels is paired with every way of cutting the element list into ``k``
    non-empty runs. Runs are filled left to right, so each emitted tuple is
    ascending in level order.
    """
    options = list(levels)
    n_levels = len(options)
    # the first run always starts at 0, so cuts are chosen among 1..M-1
    cut_positions = list(range(1, n_elements))
    for k in range(1, min(n_levels, n_elements) + 1):
        for selected in combination_iterator(k, options):
            for cuts in combination_iterator(k - 1, cut_positions):
                assignment = [selected[0]] * n_elements
                bounds = list(cuts) + [n_elements]
                for j in range(k - 1):
                    for pos in range(bounds[j], bounds[j + 1]):
                        assignment[pos] = selected[j + 1]
                yield tuple(assignment)


def enumerate_classes(levels: LevelSet | Sequence, n_elements: int = M_ELEMENTS) -> Iterator:
    """Yield one canonical representative per pattern equivalence class.

    With four elements the representatives are canonical :class:`Pattern`
    objects; for other element counts they are level tuples sorted ascending,
    which is the canonical form of a multiset.
    """
    if isinstance(levels, LevelSet):
        levels = levels.levels
    levels = [_as_level(lv) for lv in levels]
    for assignment in enumerate_multisets(levels, n_elements):
        if n_elements == M_ELEMENTS:
            yield canonicalize(Pattern.from_levels(assignment))
        else:
            yield tuple(sorted(assignment, key=Level.sort_key))
