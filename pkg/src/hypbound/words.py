"""Reduced-word arithmetic over a symmetric alphabet.

Words are plain ``str`` objects: a lowercase letter is a generator and the
matching uppercase letter its inverse. The empty string is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Sequence

Word = str


class ParseError(ValueError):
    """Raised for malformed words, presentations and input files."""


def inv_letter(x: str) -> str:
    return x.lower() if x.isupper() else x.upper()


@dataclass(frozen=True)
class GeneratorSet:
    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ParseError("generator set is empty")
        for s in self.names:
            if len(s) != 1 or not s.isalpha() or not s.islower():
                raise ParseError(f"generator {s!r} must be a single lowercase letter")
        if len(set(self.names)) != len(self.names):
            raise ParseError(f"duplicate generator names in {self.names}")

    @classmethod
    def free(cls, n: int) -> "GeneratorSet":
        if not 1 <= n <= 26:
            raise ValueError(f"rank must be in 1..26, got {n}")
        return cls(tuple("abcdefghijklmnopqrstuvwxyz"[:n]))

    @property
    def rank(self) -> int:
        return len(self.names)

    @property
    def alphabet(self) -> tuple[str, ...]:
        """Symmetric alphabet in shortlex order: a, A, b, B, ..."""
        out = []
        for s in self.names:
            out += [s, s.upper()]
        return tuple(out)

    def check(self, letters: Iterable[str]) -> None:
        allowed = set(self.alphabet)
        for x in letters:
            if x not in allowed:
                raise ParseError(f"unknown symbol {x!r} (alphabet: {''.join(self.alphabet)})")


def _clean(raw: str | Sequence[str]) -> list[str]:
    if isinstance(raw, str):
        return [c for c in raw if not c.isspace()]
    return [c for tok in raw for c in tok if not c.isspace()]


def reduce(raw: str | Sequence[str], gens: GeneratorSet | None = None) -> Word:
    """Freely reduce a raw letter sequence (stack scan)."""
    letters = _clean(raw)
    if gens is not None:
        gens.check(letters)
    else:
        for c in letters:
            if not c.isalpha() or not c.isascii():
                raise ParseError(f"unknown symbol {c!r}")
    stack: list[str] = []
    for c in letters:
        if stack and stack[-1] == inv_letter(c):
            stack.pop()
        else:
            stack.append(c)
    return "".join(stack)


def is_reduced(w: Word) -> bool:
    return all(w[i + 1] != inv_letter(w[i]) for i in range(len(w) - 1))


def inverse(w: Word) -> Word:
    return "".join(inv_letter(c) for c in reversed(w))


def mul(u: Word, v: Word) -> Word:
    """Product of two reduced words."""
    i = 0
    m = min(len(u), len(v))
    while i < m and u[len(u) - 1 - i] == inv_letter(v[i]):
        i += 1
    return u[: len(u) - i] + v[i:]


def cancellation(u: Word, v: Word) -> int:
    """Number of letters cancelled when forming ``mul(u, v)`` from one side."""
    i = 0
    m = min(len(u), len(v))
    while i < m and u[len(u) - 1 - i] == inv_letter(v[i]):
        i += 1
    return i


def lcp(u: Word, v: Word) -> int:
    i = 0
    m = min(len(u), len(v))
    while i < m and u[i] == v[i]:
        i += 1
    return i


def is_cyclically_reduced(w: Word) -> bool:
    return is_reduced(w) and (len(w) < 2 or w[0] != inv_letter(w[-1]))


def rotations(w: Word) -> list[Word]:
    return [w[i:] + w[:i] for i in range(len(w))]


def shortlex_key(w: Word, alphabet: Sequence[str]) -> tuple:
    order = {c: i for i, c in enumerate(alphabet)}
    return (len(w), tuple(order[c] for c in w))


def words_of_length(gens: GeneratorSet, k: int) -> Iterator[Word]:
    """Reduced words of length exactly ``k`` in shortlex order."""
    alpha = gens.alphabet
    if k == 0:
        yield ""
        return

    def extend(prefix: str, left: int):
        if left == 0:
            yield prefix
            return
        bad = inv_letter(prefix[-1]) if prefix else None
        for c in alpha:
            if c != bad:
                yield from extend(prefix + c, left - 1)

    yield from extend("", k)


def ball_words(gens: GeneratorSet, radius: int) -> list[Word]:
    """All reduced words of length <= radius, shortlex ordered."""
    out: list[Word] = []
    for k in range(radius + 1):
        out.extend(words_of_length(gens, k))
    return out


def sphere_size(n: int, k: int) -> int:
    return 1 if k == 0 else 2 * n * (2 * n - 1) ** (k - 1)


def raw_words(alphabet: Sequence[str], max_len: int) -> Iterator[str]:
    """Every (not necessarily reduced) letter sequence up to ``max_len``."""
    for k in range(max_len + 1):
        for t in product(alphabet, repeat=k):
            yield "".join(t)
