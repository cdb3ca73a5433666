"""Words over the six generators, freely reduced, with their word-metric cost."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

GENERATORS = ("fhat", "f", "g", "hhat", "h", "psi")

Letter = tuple[str, int]


def _reduce(letters: Iterable[Letter]) -> tuple[Letter, ...]:
    out: list[list] = []
    for gen, e in letters:
        if gen not in GENERATORS:
            raise ValueError(f"unknown generator {gen!r}")
        e = int(e)
        if e == 0:
            continue
        if out and out[-1][0] == gen:
            out[-1][1] += e
            if out[-1][1] == 0:
                out.pop()
        else:
            out.append([gen, e])
    return tuple((g, e) for g, e in out)


@dataclass(frozen=True)
class GeneratorWord:
    """Product of generator powers, left to right; the rightmost letter acts first."""

    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", _reduce(self.letters))

    @classmethod
    def of(cls, *letters: Letter) -> "GeneratorWord":
        return cls(tuple(letters))

    @classmethod
    def gen(cls, name: str, exponent: int = 1) -> "GeneratorWord":
        return cls(((name, exponent),))

    @property
    def length(self) -> int:
        return sum(abs(e) for _, e in self.letters)

    def __len__(self) -> int:
        return self.length

    def __mul__(self, other: "GeneratorWord") -> "GeneratorWord":
        return GeneratorWord(self.letters + other.letters)

    def inverse(self) -> "GeneratorWord":
        return GeneratorWord(tuple((g, -e) for g, e in reversed(self.letters)))

    def __pow__(self, n: int) -> "GeneratorWord":
        base = self if n >= 0 else self.inverse()
        return GeneratorWord(base.letters * abs(int(n)))

    def conjugate_by(self, other: "GeneratorWord") -> "GeneratorWord":
        """``other * self * other^-1``."""
        return other * self * other.inverse()

    def expanded(self) -> tuple[Letter, ...]:
        """One (generator, +-1) letter per unit of length."""
        return tuple((g, 1 if e > 0 else -1) for g, e in self.letters for _ in range(abs(e)))

    def count(self, gen: str) -> int:
        return sum(abs(e) for g, e in self.letters if g == gen)

    def __str__(self) -> str:
        if not self.letters:
            return "1"
        return " ".join(g if e == 1 else f"{g}^{e}" for g, e in self.letters)

    def to_json(self) -> list:
        return [[g, e] for g, e in self.letters]

    @classmethod
    def from_json(cls, obj) -> "GeneratorWord":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(tuple((g, int(e)) for g, e in obj))


IDENTITY_WORD = GeneratorWord()
