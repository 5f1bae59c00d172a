"""Non-negative utility tables g(u, x, a) over finite alphabets."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import Alphabet, TabularWorld


@dataclass(frozen=True)
class UtilityTable:
    """Dense utility g(u, x, a), stored as values[u, x, a] with g >= 0."""

    u_alphabet: Alphabet
    x_alphabet: Alphabet
    a_alphabet: Alphabet
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = (self.u_alphabet.size, self.x_alphabet.size, self.a_alphabet.size)
        if values.shape != expected:
            raise ValidationError(
                f"utility table has shape {values.shape}, expected {expected} ([u][x][a])"
            )
        if np.any(values < 0):
            u, x, a = np.unravel_index(int(np.argmin(values)), values.shape)
            raise ValidationError(
                f"utility entry [u={u}][x={x}][a={a}] is negative: {values[u, x, a]}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def require_alphabets(self, world: TabularWorld) -> None:
        if (
            self.u_alphabet != world.u_alphabet
            or self.x_alphabet != world.x_alphabet
            or self.a_alphabet != world.a_alphabet
        ):
            raise ValidationError("utility table alphabets do not match the world")

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    def depends_only_on_u(self) -> bool:
        return bool(np.all(self.values == self.values[:, :1, :1]))

    def independent_of_a(self) -> bool:
        return bool(np.all(self.values == self.values[:, :, :1]))

    def scaled(self, c: float) -> "UtilityTable":
        if c <= 0:
            raise ValidationError(f"scale factor must be positive, got {c}")
        return UtilityTable(
            self.u_alphabet, self.x_alphabet, self.a_alphabet, self.values * c
        )

    @classmethod
    def constant(cls, world: TabularWorld, value: float = 1.0) -> "UtilityTable":
        shape = (world.u_alphabet.size, world.x_alphabet.size, world.a_alphabet.size)
        return cls(world.u_alphabet, world.x_alphabet, world.a_alphabet, np.full(shape, value))

    @classmethod
    def from_u_function(cls, world: TabularWorld, fn) -> "UtilityTable":
        """g depending on the decision only: g(u, x, a) = fn(u label)."""
        col = np.array([float(fn(lbl)) for lbl in world.u_alphabet.labels])
        values = np.broadcast_to(
            col[:, None, None],
            (world.u_alphabet.size, world.x_alphabet.size, world.a_alphabet.size),
        )
        return cls(world.u_alphabet, world.x_alphabet, world.a_alphabet, values)

    @classmethod
    def u_value(cls, world: TabularWorld) -> "UtilityTable":
        """g(u) = numeric value of the decision label (e.g. labels "0"/"1")."""

        def parse(lbl: str) -> float:
            try:
                return float(lbl)
            except ValueError:
                raise ValidationError(
                    f"u_value utility needs numeric decision labels, got {lbl!r}"
                ) from None

        return cls.from_u_function(world, parse)

    @classmethod
    def indicator_u_equals_a(cls, world: TabularWorld) -> "UtilityTable":
        """Task-burden cost g(u, x, a) = 1 when the decision label equals a."""
        nu, nx, na = world.u_alphabet.size, world.x_alphabet.size, world.a_alphabet.size
        values = np.zeros((nu, nx, na))
        for ui, ulbl in enumerate(world.u_alphabet.labels):
            for ai, albl in enumerate(world.a_alphabet.labels):
                if ulbl == albl:
                    values[ui, :, ai] = 1.0
        return cls(world.u_alphabet, world.x_alphabet, world.a_alphabet, values)


def utility_from_dict(data: dict, world: TabularWorld) -> UtilityTable:
    """Parse the utility JSON: a dense "g" array or a "kind" shorthand."""
    if "g" in data:
        dense = np.asarray(data["g"], dtype=float)
        return UtilityTable(world.u_alphabet, world.x_alphabet, world.a_alphabet, dense)
    kind = data.get("kind")
    if kind == "u_value":
        return UtilityTable.u_value(world)
    if kind == "indicator_u_equals_a":
        return UtilityTable.indicator_u_equals_a(world)
    raise ValidationError(
        f"utility file must provide a dense 'g' array or a known 'kind', got {data!r}"
    )


def load_utility(path, world: TabularWorld) -> UtilityTable:
    with open(path, "r", encoding="utf-8") as fh:
        return utility_from_dict(json.load(fh), world)
