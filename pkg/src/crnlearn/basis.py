"""Basis functions for channel propensities.

Two families are provided. :class:`BasisLibrary` replicates one polynomial
library over every channel (parameter ``j = i * L + k`` belongs to channel
``i`` and multiplies function ``k``). :class:`ReactionBasis` uses one
mass-action monomial per known reaction, grouped by channel.

Both expose ``index_sets`` and ``evaluate_channel(i, states)``, which is all
the likelihood engine needs.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InconsistentDataError, InvalidInputError
from .model import ReactionNetwork


class BasisKind(str, enum.Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    SQUARE = "square"
    CROSS = "cross"


@dataclass(frozen=True, order=True)
class BasisFunction:
    kind: BasisKind
    species: tuple[int, ...] = ()

    def __post_init__(self):
        kind = BasisKind(self.kind)
        object.__setattr__(self, "kind", kind)
        sp = tuple(int(s) for s in self.species)
        object.__setattr__(self, "species", sp)
        need = {BasisKind.CONSTANT: 0, BasisKind.LINEAR: 1, BasisKind.SQUARE: 1, BasisKind.CROSS: 2}[kind]
        if len(sp) != need:
            raise InvalidInputError(f"{kind.value} basis takes {need} species indices, got {sp}")
        if any(s < 0 for s in sp):
            raise InvalidInputError(f"negative species index in {sp}")
        if kind is BasisKind.CROSS and not sp[0] < sp[1]:
            raise InvalidInputError(f"cross basis indices must be strictly increasing, got {sp}")

    def check(self, n_species: int) -> None:
        if any(s >= n_species for s in self.species):
            raise InvalidInputError(f"basis {self.descriptor()} refers to a species beyond {n_species}")

    def __call__(self, x) -> float:
        return eval_basis(self, x)

    def values(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if self.kind is BasisKind.CONSTANT:
            return np.ones(states.shape[0])
        xi = states[:, self.species[0]]
        if self.kind is BasisKind.LINEAR:
            return xi.copy()
        if self.kind is BasisKind.SQUARE:
            return xi * xi
        return xi * states[:, self.species[1]]

    def descriptor(self) -> str:
        """Human-readable, 1-based: ``1``, ``x1``, ``x2^2``, ``x1*x3``."""
        if self.kind is BasisKind.CONSTANT:
            return "1"
        i = self.species[0] + 1
        if self.kind is BasisKind.LINEAR:
            return f"x{i}"
        if self.kind is BasisKind.SQUARE:
            return f"x{i}^2"
        return f"x{i}*x{self.species[1] + 1}"

    @classmethod
    def parse(cls, text: str) -> "BasisFunction":
        t = text.replace(" ", "")
        if t == "1":
            return cls(BasisKind.CONSTANT)
        if m := re.fullmatch(r"x(\d+)", t):
            return cls(BasisKind.LINEAR, (int(m[1]) - 1,))
        if m := re.fullmatch(r"x(\d+)\^2", t):
            return cls(BasisKind.SQUARE, (int(m[1]) - 1,))
        if m := re.fullmatch(r"x(\d+)\*x(\d+)", t):
            i, j = int(m[1]) - 1, int(m[2]) - 1
            if i == j:
                return cls(BasisKind.SQUARE, (i,))
            return cls(BasisKind.CROSS, (min(i, j), max(i, j)))
        raise InvalidInputError(f"cannot parse basis descriptor {text!r}")


def eval_basis(b: BasisFunction, x) -> float:
    x = np.asarray(x)
    b.check(x.shape[0])
    if b.kind is BasisKind.CONSTANT:
        return 1.0
    xi = float(x[b.species[0]])
    if b.kind is BasisKind.LINEAR:
        return xi
    if b.kind is BasisKind.SQUARE:
        return xi * xi
    return xi * float(x[b.species[1]])


def polynomial_basis(n_species: int, degree: int = 2) -> tuple[BasisFunction, ...]:
    """Canonical polynomial library: 1, x_1..x_n, then x_i^2, x_i x_{i+1}, ..., x_i x_n for each i."""
    if degree not in (0, 1, 2):
        raise InvalidInputError("only polynomial degrees 0, 1 and 2 are supported")
    funcs = [BasisFunction(BasisKind.CONSTANT)]
    if degree >= 1:
        funcs += [BasisFunction(BasisKind.LINEAR, (i,)) for i in range(n_species)]
    if degree >= 2:
        for i in range(n_species):
            funcs.append(BasisFunction(BasisKind.SQUARE, (i,)))
            funcs += [BasisFunction(BasisKind.CROSS, (i, j)) for j in range(i + 1, n_species)]
    return tuple(funcs)


@dataclass(frozen=True)
class BasisLibrary:
    """One list of basis functions, replicated over ``n_channels`` channels."""

    functions: tuple[BasisFunction, ...]
    n_channels: int
    n_species: int

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.functions:
            raise InvalidInputError("empty basis library")
        if len(set(self.functions)) != len(self.functions):
            raise InvalidInputError("duplicate basis functions")
        if self.n_channels < 0:
            raise InvalidInputError("negative channel count")
        for f in self.functions:
            f.check(self.n_species)

    @classmethod
    def polynomial(cls, n_species: int, n_channels: int, degree: int = 2) -> "BasisLibrary":
        return cls(polynomial_basis(n_species, degree), n_channels, n_species)

    @property
    def size(self) -> int:
        """Functions per channel (L)."""
        return len(self.functions)

    @property
    def n_params(self) -> int:
        return self.size * self.n_channels

    @property
    def index_sets(self) -> tuple[np.ndarray, ...]:
        L = self.size
        return tuple(np.arange(i * L, (i + 1) * L) for i in range(self.n_channels))

    def channel_functions(self, i: int) -> tuple[BasisFunction, ...]:
        return self.functions

    def evaluate(self, states) -> np.ndarray:
        """(S, L) matrix of basis values at each row of ``states``."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return np.column_stack([f.values(states) for f in self.functions])

    def evaluate_channel(self, i: int, states) -> np.ndarray:
        return self.evaluate(states)

    def descriptors(self) -> list[str]:
        return [f.descriptor() for f in self.functions]

    def dumps(self) -> list[str]:
        return self.descriptors()

    @classmethod
    def loads(cls, descriptors: Sequence[str], n_channels: int, n_species: int) -> "BasisLibrary":
        return cls(tuple(BasisFunction.parse(d) for d in descriptors), n_channels, n_species)


@dataclass(frozen=True)
class ReactionBasis:
    """Known-structure parametrisation: one rate constant per reaction.

    ``channel_reactions[i]`` lists the network reactions whose state-change
    vector is channel ``i``'s; parameter order follows that listing.
    """

    network: ReactionNetwork
    channel_reactions: tuple[tuple[int, ...], ...]

    @classmethod
    def from_channels(cls, network: ReactionNetwork, channel_vectors) -> "ReactionBasis":
        """Group reactions by channel vector; every observed channel must be explained."""
        groups = []
        for v in channel_vectors:
            members = tuple(k for k, r in enumerate(network.reactions) if r.state_change == tuple(int(a) for a in v))
            if not members:
                raise InconsistentDataError(f"observed channel {tuple(v)} matches no reaction in the network")
            groups.append(members)
        return cls(network, tuple(groups))

    @property
    def n_channels(self) -> int:
        return len(self.channel_reactions)

    @property
    def reaction_ids(self) -> tuple[int, ...]:
        """Network reaction index of each parameter."""
        return tuple(k for group in self.channel_reactions for k in group)

    @property
    def n_params(self) -> int:
        return len(self.reaction_ids)

    @property
    def index_sets(self) -> tuple[np.ndarray, ...]:
        out, start = [], 0
        for group in self.channel_reactions:
            out.append(np.arange(start, start + len(group)))
            start += len(group)
        return tuple(out)

    def evaluate_channel(self, i: int, states) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        rs = self.network.reactions
        return np.column_stack([rs[k].basis_values(states) for k in self.channel_reactions[i]])

    def true_parameters(self) -> np.ndarray:
        rates = self.network.rate_constants
        return np.array([rates[k] for k in self.reaction_ids])
