"""Reaction networks with mass-action propensities."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import InvalidInputError

NETWORK_SCHEMA_VERSION = 1


class ReactionKind(str, enum.Enum):
    SOURCE = "source"  # 0 -> products, a = kappa V
    UNARY = "unary"  # S_i -> products, a = kappa x_i
    BINARY_SAME = "binary_same"  # 2 S_i -> products, a = kappa/V x_i (x_i - 1)
    BINARY_MIXED = "binary_mixed"  # S_i + S_j -> products, a = kappa/V x_i x_j


_N_REACTANTS = {
    ReactionKind.SOURCE: 0,
    ReactionKind.UNARY: 1,
    ReactionKind.BINARY_SAME: 1,
    ReactionKind.BINARY_MIXED: 2,
}


def as_state(x, n_species: int | None = None) -> np.ndarray:
    """Validate a copy-number vector and return it as an int64 array."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise InvalidInputError(f"state must be a vector, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise InvalidInputError(f"state entries must be integers, got {x!r}")
    state = arr.astype(np.int64)
    if np.any(state < 0):
        raise InvalidInputError(f"copy numbers must be non-negative, got {x!r}")
    if n_species is not None and state.shape[0] != n_species:
        raise InvalidInputError(f"state has {state.shape[0]} entries, network has {n_species} species")
    return state


@dataclass(frozen=True)
class Reaction:
    """One mass-action reaction. Species indices are zero-based."""

    kind: ReactionKind
    species: tuple[int, ...]
    rate_constant: float
    state_change: tuple[int, ...]
    volume: float = 1.0
    name: str = ""

    def __post_init__(self):
        kind = ReactionKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "species", tuple(int(s) for s in self.species))
        object.__setattr__(self, "state_change", tuple(int(v) for v in self.state_change))
        object.__setattr__(self, "rate_constant", float(self.rate_constant))
        object.__setattr__(self, "volume", float(self.volume))
        n = len(self.state_change)
        if len(self.species) != _N_REACTANTS[kind]:
            raise InvalidInputError(f"{kind.value} reaction needs {_N_REACTANTS[kind]} species indices, got {self.species}")
        if any(s < 0 or s >= n for s in self.species):
            raise InvalidInputError(f"species index out of range in {self.species} for {n} species")
        if kind is ReactionKind.BINARY_MIXED and self.species[0] == self.species[1]:
            raise InvalidInputError("binary_mixed needs two different species; use binary_same")
        if not any(self.state_change):
            raise InvalidInputError("state-change vector must not be all zeros")
        # zero rate constants are allowed so that absorbing networks can be built
        if not (self.rate_constant >= 0 and np.isfinite(self.rate_constant)):
            raise InvalidInputError(f"rate constant must be finite and >= 0, got {self.rate_constant}")
        if not (self.volume > 0 and np.isfinite(self.volume)):
            raise InvalidInputError(f"volume must be positive, got {self.volume}")

    @property
    def n_species(self) -> int:
        return len(self.state_change)

    def basis_value(self, x) -> float:
        """Propensity per unit rate constant, i.e. ``a(x) / kappa``."""
        kind, V = self.kind, self.volume
        if kind is ReactionKind.SOURCE:
            return V
        i = self.species[0]
        if kind is ReactionKind.UNARY:
            return float(x[i])
        if kind is ReactionKind.BINARY_SAME:
            return float(x[i]) * (float(x[i]) - 1.0) / V
        return float(x[i]) * float(x[self.species[1]]) / V

    def basis_values(self, states: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`basis_value` over rows of ``states``."""
        states = np.asarray(states, dtype=float)
        kind, V = self.kind, self.volume
        if kind is ReactionKind.SOURCE:
            return np.full(states.shape[0], V)
        xi = states[:, self.species[0]]
        if kind is ReactionKind.UNARY:
            return xi.copy()
        if kind is ReactionKind.BINARY_SAME:
            return xi * (xi - 1.0) / V
        return xi * states[:, self.species[1]] / V

    def describe(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"S{k + 1}" for k in range(self.n_species)]
        if self.kind is ReactionKind.SOURCE:
            lhs = "0"
        elif self.kind is ReactionKind.BINARY_SAME:
            lhs = f"2{names[self.species[0]]}"
        else:
            lhs = " + ".join(names[s] for s in self.species)
        return f"{lhs} -> v={self.state_change}"


def mass_action_propensity(reaction: Reaction, x) -> float:
    """Mass-action propensity of ``reaction`` at state ``x``."""
    x = as_state(x)
    if x.shape[0] != reaction.n_species:
        raise InvalidInputError(f"state has {x.shape[0]} species, reaction expects {reaction.n_species}")
    return reaction.rate_constant * reaction.basis_value(x)


@dataclass(frozen=True)
class ReactionNetwork:
    n_species: int
    reactions: tuple[Reaction, ...]
    species_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "reactions", tuple(self.reactions))
        if not self.reactions:
            raise InvalidInputError("a network needs at least one reaction")
        for r in self.reactions:
            if r.n_species != self.n_species:
                raise InvalidInputError(f"reaction {r} has {r.n_species} species, network has {self.n_species}")
        names = tuple(self.species_names) or tuple(f"S{k + 1}" for k in range(self.n_species))
        if len(names) != self.n_species:
            raise InvalidInputError("species_names length does not match n_species")
        object.__setattr__(self, "species_names", names)

    @property
    def rate_constants(self) -> np.ndarray:
        return np.array([r.rate_constant for r in self.reactions])

    @property
    def stoichiometry(self) -> np.ndarray:
        """(N, n) matrix of state-change vectors."""
        return np.array([r.state_change for r in self.reactions], dtype=np.int64)

    def propensities(self, x) -> np.ndarray:
        return np.array([r.rate_constant * r.basis_value(x) for r in self.reactions])

    def with_rates(self, rates) -> "ReactionNetwork":
        rates = list(rates)
        if len(rates) != len(self.reactions):
            raise InvalidInputError("need one rate per reaction")
        rs = tuple(
            Reaction(r.kind, r.species, k, r.state_change, r.volume, r.name) for r, k in zip(self.reactions, rates)
        )
        return ReactionNetwork(self.n_species, rs, self.species_names)

    # -- file format ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": NETWORK_SCHEMA_VERSION,
            "species": list(self.species_names),
            "reactions": [
                {
                    "name": r.name,
                    "kind": r.kind.value,
                    "species": [self.species_names[s] for s in r.species],
                    "rate": r.rate_constant,
                    "volume": r.volume,
                    "change": list(r.state_change),
                }
                for r in self.reactions
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReactionNetwork":
        if not isinstance(data, dict):
            raise InvalidInputError("network description must be a mapping")
        version = data.get("version", NETWORK_SCHEMA_VERSION)
        if version != NETWORK_SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported network schema version {version}")
        try:
            species = [str(s) for s in data["species"]]
            raw = data["reactions"]
        except KeyError as exc:
            raise InvalidInputError(f"network description is missing {exc}") from None
        index = {name: k for k, name in enumerate(species)}
        reactions = []
        for entry in raw:
            try:
                sp = [index[s] if isinstance(s, str) else int(s) for s in entry.get("species", [])]
                change = entry["change"]
                if isinstance(change, dict):
                    vec = [0] * len(species)
                    for name, v in change.items():
                        vec[index[name]] = int(v)
                    change = vec
                reactions.append(
                    Reaction(
                        kind=ReactionKind(entry["kind"]),
                        species=tuple(sp),
                        rate_constant=entry["rate"],
                        state_change=tuple(change),
                        volume=entry.get("volume", 1.0),
                        name=str(entry.get("name", "")),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise InvalidInputError(f"bad reaction entry {entry!r}: {exc}") from None
        return cls(len(species), tuple(reactions), tuple(species))

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "ReactionNetwork":
        return cls.from_dict(yaml.safe_load(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "ReactionNetwork":
        return cls.loads(Path(path).read_text())
