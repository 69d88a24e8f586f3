"""Reference networks used by the experiments, configs and tests."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Reaction, ReactionKind, ReactionNetwork

U, S, M, Z = ReactionKind.UNARY, ReactionKind.BINARY_SAME, ReactionKind.BINARY_MIXED, ReactionKind.SOURCE


@dataclass(frozen=True)
class Scenario:
    name: str
    network: ReactionNetwork
    x0: tuple[int, ...]
    horizon: float
    n_trajectories: int
    epsilon: float = 0.1
    lam: float | dict = 0.01
    rel_tol: float = 5e-8
    precondition: str = "curvature"
    notes: str = ""
    extra: dict = field(default_factory=dict)


def example1_network(rates=(1.0, 0.1, 1.0, 0.9)) -> ReactionNetwork:
    """A -> 0, A + B -> 2B, B -> 0, A -> 2A."""
    k = rates
    return ReactionNetwork(
        2,
        (
            Reaction(U, (0,), k[0], (-1, 0), name="R1"),
            Reaction(M, (0, 1), k[1], (-1, 1), name="R2"),
            Reaction(U, (1,), k[2], (0, -1), name="R3"),
            Reaction(U, (0,), k[3], (1, 0), name="R4"),
        ),
        ("A", "B"),
    )


def example2_network(rates=(1.2, 0.3, 0.8, 0.75, 0.1)) -> ReactionNetwork:
    """Predator-prey type: A -> 2A, A -> 0, B -> 2B, B -> 0, A + B -> B.

    Reactions 2 and 5 share the state change (-1, 0).
    """
    k = rates
    return ReactionNetwork(
        2,
        (
            Reaction(U, (0,), k[0], (1, 0), name="R1"),
            Reaction(U, (0,), k[1], (-1, 0), name="R2"),
            Reaction(U, (1,), k[2], (0, 1), name="R3"),
            Reaction(U, (1,), k[3], (0, -1), name="R4"),
            Reaction(M, (0, 1), k[4], (-1, 0), name="R5"),
        ),
        ("A", "B"),
    )


def example3_network(rates=(0.25, 0.001, 0.3, 100.0, 2.0, 0.1)) -> ReactionNetwork:
    """Intracellular viral infection with species T, G, S, V."""
    k = rates
    return ReactionNetwork(
        4,
        (
            Reaction(U, (0,), k[0], (-1, 0, 0, 0), name="R1"),
            Reaction(M, (1, 2), k[1], (0, -1, -1, 1), name="R2"),
            Reaction(U, (2,), k[2], (0, 0, -1, 0), name="R3"),
            Reaction(U, (0,), k[3], (0, 0, 1, 0), name="R4"),
            Reaction(U, (0,), k[4], (0, 1, 0, 0), name="R5"),
            Reaction(U, (1,), k[5], (1, -1, 0, 0), name="R6"),
        ),
        ("T", "G", "S", "V"),
    )


def death_network(kappa: float = 1.0) -> ReactionNetwork:
    return ReactionNetwork(1, (Reaction(U, (0,), kappa, (-1,), name="death"),), ("A",))


def birth_network(kappa: float = 2.0, volume: float = 1.0) -> ReactionNetwork:
    return ReactionNetwork(1, (Reaction(Z, (), kappa, (1,), volume=volume, name="birth"),), ("A",))


def birth_death_network(birth: float = 10.0, death: float = 1.0) -> ReactionNetwork:
    return ReactionNetwork(
        1,
        (Reaction(Z, (), birth, (1,), name="birth"), Reaction(U, (0,), death, (-1,), name="death")),
        ("A",),
    )


def two_state_network(a: float = 1.0, b: float = 2.0) -> ReactionNetwork:
    """One molecule switching A <-> B; states (1,0) and (0,1), rates a and b."""
    return ReactionNetwork(
        2,
        (Reaction(U, (0,), a, (-1, 1), name="A->B"), Reaction(U, (1,), b, (1, -1), name="B->A")),
        ("A", "B"),
    )


EXAMPLE1 = Scenario("example1", example1_network(), (20, 10), 10.0, 100, lam=0.01, rel_tol=1e-9)
EXAMPLE2 = Scenario("example2", example2_network(), (25, 15), 10.0, 100, lam=0.01, rel_tol=1e-9)
EXAMPLE3 = Scenario(
    "example3",
    example3_network(),
    (1, 0, 0, 0),
    100.0,
    10,
    lam={"-1,0,0,0": 0.01, "0,-1,-1,1": 10.0, "0,0,-1,0": 0.1, "0,0,1,0": 0.005, "0,1,0,0": 0.005, "1,-1,0,0": 0.01},
    rel_tol=1e-9,
)

SCENARIOS = {s.name: s for s in (EXAMPLE1, EXAMPLE2, EXAMPLE3)}
