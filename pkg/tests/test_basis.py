import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnlearn.basis import BasisFunction, BasisKind, BasisLibrary, ReactionBasis, eval_basis, polynomial_basis
from crnlearn.errors import InconsistentDataError, InvalidInputError
from crnlearn.scenarios import EXAMPLE1, EXAMPLE2


def test_eval_examples():
    assert eval_basis(BasisFunction(BasisKind.CONSTANT), (5, 3)) == 1.0
    assert eval_basis(BasisFunction(BasisKind.CROSS, (0, 1)), (20, 10)) == 200.0
    assert eval_basis(BasisFunction(BasisKind.SQUARE, (1,)), (0, 4)) == 16.0


def test_polynomial_order_two_species():
    assert [b.descriptor() for b in polynomial_basis(2)] == ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]


def test_polynomial_size_four_species():
    assert len(polynomial_basis(4)) == 15
    assert len(polynomial_basis(4, degree=1)) == 5


@pytest.mark.parametrize("text", ["1", "x3", "x2^2", "x1*x4"])
def test_descriptor_round_trip(text):
    assert BasisFunction.parse(text).descriptor() == text


def test_parse_normalises():
    assert BasisFunction.parse("x2*x1") == BasisFunction(BasisKind.CROSS, (0, 1))
    assert BasisFunction.parse("x1*x1") == BasisFunction(BasisKind.SQUARE, (0,))


@pytest.mark.parametrize("text", ["", "y1", "x0", "x1^3", "x1*x2*x3"])
def test_parse_rejects(text):
    with pytest.raises(InvalidInputError):
        BasisFunction.parse(text)


def test_species_out_of_range():
    with pytest.raises(InvalidInputError):
        BasisLibrary((BasisFunction(BasisKind.LINEAR, (3,)),), 1, 2)


def test_library_index_sets():
    lib = BasisLibrary.polynomial(2, 4)
    assert lib.size == 6 and lib.n_params == 24
    np.testing.assert_array_equal(lib.index_sets[2], np.arange(12, 18))


@given(st.lists(st.lists(st.integers(0, 300), min_size=3, max_size=3), min_size=1, max_size=20))
def test_evaluate_matches_pointwise(rows):
    lib = BasisLibrary.polynomial(3, 2)
    X = np.array(rows)
    E = lib.evaluate(X)
    for r, x in enumerate(rows):
        for k, f in enumerate(lib.functions):
            assert E[r, k] == eval_basis(f, x)
    np.testing.assert_array_equal(lib.evaluate_channel(1, X), E)


def test_dumps_loads():
    lib = BasisLibrary.polynomial(3, 2)
    assert BasisLibrary.loads(lib.dumps(), 2, 3).functions == lib.functions


def test_reaction_basis_example2_shared_channel():
    net = EXAMPLE2.network
    vectors = sorted({r.state_change for r in net.reactions})
    rb = ReactionBasis.from_channels(net, vectors)
    # channel (-1,0) holds reactions 2 and 5
    assert rb.channel_reactions[0] == (1, 4)
    assert rb.n_params == 5
    x = np.array([[4.0, 3.0]])
    np.testing.assert_allclose(rb.evaluate_channel(0, x), [[4.0, 12.0]])


def test_reaction_basis_unknown_channel():
    with pytest.raises(InconsistentDataError):
        ReactionBasis.from_channels(EXAMPLE1.network, [(2, 0)])
