import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncpick.errors import EmptyWordError, InvalidAlphabetError, InvalidWordError
from ncpick.words import (
    LevelIndex,
    concat,
    enumerate_words,
    fock_dim,
    index_word,
    split_first,
    validate_word,
    word_index,
    words_upto,
)


def test_enumerate_words() -> None:
    assert enumerate_words(2, 0) == [()]
    assert enumerate_words(2, 2) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert enumerate_words(3, 1) == [(1,), (2,), (3,)]
    assert len(enumerate_words(3, 4)) == 81


def test_enumerate_words_empty_alphabet() -> None:
    assert enumerate_words(0, 0) == [()]
    with pytest.raises(InvalidAlphabetError):
        enumerate_words(0, 1)
    with pytest.raises(InvalidAlphabetError):
        enumerate_words(-1, 0)


def test_block_recursion_order() -> None:
    # level k is 1·(level k-1), 2·(level k-1), ...
    prev = enumerate_words(3, 2)
    expected = [(k,) + w for k in (1, 2, 3) for w in prev]
    assert enumerate_words(3, 3) == expected


def test_word_index() -> None:
    assert word_index((), 2) == LevelIndex(0, 0)
    assert word_index((1, 2), 2) == LevelIndex(2, 1)
    assert word_index((2, 1), 2) == LevelIndex(2, 2)
    with pytest.raises(InvalidWordError):
        word_index((3,), 2)
    with pytest.raises(InvalidWordError):
        validate_word((0, 1), 2)


@given(st.integers(min_value=1, max_value=4), st.data())
def test_index_word_inverts_word_index(N: int, data: st.DataObject) -> None:
    word = tuple(data.draw(st.lists(st.integers(1, N), max_size=6)))
    assert index_word(word_index(word, N), N) == word


def test_index_word_position() -> None:
    for N in (1, 2, 3):
        for k in range(4):
            for offset, w in enumerate(enumerate_words(N, k)):
                assert word_index(w, N) == LevelIndex(k, offset)
    with pytest.raises(InvalidWordError):
        index_word(LevelIndex(2, 4), 2)


def test_split_first() -> None:
    assert split_first((2, 1, 1)) == (2, (1, 1))
    assert split_first((1,)) == (1, ())
    assert split_first((1, 2)) == (1, (2,))
    with pytest.raises(EmptyWordError):
        split_first(())


def test_concat_and_fock_dim() -> None:
    assert concat((1, 2), (), (2,)) == (1, 2, 2)
    assert fock_dim(2, 3) == 15
    assert fock_dim(1, 4) == 5
    assert len(list(words_upto(2, 3))) == fock_dim(2, 3)
