"""Words of the free semigroup on N generators and their block ordering.

A word is a tuple of letters in [1..N]; the empty tuple is the identity.
Words of a fixed length are ordered first-letter-major, so level k is the
concatenation of the blocks 1·(level k-1), 2·(level k-1), ..., N·(level k-1).
Every block matrix in ncpick indexes its sub-blocks by this order.

>>> enumerate_words(2, 2)
[(1, 1), (1, 2), (2, 1), (2, 2)]
>>> word_index((2, 1), 2)
LevelIndex(level=2, offset=2)
>>> index_word(LevelIndex(2, 1), 2)
(1, 2)
"""

import itertools
from typing import Iterator, List, NamedTuple, Sequence, Tuple

from .errors import EmptyWordError, InvalidAlphabetError, InvalidWordError

__all__ = [
    "Word",
    "LevelIndex",
    "EMPTY",
    "enumerate_words",
    "words_upto",
    "word_index",
    "index_word",
    "split_first",
    "concat",
    "validate_word",
    "fock_dim",
]

Word = Tuple[int, ...]

EMPTY: Word = ()


class LevelIndex(NamedTuple):
    """Position of a word: its length and its offset within that length."""

    level: int
    offset: int


def _check_alphabet(N: int, k: int) -> None:
    if not isinstance(N, int) or N < 0:
        raise InvalidAlphabetError(f"Alphabet size must be a nonnegative int, got {N}", N)
    if not isinstance(k, int) or k < 0:
        raise InvalidAlphabetError(f"Word length must be a nonnegative int, got {k}", k)
    if N == 0 and k > 0:
        raise InvalidAlphabetError(
            f"The empty alphabet has no words of length {k}", {"N": N, "k": k}
        )


def enumerate_words(N: int, k: int) -> List[Word]:
    """Return all N**k words of length k in first-letter-major order.

    >>> enumerate_words(2, 0)
    [()]
    >>> enumerate_words(3, 1)
    [(1,), (2,), (3,)]
    """
    _check_alphabet(N, k)
    # itertools.product varies the last letter fastest, which is exactly
    # the first-letter-major block recursion.
    return list(itertools.product(range(1, N + 1), repeat=k))


def words_upto(N: int, K: int) -> Iterator[Word]:
    """Yield every word of length at most K, level by level."""
    for k in range(K + 1):
        yield from enumerate_words(N, k)


def validate_word(w: Sequence[int], N: int) -> Word:
    """Return w as a Word after checking every letter lies in [1..N]."""
    letters = tuple(w)
    for letter in letters:
        if isinstance(letter, bool) or not isinstance(letter, int) or not 1 <= letter <= N:
            raise InvalidWordError(
                f"Letter {letter!r} of word {list(letters)} is outside [1..{N}]",
                {"word": list(letters), "N": N},
            )
    return letters


def word_index(w: Sequence[int], N: int) -> LevelIndex:
    """Return the level and offset of w in enumerate_words(N, len(w))."""
    letters = validate_word(w, N)
    offset = 0
    for letter in letters:
        offset = offset * N + (letter - 1)
    return LevelIndex(len(letters), offset)


def index_word(idx: LevelIndex, N: int) -> Word:
    """Inverse of word_index."""
    level, offset = idx
    _check_alphabet(N, level)
    if not 0 <= offset < N**level:
        raise InvalidWordError(
            f"Offset {offset} is outside [0, {N}**{level})", {"level": level, "offset": offset}
        )
    letters = []
    for _ in range(level):
        offset, digit = divmod(offset, N)
        letters.append(digit + 1)
    return tuple(reversed(letters))


def split_first(w: Sequence[int]) -> Tuple[int, Word]:
    """Split w = kσ into its first letter and its tail.

    >>> split_first((2, 1, 1))
    (2, (1, 1))
    """
    letters = tuple(w)
    if not letters:
        raise EmptyWordError("The empty word has no first letter")
    return letters[0], letters[1:]


def concat(*parts: Sequence[int]) -> Word:
    """Concatenate words (or single-letter sequences)."""
    return tuple(itertools.chain.from_iterable(parts))


def fock_dim(N: int, level: int) -> int:
    """Return 1 + N + ... + N**level, the number of words of length <= level."""
    _check_alphabet(N, 0)
    return sum(N**m for m in range(level + 1))
