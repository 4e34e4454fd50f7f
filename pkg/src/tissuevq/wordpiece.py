"""From-scratch WordPiece subword tokenizer: training, encoding, decoding.

Training grows a vocabulary by iteratively merging the adjacent symbol pair
with the highest ``pair_count / (left_count * right_count)`` score, starting
from single characters. Continuation pieces carry a ``##`` prefix. Encoding
is greedy longest-prefix matching per word.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

PAD, START, STOP, UNK = "[PAD]", "[START]", "[STOP]", "[UNK]"
SPECIALS = (PAD, START, STOP, UNK)
CONTINUATION = "##"


class VocabularyError(ValueError):
    """Raised for invalid vocabulary construction or token ids."""


@dataclass(frozen=True)
class Vocabulary:
    """Ordered piece list; the line number in the vocab file is the id."""

    pieces: tuple[str, ...]
    piece_to_id: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.pieces[: len(SPECIALS)] != SPECIALS:
            raise VocabularyError(f"vocabulary must begin with {SPECIALS}")
        if len(set(self.pieces)) != len(self.pieces):
            raise VocabularyError("vocabulary pieces must be unique")
        object.__setattr__(
            self, "piece_to_id", {p: i for i, p in enumerate(self.pieces)}
        )

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def start_id(self) -> int:
        return 1

    @property
    def stop_id(self) -> int:
        return 2

    @property
    def unk_id(self) -> int:
        return 3

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for piece in self.pieces:
                fh.write(piece + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            pieces = tuple(line.rstrip("\n") for line in fh if line.rstrip("\n"))
        return cls(pieces)


def pre_split(text: str) -> list[str]:
    """Whitespace split with trailing periods detached as their own units."""
    units: list[str] = []
    for word in text.split():
        if word.endswith(".") and len(word) > 1:
            units.append(word[:-1])
            units.append(".")
        else:
            units.append(word)
    return units


def _word_symbols(word: str) -> tuple[str, ...]:
    return tuple(
        ch if i == 0 else CONTINUATION + ch for i, ch in enumerate(word)
    )


def _merge_symbol(left: str, right: str) -> str:
    stripped = right[len(CONTINUATION):] if right.startswith(CONTINUATION) else right
    return left + stripped


def train_wordpiece(corpus: list[str], max_size: int) -> Vocabulary:
    """Learn a WordPiece vocabulary of at most ``max_size`` pieces.

    The initial alphabet contains every character seen anywhere in the
    corpus (plain form) plus ``##``-prefixed forms for characters seen in
    continuation position. Merges are scored by
    ``pair_count / (left_count * right_count)`` with lexicographic
    tie-breaking, so training is deterministic for a fixed corpus.
    """
    if not corpus:
        raise VocabularyError("corpus is empty")

    word_freq: Counter[str] = Counter()
    for caption in corpus:
        word_freq.update(pre_split(caption))

    alphabet: set[str] = set()
    for word in word_freq:
        for i, ch in enumerate(word):
            alphabet.add(ch)
            if i > 0:
                alphabet.add(CONTINUATION + ch)
    floor = len(SPECIALS) + len(alphabet)
    if max_size < floor:
        raise VocabularyError(
            f"max_size {max_size} is below specials+alphabet ({floor})"
        )

    pieces: list[str] = list(SPECIALS) + sorted(alphabet)
    words: dict[str, tuple[str, ...]] = {w: _word_symbols(w) for w in word_freq}

    while len(pieces) < max_size:
        pair_counts: Counter[tuple[str, str]] = Counter()
        symbol_counts: Counter[str] = Counter()
        for word, symbols in words.items():
            freq = word_freq[word]
            for symbol in symbols:
                symbol_counts[symbol] += freq
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += freq
        if not pair_counts:
            break

        def score(pair: tuple[str, str]) -> float:
            return pair_counts[pair] / (
                symbol_counts[pair[0]] * symbol_counts[pair[1]]
            )

        best = min(pair_counts, key=lambda p: (-score(p), p))
        merged = _merge_symbol(*best)
        if merged not in pieces:
            pieces.append(merged)
        for word, symbols in words.items():
            out: list[str] = []
            i = 0
            while i < len(symbols):
                if (
                    i + 1 < len(symbols)
                    and (symbols[i], symbols[i + 1]) == best
                ):
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            words[word] = tuple(out)

    return Vocabulary(tuple(pieces))


def encode_word(word: str, vocab: Vocabulary) -> list[int]:
    """Greedy longest-prefix match; a word with no full cover becomes [UNK]."""
    ids: list[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        piece_id = None
        while end > start:
            candidate = word[start:end]
            if start > 0:
                candidate = CONTINUATION + candidate
            if candidate in vocab.piece_to_id:
                piece_id = vocab.piece_to_id[candidate]
                break
            end -= 1
        if piece_id is None:
            return [vocab.unk_id]
        ids.append(piece_id)
        start = end
    return ids


def tokenize(caption: str, vocab: Vocabulary) -> list[int]:
    """Encode a caption to ids wrapped with [START]/[STOP]."""
    ids = [vocab.start_id]
    for unit in pre_split(caption):
        ids.extend(encode_word(unit, vocab))
    ids.append(vocab.stop_id)
    return ids


def detokenize(ids: list[int], vocab: Vocabulary) -> str:
    """Invert :func:`tokenize`: strip specials, rejoin ``##``, reattach periods."""
    words: list[str] = []
    for token_id in ids:
        if not 0 <= token_id < len(vocab):
            raise VocabularyError(f"token id {token_id} out of range for vocabulary")
        piece = vocab.pieces[token_id]
        if piece in SPECIALS:
            continue
        if piece.startswith(CONTINUATION) and words:
            words[-1] += piece[len(CONTINUATION):]
        elif piece == "." and words:
            words[-1] += "."
        else:
            words.append(piece)
    return " ".join(words)
