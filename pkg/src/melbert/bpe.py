"""Word-level byte-pair-encoding tokenizer.

Training walks a word-frequency table, repeatedly merging the most
frequent adjacent symbol pair until the vocabulary budget is spent or no
pair occurs at least twice. Words keep their boundaries: a sentence is
whitespace-split first and every non-initial word gets the word-start
sentinel "▁" prepended as its own symbol, so merges can absorb the
sentinel but never jump across words. Encoding replays the learned merge
list in order (greedy, left to right inside each word), which makes
encoding a pure function of the saved vocabulary file.

Ties between equally frequent pairs break lexicographically on the
(left, right) strings so training is deterministic.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import ConfigError, ContractError, FormatError, VocabError

MARKER = "▁"  # word-start sentinel, rendered as a low line

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
RESERVED = (PAD, UNK, CLS, SEP)
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3

# universal POS tag set; each tag becomes one reserved vocabulary token
DEFAULT_POS_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)

_FILE_HEADER = "bpevocab v1"


def pos_token(tag: str) -> str:
    return f"[POS:{tag}]"


def _word_symbols(word: str, initial: bool) -> tuple[str, ...]:
    symbols = tuple(word)
    return symbols if initial else (MARKER,) + symbols


def _apply_merge(seq: tuple[str, ...], left: str, right: str, joined: str) -> tuple[str, ...]:
    out: list[str] = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == left and seq[i + 1] == right:
            out.append(joined)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return tuple(out)


@dataclass
class Vocab:
    """Token table plus the ordered merge list that reproduces it."""

    token_to_id: dict[str, int]
    merges: list[tuple[str, str]]
    pos_tags: tuple[str, ...]
    id_to_token: dict[int, str] = field(init=False, repr=False)
    _word_cache: dict[tuple[str, bool], list[int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.id_to_token = {i: t for t, i in self.token_to_id.items()}
        if len(self.id_to_token) != len(self.token_to_id):
            raise FormatError("vocabulary ids are not a bijection")
        self._word_cache = {}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocab):
            return NotImplemented
        return (
            self.token_to_id == other.token_to_id
            and self.merges == other.merges
            and self.pos_tags == other.pos_tags
        )

    def __len__(self) -> int:
        return len(self.token_to_id)

    def pos_token_id(self, tag: str) -> int:
        """Id of the POS marker token; unsupported tags map to [UNK]."""
        return self.token_to_id.get(pos_token(tag), UNK_ID)

    def encode_word(self, word: str, initial: bool) -> list[int]:
        key = (word, initial)
        hit = self._word_cache.get(key)
        if hit is not None:
            return hit
        seq = _word_symbols(word, initial)
        for left, right in self.merges:
            if left in seq:
                seq = _apply_merge(seq, left, right, left + right)
        ids = [self.token_to_id.get(sym, UNK_ID) for sym in seq]
        self._word_cache[key] = ids
        return ids

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for i, word in enumerate(text.split()):
            ids.extend(self.encode_word(word, initial=i == 0))
        return ids

    def decode(self, ids) -> str:
        pieces = []
        for i in ids:
            token = self.id_to_token.get(int(i))
            if token is None:
                raise VocabError(f"unknown token id {int(i)} (vocabulary has {len(self)} entries)")
            pieces.append(token)
        text = "".join(pieces).replace(MARKER, " ")
        return text[1:] if text.startswith(" ") else text

    # -- persistence ---------------------------------------------------

    def save(self, path) -> None:
        lines = [_FILE_HEADER]
        for i in range(len(self.token_to_id)):
            token = self.id_to_token[i]
            if "\t" in token or "\n" in token:
                raise FormatError(f"token {token!r} cannot be written to the vocab file")
            lines.append(f"{token}\t{i}")
        lines.append("#merges")
        for left, right in self.merges:
            lines.append(f"{left}\t{right}")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8", newline="\n") as fh:
            lines = fh.read().split("\n")
        if not lines or lines[0] != _FILE_HEADER:
            raise FormatError(f"line 1: expected header {_FILE_HEADER!r}")
        token_to_id: dict[str, int] = {}
        merges: list[tuple[str, str]] = []
        in_merges = False
        for lineno, line in enumerate(lines[1:], start=2):
            if line == "":
                continue
            if line == "#merges":
                in_merges = True
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"line {lineno}: expected two tab-separated fields")
            if in_merges:
                merges.append((parts[0], parts[1]))
            else:
                try:
                    token_to_id[parts[0]] = int(parts[1])
                except ValueError as e:
                    raise FormatError(f"line {lineno}: id {parts[1]!r} is not an integer") from e
        pos_tags = tuple(
            t[len("[POS:"):-1]
            for t, _ in sorted(token_to_id.items(), key=lambda kv: kv[1])
            if t.startswith("[POS:") and t.endswith("]")
        )
        return cls(token_to_id=token_to_id, merges=merges, pos_tags=pos_tags)


def train_bpe(corpus, vocab_size: int, pos_tags=DEFAULT_POS_TAGS) -> Vocab:
    """Learn a vocabulary of at most vocab_size tokens from raw sentences.

    The budget covers the reserved specials, one marker token per POS
    tag, the full character alphabet of the corpus, and then as many
    merged tokens as fit. Merging stops early once no adjacent pair
    occurs at least twice.
    """
    word_freq: Counter[tuple[str, ...]] = Counter()
    for sentence in corpus:
        for i, word in enumerate(sentence.split()):
            word_freq[_word_symbols(word, initial=i == 0)] += 1
    if not word_freq:
        raise ContractError("cannot train a tokenizer on an empty corpus")

    alphabet = sorted({sym for seq in word_freq for sym in seq})
    base_tokens = list(RESERVED) + [pos_token(t) for t in pos_tags] + alphabet
    if vocab_size < len(base_tokens):
        raise ConfigError(
            f"vocab_size {vocab_size} is below the floor of {len(base_tokens)} "
            f"(reserved + POS tags + alphabet of {len(alphabet)})"
        )

    tokens = list(base_tokens)
    known = set(tokens)
    merges: list[tuple[str, str]] = []
    seqs = dict(word_freq)
    while len(tokens) < vocab_size:
        pair_counts: Counter[tuple[str, str]] = Counter()
        for seq, freq in seqs.items():
            for pair in zip(seq, seq[1:]):
                pair_counts[pair] += freq
        if not pair_counts:
            break
        best_pair, best_count = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if best_count < 2:
            break
        left, right = best_pair
        joined = left + right
        merges.append(best_pair)
        merged: dict[tuple[str, ...], int] = {}
        for seq, freq in seqs.items():
            new_seq = _apply_merge(seq, left, right, joined)
            merged[new_seq] = merged.get(new_seq, 0) + freq
        seqs = merged
        if joined not in known:
            tokens.append(joined)
            known.add(joined)

    return Vocab(
        token_to_id={t: i for i, t in enumerate(tokens)},
        merges=merges,
        pos_tags=tuple(pos_tags),
    )
