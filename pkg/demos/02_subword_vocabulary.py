"""Watch a subword vocabulary grow, one merge at a time.

Trains byte-pair encodings of increasing size on the same little corpus
and shows how a word's segmentation coarsens as merges accumulate. Ends
with the save/load round trip: the file on disk reproduces the encoder
exactly.
"""

import tempfile

from melbert.bpe import Vocab, train_bpe

CORPUS = [
    "the river swallowed the village",
    "the river carved the valley",
    "the village remembered the river",
    "a swallow crossed the river",
]


def main():
    print("corpus:")
    for line in CORPUS:
        print("  " + line)

    # 39 slots go to reserved tokens, POS markers, and the corpus alphabet
    # before the first merge, so the ladder starts just above that floor
    for budget in (40, 50, 65):
        vocab = train_bpe(CORPUS, budget)
        pieces = [vocab.id_to_token[i] for i in vocab.encode_word("swallowed", initial=False)]
        print(f"\nbudget {budget:>3}: {len(vocab.merges):>2} merges, "
              f"'swallowed' -> {pieces}")

    vocab = train_bpe(CORPUS, 65)
    print("\nfirst ten merges:")
    for left, right in vocab.merges[:10]:
        print(f"  {left!r} + {right!r} -> {left + right!r}")

    text = "the river swallowed the village"
    ids = vocab.encode(text)
    print(f"\nencode({text!r}) = {ids}")
    print(f"decode(...) = {vocab.decode(ids)!r}")

    with tempfile.NamedTemporaryFile(suffix=".txt") as fh:
        vocab.save(fh.name)
        again = Vocab.load(fh.name)
    assert again == vocab and again.encode(text) == ids
    print("\nsaved, reloaded, and the reloaded vocabulary encodes identically")


if __name__ == "__main__":
    main()
