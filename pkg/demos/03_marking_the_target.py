"""How a sentence becomes model input: sub-tokens, segments, and the
two views of the target word.

The sentence pass sees the whole sentence with three segment labels:
the target span, the local clause around it, and everything else. The
target pass sees the bare word with no context at all. The contrast
between those two views is what the interaction head feeds on.
"""

from melbert.bpe import train_bpe
from melbert.data import Instance
from melbert.inputs import SEG_LOC, SEG_OTHER, SEG_TAR, build_sentence_input, build_target_input

SEG_NAMES = {SEG_OTHER: "other", SEG_LOC: "clause", SEG_TAR: "TARGET"}


def show(inst, vocab, max_len=64):
    sent = build_sentence_input(inst, vocab, max_len)
    tgt = build_target_input(inst, vocab)
    print(f"sentence: {' '.join(inst.tokens)}")
    print(f"target:   {inst.target_word!r} (position {inst.target_index}, {inst.pos_tag})")
    print(f"\n{'id':>6}  {'piece':<12} segment")
    for i, tok_id in enumerate(sent.ids):
        piece = vocab.id_to_token[tok_id]
        marker = " <- span" if sent.target_span[0] <= i < sent.target_span[1] else ""
        print(f"{tok_id:>6}  {piece:<12} {SEG_NAMES[int(sent.segments[i])]}{marker}")
    print(f"\ntarget-only pass: {[vocab.id_to_token[i] for i in tgt.ids]}")
    print(f"truncated: {sent.truncated}")


def main():
    corpus_lines = [
        "the committee devoured the report , then praised its author",
        "the stray dog devoured the leftovers",
    ]
    vocab = train_bpe(corpus_lines, 120)

    inst = Instance(
        sentence_id="demo-1",
        tokens=tuple("the committee devoured the report , then praised its author".split()),
        target_index=2,
        label=1.0,
        pos_tag="VERB",
        genre="news",
    )
    show(inst, vocab)

    print("\n--- same sentence under a tight length budget ---\n")
    show(inst, vocab, max_len=12)
    print("\ntokens far from the target were dropped first; the span itself survives")


if __name__ == "__main__":
    main()
