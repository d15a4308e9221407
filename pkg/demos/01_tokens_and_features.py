"""Tokenization, vocabularies, and bag-of-tokens features.

Walks the representation layer: how source lines become tokens, how the
training vocabulary drops singleton tokens, and how files turn into sparse
count vectors.
"""

from linedefects import build_vocabulary, defect_density, tokenize, vectorize
from linedefects.synthetic import make_planted_release

print("== tokenize ==")
for line in (
    "runtime.getErr().print(msg);",
    "Node node = new Node(buf_2);",
    "",
):
    print(f"{line!r:45} -> {tokenize(line)}")

print("\n== vocabulary over a small release ==")
release = make_planted_release("demo-1.0", seed=1, n_files=8, n_defective=3)
vocab = build_vocabulary(list(release.files))
print(f"{len(release.files)} files, vocabulary size {len(vocab)}")
print("first tokens by index:", vocab.tokens[:8])
rare = sorted(vocab.total_counts.items(), key=lambda kv: kv[1])[:3]
print("least frequent retained tokens:", rare)

print("\n== sparse feature vectors ==")
some_file = release.files[0]
fv = vectorize(some_file, vocab)
print(f"{some_file.path}: {len(fv.entries)} distinct in-vocabulary tokens, {fv.total()} occurrences")
top = sorted(fv.entries.items(), key=lambda kv: -kv[1])[:5]
print("most frequent:", [(vocab.tokens[i], c) for i, c in top])

print("\n== defect density ==")
for f in release.files:
    if f.file_label:
        print(f"{f.path}: {defect_density(f):.3f} of its lines are defective")
