"""End-to-end defect-prone line identification and ranking.

Steps: build the bag-of-tokens vocabulary and file-level model from training
releases, predict each test file, explain the files predicted defective,
select their top-k positively scored (risky) tokens, flag every line that
contains a risky token, and rank all flagged lines globally.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .config import RunConfig
from .corpus import ReleaseDataset, SourceFile, Vocabulary, build_vocabulary, tokenize, vectorize
from .evaluation import confusion_counts, d2h, far, line_truth, recall
from .explain import Explanation, explain
from .model import LogisticModel, TrainConfig, predict_proba, train_logistic
from .util import derive_seed

DEFAULT_K_GRID = (10, 20, 30, 40, 50, 100, 150, 200)


@dataclass(frozen=True)
class RiskyTokenSet:
    """Top positively scored tokens of one explanation, descending by score."""

    tokens: tuple[tuple[str, float], ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def token_set(self) -> set[str]:
        return {token for token, _ in self.tokens}

    def scores(self) -> dict[str, float]:
        return dict(self.tokens)


@dataclass(frozen=True)
class FlaggedLine:
    release_id: str
    file_path: str
    line_number: int
    hit_count: int
    score_sum: float
    file_probability: float


@dataclass(frozen=True)
class RankedLine:
    release_id: str
    file_path: str
    line_number: int
    hit_count: int
    score_sum: float
    file_probability: float
    global_rank: int


@dataclass
class MethodResult:
    """Uniform output of the pipeline and every baseline."""

    method: str
    ranked: list[RankedLine]
    file_probabilities: dict[str, float]
    risky_tokens: dict[str, RiskyTokenSet] | None = None


def select_risky_tokens(expl: Explanation, k_risky: int = 20) -> RiskyTokenSet:
    """Keep the k largest strictly positive scores; ties break on token text."""
    positive = [(token, score) for token, score in expl.scores.items() if score > 0.0]
    positive.sort(key=lambda item: (-item[1], item[0]))
    return RiskyTokenSet(tokens=tuple(positive[:k_risky]))


def flag_lines(
    file: SourceFile, risky: RiskyTokenSet, file_probability: float = 1.0
) -> list[FlaggedLine]:
    """Flag every line containing at least one risky token.

    The hit count is the number of DISTINCT risky tokens present in the
    line; repeated occurrences of the same token do not accumulate.
    """
    token_set = risky.token_set()
    if not token_set:
        return []
    scores = risky.scores()
    flagged = []
    for line in file.lines:
        matched = set(tokenize(line.content)) & token_set
        if matched:
            flagged.append(
                FlaggedLine(
                    release_id=file.release_id,
                    file_path=file.path,
                    line_number=line.number,
                    hit_count=len(matched),
                    score_sum=sum(scores[t] for t in matched),
                    file_probability=file_probability,
                )
            )
    return flagged


def rank_lines_global(flagged: list[FlaggedLine]) -> list[RankedLine]:
    """Total order over all flagged lines of all predicted-defective files.

    Keys: hit count desc, score sum desc, file probability desc, then
    (path, line number) asc as the final deterministic tie break.
    """
    ordered = sorted(
        flagged,
        key=lambda f: (
            -f.hit_count,
            -f.score_sum,
            -f.file_probability,
            f.release_id,
            f.file_path,
            f.line_number,
        ),
    )
    return [
        RankedLine(
            release_id=f.release_id,
            file_path=f.file_path,
            line_number=f.line_number,
            hit_count=f.hit_count,
            score_sum=f.score_sum,
            file_probability=f.file_probability,
            global_rank=rank,
        )
        for rank, f in enumerate(ordered, start=1)
    ]


def _as_release_list(train: ReleaseDataset | list[ReleaseDataset]) -> list[ReleaseDataset]:
    return [train] if isinstance(train, ReleaseDataset) else list(train)


def train_file_model(
    train: ReleaseDataset | list[ReleaseDataset], config: RunConfig
) -> tuple[LogisticModel, Vocabulary]:
    """Vocabulary + file-level logistic model from the training releases only."""
    files = [f for ds in _as_release_list(train) for f in ds.files]
    vocab = build_vocabulary(files)
    X = [vectorize(f, vocab) for f in files]
    y = [f.file_label for f in files]
    model = train_logistic(X, y, TrainConfig(seed=config.seed), vocab=vocab)
    return model, vocab


def file_seed(config_seed: int, release_id: str, path: str) -> int:
    """Per-file explanation seed; independent of scheduling order."""
    return derive_seed(config_seed, release_id, path)


def _explain_file_task(args) -> tuple[str, RiskyTokenSet, list[FlaggedLine]]:
    model, vocab, file, prob, config = args
    seed = file_seed(config.seed, file.release_id, file.path)
    expl = explain(
        model,
        vectorize(file, vocab),
        vocab,
        n=config.lime_n,
        k=config.lime_k_features,
        kernel_width=config.lime_sigma,
        seed=seed,
    )
    risky = select_risky_tokens(expl, config.k_risky)
    return file.path, risky, flag_lines(file, risky, prob)


def predict_files(
    model: LogisticModel, vocab: Vocabulary, test: ReleaseDataset
) -> dict[str, float]:
    return {f.path: predict_proba(model, vectorize(f, vocab)) for f in test.files}


def identify_lines(
    model: LogisticModel,
    vocab: Vocabulary,
    test: ReleaseDataset,
    config: RunConfig,
    file_probs: dict[str, float] | None = None,
) -> MethodResult:
    """Steps 3-4 on an already trained model: explain, flag, and rank."""
    if file_probs is None:
        file_probs = predict_files(model, vocab, test)
    defect_prone = [f for f in sorted(test.files, key=lambda f: f.path) if file_probs[f.path] > 0.5]
    tasks = [(model, vocab, f, file_probs[f.path], config) for f in defect_prone]
    if config.parallelism > 1 and len(tasks) >= 4:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            outputs = list(pool.map(_explain_file_task, tasks, chunksize=4))
    else:
        outputs = [_explain_file_task(t) for t in tasks]
    # merge deterministically by sort keys, never by completion order
    outputs.sort(key=lambda item: item[0])
    flagged: list[FlaggedLine] = []
    risky_sets: dict[str, RiskyTokenSet] = {}
    for path, risky, lines in outputs:
        risky_sets[path] = risky
        flagged.extend(lines)
    return MethodResult(
        method="linedp",
        ranked=rank_lines_global(flagged),
        file_probabilities=file_probs,
        risky_tokens=risky_sets,
    )


def run_linedp(
    train: ReleaseDataset | list[ReleaseDataset], test: ReleaseDataset, config: RunConfig = RunConfig()
) -> MethodResult:
    """The whole framework end to end; deterministic given config.seed."""
    model, vocab = train_file_model(train, config)
    return identify_lines(model, vocab, test, config)


def sensitivity_k(
    train: ReleaseDataset | list[ReleaseDataset],
    test: ReleaseDataset,
    k_grid: tuple[int, ...] = DEFAULT_K_GRID,
    config: RunConfig = RunConfig(),
) -> list[dict]:
    """Recall / FAR / d2h per risky-token budget k.

    Explanations do not depend on k, so they are computed once with a
    feature budget covering the whole grid; each k then reselects, reflags,
    and reranks. Nested risky sets make recall and FAR non-decreasing in k.
    """
    if not k_grid or min(k_grid) < 1:
        raise ValueError("k_grid must be nonempty with positive entries")
    wide = replace(config, lime_k_features=max(config.lime_k_features, max(k_grid)))
    model, vocab = train_file_model(train, wide)
    file_probs = predict_files(model, vocab, test)
    defect_prone = [f for f in sorted(test.files, key=lambda f: f.path) if file_probs[f.path] > 0.5]
    explanations: list[tuple[SourceFile, Explanation]] = []
    for f in defect_prone:
        seed = file_seed(wide.seed, f.release_id, f.path)
        expl = explain(
            model,
            vectorize(f, vocab),
            vocab,
            n=wide.lime_n,
            k=wide.lime_k_features,
            kernel_width=wide.lime_sigma,
            seed=seed,
        )
        explanations.append((f, expl))
    truth = line_truth(test)
    rows = []
    for k in k_grid:
        flagged: list[FlaggedLine] = []
        for f, expl in explanations:
            risky = select_risky_tokens(expl, k)
            flagged.extend(flag_lines(f, risky, file_probs[f.path]))
        ranked = rank_lines_global(flagged)
        predicted = {(line.file_path, line.line_number) for line in ranked}
        c = confusion_counts(predicted, truth)
        r, fa = recall(c), far(c)
        rows.append({"k": k, "recall": r, "far": fa, "d2h": d2h(r, fa)})
    return rows
