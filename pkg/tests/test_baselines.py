"""Naive Bayes and the screened tone-regression scorer against independent
oracles (hand-computed posteriors, dense-grid maximizer)."""

import math

import numpy as np
import pytest

from newssignal.baselines import (
    NbcModel,
    SsestmModel,
    load_nbc,
    load_ssestm,
    nbc_score,
    nbc_train,
    save_nbc,
    save_ssestm,
    ssestm_score,
    ssestm_train,
)
from newssignal.errors import (
    DegenerateTraining,
    IncompatibleArtifacts,
    NoSentimentWords,
)

TOY_CORPUS = [(("up", "good"), 1), (("down", "bad"), 0)]


# ---------------------------------------------------------------------------
# NBC


def test_nbc_train_toy_counts():
    model = nbc_train(TOY_CORPUS, alpha=1.0)
    assert model.priors == (0.5, 0.5)
    assert model.vocabulary_size == 4
    assert model.class_totals == (2, 2)


def test_nbc_hand_computed_posterior():
    # P(good|1) = (1+1)/(2+4), P(good|0) = (0+1)/(2+4) -> posterior 2/3
    model = nbc_train(TOY_CORPUS, alpha=1.0)
    assert abs(nbc_score(model, ["good"]) - 2.0 / 3.0) < 1e-12


def test_nbc_no_evidence_returns_prior():
    model = nbc_train(TOY_CORPUS, alpha=1.0)
    assert nbc_score(model, []) == pytest.approx(0.5, abs=1e-15)
    assert nbc_score(model, ["unseen", "tokens"]) == pytest.approx(0.5, abs=1e-15)


def test_nbc_single_class_is_degenerate():
    with pytest.raises(DegenerateTraining):
        nbc_train([(("up",), 1), (("down",), 1)])


def test_nbc_duplicated_corpus():
    # relative frequencies are scale-invariant; the smoothing term vanishes as
    # alpha -> 0, so scores coincide in that limit
    tiny = 1e-9
    single = nbc_train(TOY_CORPUS, alpha=tiny)
    doubled = nbc_train(list(TOY_CORPUS) * 2, alpha=tiny)
    for tokens in (["good"], ["good", "up"], ["bad"], ["up", "bad"]):
        assert nbc_score(single, tokens) == pytest.approx(nbc_score(doubled, tokens), abs=1e-6)
    # with alpha = 1 the decision and ranking direction survive duplication
    single = nbc_train(TOY_CORPUS, alpha=1.0)
    doubled = nbc_train(list(TOY_CORPUS) * 2, alpha=1.0)
    for tokens in (["good"], ["bad"]):
        assert (nbc_score(single, tokens) > 0.5) == (nbc_score(doubled, tokens) > 0.5)


def test_nbc_score_strictly_inside_unit_interval():
    docs = [(("w", "w", "w"), 1), (("v",), 0)] * 5
    model = nbc_train(docs, alpha=0.5)
    for tokens in (["w"] * 50, ["v"] * 50, []):
        score = nbc_score(model, tokens)
        assert 0.0 < score < 1.0


def test_nbc_complement_symmetry():
    rng = np.random.default_rng(1)
    vocab = [f"t{i}" for i in range(12)]
    docs = [
        (tuple(rng.choice(vocab, size=rng.integers(1, 6))), int(rng.integers(0, 2)))
        for _ in range(40)
    ]
    if len({label for _, label in docs}) < 2:
        docs += [(("x",), 0), (("y",), 1)]
    flipped = [(tokens, 1 - label) for tokens, label in docs]
    model = nbc_train(docs, alpha=1.0)
    mirror = nbc_train(flipped, alpha=1.0)
    for _ in range(25):
        tokens = list(rng.choice(vocab, size=rng.integers(0, 6)))
        assert nbc_score(model, tokens) == pytest.approx(1.0 - nbc_score(mirror, tokens), abs=1e-12)


def test_nbc_bundle_round_trip(tmp_path):
    model = nbc_train(TOY_CORPUS, alpha=1.0)
    path = tmp_path / "nbc.csv"
    save_nbc(model, path)
    loaded = load_nbc(path)
    assert loaded.priors == model.priors
    assert loaded.token_counts == model.token_counts
    assert nbc_score(loaded, ["good"]) == nbc_score(model, ["good"])


def test_bundle_kind_mismatch(tmp_path):
    model = nbc_train(TOY_CORPUS, alpha=1.0)
    path = tmp_path / "nbc.csv"
    save_nbc(model, path)
    with pytest.raises(IncompatibleArtifacts):
        load_ssestm(path)


# ---------------------------------------------------------------------------
# SSESTM


def toy_ssestm_docs():
    # "good" rides the highest returns, "bad" the lowest; "meh" is everywhere
    docs = []
    for i in range(12):
        docs.append((("good", "meh"), 1, 0.02 + i * 1e-4))
        docs.append((("bad", "meh"), 0, -0.02 - i * 1e-4))
    return docs


def test_screening_keeps_one_sided_tokens():
    model = ssestm_train(toy_ssestm_docs(), alpha_plus=0.6, min_count=5, penalty=0.1)
    assert "good" in model.tokens and "bad" in model.tokens
    assert "meh" not in model.tokens  # f_j = 0.5 inside (0.4, 0.6)


def test_screening_minimum_count():
    docs = toy_ssestm_docs() + [(("rare",), 1, 0.5)]
    model = ssestm_train(docs, alpha_plus=0.6, min_count=5, penalty=0.1)
    assert "rare" not in model.tokens


def test_screening_empty_raises():
    with pytest.raises(NoSentimentWords):
        ssestm_train(toy_ssestm_docs(), alpha_plus=0.6, min_count=1000, penalty=0.1)


def test_tone_matrix_two_word_hand_solution():
    # with "good" on rank-top documents and "bad" on rank-bottom ones, the
    # clipped and normalized regression lands on the identity tone matrix
    model = ssestm_train(toy_ssestm_docs(), alpha_plus=0.6, min_count=5, penalty=0.1)
    good, bad = model.tokens.index("good"), model.tokens.index("bad")
    assert model.tone[good, 0] == pytest.approx(1.0, abs=1e-9)
    assert model.tone[good, 1] == pytest.approx(0.0, abs=1e-9)
    assert model.tone[bad, 0] == pytest.approx(0.0, abs=1e-9)
    assert model.tone[bad, 1] == pytest.approx(1.0, abs=1e-9)


def test_tone_columns_sum_to_one():
    rng = np.random.default_rng(7)
    vocab = [f"t{i}" for i in range(10)]
    docs = []
    for i in range(120):
        tokens = tuple(rng.choice(vocab, size=4))
        ret = float(rng.normal())
        docs.append((tokens, int(ret > 0), ret))
    model = ssestm_train(docs, alpha_plus=0.52, min_count=3, penalty=0.1)
    sums = model.tone.sum(axis=0)
    assert abs(sums[0] - 1.0) < 1e-12 and abs(sums[1] - 1.0) < 1e-12
    assert np.all(model.tone >= 0)


def dense_grid_oracle(model: SsestmModel, tokens, step=1e-5):
    """Independent brute-force maximizer of the penalized log-likelihood."""
    index = {t: i for i, t in enumerate(model.tokens)}
    counts = {}
    for token in tokens:
        if token in index:
            counts[index[token]] = counts.get(index[token], 0) + 1
    if not counts:
        return 0.5
    best_p, best_value = None, -math.inf
    steps = round(1.0 / step)
    for k in range(1, steps):
        p = k * step
        value = model.penalty * (math.log(p) + math.log(1.0 - p))
        for j, c in counts.items():
            mix = p * model.tone[j, 0] + (1.0 - p) * model.tone[j, 1]
            if mix <= 0.0:
                value = -math.inf
                break
            value += c * math.log(mix)
        if value > best_value:
            best_p, best_value = p, value
    return best_p


def test_degenerate_tone_pushes_to_grid_edge():
    model = SsestmModel(
        tokens=["good", "bad"],
        tone=np.array([[1.0, 0.0], [0.0, 1.0]]),
        alpha_plus=0.6,
        alpha_minus=0.4,
        min_count=1,
        penalty=1e-9,
    )
    assert ssestm_score(model, ["good", "good"]) == pytest.approx(0.999, abs=1e-12)
    assert ssestm_score(model, ["bad", "bad"]) == pytest.approx(0.001, abs=1e-12)


def test_symmetric_tokens_score_half():
    model = SsestmModel(
        tokens=["good", "bad"],
        tone=np.array([[1.0, 0.0], [0.0, 1.0]]),
        alpha_plus=0.6,
        alpha_minus=0.4,
        min_count=1,
        penalty=0.1,
    )
    assert ssestm_score(model, ["good", "bad"]) == pytest.approx(0.5, abs=1e-12)
    assert ssestm_score(model, ["neither"]) == 0.5


def test_grid_matches_dense_oracle():
    model = SsestmModel(
        tokens=["good", "bad"],
        tone=np.array([[0.9, 0.1], [0.1, 0.9]]),
        alpha_plus=0.6,
        alpha_minus=0.4,
        min_count=1,
        penalty=0.1,
    )
    coarse = ssestm_score(model, ["good", "good", "bad"])
    dense = dense_grid_oracle(model, ["good", "good", "bad"])
    assert abs(coarse - dense) <= 1e-3 + 1e-12


def test_grid_matches_dense_oracle_random_models():
    rng = np.random.default_rng(3)
    for _ in range(6):
        size = int(rng.integers(2, 6))
        tone = rng.uniform(0.0, 1.0, size=(size, 2))
        tone /= tone.sum(axis=0)
        model = SsestmModel(
            tokens=[f"t{i}" for i in range(size)],
            tone=tone,
            alpha_plus=0.6,
            alpha_minus=0.4,
            min_count=1,
            penalty=0.1,
        )
        tokens = [f"t{rng.integers(0, size)}" for _ in range(int(rng.integers(1, 7)))]
        coarse = ssestm_score(model, tokens)
        dense = dense_grid_oracle(model, tokens)
        assert abs(coarse - dense) <= 1e-3 + 1e-12


def test_score_monotone_in_positive_token_count():
    model = ssestm_train(toy_ssestm_docs(), alpha_plus=0.6, min_count=5, penalty=0.1)
    scores = [ssestm_score(model, ["good"] * k + ["bad"]) for k in range(1, 5)]
    assert all(a <= b + 1e-12 for a, b in zip(scores, scores[1:]))


def test_ssestm_bundle_round_trip(tmp_path):
    model = ssestm_train(toy_ssestm_docs(), alpha_plus=0.6, min_count=5, penalty=0.1)
    path = tmp_path / "ssestm.csv"
    save_ssestm(model, path)
    loaded = load_ssestm(path)
    assert loaded.tokens == model.tokens
    assert np.allclose(loaded.tone, model.tone)
    tokens = ["good", "good", "bad"]
    assert ssestm_score(loaded, tokens) == ssestm_score(model, tokens)
