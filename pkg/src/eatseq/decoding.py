"""Constrained beam search with additive log-probability punishments.

Hard punishments (-10000) keep forbidden tokens out of the output: the
unknown token, words repeated beyond their count in the original sentence,
immediate self-repetition the original did not contain, and name/number
placeholders outside the ones chosen for this sentence.  A soft punishment
(-10) discourages a passive Agent from appearing before the Theme.  After the
beam finishes, candidates are re-extracted and reranked against the reference
EAT sequence.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .eatcore import EatSequence, category_of
from .seq2seq import Seq2SeqModel, log_softmax

HARD_PUNISHMENT = 10000.0
PASSIVE_AGENT_PUNISHMENT = 10.0
CLAUSE_FEATURE_PENALTY = 10.0
OTHER_FEATURE_UNIT = 1.0
N_CLAUSE_FEATURES = 9

SENTENCE_FINAL = {".", "!", "?"}


@dataclass
class BeamHypothesis:
    token_ids: list
    logprob: float
    finished: bool = False
    attention: list = field(default_factory=list)
    state: dict | None = None

    def tokens(self, vocab) -> list:
        return vocab.decode(self.token_ids)


@dataclass
class DecodeConstraints:
    """Everything the punishment rules need to know about one decode."""

    beam_width: int = 10
    original_tokens: tuple = ()
    allowed_placeholders: frozenset = frozenset()
    placeholder_inventory: frozenset = frozenset()
    reference_eat: EatSequence | None = None
    target_voice: str | None = None
    passive_agent_words: frozenset = frozenset()
    passive_theme_words: frozenset = frozenset()
    hard_punishment: float = HARD_PUNISHMENT
    passive_agent_punishment: float = PASSIVE_AGENT_PUNISHMENT
    clause_feature_penalty: float = CLAUSE_FEATURE_PENALTY
    other_feature_unit: float = OTHER_FEATURE_UNIT

    def __post_init__(self):
        self.original_tokens = tuple(t.lower() for t in self.original_tokens)
        self.allowed_placeholders = frozenset(
            t.lower() for t in self.allowed_placeholders)
        self.placeholder_inventory = frozenset(
            t.lower() for t in self.placeholder_inventory)
        self.passive_agent_words = frozenset(
            t.lower() for t in self.passive_agent_words)
        self.passive_theme_words = frozenset(
            t.lower() for t in self.passive_theme_words)
        self._original_counts = Counter(self.original_tokens)
        self._original_bigrams = {
            (a, b) for a, b in zip(self.original_tokens, self.original_tokens[1:])}


def _contains_any(tokens, words) -> bool:
    return any(t in words for t in tokens)


def apply_punishments(step_logprobs: np.ndarray, hypothesis: BeamHypothesis,
                      constraints: DecodeConstraints, vocab,
                      beam_has_theme: bool = False) -> np.ndarray:
    """Return a punished copy of one expansion step's log-probabilities."""
    out = np.array(step_logprobs, dtype=np.float64, copy=True)
    hard = constraints.hard_punishment
    emitted = [t.lower() for t in hypothesis.tokens(vocab)]
    counts = Counter(emitted)
    last = emitted[-1] if emitted else None

    out[vocab.unk_id] -= hard

    orig = constraints._original_counts
    for tok_id, token in enumerate(vocab.id2tok):
        low = token.lower()
        n = counts.get(low, 0)
        if n >= 1 and n + 1 > max(orig.get(low, 0), 1):
            out[tok_id] -= hard
        if last is not None and low == last \
                and (low, low) not in constraints._original_bigrams:
            out[tok_id] -= hard
        if low in constraints.placeholder_inventory \
                and low not in constraints.allowed_placeholders:
            out[tok_id] -= hard

    if (constraints.target_voice == "passive"
            and constraints.passive_agent_words
            and beam_has_theme
            and not _contains_any(emitted, constraints.passive_theme_words)):
        for tok_id, token in enumerate(vocab.id2tok):
            if token.lower() in constraints.passive_agent_words:
                out[tok_id] -= constraints.passive_agent_punishment
    return out


def style_bias(step_logprobs: np.ndarray, source_stats: dict, target_stats: dict,
               weight: float, vocab) -> np.ndarray:
    """Shift token log-probabilities by the target/source corpus log-ratio.

    Both stats tables are token -> count; add-one smoothing runs over the
    union vocabulary, so identical corpora produce a zero adjustment.
    """
    if weight == 0.0:
        return np.array(step_logprobs, copy=True)
    union = set(source_stats) | set(target_stats)
    v = max(len(union), 1)
    src_total = sum(source_stats.values()) + v
    tgt_total = sum(target_stats.values()) + v
    out = np.array(step_logprobs, dtype=np.float64, copy=True)
    for tok_id, token in enumerate(vocab.id2tok):
        p_src = (source_stats.get(token, 0) + 1) / src_total
        p_tgt = (target_stats.get(token, 0) + 1) / tgt_total
        out[tok_id] += weight * (math.log(p_tgt) - math.log(p_src))
    return out


def load_style_stats(path) -> dict:
    """Read ``token<TAB>count`` lines into a frequency table."""
    stats = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            token, _, count = line.partition("\t")
            stats[token] = stats.get(token, 0) + int(count or 1)
    return stats


def _is_finished(hyp: BeamHypothesis, vocab, max_len: int) -> bool:
    if not hyp.token_ids:
        return False
    last = hyp.token_ids[-1]
    if last == vocab.eos_id:
        return True
    if vocab.id2tok[last] in SENTENCE_FINAL:
        return True
    return len(hyp.token_ids) >= max_len


def beam_search(model: Seq2SeqModel, input_matrix, constraints: DecodeConstraints,
                style=None) -> list:
    """Constrained beam search; returns up to k finished hypotheses, best first.

    ``style`` is an optional ``(source_stats, target_stats, weight)`` triple
    applied on top of the punishments at every step.
    """
    vocab = model.vocab
    k = constraints.beam_width
    max_len = model.config.max_output_len
    enc = model.encode(input_matrix)
    start = BeamHypothesis(token_ids=[], logprob=0.0,
                           state=model.initial_state(enc))
    beams = [start]
    finished = []

    for _ in range(max_len):
        live = [h for h in beams if not h.finished]
        if not live:
            break
        theme_words = constraints.passive_theme_words
        beam_has_theme = any(
            _contains_any([t.lower() for t in h.tokens(vocab)], theme_words)
            for h in beams + finished) if theme_words else False

        candidates = []
        for hyp in live:
            prev = hyp.token_ids[-1] if hyp.token_ids else vocab.bos_id
            logits, new_state, att = model.decode_step(hyp.state, prev, enc)
            logp = log_softmax(np.asarray(logits, dtype=np.float64))
            logp = apply_punishments(logp, hyp, constraints, vocab,
                                     beam_has_theme=beam_has_theme)
            if style is not None:
                src, tgt, weight = style
                logp = style_bias(logp, src, tgt, weight, vocab)
            logp[vocab.pad_id] -= HARD_PUNISHMENT
            logp[vocab.bos_id] -= HARD_PUNISHMENT
            top = np.argsort(-logp)[:k]
            for tok_id in top:
                candidates.append((hyp.logprob + float(logp[tok_id]),
                                   hyp, int(tok_id), new_state, att))

        candidates.sort(key=lambda c: -c[0])
        beams = []
        for score, hyp, tok_id, state, att in candidates:
            if len(beams) >= k:
                break
            new_hyp = BeamHypothesis(
                token_ids=hyp.token_ids + [tok_id],
                logprob=score,
                state=state,
                attention=hyp.attention + [att])
            new_hyp.finished = _is_finished(new_hyp, vocab, max_len)
            beams.append(new_hyp)
        newly_done = [h for h in beams if h.finished]
        finished.extend(newly_done)
        beams = [h for h in beams if not h.finished]
        if len(finished) >= k:
            break

    if not finished:
        # Force-finish whatever is on the beam so we always return something.
        for h in beams:
            h.finished = True
        finished = beams
    finished.sort(key=lambda h: -h.logprob)
    return finished[:k]


def rerank_by_eat(finished, original: EatSequence, *, reparser, vocab) -> BeamHypothesis:
    """Pick the candidate whose re-extracted EAT best matches the reference.

    The first tuple decides: each mismatch among the 9 clause features costs
    10, every other feature adds +1/-1 for identity/divergence.  Candidates
    that cannot be re-extracted take the worst clause penalty and no rewards.
    """
    if not finished:
        raise ValueError("no candidates to rerank")
    ref_features = original.tuples[0].features()
    best, best_score = None, -math.inf
    for hyp in finished:
        tokens = hyp.tokens(vocab)
        cand_seq = reparser(tokens)
        if cand_seq is None or not len(cand_seq):
            delta = -N_CLAUSE_FEATURES * CLAUSE_FEATURE_PENALTY
        else:
            cand_features = cand_seq.tuples[0].features()
            delta = 0.0
            for i in range(N_CLAUSE_FEATURES):
                if cand_features[i] != ref_features[i]:
                    delta -= CLAUSE_FEATURE_PENALTY
            for i in range(N_CLAUSE_FEATURES, len(ref_features)):
                delta += (OTHER_FEATURE_UNIT if cand_features[i] == ref_features[i]
                          else -OTHER_FEATURE_UNIT)
        score = hyp.logprob + delta
        if score > best_score:
            best, best_score = hyp, score
    return best


def constrained_decode(model, input_matrix, constraints, *, reparser=None,
                       style=None) -> BeamHypothesis:
    """Beam search plus EAT reranking (when a reference and reparser exist)."""
    finished = beam_search(model, input_matrix, constraints, style=style)
    if reparser is not None and constraints.reference_eat is not None:
        return rerank_by_eat(finished, constraints.reference_eat,
                             reparser=reparser, vocab=model.vocab)
    return finished[0]
