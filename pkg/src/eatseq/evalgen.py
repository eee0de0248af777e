"""Scoring, random EAT generation, and the back-transformation harness.

BLEU is corpus-level BLEU-4: geometric mean of modified n-gram precisions
with a brevity penalty, scaled to [0, 100].  Sentences are preprocessed
first: lowercased, punctuation stripped, contractions expanded, and a
non-initial "is" rewritten to "'s".
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field

from .decoding import DecodeConstraints, constrained_decode
from .eatcore import (
    ClauseFeatures,
    EatSequence,
    EatTuple,
    TupleAnchors,
    WordSlot,
    category_of,
    extract,
)
from .errors import EmptyInput, LengthMismatch
from .transform import TransformSpec, transform_grammar
from .vectorizer import sequence_to_matrix

_PUNCT_CHARS = set(".,!?;:\"()[]{}…—–-")
_SUFFIX_REPLACEMENTS = (
    ("n't", ("not",)),
    ("n’t", ("not",)),
    ("'m", ("am",)),
    ("’m", ("am",)),
    ("'re", ("are",)),
    ("’re", ("are",)),
    ("'ve", ("have",)),
    ("’ve", ("have",)),
    ("'d", ("would",)),
    ("’d", ("would",)),
)


def preprocess(sentence: str) -> list:
    """Lowercase, expand contractions, strip punctuation, tokenize."""
    tokens = []
    for raw in sentence.lower().split():
        expanded = [raw]
        for suffix, repl in _SUFFIX_REPLACEMENTS:
            if raw.endswith(suffix) and len(raw) > len(suffix):
                expanded = [raw[:-len(suffix)]] + list(repl)
                break
        tokens.extend(expanded)
    out = []
    for tok in tokens:
        cleaned = "".join(ch for ch in tok if ch not in _PUNCT_CHARS)
        if not cleaned:
            continue
        if cleaned == "is" and out:
            cleaned = "'s"
        out.append(cleaned)
    return out


def _ngrams(tokens, n) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates, references, max_n: int = 4) -> float:
    """Corpus-level BLEU with uniform weights, in [0, 100]."""
    if len(candidates) != len(references):
        raise LengthMismatch(
            f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyInput("cannot score an empty corpus")
    matched = [0] * max_n
    total = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            cand_counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            total[n - 1] += max(len(cand) - n + 1, 0)
            for gram, count in cand_counts.items():
                matched[n - 1] += min(count, ref_counts.get(gram, 0))
    if cand_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(max_n):
        if total[n] == 0 or matched[n] == 0:
            return 0.0
        log_sum += math.log(matched[n] / total[n]) / max_n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_sum)


def sentence_bleu(candidate, reference, max_n: int = 4) -> float:
    """Smoothed per-sentence BLEU (add-one on higher-order precisions)."""
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        ref_counts = _ngrams(reference, n)
        total = max(len(candidate) - n + 1, 0)
        matched = sum(min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items())
        if n == 1:
            if matched == 0 or total == 0:
                return 0.0
            precision = matched / total
        else:
            precision = (matched + 1) / (total + 1)
        log_sum += math.log(precision) / max_n
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else math.exp(1.0 - r / max(c, 1))
    return 100.0 * bp * math.exp(log_sum)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    n_inputs: int
    category_correct: int
    identical_back: int
    corpus_bleu: float
    records: list = field(default_factory=list)

    def __post_init__(self):
        if not (self.identical_back <= self.category_correct <= self.n_inputs):
            raise ValueError("report counts are inconsistent")

    def to_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "category_correct": self.category_correct,
            "identical_back": self.identical_back,
            "corpus_bleu": self.corpus_bleu,
            "records": self.records,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def table(self, name: str = "") -> str:
        """Aligned plain-text row mirroring the report columns."""
        head = f"{'Transformation':<28}{'Correct target':>16}{'Identical':>12}{'BLEU':>8}"
        row = (f"{name or 'run':<28}"
               f"{self.category_correct}/{self.n_inputs:<10}"
               f"{self.identical_back}/{self.category_correct or self.n_inputs:<6}"
               f"{self.corpus_bleu:>8.2f}")
        return head + "\n" + row


# ---------------------------------------------------------------------------
# category patterns and directions
# ---------------------------------------------------------------------------

PATTERN_KEYS = ("force", "truth", "voice", "tense", "aspect")

_PATTERN_VALUES = {
    "declarative": ("force", "declarative"),
    "question": ("force", "question"),
    "imperative": ("force", "imperative"),
    "affirmed": ("truth", True),
    "negated": ("truth", False),
    "active": ("voice", "active"),
    "passive": ("voice", "passive"),
    "present": ("tense", "present"),
    "past": ("tense", "past"),
    "perfect": ("tense", "perfect"),
    "pluperfect": ("tense", "pluperfect"),
    "perfective": ("aspect", "perfective"),
    "imperfective": ("aspect", "imperfective"),
}


def pattern_from_label(label: str) -> dict:
    if label not in _PATTERN_VALUES:
        raise EmptyInput(f"unknown category label {label!r}")
    key, value = _PATTERN_VALUES[label]
    return {key: value}


def clause_matches(clause: ClauseFeatures, pattern: dict) -> bool:
    for key, value in pattern.items():
        if key == "force" and clause.force != value:
            return False
        if key == "truth" and clause.truth != value:
            return False
        if key == "voice" and clause.voice != value:
            return False
        if key == "tense" and clause.tense_name() != value:
            return False
        if key == "aspect":
            want = value == "imperfective"
            if clause.imperfective != want:
                return False
    return True


def spec_from_pattern(pattern: dict) -> TransformSpec:
    kwargs = {}
    for key, value in pattern.items():
        if key == "aspect":
            kwargs["aspect"] = value
        elif key == "truth":
            kwargs["truth"] = value
        else:
            kwargs[key] = value
    return TransformSpec(**kwargs)


TABLE_DIRECTIONS = (
    ("declarative", "question"), ("question", "declarative"),
    ("affirmed", "negated"), ("negated", "affirmed"),
    ("active", "passive"), ("passive", "active"),
    ("present", "past"), ("past", "present"),
    ("present", "perfect"), ("perfect", "present"),
    ("present", "pluperfect"), ("pluperfect", "present"),
    ("perfective", "imperfective"), ("imperfective", "perfective"),
)


# ---------------------------------------------------------------------------
# back-transformation evaluation
# ---------------------------------------------------------------------------

def _agent_theme_words(graph, seq: EatSequence) -> tuple:
    """Surface forms of the Agent/Theme heads and their modifiers."""
    main = seq.tuples[0]
    forms = {t.index: t.form for t in graph.tokens}

    def words_for(token_id):
        if token_id is None:
            return frozenset()
        out = {forms[token_id].lower()} if token_id in forms else set()
        for tup in seq.tuples[1:]:
            if tup.anchors.target_token == token_id:
                for tok in (tup.anchors.event_token, tup.anchors.agent_token,
                            tup.anchors.theme_token):
                    if tok in forms:
                        out.add(forms[tok].lower())
        return frozenset(out)

    return (words_for(main.anchors.agent_token),
            words_for(main.anchors.theme_token))


def build_constraints(graph, reference: EatSequence, *, beam_width: int = 10,
                      placeholder_inventory=frozenset(),
                      allowed_placeholders=frozenset()) -> DecodeConstraints:
    agent_words, theme_words = _agent_theme_words(graph, reference)
    target_voice = reference.tuples[0].clause.voice if len(reference) else None
    return DecodeConstraints(
        beam_width=beam_width,
        original_tokens=tuple(t.form for t in graph.tokens),
        allowed_placeholders=allowed_placeholders,
        placeholder_inventory=placeholder_inventory,
        reference_eat=reference,
        target_voice=target_voice,
        passive_agent_words=agent_words,
        passive_theme_words=theme_words,
    )


def back_transform_eval(model, inputs, direction, *, store, reparser,
                        beam_width: int = 10) -> EvalReport:
    """Transform, decode, check the category, transform back, score.

    ``inputs`` is a list of (DepGraph, EatSequence) pairs whose category
    matches the source pattern; ``direction`` is a (source_label,
    target_label) pair over the twelve grammatical classes.
    """
    source_label, target_label = direction
    source = pattern_from_label(source_label)
    target = pattern_from_label(target_label)
    usable = [(g, s) for g, s in inputs if clause_matches(category_of(s), source)]
    if not usable:
        raise EmptyInput(f"no inputs in category {source_label!r}")

    fwd_spec = spec_from_pattern(target)
    back_spec = spec_from_pattern(source)
    records = []
    category_correct = 0
    identical = 0
    back_pairs = []
    for graph, seq in usable:
        transformed = transform_grammar(seq, fwd_spec)
        constraints = build_constraints(graph, transformed, beam_width=beam_width)
        hyp = constrained_decode(
            model, sequence_to_matrix(transformed, store), constraints,
            reparser=reparser)
        out1 = hyp.tokens(model.vocab)
        re_eat = reparser(out1)
        record = {"source": " ".join(t.form for t in graph.tokens),
                  "transformed": " ".join(out1)}
        ok = re_eat is not None and len(re_eat) > 0 \
            and clause_matches(category_of(re_eat), target)
        if not ok:
            record["category_ok"] = False
            records.append(record)
            continue
        category_correct += 1
        record["category_ok"] = True

        back_eat = transform_grammar(re_eat, back_spec)
        back_constraints = build_constraints(
            FragmentTokens(out1), back_eat, beam_width=beam_width)
        back_hyp = constrained_decode(
            model, sequence_to_matrix(back_eat, store), back_constraints,
            reparser=reparser)
        out2 = back_hyp.tokens(model.vocab)
        record["back"] = " ".join(out2)
        original_tokens = preprocess(" ".join(t.form for t in graph.tokens))
        back_tokens = preprocess(" ".join(out2))
        if original_tokens == back_tokens:
            identical += 1
            record["identical"] = True
        else:
            record["identical"] = False
        back_pairs.append((back_tokens, original_tokens))
        records.append(record)

    score = bleu([c for c, _ in back_pairs], [r for _, r in back_pairs]) \
        if back_pairs else 0.0
    return EvalReport(n_inputs=len(usable), category_correct=category_correct,
                      identical_back=identical, corpus_bleu=score,
                      records=records)


class FragmentTokens:
    """Minimal graph stand-in when only surface tokens are available."""

    def __init__(self, tokens):
        self.tokens = tuple(_FakeToken(i + 1, t) for i, t in enumerate(tokens))


class _FakeToken:
    def __init__(self, index, form):
        self.index = index
        self.form = form


# ---------------------------------------------------------------------------
# random EAT generation
# ---------------------------------------------------------------------------

@dataclass
class GenLexicon:
    verbs: tuple = ("see", "hear", "chase", "love", "like", "hate", "call")
    nouns: tuple = ("dog", "cat", "man", "woman", "boy", "girl", "person")


DEFAULT_GENERATION_CLAUSE = ClauseFeatures(
    force="declarative", truth=True, voice="active", past=True)


def generate_random_eat(lexicon: GenLexicon | None = None,
                        clause: ClauseFeatures | None = None,
                        seed: int = 0) -> EatSequence:
    """One random single-tuple EAT: uniform verb/Agent/Theme draws."""
    lexicon = lexicon or GenLexicon()
    clause = clause or DEFAULT_GENERATION_CLAUSE
    rng = random.Random(seed)
    tup = EatTuple(
        clause=clause,
        event=WordSlot(rng.choice(lexicon.verbs)),
        agent=WordSlot(rng.choice(lexicon.nouns)),
        theme=WordSlot(rng.choice(lexicon.nouns)),
        anchors=TupleAnchors())
    return EatSequence((tup,), f"generated-{seed}")
