"""Synthetic English grammar: balanced corpus generation and deterministic
re-parsing.

The generator emits (tokens, dependency graph, gold EAT sequence) triples by
construction, covering all twelve grammatical classes: declarative/question,
affirmed/negated, active/passive, present/past/perfect/pluperfect, and
perfective/imperfective.  Passives always carry a by-agent so voice flips
preserve content.

The re-parser recognizes exactly this fragment of English, which makes the
decode-time EAT comparison available without an external parser: any token
sequence the decoder produces inside the fragment parses deterministically,
anything else returns None.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .depgraph import DepGraph, Token
from .eatcore import (
    ClauseFeatures,
    EatSequence,
    EatTuple,
    TupleAnchors,
    WordSlot,
)
from .errors import BadTemplate

FORCE_VALUES = ("declarative", "question")
TRUTH_VALUES = (True, False)
VOICE_VALUES = ("active", "passive")
TENSE_VALUES = ("present", "past", "perfect", "pluperfect")
ASPECT_VALUES = ("perfective", "imperfective")

CLASS_LABELS = ("declarative", "question", "affirmed", "negated", "active",
                "passive", "present", "past", "perfect", "pluperfect",
                "perfective", "imperfective")

# base, 3sg present, past, past participle, present participle
DEFAULT_VERBS = {
    "see": ("see", "sees", "saw", "seen", "seeing"),
    "hear": ("hear", "hears", "heard", "heard", "hearing"),
    "chase": ("chase", "chases", "chased", "chased", "chasing"),
    "love": ("love", "loves", "loved", "loved", "loving"),
    "like": ("like", "likes", "liked", "liked", "liking"),
    "hate": ("hate", "hates", "hated", "hated", "hating"),
    "call": ("call", "calls", "called", "called", "calling"),
}

DEFAULT_NOUNS = {
    "dog": "dogs", "cat": "cats", "man": "men", "woman": "women",
    "boy": "boys", "girl": "girls", "person": "people",
}

DEFAULT_ADJECTIVES = ("big", "small", "young", "old", "brown")


@dataclass
class GrammarConfig:
    verbs: dict = field(default_factory=lambda: dict(DEFAULT_VERBS))
    nouns: dict = field(default_factory=lambda: dict(DEFAULT_NOUNS))
    adjectives: tuple = DEFAULT_ADJECTIVES
    adjective_prob: float = 0.3
    plural_prob: float = 0.25
    definite_prob: float = 0.5

    def __post_init__(self):
        if not self.verbs or not self.nouns:
            raise BadTemplate("grammar needs at least one verb and one noun")
        for lemma, forms in self.verbs.items():
            if len(forms) != 5:
                raise BadTemplate(f"verb {lemma!r} needs 5 forms, got {len(forms)}")


@dataclass(frozen=True)
class ClauseCombo:
    force: str = "declarative"
    truth: bool = True
    voice: str = "active"
    tense: str = "present"
    aspect: str = "perfective"

    def labels(self) -> tuple:
        return (self.force,
                "affirmed" if self.truth else "negated",
                self.voice, self.tense, self.aspect)

    def clause_features(self) -> ClauseFeatures:
        return ClauseFeatures(
            force=self.force,
            truth=self.truth,
            voice=self.voice,
            present=self.tense in ("present", "perfect"),
            past=self.tense in ("past", "pluperfect"),
            perfect=self.tense in ("perfect", "pluperfect"),
            imperfective=self.aspect == "imperfective",
        )


@dataclass
class SynthSentence:
    tokens: list
    graph: DepGraph
    gold: EatSequence
    combo: ClauseCombo


@dataclass
class _NP:
    lemma: str
    surface: str
    plural: bool
    definite: bool
    adjective: str | None


def _draw_np(config: GrammarConfig, rng) -> _NP:
    lemma = rng.choice(sorted(config.nouns))
    plural = rng.random() < config.plural_prob
    definite = rng.random() < config.definite_prob
    adjective = None
    if config.adjectives and rng.random() < config.adjective_prob:
        adjective = rng.choice(sorted(config.adjectives))
    surface = config.nouns[lemma] if plural else lemma
    return _NP(lemma, surface, plural, definite, adjective)


def _np_words(np_: _NP) -> list:
    # bare plural = indefinite plural; "a" only fits the singular
    words = []
    if np_.definite:
        words.append("the")
    elif not np_.plural:
        words.append("a")
    if np_.adjective:
        words.append(np_.adjective)
    words.append(np_.surface)
    return words


def _verb_group(config: GrammarConfig, verb: str, combo: ClauseCombo,
                subject_plural: bool) -> tuple:
    """Auxiliary chain + main verb form for one combo.

    Returns (aux_words, verb_form) where the question/negation slots are
    resolved by the sentence assembler.
    """
    base, sg3, past, part, ger = config.verbs[verb]
    n = subject_plural
    have = "have" if n else "has"
    be_pres = "are" if n else "is"
    be_past = "were" if n else "was"
    do_pres = "do" if n else "does"

    if combo.voice == "active":
        if combo.aspect == "perfective":
            if combo.tense == "present":
                if combo.force == "question" or not combo.truth:
                    return [do_pres], base
                return [], base if n else sg3
            if combo.tense == "past":
                if combo.force == "question" or not combo.truth:
                    return ["did"], base
                return [], past
            if combo.tense == "perfect":
                return [have], part
            return ["had"], part
        # imperfective active: be + present participle
        if combo.tense == "present":
            return [be_pres], ger
        if combo.tense == "past":
            return [be_past], ger
        if combo.tense == "perfect":
            return [have, "been"], ger
        return ["had", "been"], ger
    # passive: ... be + past participle
    if combo.aspect == "perfective":
        if combo.tense == "present":
            return [be_pres], part
        if combo.tense == "past":
            return [be_past], part
        if combo.tense == "perfect":
            return [have, "been"], part
        return ["had", "been"], part
    if combo.tense == "present":
        return [be_pres, "being"], part
    if combo.tense == "past":
        return [be_past, "being"], part
    if combo.tense == "perfect":
        return [have, "been", "being"], part
    return ["had", "been", "being"], part


_AUX_FEATS = {
    "do": ("do", "Pres"), "does": ("do", "Pres"), "did": ("do", "Past"),
    "have": ("have", "Pres"), "has": ("have", "Pres"), "had": ("have", "Past"),
    "is": ("be", "Pres"), "are": ("be", "Pres"),
    "was": ("be", "Past"), "were": ("be", "Past"),
}
_PARTICIPLE_AUX = {"been": ("be", "Past"), "being": ("be", "Pres")}


def _aux_token(index: int, form: str, head: int, deprel: str) -> Token:
    if form in _AUX_FEATS:
        lemma, tense = _AUX_FEATS[form]
        feats = {"Tense": tense, "VerbForm": "Fin"}
    else:
        lemma, tense = _PARTICIPLE_AUX[form]
        feats = {"Tense": tense, "VerbForm": "Part"}
    return Token(index, form, lemma, "AUX", feats, head, deprel)


def _verb_feats(config: GrammarConfig, lemma: str, form: str,
                has_aux: bool) -> dict:
    """Morphology for a main-verb form; 'called' is a participle only after
    an auxiliary, and a bare form with no auxiliary is finite present."""
    base, sg3, past, part, ger = config.verbs[lemma]
    if has_aux:
        if form == ger:
            return {"Tense": "Pres", "VerbForm": "Part"}
        if form == part:
            return {"Tense": "Past", "VerbForm": "Part"}
        return {"VerbForm": "Inf"}
    if form == past:
        return {"Tense": "Past", "VerbForm": "Fin"}
    if form in (sg3, base):
        return {"Tense": "Pres", "VerbForm": "Fin"}
    return {"VerbForm": "Inf"}


def generate_sentence(config: GrammarConfig, combo: ClauseCombo, rng) -> SynthSentence:
    """Build one sentence with its parse and gold EAT, all by construction."""
    verb = rng.choice(sorted(config.verbs))
    subj = _draw_np(config, rng)
    obj = _draw_np(config, rng)

    if combo.voice == "active":
        patient, agent_np = obj, subj
        front, back = subj, obj
    else:
        patient, agent_np = subj, obj
        front, back = subj, obj
    auxes, vform = _verb_group(config, verb, combo, front.plural)

    words = []
    layout = []  # parallel tags for token building

    def push(word, tag):
        words.append(word)
        layout.append(tag)

    def push_np(np_, role):
        for w in _np_words(np_):
            if w in ("a", "the"):
                push(w, (role, "det"))
            elif np_.adjective is not None and w == np_.adjective:
                push(w, (role, "amod"))
            else:
                push(w, (role, "noun"))

    negated = not combo.truth
    if combo.force == "question":
        push(auxes[0], ("aux", 0))
        push_np(front, "front")
        if negated:
            push("not", ("neg", None))
        for i, aux in enumerate(auxes[1:], start=1):
            push(aux, ("aux", i))
    else:
        push_np(front, "front")
        for i, aux in enumerate(auxes):
            push(aux, ("aux", i))
            if i == 0 and negated:
                push("not", ("neg", None))
    push(vform, ("verb", None))
    if combo.voice == "active":
        push_np(back, "back")
    else:
        push("by", ("by", None))
        push_np(back, "back")
    push("?" if combo.force == "question" else ".", ("punct", None))

    # token list with heads: root = main verb
    verb_pos = layout.index(("verb", None)) + 1
    n_aux = len(auxes)
    tokens = []
    np_heads = {}
    for i, (word, tag) in enumerate(zip(words, layout), start=1):
        kind = tag[0]
        if kind == "verb":
            feats = _verb_feats(config, verb, word, has_aux=bool(auxes))
            tokens.append(Token(i, word, verb, "VERB", feats, 0, "root"))
        elif kind == "aux":
            aux_idx = tag[1]
            last_be = (combo.voice == "passive" and aux_idx == n_aux - 1)
            deprel = "auxpass" if last_be else "aux"
            tokens.append(_aux_token(i, word, verb_pos, deprel))
        elif kind == "neg":
            tokens.append(Token(i, word, "not", "PART", {}, verb_pos, "neg"))
        elif kind == "by":
            tokens.append(Token(i, word, "by", "ADP", {}, verb_pos, "agent"))
        elif kind == "punct":
            tokens.append(Token(i, word, word, "PUNCT", {}, verb_pos, "punct"))
        else:
            role, part = tag
            np_ = front if role == "front" else back
            if part == "noun":
                feats = {"Number": "Plur" if np_.plural else "Sing"}
                if combo.voice == "active":
                    deprel = "nsubj" if role == "front" else "dobj"
                    head = verb_pos
                else:
                    if role == "front":
                        deprel, head = "nsubjpass", verb_pos
                    else:
                        by_pos = layout.index(("by", None)) + 1
                        deprel, head = "pobj", by_pos
                tokens.append(Token(i, word, np_.lemma, "NOUN", feats, head, deprel))
                np_heads[role] = i
            else:
                # determiners and adjectives precede their noun
                noun_pos = next(
                    j + 1 for j in range(i - 1, len(words))
                    if layout[j] == (role, "noun"))
                if part == "det":
                    tokens.append(Token(i, word, word, "DET", {}, noun_pos, "det"))
                else:
                    tokens.append(Token(i, word, word, "ADJ", {}, noun_pos, "amod"))

    graph = DepGraph(tuple(tokens), "")
    gold = _gold_sequence(combo, verb, subj, obj, np_heads, verb_pos, graph)
    return SynthSentence(words, graph, gold, combo)


def _gold_sequence(combo, verb, subj, obj, np_heads, verb_pos, graph) -> EatSequence:
    front_np, back_np = (subj, obj)
    if combo.voice == "active":
        agent_np, theme_np = front_np, back_np
        agent_pos, theme_pos = np_heads["front"], np_heads["back"]
    else:
        agent_np, theme_np = back_np, front_np
        agent_pos, theme_pos = np_heads["back"], np_heads["front"]

    def np_slot(np_):
        return WordSlot(np_.lemma, plural=np_.plural, definite=np_.definite)

    main = EatTuple(
        clause=combo.clause_features(),
        event=WordSlot(verb),
        agent=np_slot(agent_np),
        theme=np_slot(theme_np),
        anchors=TupleAnchors(event_token=verb_pos, agent_token=agent_pos,
                             theme_token=theme_pos))
    tuples = [(verb_pos, main)]
    for np_, pos, slot_name in ((agent_np, agent_pos, "agent"),
                                (theme_np, theme_pos, "theme")):
        if np_.adjective:
            adj_pos = pos - 1
            tuples.append((adj_pos, EatTuple(
                clause=ClauseFeatures(),
                anchors=TupleAnchors(target_token=pos,
                                     **{f"{slot_name}_token": adj_pos}),
                **{slot_name: WordSlot(np_.adjective)})))
    ordered = [main] + [t for _, t in sorted(tuples[1:], key=lambda e: e[0])]
    return EatSequence(tuple(ordered), graph.sentence_id)


# ---------------------------------------------------------------------------
# balanced corpus
# ---------------------------------------------------------------------------

def _balanced_values(values, n, rng):
    """n draws where every value's count differs by at most one."""
    out = []
    block = []
    for _ in range(n):
        if not block:
            block = list(values)
            rng.shuffle(block)
        out.append(block.pop())
    return out


def synth_corpus(config: GrammarConfig, n: int, seed: int = 0) -> list:
    """n SynthSentences with per-dimension class balance (max-min <= 1)."""
    if n < 0:
        raise BadTemplate("corpus size must be non-negative")
    rng = random.Random(seed)
    forces = _balanced_values(FORCE_VALUES, n, rng)
    truths = _balanced_values(TRUTH_VALUES, n, rng)
    voices = _balanced_values(VOICE_VALUES, n, rng)
    tenses = _balanced_values(TENSE_VALUES, n, rng)
    aspects = _balanced_values(ASPECT_VALUES, n, rng)
    out = []
    for i in range(n):
        combo = ClauseCombo(force=forces[i], truth=truths[i], voice=voices[i],
                            tense=tenses[i], aspect=aspects[i])
        sent = generate_sentence(config, combo, rng)
        sent.graph = DepGraph(sent.graph.tokens, f"synth-{seed}-{i}")
        sent.gold = EatSequence(sent.gold.tuples, f"synth-{seed}-{i}")
        out.append(sent)
    return out


def class_histogram(sentences) -> dict:
    counts = {label: 0 for label in CLASS_LABELS}
    for s in sentences:
        for label in s.combo.labels():
            counts[label] += 1
    return counts


# ---------------------------------------------------------------------------
# deterministic re-parser for the fragment
# ---------------------------------------------------------------------------

class FragmentParser:
    """Recognize sentences of the synthetic fragment and rebuild their parse."""

    def __init__(self, config: GrammarConfig | None = None):
        self.config = config or GrammarConfig()
        self.verb_forms = {}
        for lemma, forms in self.config.verbs.items():
            base, sg3, past, part, ger = forms
            for form in forms:
                self.verb_forms.setdefault(form, lemma)
        self.noun_forms = {}
        for lemma, plural in self.config.nouns.items():
            self.noun_forms[lemma] = (lemma, False)
            self.noun_forms.setdefault(plural, (lemma, True))
        self.adjectives = set(self.config.adjectives)

    def parse(self, tokens) -> DepGraph | None:
        words = list(tokens)
        if not words:
            return None
        if words[-1] not in (".", "?", "!"):
            return None
        punct = words[-1]
        body = words[:-1]
        try:
            return self._parse_body(body, punct)
        except (ValueError, IndexError):
            return None

    def _take_np(self, body, pos):
        definite = False
        det = None
        if pos < len(body) and body[pos] in ("a", "the"):
            det = body[pos]
            definite = body[pos] == "the"
            pos += 1
        adjectives = []
        while pos < len(body) and body[pos] in self.adjectives:
            adjectives.append(body[pos])
            pos += 1
        if pos >= len(body) or body[pos] not in self.noun_forms:
            raise ValueError("expected a noun")
        lemma, plural = self.noun_forms[body[pos]]
        if det == "a" and plural:
            raise ValueError("'a' with a plural noun")
        return {"det": det, "definite": definite, "adjectives": adjectives,
                "noun": body[pos], "lemma": lemma, "plural": plural,
                "end": pos + 1}

    def _take_aux_chain(self, body, pos):
        auxes = []
        negated = False
        while pos < len(body):
            w = body[pos]
            if w in _AUX_FEATS or w in _PARTICIPLE_AUX:
                auxes.append(w)
                pos += 1
            elif w == "not" and not negated:
                negated = True
                pos += 1
            else:
                break
        return auxes, negated, pos

    def _parse_body(self, body, punct):
        pos = 0
        inverted_aux = None
        if body and (body[0] in _AUX_FEATS):
            inverted_aux = body[0]
            pos = 1
        np1 = self._take_np(body, pos)
        pos = np1["end"]
        auxes, negated, pos = self._take_aux_chain(body, pos)
        if inverted_aux is not None:
            auxes = [inverted_aux] + auxes
        if pos >= len(body) or body[pos] not in self.verb_forms:
            raise ValueError("expected a verb")
        verb_form = body[pos]
        verb_lemma = self.verb_forms[verb_form]
        pos += 1
        np2 = None
        by_phrase = False
        if pos < len(body):
            if body[pos] == "by":
                by_phrase = True
                pos += 1
                np2 = self._take_np(body, pos)
                pos = np2["end"]
            else:
                np2 = self._take_np(body, pos)
                pos = np2["end"]
        if pos != len(body):
            raise ValueError("trailing words")
        if not self._chain_is_valid(auxes, verb_form, verb_lemma, by_phrase):
            raise ValueError("bad auxiliary chain")
        return self._build_graph(body + [punct], np1, auxes, negated,
                                 verb_form, verb_lemma, np2, by_phrase,
                                 inverted_aux is not None)

    def _chain_is_valid(self, auxes, verb_form, verb_lemma, passive):
        base, sg3, past, part, ger = self.config.verbs[verb_lemma]
        finite = [a for a in auxes if a in _AUX_FEATS]
        if len(finite) > 1:
            return False
        if passive:
            return verb_form == part and bool(auxes)
        if auxes:
            # last auxiliary constrains the main verb's form
            lastaux = auxes[-1]
            if lastaux in ("do", "does", "did"):
                return verb_form == base
            if lastaux in ("have", "has", "had"):
                return verb_form == part
            return verb_form == ger  # a be-form
        return verb_form in (sg3, past) or (verb_form == base and base != sg3)

    def _build_graph(self, words, np1, auxes, negated, verb_form, verb_lemma,
                     np2, by_phrase, inverted):
        # positions mirror generate_sentence's layout
        tokens = []
        idx = 0

        def np_positions(np_):
            nonlocal idx
            out = []
            if np_["det"] is not None:
                idx += 1
                out.append(("det", np_["det"], idx))
            for adj in np_["adjectives"]:
                idx += 1
                out.append(("amod", adj, idx))
            idx += 1
            out.append(("noun", np_["noun"], idx))
            return out

        plan = []
        if inverted:
            idx += 1
            plan.append(("aux", auxes[0], idx))
            plan.extend(np_positions(np1))
            if negated:
                idx += 1
                plan.append(("neg", "not", idx))
            for aux in auxes[1:]:
                idx += 1
                plan.append(("aux", aux, idx))
        else:
            plan.extend(np_positions(np1))
            for i, aux in enumerate(auxes):
                idx += 1
                plan.append(("aux", aux, idx))
                if i == 0 and negated:
                    idx += 1
                    plan.append(("neg", "not", idx))
            if negated and not auxes:
                raise ValueError("negation without an auxiliary")
        idx += 1
        verb_pos = idx
        plan.append(("verb", verb_form, idx))
        np2_plan = []
        by_pos = None
        if by_phrase:
            idx += 1
            by_pos = idx
            plan.append(("by", "by", idx))
        if np2 is not None:
            np2_plan = np_positions(np2)
            plan.extend(np2_plan)
        idx += 1
        plan.append(("punct", words[-1], idx))

        if [w for _, w, _ in plan] != list(words):
            raise ValueError("layout mismatch")

        passive = by_phrase
        np1_noun_pos = next(p for kind, w, p in plan[:verb_pos]
                            if kind == "noun")
        verb_feats = _verb_feats(self.config, verb_lemma, verb_form,
                                 has_aux=bool(auxes))

        n_aux = len(auxes)
        aux_seen = 0
        for kind, word, pos in plan:
            if kind == "verb":
                tokens.append(Token(pos, word, verb_lemma, "VERB", verb_feats,
                                    0, "root"))
            elif kind == "aux":
                last_be = passive and aux_seen == n_aux - 1
                deprel = "auxpass" if last_be else "aux"
                tokens.append(_aux_token(pos, word, verb_pos, deprel))
                aux_seen += 1
            elif kind == "neg":
                tokens.append(Token(pos, word, "not", "PART", {}, verb_pos, "neg"))
            elif kind == "by":
                tokens.append(Token(pos, word, "by", "ADP", {}, verb_pos, "agent"))
            elif kind == "punct":
                tokens.append(Token(pos, word, word, "PUNCT", {}, verb_pos, "punct"))
            elif kind == "det":
                noun_pos = self._noun_after(plan, pos)
                tokens.append(Token(pos, word, word, "DET", {}, noun_pos, "det"))
            elif kind == "amod":
                noun_pos = self._noun_after(plan, pos)
                tokens.append(Token(pos, word, word, "ADJ", {}, noun_pos, "amod"))
            else:  # noun
                lemma, plural = self.noun_forms[word]
                feats = {"Number": "Plur" if plural else "Sing"}
                if passive:
                    if pos == np1_noun_pos:
                        deprel, head = "nsubjpass", verb_pos
                    else:
                        deprel, head = "pobj", by_pos
                else:
                    if pos == np1_noun_pos:
                        deprel, head = "nsubj", verb_pos
                    else:
                        deprel, head = "dobj", verb_pos
                tokens.append(Token(pos, word, lemma, "NOUN", feats, head, deprel))
        tokens.sort(key=lambda t: t.index)
        return DepGraph(tuple(tokens), "reparse")

    @staticmethod
    def _noun_after(plan, pos):
        for kind, _, p in plan:
            if kind == "noun" and p > pos:
                return p
        raise ValueError("determiner without a noun")


def make_reparser(config: GrammarConfig | None = None):
    """Callable tokens -> EatSequence|None, for decode-time reranking."""
    from .eatcore import extract
    from .errors import EatSeqError
    parser = FragmentParser(config)

    def reparse(tokens):
        graph = parser.parse(tokens)
        if graph is None:
            return None
        try:
            return extract(graph)
        except EatSeqError:
            return None

    return reparse
