"""Rule engine mapping dependency graphs to Event-Agent-Theme tuple sequences.

An EAT tuple holds three word slots (Event, Agent, Theme) plus 28 Boolean
grammatical features.  A sentence becomes an ordered sequence of tuples with
the main clause first; modifiers, prepositions, possessors, and subordinate
clauses each contribute further tuples anchored to the token they describe.

The feature layout (serialization index order):

    0  question           1  imperative         2  true
    3  active             4  passive
    5  present            6  past               7  perfect
    8  imperfective
    9  prep->event       10  prep->agent       11  prep->theme
   12  agent possessive  13  agent plural      14  agent definite
   15  agent agent-RP    16  agent theme-RP
   17  theme possessive  18  theme plural      19  theme definite
   20  theme agent-RP    21  theme theme-RP
   22  event comparative 23  event superlative
   24  agent comparative 25  agent superlative
   26  theme comparative 27  theme superlative
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .depgraph import DepGraph, Token
from .errors import (
    EmptySequence,
    IndexOutOfRange,
    InvalidTuple,
    NoMainVerb,
    NotAVerb,
)

FORCES = ("declarative", "question", "imperative")
VOICES = ("active", "passive", "none")
PREP_POSITIONS = ("none", "event", "agent", "theme")

N_FEATURES = 28

VERBAL_UPOS = {"VERB", "AUX"}
MODAL_LEMMAS = {"can", "could", "may", "might", "must", "shall", "should",
                "will", "would", "ought", "dare"}
DEMONSTRATIVES = {"this", "that", "these", "those"}
RELATIVE_PRONOUNS = {"who", "whom", "which", "that", "whose"}

# Labels whose dependents become plain one-slot modifier tuples of a noun.
NOUN_MODIFIER_DEPRELS = ("amod", "nummod", "compound")


@dataclass(frozen=True)
class WordSlot:
    """One slot of a tuple: a lemma (None = the empty token) plus nominal flags."""

    lemma: str | None = None
    possessive: bool = False
    plural: bool = False
    definite: bool = False
    rp_agent: bool = False
    rp_theme: bool = False
    comparative: bool = False
    superlative: bool = False

    def __post_init__(self):
        if self.lemma is None and any([
                self.possessive, self.plural, self.definite, self.rp_agent,
                self.rp_theme, self.comparative, self.superlative]):
            raise InvalidTuple("empty slot must carry no flags")
        if self.rp_agent and self.rp_theme:
            raise InvalidTuple("slot cannot be both an Agent-RP and a Theme-RP")
        if self.comparative and self.superlative:
            raise InvalidTuple("slot cannot be both comparative and superlative")

    def is_empty(self) -> bool:
        return self.lemma is None

    def __str__(self):
        if self.lemma is None:
            return "∅"
        marks = []
        if self.possessive:
            marks.append("Poss")
        if self.rp_agent:
            marks.append("AgRP")
        if self.rp_theme:
            marks.append("ThRP")
        return self.lemma + (f"[{','.join(marks)}]" if marks else "")


EMPTY_SLOT = WordSlot()


@dataclass(frozen=True)
class ClauseFeatures:
    """Clause-level features of one tuple (rows 0-11 of the feature layout)."""

    force: str = "declarative"
    truth: bool = True
    voice: str = "none"
    present: bool = False
    past: bool = False
    perfect: bool = False
    imperfective: bool = False
    prep_position: str = "none"

    def __post_init__(self):
        if self.force not in FORCES:
            raise InvalidTuple(f"unknown force {self.force!r}")
        if self.voice not in VOICES:
            raise InvalidTuple(f"unknown voice {self.voice!r}")
        if self.prep_position not in PREP_POSITIONS:
            raise InvalidTuple(f"unknown prep position {self.prep_position!r}")
        if self.present and self.past:
            raise InvalidTuple("present and past cannot both be set")
        if self.prep_position != "none" and self.voice != "none":
            raise InvalidTuple("a preposition tuple cannot carry voice")

    def tense_name(self) -> str:
        if self.perfect:
            return "pluperfect" if self.past else "perfect"
        if self.present:
            return "present"
        if self.past:
            return "past"
        return "infinitive"


@dataclass(frozen=True)
class TupleAnchors:
    """Source-token bookkeeping, never serialized and excluded from equality.

    ``target_token`` is the token a modifier/preposition/possessor/relative
    tuple attaches to.  The ``*_coref`` fields point a relative pronoun at its
    antecedent, or an empty Theme at the verb of a clausal complement.
    """

    event_token: int | None = None
    agent_token: int | None = None
    theme_token: int | None = None
    target_token: int | None = None
    agent_coref: int | None = None
    theme_coref: int | None = None


@dataclass(frozen=True)
class EatTuple:
    clause: ClauseFeatures
    event: WordSlot = EMPTY_SLOT
    agent: WordSlot = EMPTY_SLOT
    theme: WordSlot = EMPTY_SLOT
    anchors: TupleAnchors = field(default_factory=TupleAnchors, compare=False, repr=False)

    def __post_init__(self):
        if self.event.is_empty() and self.agent.is_empty() and self.theme.is_empty():
            raise InvalidTuple("a tuple needs at least one non-empty slot")
        # The feature block has no nominal rows for the Event position, so an
        # Event slot carrying nominal flags could not serialize faithfully.
        ev = self.event
        if ev.possessive or ev.plural or ev.definite or ev.rp_agent or ev.rp_theme:
            raise InvalidTuple("event slot cannot carry nominal flags")

    def slot(self, name: str) -> WordSlot:
        if name not in ("event", "agent", "theme"):
            raise IndexOutOfRange(f"unknown slot {name!r}")
        return getattr(self, name)

    def features(self) -> list:
        """The 28 Boolean features in serialization index order."""
        c, a, t, e = self.clause, self.agent, self.theme, self.event
        bits = [
            c.force == "question",
            c.force == "imperative",
            c.truth,
            c.voice == "active",
            c.voice == "passive",
            c.present,
            c.past,
            c.perfect,
            c.imperfective,
            c.prep_position == "event",
            c.prep_position == "agent",
            c.prep_position == "theme",
            a.possessive, a.plural, a.definite, a.rp_agent, a.rp_theme,
            t.possessive, t.plural, t.definite, t.rp_agent, t.rp_theme,
            e.comparative, e.superlative,
            a.comparative, a.superlative,
            t.comparative, t.superlative,
        ]
        return [int(b) for b in bits]

    @classmethod
    def from_features(cls, bits, event: str | None, agent: str | None,
                      theme: str | None) -> "EatTuple":
        """Rebuild a tuple from the 28-feature record plus three lemmas."""
        bits = [int(b) for b in bits]
        if len(bits) != N_FEATURES:
            raise InvalidTuple(f"expected {N_FEATURES} features, got {len(bits)}")
        if bits[0] and bits[1]:
            raise InvalidTuple("question and imperative flags both set")
        if bits[3] and bits[4]:
            raise InvalidTuple("active and passive flags both set")
        if sum(bits[9:12]) > 1:
            raise InvalidTuple("multiple preposition-position flags set")
        force = "question" if bits[0] else "imperative" if bits[1] else "declarative"
        voice = "active" if bits[3] else "passive" if bits[4] else "none"
        prep = "event" if bits[9] else "agent" if bits[10] else "theme" if bits[11] else "none"
        clause = ClauseFeatures(
            force=force, truth=bool(bits[2]), voice=voice,
            present=bool(bits[5]), past=bool(bits[6]), perfect=bool(bits[7]),
            imperfective=bool(bits[8]), prep_position=prep)

        def slot(lemma, poss, plur, defn, rpa, rpt, cmp_, sup):
            if lemma is None:
                if any([poss, plur, defn, rpa, rpt, cmp_, sup]):
                    raise InvalidTuple("flags set on an empty slot")
                return EMPTY_SLOT
            return WordSlot(lemma, bool(poss), bool(plur), bool(defn),
                            bool(rpa), bool(rpt), bool(cmp_), bool(sup))

        return cls(
            clause=clause,
            event=slot(event, 0, 0, 0, 0, 0, bits[22], bits[23]),
            agent=slot(agent, bits[12], bits[13], bits[14], bits[15], bits[16],
                       bits[24], bits[25]),
            theme=slot(theme, bits[17], bits[18], bits[19], bits[20], bits[21],
                       bits[26], bits[27]),
        )

    def __str__(self):
        return f"⟨{self.event}, {self.agent}, {self.theme}⟩"


@dataclass(frozen=True)
class EatSequence:
    tuples: tuple
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tuples", tuple(self.tuples))

    def __len__(self):
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __getitem__(self, i):
        return self.tuples[i]

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "tuples": [
                {"features": t.features(), "event": t.event.lemma,
                 "agent": t.agent.lemma, "theme": t.theme.lemma}
                for t in self.tuples
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EatSequence":
        tuples = [
            EatTuple.from_features(rec["features"], rec["event"],
                                   rec["agent"], rec["theme"])
            for rec in data["tuples"]
        ]
        return cls(tuple(tuples), data.get("source_id", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "EatSequence":
        return cls.from_dict(json.loads(line))


def write_jsonl(sequences, fh) -> None:
    for seq in sequences:
        fh.write(seq.to_json() + "\n")


def read_jsonl(fh) -> list:
    out = []
    for line in fh:
        line = line.strip()
        if line:
            out.append(EatSequence.from_json(line))
    return out


# ---------------------------------------------------------------------------
# clause-feature detection
# ---------------------------------------------------------------------------

def _is_verbal(tok: Token) -> bool:
    return tok.upos in VERBAL_UPOS


def _is_finite(tok: Token) -> bool:
    if tok.feat("VerbForm") == "Fin":
        return True
    return tok.feat("Tense") is not None and tok.feat("VerbForm") != "Part"


def _is_present_participle(tok: Token) -> bool:
    vf = tok.feat("VerbForm")
    return vf == "Ger" or (vf == "Part" and tok.feat("Tense") == "Pres")


def _is_negation(tok: Token) -> bool:
    return tok.deprel == "neg" or (
        tok.deprel == "advmod" and tok.lemma in ("not", "n't", "n’t"))


def detect_clause_features(graph: DepGraph, verb_index: int) -> ClauseFeatures:
    """Derive force, truth, voice, tense, and aspect flags for one verb.

    Force: a sentence-final ``?`` or subject-auxiliary inversion marks a
    question; a bare-form root verb without a subject marks an imperative.
    Truth: negation on the verb or any of its auxiliaries flips it to false.
    Tense comes from the first finite element of the auxiliary chain; a
    *have* auxiliary adds the perfect flag and a participial *be* chain the
    imperfective flag.  Modal auxiliaries leave the clause tenseless.
    """
    verb = graph.token(verb_index)
    if not _is_verbal(verb):
        raise NotAVerb(f"token {verb_index} ({verb.form}) is not verbal")

    auxes = [t for t in graph.children(verb_index)
             if t.deprel in ("aux", "auxpass") and _is_verbal(t)]
    grammatical = [t for t in auxes if t.lemma not in MODAL_LEMMAS]
    chain = sorted(grammatical + [verb], key=lambda t: t.index)

    subj = graph.child(verb_index, "nsubj")
    subj_pass = graph.child(verb_index, "nsubjpass")
    subject = subj or subj_pass

    force = "declarative"
    if graph.tokens and graph.tokens[-1].form == "?":
        force = "question"
    elif subject is not None and any(
            a.index < subject.index and _is_finite(a) for a in auxes):
        force = "question"
    elif (verb.head == 0 and subject is None
            and verb.feat("VerbForm") == "Inf" and verb.upos == "VERB"):
        force = "imperative"

    truth = not any(
        _is_negation(d)
        for head in auxes + [verb]
        for d in graph.children(head.index))

    voice = "passive" if (subj_pass is not None
                          or any(a.deprel == "auxpass" for a in auxes)) else "active"

    present = past = False
    for el in chain:
        tense = el.feat("Tense")
        if tense is not None and el.feat("VerbForm") != "Part":
            present = tense == "Pres"
            past = tense == "Past"
            break

    perfect = any(a.lemma == "have" for a in grammatical)
    be_auxes = [a for a in grammatical if a.lemma in ("be", "get")]
    imperfective = any(_is_present_participle(a) for a in be_auxes) or (
        bool(be_auxes) and voice == "active" and _is_present_participle(verb))

    return ClauseFeatures(force=force, truth=truth, voice=voice,
                          present=present, past=past, perfect=perfect,
                          imperfective=imperfective)


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def _noun_flags(graph: DepGraph, tok: Token) -> dict:
    """Plural/definite flags: 'the', demonstratives, possessors, proper nouns."""
    plural = tok.feat("Number") == "Plur"
    definite = tok.upos == "PROPN"
    for d in graph.children(tok.index):
        if d.deprel == "det" and (d.lemma == "the" or d.lemma in DEMONSTRATIVES):
            definite = True
        elif d.deprel == "poss":
            definite = True
    return {"plural": plural, "definite": definite}


def _degree_flags(tok: Token) -> dict:
    degree = tok.feat("Degree")
    return {"comparative": degree == "Cmp", "superlative": degree == "Sup"}


class _Extractor:
    def __init__(self, graph: DepGraph):
        self.graph = graph
        self.entries = []       # (sort_key, EatTuple)
        self.seen_verbs = set()

    def run(self) -> list:
        root = self.graph.root()
        if not _is_verbal(root):
            raise NoMainVerb(
                f"{self.graph.sentence_id or '<sentence>'}: root "
                f"{root.form!r} is not a verb")
        self.clause(root, main=True)
        ordered = sorted(self.entries, key=lambda e: e[0])
        return [t for _, t in ordered]

    def add(self, key, tup):
        self.entries.append(((key, len(self.entries)), tup))

    # -- clauses ------------------------------------------------------------

    def clause(self, verb: Token, main: bool, rp_antecedent=None):
        """Build the tuple for one verb and recurse into its dependents.

        ``rp_antecedent`` is ``(token, slot_name)`` when this clause is a
        relative clause; a relative pronoun inside it is flagged against that
        antecedent.
        """
        if verb.index in self.seen_verbs:
            return
        self.seen_verbs.add(verb.index)
        g = self.graph
        clause = detect_clause_features(g, verb.index)

        subj = g.child(verb.index, "nsubj")
        subj_pass = g.child(verb.index, "nsubjpass")
        dobj = g.child(verb.index, "dobj")
        recipient = None

        if clause.voice == "passive":
            agent_tok = self._passive_agent(verb)
            if subj_pass is not None and dobj is not None:
                theme_tok = dobj
                recipient = subj_pass
            else:
                theme_tok = subj_pass
        else:
            agent_tok = subj
            theme_tok = dobj

        # A verbal complement fills the Theme position by reference when no
        # nominal object claimed it.
        comp = None
        if theme_tok is None:
            for label in ("ccomp", "xcomp"):
                cand = g.child(verb.index, label)
                if cand is not None and _is_verbal(cand):
                    comp = cand
                    break

        agent_slot, agent_coref = self._argument_slot(agent_tok, rp_antecedent)
        theme_slot, theme_coref = self._argument_slot(theme_tok, rp_antecedent)
        if comp is not None:
            theme_coref = comp.index

        anchors = TupleAnchors(
            event_token=verb.index,
            agent_token=agent_tok.index if agent_tok is not None else None,
            theme_token=theme_tok.index if theme_tok is not None else None,
            target_token=rp_antecedent[0].index if rp_antecedent else None,
            agent_coref=agent_coref,
            theme_coref=theme_coref,
        )
        tup = EatTuple(clause=clause,
                       event=WordSlot(verb.lemma, **_degree_flags(verb)),
                       agent=agent_slot, theme=theme_slot, anchors=anchors)
        self.add(-1 if main else verb.index, tup)

        # A recipient normalizes to a TO-preposition tuple placed right after
        # the main tuple, mirroring the to-phrase construction.
        if recipient is not None:
            self._prep_tuple_from_noun("to", recipient, verb, "event",
                                       sort_key=-0.5)

        if agent_tok is not None:
            self._noun_dependents(agent_tok, "agent")
        if theme_tok is not None:
            self._noun_dependents(theme_tok, "theme")
        if recipient is not None:
            self._noun_dependents(recipient, "theme")
        self._verb_dependents(verb)
        if comp is not None:
            self.clause(comp, main=False)

    def _passive_agent(self, verb: Token):
        g = self.graph
        by = g.child(verb.index, "agent")
        if by is None:
            return None
        if by.upos == "ADP":
            return g.child(by.index, "pobj")
        return by  # some parsers attach the noun directly under 'agent'

    def _argument_slot(self, tok, rp_antecedent):
        """WordSlot for an argument token; relative pronouns get R-flags."""
        if tok is None:
            return EMPTY_SLOT, None
        if tok.upos == "PRON" and tok.lemma in RELATIVE_PRONOUNS:
            rp_agent = rp_theme = False
            coref = None
            if rp_antecedent is not None:
                ante_tok, ante_slot = rp_antecedent
                coref = ante_tok.index
                if ante_slot == "agent":
                    rp_agent = True
                elif ante_slot == "theme":
                    rp_theme = True
                # an Event antecedent leaves all four R-flags unset
            return WordSlot(tok.lemma, rp_agent=rp_agent, rp_theme=rp_theme), coref
        flags = _noun_flags(self.graph, tok)
        slot = WordSlot(tok.lemma, plural=flags["plural"],
                        definite=flags["definite"], **_degree_flags(tok))
        return slot, None

    # -- dependents of nouns and verbs --------------------------------------

    def _noun_dependents(self, noun: Token, slot_name: str):
        g = self.graph
        for d in g.children(noun.index):
            if d.deprel in NOUN_MODIFIER_DEPRELS:
                self._modifier_tuple(d, noun, slot_name)
            elif d.deprel == "poss" and d.upos != "DET":
                self._possessor_tuple(d, noun, slot_name)
            elif d.deprel == "prep" and d.upos == "ADP":
                self._prep_tuple(d, noun, slot_name)
            elif d.deprel == "relcl" and _is_verbal(d):
                self.clause(d, main=False, rp_antecedent=(noun, slot_name))

    def _verb_dependents(self, verb: Token):
        g = self.graph
        for d in g.children(verb.index):
            if d.deprel == "advmod" and not _is_negation(d):
                self._modifier_tuple(d, verb, "event")
            elif d.deprel == "aux" and d.lemma in MODAL_LEMMAS:
                tup = EatTuple(
                    clause=ClauseFeatures(),
                    event=WordSlot(d.lemma),
                    anchors=TupleAnchors(event_token=d.index,
                                         target_token=verb.index))
                self.add(d.index, tup)
            elif d.deprel == "prep" and d.upos == "ADP":
                self._prep_tuple(d, verb, "event")
            elif d.deprel == "relcl" and _is_verbal(d):
                self.clause(d, main=False, rp_antecedent=(verb, "event"))

    def _modifier_tuple(self, mod: Token, target: Token, slot_name: str):
        """Adjectives, numerals, compounds, and adverbs as one-slot tuples."""
        slot = WordSlot(mod.lemma, **_degree_flags(mod))
        anchors = TupleAnchors(target_token=target.index,
                               **{f"{slot_name}_token": mod.index})
        self.add(mod.index, EatTuple(clause=ClauseFeatures(), anchors=anchors,
                                     **{slot_name: slot}))
        # Modifiers of the modifier ("very fast") predicate the same thing.
        for d in self.graph.children(mod.index):
            if d.deprel in ("advmod", "amod", "compound", "nummod") \
                    and not _is_negation(d):
                self._modifier_tuple(d, mod, slot_name)

    def _possessor_tuple(self, poss: Token, noun: Token, slot_name: str):
        flags = _noun_flags(self.graph, poss)
        slot = WordSlot(poss.lemma, possessive=True, plural=flags["plural"],
                        definite=flags["definite"])
        anchors = TupleAnchors(target_token=noun.index,
                               **{f"{slot_name}_token": poss.index})
        self.add(poss.index, EatTuple(clause=ClauseFeatures(), anchors=anchors,
                                      **{slot_name: slot}))
        self._noun_dependents(poss, slot_name)

    def _prep_tuple(self, prep: Token, target: Token, target_slot: str):
        obj = self.graph.child(prep.index, "pobj")
        if obj is None:
            return
        self._prep_tuple_from_noun(prep.lemma, obj, target, target_slot,
                                   sort_key=prep.index, prep_token=prep.index)

    def _prep_tuple_from_noun(self, prep_lemma: str, obj: Token, target: Token,
                              target_slot: str, sort_key, prep_token=None):
        theme_slot, theme_coref = self._argument_slot(obj, None)
        tup = EatTuple(
            clause=ClauseFeatures(prep_position=target_slot),
            event=WordSlot(prep_lemma),
            theme=theme_slot,
            anchors=TupleAnchors(event_token=prep_token, theme_token=obj.index,
                                 target_token=target.index,
                                 theme_coref=theme_coref))
        self.add(sort_key, tup)
        self._noun_dependents(obj, "theme")


def extract(graph: DepGraph) -> EatSequence:
    """Map a dependency graph to its EAT sequence, main clause first."""
    tuples = _Extractor(graph).run()
    if not tuples:
        raise EmptySequence(f"{graph.sentence_id}: nothing to extract")
    tuples = _blank_repeated_events(tuples)
    return EatSequence(tuple(tuples), graph.sentence_id)


def _blank_repeated_events(tuples):
    """Blank an Event lemma that repeats the previous tuple's event token."""
    out = [tuples[0]]
    for tup in tuples[1:]:
        prev = out[-1]
        if (not tup.event.is_empty()
                and tup.event.lemma == prev.event.lemma
                and tup.anchors.event_token is not None
                and tup.anchors.event_token == prev.anchors.event_token):
            tup = replace(tup, event=EMPTY_SLOT)
        out.append(tup)
    return out


def category_of(seq: EatSequence) -> ClauseFeatures:
    """Grammatical category of a sentence = its first tuple's clause features."""
    if not seq.tuples:
        raise EmptySequence("cannot take the category of an empty sequence")
    return seq.tuples[0].clause


# ---------------------------------------------------------------------------
# logical-form rendering
# ---------------------------------------------------------------------------

_EVENT_VARS = ["e", "e′", "e″", "e‴"]
_ARG_VARS = ["x", "y", "z", "w", "u", "v"]


class _VarPool:
    def __init__(self):
        self.count = 0
        self.by_token = {}

    def fresh(self, token=None) -> str:
        var = _ARG_VARS[self.count] if self.count < len(_ARG_VARS) \
            else f"x{self.count}"
        self.count += 1
        if token is not None:
            self.by_token[token] = var
        return var

    def reserve(self):
        self.count += 1

    def get(self, token):
        return self.by_token.get(token)


def _pred(lemma: str) -> str:
    return lemma.upper() + "*"


def render_lf(seq: EatSequence) -> str:
    """Render a sequence as a conjunction of starred lexical predications.

    Each verbal tuple introduces a fresh event variable (e, e', ...).  The
    main tuple reserves ``x`` and ``y`` for its Agent and Theme positions;
    every later referential slot takes the next free variable.  Slots anchored
    to the same source token share a variable, and a relative pronoun reuses
    its antecedent's variable instead of predicating.
    """
    if not seq.tuples:
        raise EmptySequence("cannot render an empty sequence")

    pool = _VarPool()
    event_vars = {}     # tuple position -> event variable
    token_event = {}    # event token index -> event variable
    n_events = 0
    for i, tup in enumerate(seq.tuples):
        if tup.clause.voice != "none":
            var = _EVENT_VARS[n_events] if n_events < len(_EVENT_VARS) \
                else f"e{n_events}"
            event_vars[i] = var
            if tup.anchors.event_token is not None:
                token_event[tup.anchors.event_token] = var
            n_events += 1

    # Non-verbal tuples relay their slot tokens to the token they modify, so
    # chained modifiers ("very fast") resolve to the right variable.
    relay = {}
    for tup in seq.tuples:
        a = tup.anchors
        if tup.clause.voice == "none" and a.target_token is not None:
            for slot_tok in (a.event_token, a.agent_token, a.theme_token):
                if slot_tok is not None:
                    relay[slot_tok] = a.target_token

    def resolve(tok):
        hops = 0
        while tok is not None and hops < len(seq.tuples) + 2:
            if tok in token_event:
                return token_event[tok]
            if pool.get(tok) is not None:
                return pool.get(tok)
            if tok in relay:
                tok = relay[tok]
                hops += 1
                continue
            return pool.fresh(tok)
        return pool.fresh(tok)

    parts = []
    for i, tup in enumerate(seq.tuples):
        a, c = tup.anchors, tup.clause
        if c.voice != "none":
            ev = event_vars[i]
            preds = [f"{_pred(tup.event.lemma)}({ev})"]
            rels = []
            for slot, tok, coref, rel in (
                    (tup.agent, a.agent_token, a.agent_coref, "Ag"),
                    (tup.theme, a.theme_token, a.theme_coref, "Th")):
                if slot.is_empty():
                    if coref is not None and coref in token_event:
                        rels.append(f"{rel}({ev},{token_event[coref]})")
                    elif i == 0:
                        pool.reserve()
                    continue
                if slot.rp_agent or slot.rp_theme or coref is not None:
                    var = token_event.get(coref) or pool.get(coref)
                    if var is None:
                        var = pool.fresh(coref if coref is not None else tok)
                    rels.append(f"{rel}({ev},{var})")
                    continue
                var = pool.get(tok) if tok is not None else None
                if var is None:
                    var = pool.fresh(tok)
                preds.append(f"{_pred(slot.lemma)}({var})")
                rels.append(f"{rel}({ev},{var})")
            parts.extend(preds + rels)
        elif c.prep_position != "none":
            if tup.theme.is_empty():
                continue
            target_var = resolve(a.target_token) if a.target_token is not None \
                else event_vars.get(0, "e")
            var = pool.get(a.theme_token)
            if var is None:
                var = pool.fresh(a.theme_token)
            parts.append(f"{_pred(tup.theme.lemma)}({var})")
            parts.append(f"{tup.event.lemma.upper()}({target_var},{var})")
        else:
            # plain modifier / possessor / modal tuple
            for slot, tok in ((tup.event, a.event_token),
                              (tup.agent, a.agent_token),
                              (tup.theme, a.theme_token)):
                if slot.is_empty():
                    continue
                target_var = resolve(a.target_token) if a.target_token is not None \
                    else event_vars.get(0, "e")
                if slot.possessive:
                    var = pool.get(tok)
                    if var is None:
                        var = pool.fresh(tok)
                    parts.append(f"{_pred(slot.lemma)}({var})")
                    parts.append(f"POSS({var},{target_var})")
                else:
                    parts.append(f"{_pred(slot.lemma)}({target_var})")

    return " ∧ ".join(parts)
