"""User-controlled edits to EAT sequences.

Grammatical edits touch only the first tuple's clause features; lexical edits
replace or remove slot lemmas anywhere in the sequence.  All operations are
pure: they return a new sequence and never mutate their input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .eatcore import (
    EMPTY_SLOT,
    ClauseFeatures,
    EatSequence,
    EatTuple,
    WordSlot,
)
from .errors import (
    EmptySequence,
    IndexOutOfRange,
    InvalidCombination,
    NotRemovable,
    SlotEmpty,
)

TENSES = ("present", "past", "perfect", "pluperfect", "infinitive")
ASPECTS = ("perfective", "imperfective")
TRUTH_VALUES = {"true": True, "affirmed": True, "false": False, "negated": False}

REMOVE = "<remove>"

_TENSE_FLAGS = {
    "present": dict(present=True, past=False, perfect=False),
    "past": dict(present=False, past=True, perfect=False),
    "perfect": dict(present=True, past=False, perfect=True),
    "pluperfect": dict(present=False, past=True, perfect=True),
    "infinitive": dict(present=False, past=False, perfect=False),
}


@dataclass
class TransformSpec:
    """Requested edits: clause-feature targets plus slot-level lexical edits."""

    force: str | None = None
    truth: bool | None = None
    voice: str | None = None
    tense: str | None = None
    aspect: str | None = None
    lexical_edits: list = field(default_factory=list)  # (tuple_index, slot, lemma-or-REMOVE)

    def __post_init__(self):
        if self.force is not None and self.force not in ("declarative", "question", "imperative"):
            raise InvalidCombination(f"unknown force target {self.force!r}")
        if self.voice is not None and self.voice not in ("active", "passive"):
            raise InvalidCombination(f"unknown voice target {self.voice!r}")
        if self.tense is not None and self.tense not in TENSES:
            raise InvalidCombination(f"unknown tense target {self.tense!r}")
        if self.aspect is not None and self.aspect not in ASPECTS:
            raise InvalidCombination(f"unknown aspect target {self.aspect!r}")
        seen = set()
        for idx, slot, _ in self.lexical_edits:
            if slot not in ("event", "agent", "theme"):
                raise InvalidCombination(f"unknown slot {slot!r}")
            if (idx, slot) in seen:
                raise InvalidCombination(f"duplicate edit for tuple {idx} slot {slot}")
            seen.add((idx, slot))

    def is_identity(self) -> bool:
        return (self.force is None and self.truth is None and self.voice is None
                and self.tense is None and self.aspect is None
                and not self.lexical_edits)

    @classmethod
    def from_pairs(cls, pairs) -> "TransformSpec":
        """Build a spec from CLI-style ``key=value`` strings."""
        kwargs = {}
        for pair in pairs:
            if "=" not in pair:
                raise InvalidCombination(f"expected key=value, got {pair!r}")
            key, value = pair.split("=", 1)
            key = key.strip()
            value = value.strip()
            if key == "force":
                kwargs["force"] = value
            elif key == "truth":
                if value not in TRUTH_VALUES:
                    raise InvalidCombination(f"unknown truth target {value!r}")
                kwargs["truth"] = TRUTH_VALUES[value]
            elif key == "voice":
                kwargs["voice"] = value
            elif key == "tense":
                kwargs["tense"] = value
            elif key == "aspect":
                kwargs["aspect"] = value
            else:
                raise InvalidCombination(f"unknown transform key {key!r}")
        return cls(**kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "TransformSpec":
        edits = [tuple(e) for e in data.get("lexical_edits", [])]
        kwargs = {k: data[k] for k in ("force", "voice", "tense", "aspect") if k in data}
        if "truth" in data:
            value = data["truth"]
            kwargs["truth"] = TRUTH_VALUES[value] if isinstance(value, str) else bool(value)
        return cls(lexical_edits=edits, **kwargs)


def transform_grammar(seq: EatSequence, spec: TransformSpec) -> EatSequence:
    """Apply clause-level feature targets to the first tuple.

    Tense targets expand to flag pairs (perfect = present+perfect,
    pluperfect = past+perfect, infinitive = no tense flags).  Everything
    outside the first tuple's clause features is left untouched.
    """
    if not seq.tuples:
        raise EmptySequence("cannot transform an empty sequence")
    first = seq.tuples[0]
    clause = first.clause
    if clause.voice == "none" and not spec.is_identity():
        raise InvalidCombination("first tuple is not verbal")

    changes = {}
    if spec.force is not None:
        changes["force"] = spec.force
    if spec.truth is not None:
        changes["truth"] = spec.truth
    if spec.voice is not None:
        if spec.voice == "passive" and first.theme.is_empty():
            raise InvalidCombination("cannot passivize a clause without a Theme")
        changes["voice"] = spec.voice
    if spec.tense is not None:
        changes.update(_TENSE_FLAGS[spec.tense])
    if spec.aspect is not None:
        changes["imperfective"] = spec.aspect == "imperfective"

    new_first = replace(first, clause=replace(clause, **changes))
    out = EatSequence((new_first,) + seq.tuples[1:], seq.source_id)
    for idx, slot, lemma in spec.lexical_edits:
        if lemma == REMOVE:
            out = remove_argument(out, idx, slot)
        else:
            out = replace_word(out, idx, slot, lemma)
    return out


def replace_word(seq: EatSequence, tuple_index: int, slot: str, lemma: str) -> EatSequence:
    """Swap one slot's lemma, keeping every flag as it was."""
    if not 0 <= tuple_index < len(seq.tuples):
        raise IndexOutOfRange(f"no tuple at index {tuple_index}")
    tup = seq.tuples[tuple_index]
    old = tup.slot(slot)
    if old.is_empty():
        raise SlotEmpty(f"tuple {tuple_index} has an empty {slot} slot")
    new_tup = replace(tup, **{slot: replace(old, lemma=lemma)})
    tuples = list(seq.tuples)
    tuples[tuple_index] = new_tup
    return EatSequence(tuple(tuples), seq.source_id)


def remove_argument(seq: EatSequence, tuple_index: int, slot: str) -> EatSequence:
    """Empty an argument slot and drop every tuple that modified it.

    Modifier tuples are found through anchoring metadata: anything whose
    target token is the removed argument (or, transitively, a word that was
    itself removed) goes away, including prepositional tuples pointing at the
    removed slot.
    """
    if not 0 <= tuple_index < len(seq.tuples):
        raise IndexOutOfRange(f"no tuple at index {tuple_index}")
    if slot not in ("agent", "theme"):
        raise NotRemovable("only agent/theme arguments can be removed")
    tup = seq.tuples[tuple_index]
    old = tup.slot(slot)
    if old.is_empty():
        raise SlotEmpty(f"tuple {tuple_index} has an empty {slot} slot")
    other = tup.theme if slot == "agent" else tup.agent
    if other.is_empty():
        raise NotRemovable(
            f"removing the {slot} would leave tuple {tuple_index} without arguments")

    removed_token = getattr(tup.anchors, f"{slot}_token")
    cleared = replace(tup, **{
        slot: EMPTY_SLOT,
        "anchors": replace(tup.anchors, **{f"{slot}_token": None}),
    })

    tuples = list(seq.tuples)
    tuples[tuple_index] = cleared
    if removed_token is None:
        return EatSequence(tuple(tuples), seq.source_id)

    dead_tokens = {removed_token}
    while True:
        survivors = []
        dropped = False
        for t in tuples:
            a = t.anchors
            if t is not cleared and a.target_token is not None \
                    and a.target_token in dead_tokens:
                for tok in (a.event_token, a.agent_token, a.theme_token):
                    if tok is not None:
                        dead_tokens.add(tok)
                dropped = True
                continue
            survivors.append(t)
        tuples = survivors
        if not dropped:
            break
    return EatSequence(tuple(tuples), seq.source_id)
