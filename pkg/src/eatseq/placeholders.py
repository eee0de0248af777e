"""Mask names, plural numbers, and embedding-OOV words before encoding.

Masked chunks are replaced by placeholders the model knows: first names for
proper names, digits 2-9 for plural numbers, and small per-class word lists
for OOV words.  A placeholder is only used if none of its inflected forms
appears elsewhere in the sentence, and each placeholder is used at most once
per sentence.  After decoding, inflected placeholders map back through their
lemma to the original chunk.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

from .depgraph import DepGraph, Token
from .errors import PlaceholderExhausted

logger = logging.getLogger(__name__)

NAMES = ("John", "Mary", "Bob", "Alice", "Lisa", "Tom", "Harry", "Anna",
         "James", "Jennifer", "Richard", "Charles", "Thomas", "George", "Linda")
DIGITS = ("2", "3", "4", "5", "6", "7", "8", "9")
INTRANSITIVE = ("walk", "sing", "eat", "drink", "sit")
TRANSITIVE = ("make", "do", "prepare", "sing", "write")
COUNT = ("woman", "man", "girl", "boy", "dog")
MASS = ("stuff", "water", "air", "fire", "food")

# base, 3sg present, past, past participle, present participle
_VERB_FORMS = {
    "walk": ("walk", "walks", "walked", "walked", "walking"),
    "sing": ("sing", "sings", "sang", "sung", "singing"),
    "eat": ("eat", "eats", "ate", "eaten", "eating"),
    "drink": ("drink", "drinks", "drank", "drunk", "drinking"),
    "sit": ("sit", "sits", "sat", "sat", "sitting"),
    "make": ("make", "makes", "made", "made", "making"),
    "do": ("do", "does", "did", "done", "doing"),
    "prepare": ("prepare", "prepares", "prepared", "prepared", "preparing"),
    "write": ("write", "writes", "wrote", "written", "writing"),
}

_NOUN_FORMS = {
    "woman": ("woman", "women"),
    "man": ("man", "men"),
    "girl": ("girl", "girls"),
    "boy": ("boy", "boys"),
    "dog": ("dog", "dogs"),
    "stuff": ("stuff", "stuff"),
    "water": ("water", "water"),
    "air": ("air", "air"),
    "fire": ("fire", "fire"),
    "food": ("food", "foods"),
}


def _default_inflections() -> dict:
    table = {}
    for lemma, forms in _VERB_FORMS.items():
        table[lemma] = list(dict.fromkeys(forms))
    for lemma, (sg, pl) in _NOUN_FORMS.items():
        table[lemma] = list(dict.fromkeys((sg, pl)))
    for name in NAMES:
        table[name] = [name]
    for digit in DIGITS:
        table[digit] = [digit]
    return table


@dataclass
class PlaceholderLexicon:
    names: tuple = NAMES
    digits: tuple = DIGITS
    intransitive: tuple = INTRANSITIVE
    transitive: tuple = TRANSITIVE
    count: tuple = COUNT
    mass: tuple = MASS
    inflections: dict = field(default_factory=_default_inflections)

    def class_list(self, cls: str) -> tuple:
        return {"name": self.names, "number": self.digits,
                "intransitive": self.intransitive, "transitive": self.transitive,
                "count": self.count, "mass": self.mass}[cls]

    def forms_of(self, lemma: str) -> list:
        return self.inflections.get(lemma, [lemma])

    def surface_to_lemma(self) -> dict:
        out = {}
        for lemma, forms in self.inflections.items():
            for form in forms:
                out.setdefault(form.lower(), lemma)
        return out

    def all_placeholders(self) -> set:
        out = set()
        for cls in ("name", "number", "intransitive", "transitive", "count", "mass"):
            for lemma in self.class_list(cls):
                out.update(f.lower() for f in self.forms_of(lemma))
        return out

    @classmethod
    def from_json(cls, path) -> "PlaceholderLexicon":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        kwargs = {}
        for key in ("names", "digits", "intransitive", "transitive", "count", "mass"):
            if key in data:
                kwargs[key] = tuple(data[key])
        if "inflections" in data:
            kwargs["inflections"] = {k: list(v) for k, v in data["inflections"].items()}
        return cls(**kwargs)


def default_lexicon() -> PlaceholderLexicon:
    return PlaceholderLexicon()


@dataclass(frozen=True)
class PlaceholderEntry:
    placeholder: str        # placeholder lemma
    original: str           # original surface chunk (space-joined)
    cls: str                # name | number | intransitive | transitive | count | mass


@dataclass
class PlaceholderMap:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def lookup(self, lemma: str) -> str | None:
        for entry in self.entries:
            if entry.placeholder == lemma:
                return entry.original
        return None


def _inflect(lexicon: PlaceholderLexicon, lemma: str, original: Token, cls: str) -> str:
    """Pick the placeholder form agreeing with the original token's morphology."""
    if cls in ("name", "number"):
        return lemma
    if cls in ("intransitive", "transitive"):
        base, sg3, past, part, ger = _VERB_FORMS.get(
            lemma, (lemma, lemma, lemma, lemma, lemma))
        vf = original.feat("VerbForm")
        tense = original.feat("Tense")
        if vf == "Part" and tense == "Past":
            return part
        if vf == "Ger" or (vf == "Part" and tense == "Pres"):
            return ger
        if tense == "Past":
            return past
        if tense == "Pres" and original.feat("Person") != "1":
            return sg3 if original.feat("Number") != "Plur" else base
        return base
    sg, pl = _NOUN_FORMS.get(lemma, (lemma, lemma))
    return pl if original.feat("Number") == "Plur" else sg


def _chunk_members(graph: DepGraph, head: Token, upos: str) -> list:
    """The head plus its same-POS compound/flat dependents, in order."""
    members = [head]
    for d in graph.children(head.index):
        if d.upos == upos and d.deprel in ("compound", "flat", "name", "nummod"):
            members.append(d)
    return sorted(members, key=lambda t: t.index)


def _oov_class(graph: DepGraph, tok: Token) -> str:
    if tok.upos == "VERB":
        return "transitive" if graph.child(tok.index, "dobj") is not None \
            else "intransitive"
    if tok.upos in ("NOUN", "PROPN"):
        if tok.feat("Number") == "Plur":
            return "count"
        has_det = any(d.deprel == "det" for d in graph.children(tok.index))
        return "count" if has_det else "mass"
    return "mass"


def mask(graph: DepGraph, store, lexicon: PlaceholderLexicon | None = None,
         seed: int = 0):
    """Replace names, plural numbers, and OOV words with placeholders.

    Returns ``(masked_graph, placeholder_map)``.  Multiword name/number
    chunks collapse into a single placeholder token.  Seeded and
    deterministic.
    """
    lexicon = lexicon or default_lexicon()
    rng = random.Random(seed)

    chunk_of = {}   # member index -> chunk head index
    chunks = []     # (head Token, members, class)
    for tok in graph.tokens:
        if tok.index in chunk_of:
            continue
        if tok.upos == "PROPN":
            if tok.deprel in ("compound", "flat", "name") \
                    and graph.token(tok.head).upos == "PROPN":
                continue  # member of a later head's chunk
            members = _chunk_members(graph, tok, "PROPN")
            chunks.append((tok, members, "name"))
            for m in members:
                chunk_of[m.index] = tok.index
        elif tok.upos == "NUM":
            if tok.deprel in ("compound", "nummod") \
                    and graph.token(tok.head).upos == "NUM":
                continue
            head_of = graph.token(tok.head) if tok.head else None
            plural_context = head_of is not None and head_of.feat("Number") == "Plur"
            if not plural_context:
                continue
            members = _chunk_members(graph, tok, "NUM")
            chunks.append((tok, members, "number"))
            for m in members:
                chunk_of[m.index] = tok.index
    for tok in graph.tokens:
        if tok.index in chunk_of:
            continue
        if tok.upos in ("VERB", "NOUN", "ADJ", "ADV") and tok.lemma not in store:
            chunks.append((tok, [tok], _oov_class(graph, tok)))
            chunk_of[tok.index] = tok.index

    chunks.sort(key=lambda c: c[0].index)

    # Forms present outside each chunk rule out colliding placeholders.
    entries = []
    chosen = {}          # chunk head index -> placeholder lemma
    used = set()
    all_lower = [t.form.lower() for t in graph.tokens]
    for head, members, cls in chunks:
        member_ids = {m.index for m in members}
        outside = {form for t, form in zip(graph.tokens, all_lower)
                   if t.index not in member_ids}
        pool = list(lexicon.class_list(cls))
        rng.shuffle(pool)
        pick = None
        for cand in pool:
            if cand in used:
                continue
            forms = {f.lower() for f in lexicon.forms_of(cand)}
            if forms & outside:
                continue
            pick = cand
            break
        if pick is None:
            raise PlaceholderExhausted(
                f"no unused {cls} placeholder left for {head.form!r}")
        used.add(pick)
        chosen[head.index] = (pick, cls)
        original = " ".join(m.form for m in sorted(members, key=lambda t: t.index))
        entries.append(PlaceholderEntry(pick, original, cls))

    if not chunks:
        return graph, PlaceholderMap([])

    # Rebuild the token list: chunk members vanish, heads take the
    # placeholder, indices shift accordingly.
    drop = {m.index for head, members, _ in chunks for m in members
            if m.index != head.index}
    new_index = {}
    counter = 0
    for tok in graph.tokens:
        if tok.index in drop:
            continue
        counter += 1
        new_index[tok.index] = counter

    def resolve_head(idx: int) -> int:
        cur = idx
        while cur in drop:
            cur = chunk_of.get(cur, graph.token(cur).head)
            if cur == 0:
                return 0
        return new_index[cur]

    new_tokens = []
    for tok in graph.tokens:
        if tok.index in drop:
            continue
        head = 0 if tok.head == 0 else resolve_head(tok.head)
        if tok.index in chosen:
            lemma, cls = chosen[tok.index]
            form = _inflect(lexicon, lemma, tok, cls)
            new_tokens.append(Token(
                index=new_index[tok.index], form=form, lemma=lemma,
                upos=tok.upos, feats=dict(tok.feats), head=head,
                deprel=tok.deprel))
        else:
            new_tokens.append(Token(
                index=new_index[tok.index], form=tok.form, lemma=tok.lemma,
                upos=tok.upos, feats=dict(tok.feats), head=head,
                deprel=tok.deprel))
    masked = DepGraph(tuple(new_tokens), graph.sentence_id)
    return masked, PlaceholderMap(entries)


def unmask(decoded_tokens, pmap: PlaceholderMap,
           lexicon: PlaceholderLexicon | None = None,
           warnings: list | None = None) -> list:
    """Map decoded placeholder forms back to the original surface chunks."""
    lexicon = lexicon or default_lexicon()
    lemma_of = lexicon.surface_to_lemma()
    by_lemma = {e.placeholder: e.original for e in pmap}
    out = []
    for token in decoded_tokens:
        lemma = lemma_of.get(token.lower())
        if lemma is not None and lemma in by_lemma:
            out.extend(by_lemma[lemma].split(" "))
        else:
            if lemma is not None and pmap.entries and warnings is not None:
                warnings.append(token)
                logger.debug("placeholder-like token %r has no mapping", token)
            out.append(token)
    return out
