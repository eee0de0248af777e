"""CoNLL-U reading, validation, and an immutable dependency-graph model.

The interchange format is 10-column CoNLL-U.  Only the first eight columns
(ID, FORM, LEMMA, UPOS, XPOS, FEATS, HEAD, DEPREL) are interpreted; DEPS and
MISC are ignored.  Multiword-token lines (ranged IDs like ``1-2``) and empty
nodes (decimal IDs like ``3.1``) are skipped.

Dependency labels are normalized through ``DEPREL_ALIASES`` so that Universal
Dependencies output and the older label set used downstream (nsubj, dobj,
nsubjpass, agent, pobj, iobj, ...) can be mixed freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import IndexOutOfRange, InvalidGraph, MalformedLine

# UD v2 labels mapped onto the label inventory the extraction rules use.
DEPREL_ALIASES = {
    "obj": "dobj",
    "nsubj:pass": "nsubjpass",
    "csubj:pass": "csubjpass",
    "obl:agent": "agent",
    "aux:pass": "auxpass",
    "acl:relcl": "relcl",
    "nmod:poss": "poss",
    "obl:npmod": "npadvmod",
}


def normalize_deprel(deprel: str) -> str:
    return DEPREL_ALIASES.get(deprel, deprel)


@dataclass(frozen=True)
class Token:
    """One word of a parsed sentence (1-based index, head 0 = root)."""

    index: int
    form: str
    lemma: str
    upos: str
    feats: dict
    head: int
    deprel: str

    def __post_init__(self):
        if self.index < 1:
            raise InvalidGraph(f"token index must be >= 1, got {self.index}")
        if self.head < 0 or self.head == self.index:
            raise InvalidGraph(f"bad head {self.head} for token {self.index}")
        if not self.form or not self.lemma:
            raise InvalidGraph(f"token {self.index} has empty form or lemma")

    def feat(self, name: str, default: str | None = None) -> str | None:
        return self.feats.get(name, default)


@dataclass(frozen=True)
class DepGraph:
    """A validated dependency parse: exactly one root, acyclic heads."""

    tokens: tuple
    sentence_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        n = len(self.tokens)
        roots = [t for t in self.tokens if t.head == 0]
        if n and len(roots) != 1:
            raise InvalidGraph(
                f"{self.sentence_id or '<sentence>'}: expected one root, found {len(roots)}")
        for t in self.tokens:
            if t.head > n:
                raise InvalidGraph(f"token {t.index} has dangling head {t.head}")
        # Follow heads upward from every token; a cycle never reaches 0.
        for t in self.tokens:
            seen = set()
            cur = t
            while cur.head != 0:
                if cur.index in seen:
                    raise InvalidGraph(f"cycle through token {t.index}")
                seen.add(cur.index)
                cur = self.tokens[cur.head - 1]

    def __len__(self):
        return len(self.tokens)

    def token(self, index: int) -> Token:
        if not 1 <= index <= len(self.tokens):
            raise IndexOutOfRange(f"no token with index {index}")
        return self.tokens[index - 1]

    def root(self) -> Token:
        for t in self.tokens:
            if t.head == 0:
                return t
        raise InvalidGraph("empty graph has no root")

    def children(self, index: int, deprel: str | None = None) -> list:
        """Dependents of a token in document order, optionally filtered by label."""
        if not 1 <= index <= len(self.tokens):
            raise IndexOutOfRange(f"no token with index {index}")
        out = [t for t in self.tokens if t.head == index]
        if deprel is not None:
            out = [t for t in out if t.deprel == deprel]
        return out

    def child(self, index: int, deprel: str) -> Token | None:
        """First dependent with the given label, or None."""
        for t in self.children(index, deprel):
            return t
        return None

    def text(self) -> str:
        return " ".join(t.form for t in self.tokens)


def children(graph: DepGraph, index: int, deprel_filter: str | None = None) -> list:
    return graph.children(index, deprel_filter)


def _parse_feats(text: str) -> dict:
    if text in ("_", ""):
        return {}
    feats = {}
    for item in text.split("|"):
        if "=" in item:
            name, value = item.split("=", 1)
            feats[name] = value
        else:
            feats[item] = ""
    return feats


def _format_feats(feats: dict) -> str:
    if not feats:
        return "_"
    return "|".join(f"{k}={v}" if v else k for k, v in sorted(feats.items()))


def parse_conllu(text: str) -> list:
    """Parse CoNLL-U text into a list of DepGraph, one per sentence block."""
    graphs = []
    tokens = []
    sent_id = ""
    block_no = 0

    def flush():
        nonlocal tokens, sent_id, block_no
        if tokens:
            block_no += 1
            graphs.append(DepGraph(tuple(tokens), sent_id or f"s{block_no}"))
        tokens = []
        sent_id = ""

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("sent_id") and "=" in body:
                sent_id = body.split("=", 1)[1].strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise MalformedLine(f"line {lineno}: expected 10 columns, got {len(cols)}")
        ident = cols[0]
        if "-" in ident or "." in ident:
            continue  # multiword-token / empty-node lines carry no tree structure
        try:
            index = int(ident)
            head = int(cols[6])
        except ValueError:
            raise MalformedLine(f"line {lineno}: non-numeric ID or HEAD") from None
        try:
            tokens.append(Token(
                index=index,
                form=cols[1],
                lemma=cols[2],
                upos=cols[3],
                feats=_parse_feats(cols[5]),
                head=head,
                deprel=normalize_deprel(cols[7]),
            ))
        except InvalidGraph as exc:
            raise MalformedLine(f"line {lineno}: {exc}") from None
    flush()
    return graphs


def serialize(graphs) -> str:
    """Write DepGraphs back to CoNLL-U text (inverse of parse_conllu)."""
    blocks = []
    for g in graphs:
        lines = []
        if g.sentence_id:
            lines.append(f"# sent_id = {g.sentence_id}")
        for t in g.tokens:
            lines.append("\t".join([
                str(t.index), t.form, t.lemma, t.upos, "_",
                _format_feats(t.feats), str(t.head), t.deprel, "_", "_",
            ]))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
