"""Model input serialization and the diff-formatted edit-script output.

See ``formats.md`` for the normative grammar. In short: ``[i]`` copies source
sentence ``i``; a run of ``(j)`` tokens names the evidence supporting the next
written sentence. Sentence text that would itself lex as one of these tokens
is escaped with a zero-width joiner right after the opening bracket.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from wikiupdate.diff import Label, TableRowContent
from wikiupdate.models import TableBlock
from wikiupdate.segment import segment_sentences
from wikiupdate.text import collapse_whitespace

ZWJ = "\u200d"
_COPY = re.compile(r"\[(\d+)\]")
_REFS = re.compile(r"(?:\(\d+\))+")
_REF = re.compile(r"\((\d+)\)")


class ControlPlanError(ValueError):
    pass


# --- escaping ------------------------------------------------------------------


def _core(chunk: str) -> str:
    return chunk[:1] + chunk[1:].lstrip(ZWJ)


def _tokenish(chunk: str) -> bool:
    if chunk[:1] not in ("[", "("):
        return False
    core = _core(chunk)
    return bool(_COPY.fullmatch(core) or _REFS.fullmatch(core))


def escape_text(text: str) -> str:
    return " ".join(c[0] + ZWJ + c[1:] if _tokenish(c) else c for c in text.split(" "))


def _unescape_chunk(chunk: str) -> str:
    if chunk[1:2] == ZWJ and _tokenish(chunk):
        return chunk[0] + chunk[2:]
    return chunk


# --- edit scripts ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Copy:
    source_index: int


@dataclass(frozen=True, slots=True)
class Write:
    refs: tuple[int, ...]
    text: str


EditItem = Union[Copy, Write]


def _refs(refs: Iterable[int]) -> str:
    return "".join(f"({j})" for j in refs)


@dataclass(frozen=True)
class EditScript:
    items: tuple[EditItem, ...] = ()

    def render(self) -> str:
        parts = []
        for item in self.items:
            if isinstance(item, Copy):
                parts.append(f"[{item.source_index}]")
            else:
                if item.refs:
                    parts.append(_refs(item.refs))
                parts.append(escape_text(item.text))
        return " ".join(p for p in parts if p)


def encode_target(instance) -> EditScript:
    items: list[EditItem] = []
    for al in instance.alignments:
        if al.label is Label.COPIED:
            items.append(Copy(al.source_index))
        else:
            refs = tuple(instance.support.get(al.target_index, ()))
            items.append(Write(refs, instance.target_intro[al.target_index].text))
    return EditScript(tuple(items))


@dataclass
class Decoded:
    sentences: list[str] = field(default_factory=list)
    refs: dict[int, list[int]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.sentences, self.refs))


def decode_output(raw: str, source_sentences: Sequence[str]) -> Decoded:
    """Expand an edit script back into the full updated article.

    Total over arbitrary input: malformed bracket tokens stay literal text and
    out-of-range copy tokens are dropped with a warning.
    """
    out = Decoded()
    pending: list[int] = []
    buffer: list[str] = []

    def flush():
        nonlocal pending
        if not buffer:
            return
        for k, sent in enumerate(segment_sentences(" ".join(buffer))):
            if k == 0 and pending:
                out.refs[len(out.sentences)] = sorted(set(pending))
                pending = []
            out.sentences.append(sent.text)
        buffer.clear()

    for chunk in raw.split():
        if (m := _COPY.fullmatch(chunk)) is not None:
            flush()
            pending = []  # refs directly before a copy support nothing
            i = int(m.group(1))
            if i < len(source_sentences):
                out.sentences.append(source_sentences[i])
            else:
                out.warnings.append(f"copy token [{i}] out of range ({len(source_sentences)} source sentences)")
        elif _REFS.fullmatch(chunk):
            flush()
            pending.extend(int(j) for j in _REF.findall(chunk))
        else:
            buffer.append(_unescape_chunk(chunk))
    flush()
    return out


# --- tables ----------------------------------------------------------------------


def _linearize(table_id: str, header, rows: Iterable[tuple[str, Sequence[str]]]) -> str:
    parts = [table_id, "[HEADER]"]
    for h in header:
        parts += ["[COL]", collapse_whitespace(h)]
    for attrs, cells in rows:
        parts += ["[ROW]", collapse_whitespace(attrs)]
        for c in cells:
            parts += ["[COL]", collapse_whitespace(c)]
    return " ".join(p for p in parts if p)


def linearize_table(table: TableBlock, row_subset: Sequence[int] = ()) -> str:
    rows = []
    for i in row_subset:
        if not 0 <= i < len(table.rows):
            raise IndexError(f"row {i} out of range for {table.table_id} ({len(table.rows)} rows)")
        rows.append((table.rows[i].attrs, table.rows[i].texts))
    return _linearize(table.table_id, table.header, rows)


def linearize_row(content: TableRowContent) -> str:
    return _linearize(content.table_id, content.header, [(content.attrs, content.cells)])


# --- control codes -------------------------------------------------------------


class Directive(str, enum.Enum):
    KEEP = "KEEP"
    EDIT = "EDIT"
    REMOVE = "REMOVE"


@dataclass(frozen=True, slots=True)
class SentenceControl:
    directive: Directive
    refs: tuple[int, ...] = ()


@dataclass(frozen=True, slots=True)
class Insertion:
    after: int
    refs: tuple[int, ...] = ()


@dataclass(frozen=True)
class ControlPlan:
    sentences: tuple[SentenceControl, ...]
    insertions: tuple[Insertion, ...] = ()


def plan_from_target(instance) -> ControlPlan:
    """Oracle control codes recovered from the target's alignments."""
    controls = [SentenceControl(Directive.REMOVE)] * len(instance.source_intro)
    insertions = []
    last_source = -1
    for al in instance.alignments:
        refs = tuple(instance.support.get(al.target_index, ()))
        if al.label is Label.COPIED:
            controls[al.source_index] = SentenceControl(Directive.KEEP)
            last_source = al.source_index
        elif al.label is Label.EDITED:
            controls[al.source_index] = SentenceControl(Directive.EDIT, refs)
            last_source = al.source_index
        else:
            insertions.append(Insertion(last_source, refs))
    return ControlPlan(tuple(controls), tuple(insertions))


def _check_plan(plan: ControlPlan, n_source: int, n_evidence: int) -> None:
    if len(plan.sentences) != n_source:
        raise ControlPlanError(f"plan has {len(plan.sentences)} directives for {n_source} sentences")
    refs = [r for c in plan.sentences for r in c.refs] + [r for ins in plan.insertions for r in ins.refs]
    bad = [r for r in refs if not 0 <= r < n_evidence]
    if bad:
        raise ControlPlanError(f"evidence ids out of range: {bad}")
    for ins in plan.insertions:
        if not -1 <= ins.after < n_source:
            raise ControlPlanError(f"insertion after={ins.after} out of range")


def _marker(i: int, control: SentenceControl | None) -> str:
    if control is None:
        return f"[{i}]"
    if control.directive is Directive.EDIT and control.refs:
        return f"[{i}|EDIT|{_refs(control.refs)}]"
    return f"[{i}|{control.directive.value}]"


def _insertion(ins: Insertion) -> str:
    return f"[+|after={ins.after}|{_refs(ins.refs)}]" if ins.refs else f"[+|after={ins.after}]"


def render_evidence(item) -> str:
    parts = [f"({item.evidence_id})", item.origin_title, " - ".join(item.heading_path), escape_text(item.text())]
    return " ".join(p for p in parts if p)


def serialize_input(instance, include_evidence: bool = True, control: ControlPlan | None = None) -> str:
    n = len(instance.source_intro)
    parts = []
    inserts: dict[int, list[Insertion]] = {}
    if control is not None:
        _check_plan(control, n, len(instance.evidence))
        for ins in control.insertions:
            inserts.setdefault(ins.after, []).append(ins)
    parts += [_insertion(x) for x in inserts.get(-1, ())]
    for i, sent in enumerate(instance.source_intro):
        parts.append(_marker(i, control.sentences[i] if control is not None else None))
        parts.append(escape_text(sent.text))
        parts += [_insertion(x) for x in inserts.get(i, ())]
    if include_evidence:
        parts.append("[CONTEXT]")
        parts += [render_evidence(e) for e in instance.evidence]
    return " ".join(p for p in parts if p)
