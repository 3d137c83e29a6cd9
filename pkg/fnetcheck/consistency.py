# coding: utf-8
"""
Consistency of a view against its complete function net (C1-C5) and of a specialized view
against the view it refines (C6).

C1  every PLAIN/EXT view block exists in the net; ENV blocks are exempt.
C2  every nesting edge of the view is a (transitive) whole-part pair of the net.
C3  every whole-part pair of the net between shown blocks is nested in the view too.
C4  every signal connector between non-ENV blocks is realized by one net connector
    carrying all of its signals (any signal when unlabeled).
C5  connector endpoints are exact, or a superblock whose exact descendant is not shown.
C6  blocks and connectors of a specialization are a subset of those of its base.
"""
from __future__ import annotations

import enum
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .model import (
    BaseMismatch,
    BlockPath,
    Connector,
    FunctionNet,
    Marker,
    PortKind,
    Ref,
    ResolutionError,
    SourceSpan,
    View,
    ViewBlock,
    qualified,
)
from .net import AncestorRelation, close_pairs, containment_closure, index_net

CONSISTENT = 'CONSISTENT'
INCONSISTENT = 'INCONSISTENT'

CONDITIONS = ('C1', 'C2', 'C3', 'C4', 'C5', 'C6')


@dataclass(frozen=True)
class Finding:
    condition: str
    subjects: Tuple[str, ...]
    message: str
    span: Optional[SourceSpan] = field(default=None, compare=False)

    def __post_init__(self):
        assert self.condition in CONDITIONS, self.condition

    def prefixed(self, *prefix):
        return Finding(self.condition, tuple(prefix) + self.subjects, self.message, self.span)

    def to_dict(self):
        return {
            'condition': self.condition,
            'subjects': list(self.subjects),
            'message': self.message,
            'file': self.span.file if self.span else None,
            'line': self.span.line if self.span else None,
        }

    def __str__(self):
        where = '%s: ' % self.span if self.span else ''
        return '%s%s [%s] %s' % (where, self.condition, ', '.join(self.subjects), self.message)


@dataclass(frozen=True)
class ConsistencyReport:
    artifact: str
    findings: Tuple[Finding, ...] = ()
    notes: Tuple[str, ...] = ()

    @classmethod
    def build(cls, artifact, findings, notes=()):
        """Sorts findings by condition then subjects and drops duplicates."""
        unique = OrderedDict()
        for finding in sorted(findings, key=lambda f: (f.condition, f.subjects, f.message)):
            unique.setdefault(finding, finding)
        return cls(artifact, tuple(unique), tuple(OrderedDict.fromkeys(notes)))

    @property
    def verdict(self):
        return INCONSISTENT if self.findings else CONSISTENT

    @property
    def consistent(self):
        return not self.findings

    @property
    def conditions(self):
        return frozenset(f.condition for f in self.findings)

    def to_dict(self):
        return {
            'artifact': self.artifact,
            'verdict': self.verdict,
            'findings': [f.to_dict() for f in self.findings],
            'notes': list(self.notes),
        }


@dataclass(frozen=True)
class MatchResult:
    """Outcome of realizing one view connector in the net."""

    connector: Connector
    net_connector: Optional[Connector] = None
    view_source: Optional[BlockPath] = None
    view_target: Optional[BlockPath] = None
    net_source: Optional[BlockPath] = None
    net_target: Optional[BlockPath] = None
    source_lifted: bool = False
    target_lifted: bool = False

    @property
    def matched(self):
        return self.net_connector is not None

    def to_dict(self):
        return {
            'connector': '%s -> %s' % (self.connector.source.text, self.connector.target.text),
            'signals': list(self.connector.signals),
            'matched': self.matched,
            'netSource': qualified(self.net_source) if self.net_source else None,
            'netTarget': qualified(self.net_target) if self.net_target else None,
            'netSignals': list(self.net_connector.signals) if self.matched else [],
            'sourceLifted': self.source_lifted,
            'targetLifted': self.target_lifted,
        }


class _Fit(enum.Enum):
    EXACT = 'exact'
    LIFTED = 'lifted'
    BLOCKED = 'blocked'


def _fit(view_path, net_path, closure: AncestorRelation, shown):
    if view_path == net_path:
        return _Fit.EXACT
    if closure.is_ancestor(view_path, net_path):
        return _Fit.BLOCKED if net_path in shown else _Fit.LIFTED
    return None


def _carries(labels, net_conn):
    if labels:
        return set(labels) <= set(net_conn.signals)
    return bool(net_conn.signals)


def _realize(labels, source, target, net, closure, shown):
    """
    Scans the net connectors in declaration order. Returns (net connector, net source,
    net target, source fit, target fit) of the first realization, or None together with the
    condition that explains the miss.
    """
    near_miss = False
    for conn, net_source, net_target in index_net(net).resolved_connectors():
        if conn.kind is not PortKind.SIGNAL or not _carries(labels, conn):
            continue
        fits = (_fit(source, net_source, closure, shown), _fit(target, net_target, closure, shown))
        if all(f in (_Fit.EXACT, _Fit.LIFTED) for f in fits):
            return (conn, net_source, net_target) + fits, None
        if any(f in (_Fit.EXACT, _Fit.LIFTED) for f in fits):
            near_miss = True
    return None, 'C5' if near_miss else 'C4'


def match_connector(view_conn: Connector, net: FunctionNet, closure: AncestorRelation = None, shown=None) -> MatchResult:
    """
    Finds the first net connector (declaration order) realizing `view_conn`. `shown` is the
    set of net paths present in the view; an endpoint may only be lifted to a superblock
    when the exact net endpoint is not shown.
    """
    assert view_conn.kind is PortKind.SIGNAL, 'Only signal connectors are realized in the net.'
    if closure is None:
        closure = containment_closure(net)
    index = index_net(net)
    source = index.try_resolve(view_conn.source.names)
    target = index.try_resolve(view_conn.target.names)
    if source is None or target is None:
        return MatchResult(view_conn, view_source=source, view_target=target)
    if shown is None:
        shown = {source, target}
    found, _ = _realize(view_conn.signals, source, target, net, closure, frozenset(shown))
    if found is None:
        return MatchResult(view_conn, view_source=source, view_target=target)
    net_conn, net_source, net_target, source_fit, target_fit = found
    return MatchResult(
        view_conn,
        net_conn,
        source,
        target,
        net_source,
        net_target,
        source_fit is _Fit.LIFTED,
        target_fit is _Fit.LIFTED,
    )


@dataclass
class ViewEntry:
    text: str
    marker: Marker
    path: Optional[BlockPath]
    span: Optional[SourceSpan] = None
    problem: Optional[str] = None
    declared: bool = True

    @property
    def key(self):
        if self.marker is Marker.ENV:
            return ('<env>', self.text)
        if self.path is None:
            return ('<unresolved>', self.text)
        return self.path

    @property
    def label(self):
        return qualified(self.path) if self.path else self.text


class ResolvedView:
    """A view with its block names resolved against the net it is drawn on."""

    def __init__(self, view: View, net: FunctionNet):
        self.view = view
        self.net = net
        self.index = index_net(net)
        self.entries = OrderedDict()
        self._by_text = {}
        self.edges = []
        self.connectors = []

        for parent, block in view.walk():
            entry = self._entry(block.name, block.marker, block.span)
            if parent is not None:
                self.edges.append((self._by_text[parent.name.text].key, entry.key))
        for conn in view.connectors:
            self.connectors.append((conn, self._endpoint(conn.source, conn.span), self._endpoint(conn.target, conn.span)))

        self.effective_edges = self._effective_edges()
        self.nesting = close_pairs(frozenset(self.effective_edges))

    def _resolve(self, ref: Ref):
        try:
            return self.index.resolve(ref.names), None
        except ResolutionError as exc:
            return None, exc.message

    def _entry(self, ref, marker, span, declared=True):
        if marker is Marker.ENV:
            path, problem = None, None
        else:
            path, problem = self._resolve(ref)
        entry = ViewEntry(ref.text, marker, path, span or ref.span, problem, declared)
        existing = self.entries.get(entry.key)
        if existing is None:
            self.entries[entry.key] = entry
            existing = entry
        self._by_text.setdefault(ref.text, existing)
        return existing

    def lookup(self, ref: Ref) -> Optional[ViewEntry]:
        """The entry a reference denotes: by written name first, then by resolved path."""
        entry = self._by_text.get(ref.text)
        if entry is not None:
            return entry
        path, _ = self._resolve(ref)
        return self.entries.get(path) if path is not None else None

    def _endpoint(self, ref, span):
        entry = self.lookup(ref)
        if entry is not None:
            return entry
        return self._entry(ref, Marker.PLAIN, span, declared=False)

    def _effective_edges(self):
        parent_of = {}
        for parent, child in self.edges:
            parent_of.setdefault(child, []).append(parent)
        env = {key for key, e in self.entries.items() if e.marker is Marker.ENV}
        edges = []
        for parent, child in self.edges:
            if child in env:
                continue
            # ENV blocks are transparent: climb to the nearest non-ENV ancestor.
            seen = set()
            frontier = [parent]
            while frontier:
                candidate = frontier.pop()
                if candidate in seen:
                    continue
                seen.add(candidate)
                if candidate in env:
                    frontier.extend(parent_of.get(candidate, ()))
                elif (candidate, child) not in edges:
                    edges.append((candidate, child))
        return edges

    @property
    def blocks(self):
        """Non-ENV entries."""
        return [e for e in self.entries.values() if e.marker is not Marker.ENV]

    @property
    def shown(self):
        return frozenset(e.path for e in self.blocks if e.path is not None)

    def signal_connectors(self):
        """(connector, source entry, target entry) for signal connectors between resolved non-ENV blocks."""
        for conn, source, target in self.connectors:
            if conn.kind is not PortKind.SIGNAL:
                continue
            if Marker.ENV in (source.marker, target.marker):
                continue
            if source.path is None or target.path is None:
                continue
            yield conn, source, target

    def is_nested(self, ancestor_key, descendant_key):
        return self.nesting.is_ancestor(ancestor_key, descendant_key)


def _check_base(view, net):
    if view.base_net != net.name:
        raise BaseMismatch('View %s is drawn on %s, not on %s.' % (view.name, view.base_net, net.name))


def _view_findings(resolved: ResolvedView):
    net = resolved.net
    closure = containment_closure(net)
    findings = []

    for entry in resolved.blocks:
        if entry.path is None:
            findings.append(Finding('C1', (entry.text,), entry.problem or 'Block %s is not part of %s.' % (entry.text, net.name), entry.span))

    for parent, child in resolved.effective_edges:
        a, b = resolved.entries[parent], resolved.entries[child]
        if a.path is None or b.path is None:
            continue
        if (a.path, b.path) not in closure:
            findings.append(
                Finding('C2', (a.label, b.label), 'View nests %s inside %s, but %s is not a part of it in %s.' % (b.label, a.label, b.label, net.name), b.span)
            )

    resolved_blocks = [e for e in resolved.blocks if e.path is not None]
    for a in resolved_blocks:
        for b in resolved_blocks:
            if (a.path, b.path) in closure and not resolved.is_nested(a.key, b.key):
                findings.append(
                    Finding('C3', (a.label, b.label), '%s is a part of %s in %s, but the view does not nest it there.' % (b.label, a.label, net.name), b.span)
                )

    shown = resolved.shown
    for conn, source, target in resolved.signal_connectors():
        found, condition = _realize(conn.signals, source.path, target.path, net, closure, shown)
        if found is not None:
            continue
        labels = ', '.join(conn.signals) or 'any signal'
        if condition == 'C4':
            message = 'No connector of %s carries %s from %s to %s.' % (net.name, labels, source.label, target.label)
        else:
            message = 'A connector carrying %s exists, but %s -> %s is not drawn to it or to a hidden superblock.' % (labels, source.label, target.label)
        findings.append(Finding(condition, (source.label, target.label), message, conn.span))
    return findings


def check_view(view: View, net: FunctionNet) -> ConsistencyReport:
    """Checks C1-C5 of `view` against the complete function net it is drawn on."""
    _check_base(view, net)
    resolved = ResolvedView(view, net)
    report = ConsistencyReport.build('view %s' % view.name, _view_findings(resolved))
    logging.debug('Checked view %s: %d findings.', view.name, len(report.findings))
    return report


def _specialization_findings(spec: ResolvedView, base: ResolvedView):
    findings = []
    notes = []
    base_blocks = {(key, e.marker) for key, e in base.entries.items()}
    for key, entry in spec.entries.items():
        if (key, entry.marker) not in base_blocks:
            findings.append(
                Finding('C6', (entry.label,), '%s block %s is not shown in %s.' % (entry.marker.value, entry.label, base.view.name), entry.span)
            )

    for conn, source, target in spec.connectors:
        labels = set(conn.signals)
        covered = any(
            (b_source.key, b_target.key) == (source.key, target.key) and b_conn.kind is conn.kind and labels <= set(b_conn.signals)
            for b_conn, b_source, b_target in base.connectors
        )
        if not covered:
            findings.append(
                Finding(
                    'C6', (source.label, target.label), '%s connector %s -> %s (%s) has no counterpart in %s.' %
                    (conn.kind.value, source.label, target.label, ', '.join(conn.signals) or 'unlabeled', base.view.name), conn.span
                )
            )

    for parent, child in spec.effective_edges:
        if parent in base.entries and child in base.entries and not base.is_nested(parent, child):
            notes.append(
                '%s nests %s inside %s; %s does not.' %
                (spec.view.name, spec.entries[child].label, spec.entries[parent].label, base.view.name)
            )
    return findings, notes


def check_specialization(spec: View, base: View, net: FunctionNet) -> ConsistencyReport:
    """
    Checks that `spec` refines `base`: both are consistent with the same net, and every
    block and connector of `spec` also appears in `base`.
    """
    if spec.base_net != base.base_net:
        raise BaseMismatch('Views %s and %s are drawn on different nets (%s, %s).' % (spec.name, base.name, spec.base_net, base.base_net))
    _check_base(spec, net)
    resolved_spec = ResolvedView(spec, net)
    resolved_base = ResolvedView(base, net) if base is not spec else resolved_spec
    findings = [f.prefixed(spec.name) for f in _view_findings(resolved_spec)]
    if base is not spec:
        findings += [f.prefixed(base.name) for f in _view_findings(resolved_base)]
    extra, notes = _specialization_findings(resolved_spec, resolved_base)
    findings += [f.prefixed(spec.name) for f in extra]
    report = ConsistencyReport.build('view %s specializes %s' % (spec.name, base.name), findings, notes)
    logging.debug('Checked %s: %d findings.', report.artifact, len(report.findings))
    return report


def explain_view(view: View, net: FunctionNet):
    """For each signal connector between non-ENV blocks, how the net realizes it."""
    _check_base(view, net)
    resolved = ResolvedView(view, net)
    closure = containment_closure(net)
    return [match_connector(conn, net, closure, resolved.shown) for conn, _, _ in resolved.signal_connectors()]


def mirror_view(net: FunctionNet, name=None) -> View:
    """The view showing the full hierarchy (by qualified names) and every resolvable connector."""
    index = index_net(net)

    def block(path):
        return ViewBlock(Ref(path), Marker.PLAIN, tuple(block(child) for child in index.children[path]))

    connectors = tuple(
        Connector(Ref(source), Ref(target), conn.signals, conn.kind) for conn, source, target in index.resolved_connectors()
    )
    return View(name or '%sMirror' % net.name, net.name, (block(index.root),), connectors)
