# coding: utf-8
"""
Instance expansion, name resolution, hierarchy closure and well-formedness of function nets.

The net's own name is the root block occurrence, so every qualified path starts with it,
e.g. CarComfort.CLRequestProc.ButtonOn.
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import FrozenSet, Optional, Tuple

import numpy as np

from .model import (
    BlockDef,
    BlockPath,
    FunctionNet,
    InstanceRef,
    PortKind,
    Ref,
    ResolutionError,
    SourceSpan,
    qualified,
    split_path,
)

DANGLING_ENDPOINT = 'DANGLING_ENDPOINT'
AMBIGUOUS_ENDPOINT = 'AMBIGUOUS_ENDPOINT'
CYCLIC_HIERARCHY = 'CYCLIC_HIERARCHY'
DUPLICATE_CHILD = 'DUPLICATE_CHILD'
DUPLICATE_DEFINITION = 'DUPLICATE_DEFINITION'
UNKNOWN_DEFINITION = 'UNKNOWN_DEFINITION'
SELF_LOOP = 'SELF_LOOP'
MISSING_SIGNAL = 'MISSING_SIGNAL'
NON_SIGNAL_CONNECTOR = 'NON_SIGNAL_CONNECTOR'
PORT_IN_NET = 'PORT_IN_NET'


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    path: str
    message: str
    span: Optional[SourceSpan] = field(default=None, compare=False)

    def to_dict(self):
        return {
            'rule': self.rule,
            'path': self.path,
            'message': self.message,
            'file': self.span.file if self.span else None,
            'line': self.span.line if self.span else None,
        }


@dataclass(frozen=True)
class Occurrence:
    path: BlockPath
    definition: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @property
    def name(self):
        return self.path[-1]


@dataclass(frozen=True)
class AncestorRelation:
    """Transitive whole-part pairs (ancestor path, descendant path)."""

    pairs: FrozenSet[Tuple[BlockPath, BlockPath]] = frozenset()

    def __contains__(self, pair):
        return pair in self.pairs

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    def is_ancestor(self, ancestor, descendant):
        return (ancestor, descendant) in self.pairs

    def descendants(self, ancestor):
        return frozenset(b for a, b in self.pairs if a == ancestor)

    def closed(self):
        return close_pairs(self.pairs)


def close_pairs(pairs):
    """Warshall closure over a boolean reachability matrix."""
    nodes = sorted({p for pair in pairs for p in pair})
    if not nodes:
        return AncestorRelation()
    pos = {p: i for i, p in enumerate(nodes)}
    reach = np.zeros((len(nodes), len(nodes)), dtype=bool)
    for a, b in pairs:
        reach[pos[a], pos[b]] = True
    for k in range(len(nodes)):
        reach |= np.outer(reach[:, k], reach[k, :])
    rows, cols = np.nonzero(reach)
    return AncestorRelation(frozenset((nodes[i], nodes[j]) for i, j in zip(rows, cols)))


class NetIndex:
    """
    Expanded occurrence tree of one net plus everything derived from it: short-name table,
    resolved connector endpoints, the signal alphabet and structural diagnostics.
    """

    def __init__(self, net: FunctionNet):
        self.net = net
        self.root = (net.name,)
        self.occurrences = OrderedDict()
        self.parent = {}
        self.children = OrderedDict()
        self.definitions = OrderedDict()
        self.diagnostics = []
        self._by_name = {}
        self._cyclic_definitions = set()
        self.endpoints = []

        self._collect_definitions(net.blocks)
        self._check_definition_cycles()
        self._add(Occurrence(self.root, span=net.span), None)
        self._expand(self.root, net.blocks, ())
        self._resolve_connectors()
        self.signals = frozenset(s for conn in net.connectors for s in conn.signals)
        logging.debug('Indexed net %s: %d occurrences, %d diagnostics.', net.name, len(self.occurrences), len(self.diagnostics))

    def _diagnose(self, rule, path, message, span=None):
        self.diagnostics.append(Diagnostic(rule, path, message, span))

    def _collect_definitions(self, items):
        for item in items:
            if not isinstance(item, BlockDef):
                continue
            if item.reusable:
                if item.name in self.definitions:
                    self._diagnose(DUPLICATE_DEFINITION, item.name, 'Block definition %s is declared twice.' % item.name, item.span)
                else:
                    self.definitions[item.name] = item
            self._collect_definitions(item.children)

    def _instances_in(self, items):
        for item in items:
            if isinstance(item, InstanceRef):
                yield item
            elif isinstance(item, BlockDef) and not item.reusable:
                yield from self._instances_in(item.children)

    def _check_definition_cycles(self):
        reported = self._cyclic_definitions

        def visit(name, stack):
            definition = self.definitions.get(name)
            if definition is None:
                return
            for inst in self._instances_in(definition.children):
                if inst.definition in stack:
                    if inst.definition not in reported:
                        reported.add(inst.definition)
                        self._diagnose(
                            CYCLIC_HIERARCHY, inst.definition,
                            'Block definition %s contains itself via %s.' % (inst.definition, ' -> '.join(stack + (inst.definition,))), inst.span
                        )
                    continue
                visit(inst.definition, stack + (inst.definition,))

        for name in self.definitions:
            visit(name, (name,))

    def _add(self, occurrence, parent):
        path = occurrence.path
        self.occurrences[path] = occurrence
        self.children[path] = []
        if parent is not None:
            self.parent[path] = parent
            self.children[parent].append(path)
        keys = {occurrence.name}
        if occurrence.definition:
            keys.add(occurrence.definition)
        for key in keys:
            self._by_name.setdefault(key, []).append(path)

    def _expand(self, prefix, items, stack):
        seen = set()
        for item in items:
            if isinstance(item, BlockDef) and item.reusable:
                continue
            path = prefix + (item.name,)
            if item.name in seen:
                self._diagnose(DUPLICATE_CHILD, qualified(path), 'Block %s has two children named %s.' % (qualified(prefix), item.name), item.span)
                continue
            seen.add(item.name)
            if isinstance(item, InstanceRef):
                definition = self.definitions.get(item.definition)
                if definition is None:
                    self._diagnose(UNKNOWN_DEFINITION, qualified(path), 'Instance %s refers to unknown definition %s.' % (item.name, item.definition), item.span)
                    continue
                self._add(Occurrence(path, item.definition, item.span), prefix)
                if item.definition in stack or item.definition in self._cyclic_definitions:
                    continue
                self._expand(path, definition.children, stack + (item.definition,))
            else:
                for port in item.ports:
                    if port.kind is not PortKind.SIGNAL:
                        self._diagnose(PORT_IN_NET, qualified(path), '%s ports exist only in views.' % port.kind.name, item.span)
                self._add(Occurrence(path, span=item.span), prefix)
                self._expand(path, item.children, stack)

    def resolve(self, names) -> BlockPath:
        names = tuple(names)
        if len(names) > 1:
            for path in (names, self.root + names):
                if path in self.occurrences:
                    return path
            raise ResolutionError(qualified(names), 'NOT_FOUND')
        candidates = self._by_name.get(names[0], [])
        if not candidates:
            raise ResolutionError(names[0], 'NOT_FOUND')
        if len(candidates) > 1:
            raise ResolutionError(names[0], 'AMBIGUOUS', sorted(qualified(c) for c in candidates))
        return candidates[0]

    def try_resolve(self, names) -> Optional[BlockPath]:
        try:
            return self.resolve(names)
        except ResolutionError:
            return None

    def _resolve_connectors(self):
        for conn in self.net.connectors:
            ends = []
            for end in (conn.source, conn.target):
                try:
                    ends.append(self.resolve(end.names))
                except ResolutionError as exc:
                    rule = AMBIGUOUS_ENDPOINT if exc.code == 'AMBIGUOUS' else DANGLING_ENDPOINT
                    self._diagnose(rule, end.text, exc.message, end.span or conn.span)
                    ends.append(None)
            source, target = ends
            label = '%s -> %s' % (conn.source.text, conn.target.text)
            if source is not None and source == target:
                self._diagnose(SELF_LOOP, label, 'Connector source and target are the same block.', conn.span)
            if conn.kind is not PortKind.SIGNAL:
                self._diagnose(NON_SIGNAL_CONNECTOR, label, '%s connectors exist only in views.' % conn.kind.name, conn.span)
            elif not conn.signals:
                self._diagnose(MISSING_SIGNAL, label, 'Connectors of a complete net carry at least one signal.', conn.span)
            self.endpoints.append((conn, source, target))

    def resolved_connectors(self):
        """(connector, source path, target path) for connectors whose endpoints both resolve."""
        return [(c, s, t) for c, s, t in self.endpoints if s is not None and t is not None]


@lru_cache(maxsize=512)
def index_net(net: FunctionNet) -> NetIndex:
    return NetIndex(net)


def validate_net(net: FunctionNet):
    """Returns the structural diagnostics of a net; an empty tuple means well-formed."""
    return tuple(index_net(net).diagnostics)


@lru_cache(maxsize=512)
def containment_closure(net: FunctionNet) -> AncestorRelation:
    index = index_net(net)
    return close_pairs(frozenset((parent, child) for child, parent in index.parent.items()))


def resolve_reference(name, net: FunctionNet) -> BlockPath:
    """
    Resolves a short or dotted block name. Dotted names resolve exactly (relative to the
    root when they do not start with the net name); short names must be globally unique.
    """
    if isinstance(name, Ref):
        names = name.names
    elif isinstance(name, str):
        names = split_path(name)
    else:
        names = tuple(name)
    return index_net(net).resolve(names)

