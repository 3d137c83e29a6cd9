# coding: utf-8
"""
Scenarios as communication diagrams over a view: condition semantics on successive signal
samples, consistency of a scenario against its net, and compilation into a monitor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Tuple

from .consistency import ConsistencyReport, ResolvedView, check_view, explain_view
from .model import (
    BaseMismatch,
    BecomesEqual,
    BecomesGreater,
    BecomesLess,
    BlockPath,
    Condition,
    ConditionTypeError,
    Connector,
    Equals,
    FunctionNet,
    Greater,
    Invalid,
    IsInvalid,
    Less,
    Marker,
    Number,
    Or,
    Policy,
    PortKind,
    ResolutionError,
    Scenario,
    ScenarioError,
    Transition,
    View,
    ViewBlock,
    ViewKind,
    qualified,
    split_path,
)
from .net import resolve_reference


def _compare(sample, bound):
    """Sign of sample - bound, or None when the two are not comparable numbers."""
    if not isinstance(bound, Number):
        raise ConditionTypeError('Relational operators need a numeric bound, got %r.' % (bound,))
    if isinstance(sample, Invalid):
        return None
    if not isinstance(sample, Number):
        raise ConditionTypeError('Cannot compare symbolic value %r with a numeric bound.' % (sample,))
    if sample.unit != bound.unit:
        return None
    return (sample.magnitude > bound.magnitude) - (sample.magnitude < bound.magnitude)


def _holds(sign, expected):
    return sign is not None and sign == expected


def eval_condition(cond: Condition, prev, curr) -> bool:
    """
    Evaluates `cond` on the current sample `curr` and the previous sample `prev` of one
    signal. `prev` is None when there is no earlier sample, so "becomes" forms cannot fire.
    """
    if isinstance(cond, Or):
        return any(eval_condition(atom, prev, curr) for atom in cond.atoms)
    if isinstance(cond, IsInvalid):
        return isinstance(curr, Invalid)
    if isinstance(cond, Transition):
        return prev is not None and prev == cond.before and curr == cond.after
    if isinstance(cond, Equals):
        return curr == cond.value
    if isinstance(cond, BecomesEqual):
        return prev is not None and prev != cond.value and curr == cond.value
    if isinstance(cond, Greater):
        return _holds(_compare(curr, cond.value), 1)
    if isinstance(cond, Less):
        return _holds(_compare(curr, cond.value), -1)
    if isinstance(cond, BecomesGreater):
        if prev is None:
            return False
        before = _compare(prev, cond.value)
        return before is not None and before <= 0 and _holds(_compare(curr, cond.value), 1)
    if isinstance(cond, BecomesLess):
        if prev is None:
            return False
        before = _compare(prev, cond.value)
        return before is not None and before >= 0 and _holds(_compare(curr, cond.value), -1)
    raise TypeError('Not a condition: %r' % (cond,))


def induced_view(scenario: Scenario, net: FunctionNet, base_view: View = None) -> View:
    """
    The view a scenario draws: its participating blocks, nested as in the base view, and one
    signal connector per interaction.
    """
    base = ResolvedView(base_view, net) if base_view is not None else None

    participants = []
    texts = {}
    for interaction in scenario.interactions:
        for ref in (interaction.source, interaction.target):
            key = _participant_key(ref, net, base)
            if key not in texts:
                texts[key] = ref
                participants.append(key)

    def marker_of(key):
        if base is not None and key in base.entries:
            return base.entries[key].marker
        return Marker.PLAIN

    parent_of = {}
    if base is not None:
        for key in participants:
            ancestors = [other for other in participants if other != key and base.is_nested(other, key)]
            if ancestors:
                # Nearest: the ancestor nested below every other one.
                nearest = [a for a in ancestors if all(a == b or base.is_nested(b, a) for b in ancestors)]
                parent_of[key] = nearest[0] if nearest else ancestors[-1]

    def block(key):
        children = tuple(block(child) for child in participants if parent_of.get(child) == key)
        return ViewBlock(texts[key], marker_of(key), children, texts[key].span)

    blocks = tuple(block(key) for key in participants if key not in parent_of)
    connectors = tuple(Connector(i.source, i.target, (i.signal,), PortKind.SIGNAL, i.span) for i in scenario.interactions)
    return View(scenario.name, net.name, blocks, connectors, ViewKind.SCENARIO_BASE, span=scenario.span)


def _participant_key(ref, net, base):
    entry = base.lookup(ref) if base is not None else None
    if entry is not None:
        return entry.key
    try:
        return resolve_reference(ref, net)
    except ResolutionError:
        return ('<unresolved>', ref.text)


def check_scenario(scenario: Scenario, net: FunctionNet, base_view: View = None) -> ConsistencyReport:
    """Checks the view a scenario draws (C1-C5), noting blocks its base view leaves out and liftings used."""
    if base_view is not None:
        if base_view.name != scenario.base_view:
            raise BaseMismatch('Scenario %s is on %s, not on %s.' % (scenario.name, scenario.base_view, base_view.name))
        if base_view.base_net != net.name:
            raise BaseMismatch('Base view %s is drawn on %s, not on %s.' % (base_view.name, base_view.base_net, net.name))
    view = induced_view(scenario, net, base_view)
    report = check_view(view, net)

    notes = []
    if base_view is not None:
        base = ResolvedView(base_view, net)
        for entry in ResolvedView(view, net).entries.values():
            if entry.key not in base.entries:
                notes.append('%s takes part in %s but is not shown in %s.' % (entry.label, scenario.name, base_view.name))
    for result in explain_view(view, net):
        if result.matched and (result.source_lifted or result.target_lifted):
            notes.append(
                '%s -> %s is realized by %s -> %s.' %
                (result.connector.source.text, result.connector.target.text, qualified(result.net_source), qualified(result.net_target))
            )
    report = ConsistencyReport.build('scenario %s' % scenario.name, report.findings, notes)
    logging.debug('Checked scenario %s: %d findings.', scenario.name, len(report.findings))
    return report


@dataclass(frozen=True)
class ExpectedEvent:
    seq: int
    source: BlockPath
    target: BlockPath
    signal: str
    condition: Condition
    trigger: bool = False


@dataclass(frozen=True)
class Monitor:
    """
    Automaton with states 0..n: in state i it waits for interaction i+1, state n accepts.
    Endpoints compare by path prefix, so an interaction drawn to a superblock accepts events
    of its parts.
    """

    name: str
    policy: Policy
    expected: Tuple[ExpectedEvent, ...]
    scope: FrozenSet[BlockPath]
    trigger_index: int = 0
    net: Optional[FunctionNet] = field(default=None, compare=False)

    @property
    def state_count(self):
        return len(self.expected) + 1

    @property
    def accepting_state(self):
        return len(self.expected)

    def locate(self, name) -> BlockPath:
        if self.net is not None:
            try:
                return resolve_reference(name, self.net)
            except ResolutionError:
                pass
        return split_path(name) if isinstance(name, str) else tuple(name)

    def in_scope(self, path):
        return any(_covers(block, path) for block in self.scope)

    def accepts(self, state, source, target, signal, prev, value):
        expected = self.expected[state]
        if expected.signal != signal or not _covers(expected.source, source) or not _covers(expected.target, target):
            return False
        try:
            return eval_condition(expected.condition, prev, value)
        except ConditionTypeError as exc:
            logging.debug('Interaction %d of %s cannot match: %s', expected.seq, self.name, exc)
            return False


def _covers(block: BlockPath, path: BlockPath):
    return path[:len(block)] == block


def compile_monitor(scenario: Scenario, net: FunctionNet = None) -> Monitor:
    """
    Compiles a scenario into its monitor. With a net, endpoints are resolved to qualified
    paths; otherwise they are taken as written.
    """
    if not scenario.interactions:
        raise ScenarioError('Scenario %s has no interactions.' % scenario.name)

    def locate(ref):
        if net is not None:
            try:
                return resolve_reference(ref, net)
            except ResolutionError:
                pass
        return ref.names

    expected = tuple(
        ExpectedEvent(i.seq, locate(i.source), locate(i.target), i.signal, i.condition, i.trigger) for i in scenario.interactions
    )
    scope = frozenset(p for e in expected for p in (e.source, e.target))
    triggers = [n for n, e in enumerate(expected) if e.trigger]
    monitor = Monitor(scenario.name, scenario.policy, expected, scope, triggers[0] if triggers else 0, net)
    logging.debug('Compiled %s into a %d-state monitor.', scenario.name, monitor.state_count)
    return monitor
