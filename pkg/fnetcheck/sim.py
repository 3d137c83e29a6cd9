# coding: utf-8
"""
Traces, a synchronous executor for function nets with rule-based block stubs, and the
monitor runner.

Execution is discrete and synchronous with a one-step connector delay: at step t a block
reads the stimuli of step t and everything delivered before t (values persist, last write
wins), fires its first matching rule, and the emitted values are recorded at step t and
readable by their targets from t+1 on.
"""
from __future__ import annotations

import enum
import io
import logging
import re
from collections import OrderedDict
from dataclasses import dataclass
from decimal import Decimal
from typing import Optional, Tuple

from .consistency import match_connector
from .dsl import parse_value, render_value
from .model import (
    ENV_SOURCE,
    INVALID,
    BecomesEqual,
    BecomesGreater,
    BecomesLess,
    ConditionTypeError,
    Connector,
    Equals,
    FunctionNet,
    Greater,
    Invalid,
    IsInvalid,
    Less,
    Number,
    Or,
    ParseError,
    ParseErrors,
    Policy,
    PortKind,
    Ref,
    ResolutionError,
    Scenario,
    SimulationError,
    SourceSpan,
    Transition,
    Value,
    qualified,
    split_path,
)
from .net import index_net
from .scenario import Monitor, eval_condition

DEFAULT_HORIZON = 10

EVENT_RE = re.compile(r'^(?P<step>\d+)\s+(?P<source>\S+)\s*->\s*(?P<target>\S+)\s+(?P<signal>[A-Za-z_][A-Za-z0-9_]*)\s+(?P<value>\S+)$')


@dataclass(frozen=True)
class TraceEvent:
    step: int
    source: str
    target: str
    signal: str
    value: Value

    def __str__(self):
        return '%d %s -> %s %s %s' % (self.step, self.source, self.target, self.signal, render_value(self.value))


Trace = Tuple[TraceEvent, ...]


def load_trace(text, filename='<string>') -> Trace:
    """Parses `STEP SOURCE -> TARGET SIGNAL VALUE` lines; `#` starts a comment."""
    events = []
    errors = []
    last_step = 0
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        span = SourceSpan(filename, number, 1, len(line))
        match = EVENT_RE.match(line)
        if match is None:
            errors.append(ParseError(span, 'Expected STEP SOURCE -> TARGET SIGNAL VALUE, got %r.' % line, ('event',), 'BAD_EVENT'))
            continue
        try:
            value = parse_value(match.group('value'))
        except ParseErrors:
            errors.append(ParseError(span, 'Not a signal value: %r.' % match.group('value'), ('value',), 'BAD_VALUE'))
            continue
        step = int(match.group('step'))
        if step < last_step:
            errors.append(ParseError(span, 'Step %d follows step %d.' % (step, last_step), (), 'NON_MONOTONIC_STEP'))
            continue
        last_step = step
        events.append(TraceEvent(step, match.group('source'), match.group('target'), match.group('signal'), value))
    if errors:
        raise ParseErrors(errors)
    return tuple(events)


def read_trace(path) -> Trace:
    logging.info('Loading trace %s...', path)
    with io.open(path, 'r', encoding='utf-8') as fin:
        return load_trace(fin.read(), path)


def dump_trace(trace) -> str:
    return ''.join('%s\n' % event for event in trace)


class _Block:
    """Per-run state of one block: its rules and the input values it can read."""

    def __init__(self, path, rules):
        self.path = path
        self.rules = rules
        self.inputs = {}
        self.previous = {}


def _resolve_block(net, ref):
    try:
        return index_net(net).resolve(ref.names if isinstance(ref, Ref) else split_path(ref))
    except ResolutionError as exc:
        raise SimulationError(exc.message, 'UNKNOWN_BLOCK') from None


def _check_signal(signal, signals, where):
    if signal not in signals:
        raise SimulationError('Signal %s (%s) is not carried by any connector of the net.' % (signal, where), 'UNKNOWN_SIGNAL')


def run_simulation(net: FunctionNet, stubs, stimuli, horizon=DEFAULT_HORIZON) -> Trace:
    """
    Executes `net` for steps 0..horizon-1. `stubs` are StubRules, `stimuli` TraceEvents
    whose source is usually ENV. Returns the trace of all stimuli and emissions.
    """
    assert horizon > 0, 'Horizon must be positive.'
    index = index_net(net)
    signals = index.signals

    blocks = OrderedDict((path, _Block(path, [])) for path in index.occurrences)
    for rule in stubs:
        owner = _resolve_block(net, rule.owner)
        _check_signal(rule.signal, signals, 'guard of %s' % rule.owner.text)
        for signal, _ in rule.emissions:
            _check_signal(signal, signals, 'emitted by %s' % rule.owner.text)
        blocks[owner].rules.append(rule)

    outgoing = OrderedDict((path, []) for path in index.occurrences)
    for position, (conn, source, target) in enumerate(index.resolved_connectors()):
        if conn.kind is PortKind.SIGNAL:
            outgoing[source].append((position, conn, target))

    by_step = OrderedDict()
    for event in stimuli:
        target = _resolve_block(net, event.target)
        _check_signal(event.signal, signals, 'stimulus into %s' % event.target)
        if event.source == ENV_SOURCE:
            source = next((s for c, s, t in index.resolved_connectors() if t == target and event.signal in c.signals), None)
        else:
            source = _resolve_block(net, event.source)
        if event.step >= horizon:
            logging.warning('Ignoring stimulus at step %d beyond horizon %d: %s', event.step, horizon, event)
            continue
        by_step.setdefault(event.step, []).append((source, target, event.signal, event.value))

    trace = []
    pending = []
    for step in range(horizon):
        for block in blocks.values():
            block.previous = dict(block.inputs)
        for target, signal, value in pending:
            blocks[target].inputs[signal] = value
        pending = []
        for source, target, signal, value in by_step.get(step, ()):
            blocks[target].inputs[signal] = value
            trace.append(TraceEvent(step, qualified(source) if source else ENV_SOURCE, qualified(target), signal, value))

        emitted = []
        for block in blocks.values():
            rule = _fire(block)
            if rule is None:
                continue
            for signal, value in rule.emissions:
                for position, conn, target in outgoing[block.path]:
                    if signal in conn.signals:
                        emitted.append((position, target, TraceEvent(step, qualified(block.path), qualified(target), signal, value)))
        # same-step emissions in connector declaration order
        emitted.sort(key=lambda item: item[0])
        for _, target, event in emitted:
            trace.append(event)
            pending.append((target, event.signal, event.value))
        logging.debug('Step %d: %d events so far.', step, len(trace))
    return tuple(trace)


def _fire(block):
    for rule in block.rules:
        if rule.signal not in block.inputs:
            continue
        try:
            if eval_condition(rule.guard, block.previous.get(rule.signal), block.inputs[rule.signal]):
                return rule
        except ConditionTypeError as exc:
            logging.warning('Rule of %s does not fire: %s', qualified(block.path), exc)
    return None


class Outcome(enum.Enum):
    PASS = 'PASS'
    FAIL = 'FAIL'
    INCONCLUSIVE = 'INCONCLUSIVE'


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    reason: str
    failing_step: Optional[int] = None
    matched: int = 0
    total: int = 0

    def to_dict(self):
        return {
            'outcome': self.outcome.value,
            'reason': self.reason,
            'failingStep': self.failing_step,
            'matched': self.matched,
            'total': self.total,
        }

    def __str__(self):
        text = '%s: %s (%d/%d interactions matched)' % (self.outcome.value, self.reason, self.matched, self.total)
        if self.failing_step is not None:
            text += ' at step %d' % self.failing_step
        return text


def _violates(monitor: Monitor, source, target):
    if monitor.policy is Policy.COMPLETE:
        return True
    if monitor.policy is Policy.VISIBLE:
        return monitor.in_scope(source) and monitor.in_scope(target)
    return False


def run_monitor(monitor: Monitor, trace) -> Verdict:
    """
    Replays `trace` through the monitor. Events before the trigger never fail; after it,
    unexpected events fail according to the policy. The first verdict ends the run.
    """
    total = len(monitor.expected)
    history = {}
    state = 0
    triggered = False
    for event in trace:
        source, target = monitor.locate(event.source), monitor.locate(event.target)
        key = (source, target, event.signal)
        prev = history.get(key)
        history[key] = event.value
        if monitor.accepts(state, source, target, event.signal, prev, event.value):
            state += 1
            logging.debug('%s: interaction %d matched at step %d.', monitor.name, state, event.step)
            triggered = triggered or state > monitor.trigger_index
            if state == total:
                return Verdict(Outcome.PASS, 'all interactions observed in order', None, state, total)
            continue
        if triggered and _violates(monitor, source, target):
            return Verdict(
                Outcome.FAIL,
                'unexpected %s -> %s %s %s while waiting for interaction %d' %
                (event.source, event.target, event.signal, render_value(event.value), state + 1),
                event.step,
                state,
                total,
            )
    if not triggered:
        return Verdict(Outcome.INCONCLUSIVE, 'trigger never observed', None, state, total)
    return Verdict(Outcome.FAIL, 'incomplete', None, state, total)


def _shifted(number: Number, delta):
    return Number(number.magnitude + Decimal(delta), number.unit)


def _witness(cond) -> Tuple[Value, Value]:
    """Two successive samples: the first does not satisfy `cond`, the second does."""
    if isinstance(cond, Or):
        return _witness(cond.atoms[0])
    if isinstance(cond, (Greater, BecomesGreater)):
        return _shifted(cond.value, -1), _shifted(cond.value, 1)
    if isinstance(cond, (Less, BecomesLess)):
        return _shifted(cond.value, 1), _shifted(cond.value, -1)
    if isinstance(cond, (Equals, BecomesEqual)):
        return (Number(Decimal(0)) if isinstance(cond.value, Invalid) else INVALID), cond.value
    if isinstance(cond, Transition):
        return cond.before, cond.after
    if isinstance(cond, IsInvalid):
        return Number(Decimal(0)), INVALID
    raise TypeError('Not a condition: %r' % (cond,))


def derive_stimuli(scenario: Scenario, net: FunctionNet) -> Trace:
    """
    Test stimuli for a scenario: for the k-th trigger, a sample that misses its condition at
    step 2k and one that meets it at step 2k+1, sent from ENV into the net block that really
    receives the trigger signal.
    """
    triggers = scenario.triggers or scenario.interactions[:1]
    stimuli = []
    for k, interaction in enumerate(triggers):
        result = match_connector(Connector(interaction.source, interaction.target, (interaction.signal,)), net)
        if result.matched:
            target = result.net_target
        else:
            target = _resolve_block(net, interaction.target)
        before, after = _witness(interaction.condition)
        stimuli.append(TraceEvent(2 * k, ENV_SOURCE, qualified(target), interaction.signal, before))
        stimuli.append(TraceEvent(2 * k + 1, ENV_SOURCE, qualified(target), interaction.signal, after))
    return tuple(stimuli)
