# coding: utf-8
"""
Mode machines (flat statecharts whose states name views) and variant sets (views that
specialize a feature view).
"""
from __future__ import annotations

import logging
from collections import OrderedDict

from .consistency import ConsistencyReport, Finding, check_specialization, check_view
from .model import BaseMismatch, ConditionTypeError, FunctionNet, ModeMachine, VariantSet
from .net import index_net
from .scenario import eval_condition


def _view(views, name, net, owner):
    view = views[name]
    if view.base_net != net.name:
        raise BaseMismatch('%s uses view %s, which is drawn on %s, not on %s.' % (owner, name, view.base_net, net.name))
    return view


def check_mode_machine(machine: ModeMachine, net: FunctionNet, views) -> ConsistencyReport:
    """
    Every mode view must be consistent with the net, and a specialization of the machine's
    base when that base is a view. Transitions may only watch signals of the net.
    """
    owner = 'Mode machine %s' % machine.name
    if machine.base == net.name:
        base_view = None
    elif machine.base in views:
        base_view = _view(views, machine.base, net, owner)
    else:
        raise BaseMismatch('%s is on %s, which is neither %s nor one of its views.' % (owner, machine.base, net.name))

    findings = []
    notes = []
    for mode, view_name in machine.states:
        view = _view(views, view_name, net, owner)
        subject = 'mode %s' % mode
        findings += [f.prefixed(subject) for f in check_view(view, net).findings]
        if base_view is not None:
            report = check_specialization(view, base_view, net)
            findings += [f.prefixed(subject) for f in report.findings if f.condition == 'C6']
            notes += report.notes

    signals = index_net(net).signals
    for transition in machine.transitions:
        if transition.signal not in signals:
            findings.append(
                Finding(
                    'C4', ('transition %s -> %s' % (transition.source, transition.target), transition.signal),
                    'Transition watches %s, which no connector of %s carries.' % (transition.signal, net.name), transition.span
                )
            )
    report = ConsistencyReport.build('modes %s' % machine.name, findings, notes)
    logging.debug('Checked mode machine %s: %d findings.', machine.name, len(report.findings))
    return report


def check_variants(variant_set: VariantSet, net: FunctionNet, views) -> ConsistencyReport:
    """Every variant view must specialize the feature view."""
    feature = _view(views, variant_set.feature_view, net, 'Variant set %s' % variant_set.name)
    findings = []
    notes = []
    for name, view_name in variant_set.variants:
        view = _view(views, view_name, net, 'Variant set %s' % variant_set.name)
        report = check_specialization(view, feature, net)
        findings += [f.prefixed('variant %s' % name) for f in report.findings]
        notes += report.notes
    report = ConsistencyReport.build('variants %s' % variant_set.name, findings, notes)
    logging.debug('Checked variant set %s: %d findings.', variant_set.name, len(report.findings))
    return report


def mode_timeline(machine: ModeMachine, trace):
    """
    Mode changes over a trace as (step, mode) pairs, starting with the initial mode at step 0.
    Transitions are evaluated at steps 1..last step on the persisted samples of their signal;
    the first enabled one (declaration order) fires, at most one per step.
    """
    samples = OrderedDict()
    for event in trace:
        samples.setdefault(event.step, OrderedDict())[event.signal] = event.value
    last_step = max(samples) if samples else 0

    mode = machine.initial
    timeline = [(0, mode)]
    current = dict(samples.get(0, {}))
    for step in range(1, last_step + 1):
        previous = dict(current)
        current.update(samples.get(step, {}))
        for transition in machine.transitions:
            if transition.source != mode or transition.signal not in current:
                continue
            try:
                enabled = eval_condition(transition.condition, previous.get(transition.signal), current[transition.signal])
            except ConditionTypeError as exc:
                logging.debug('Transition %s -> %s not evaluated at step %d: %s', transition.source, transition.target, step, exc)
                continue
            if enabled:
                if transition.target != mode:
                    mode = transition.target
                    timeline.append((step, mode))
                break
    return timeline
