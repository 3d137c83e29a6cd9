from __future__ import absolute_import

import io
import json
import os
import re
import shutil
import tempfile
import time
import unittest
from dataclasses import replace
from decimal import Decimal
from io import StringIO

import jsonschema
from hypothesis import given, settings, strategies as st

from .cli import EXIT_FINDINGS, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_PARSE, EXIT_USAGE, main
from .consistency import check_specialization, check_view, explain_view, match_connector, mirror_view
from .dsl import parse_condition, parse_model, render_model
from .generate import (
    block_tree,
    chain_net,
    full_view,
    random_model,
    random_monitor_case,
    random_net,
    random_state,
    random_view,
    specialization_chain,
    sub_view,
)
from .model import (
    INVALID,
    BaseMismatch,
    BecomesEqual,
    BecomesGreater,
    BecomesLess,
    ConditionTypeError,
    Connector,
    Equals,
    Greater,
    Interaction,
    IsInvalid,
    Less,
    Marker,
    ModeMachine,
    ModeTransition,
    Number,
    Or,
    ParseErrors,
    Policy,
    PortKind,
    Ref,
    ResolutionError,
    Scenario,
    ScenarioError,
    SimulationError,
    StubRule,
    Symbol,
    Transition,
    VariantSet,
    ViewBlock,
)
from .modes import check_mode_machine, check_variants, mode_timeline
from .net import close_pairs, containment_closure, index_net, resolve_reference, validate_net
from .scenario import check_scenario, compile_monitor, eval_condition
from .sim import Outcome, TraceEvent, derive_stimuli, load_trace, read_trace, run_monitor, run_simulation

SAMPLES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'samples')
SAMPLE_FILE = os.path.join(SAMPLES_DIR, 'central_locking.fnet')
SCHEMA_FILE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'docs', 'report-schema.json')

with io.open(SAMPLE_FILE, 'r', encoding='utf-8') as _fin:
    SAMPLE_TEXT = _fin.read()
NET_TEXT = SAMPLE_TEXT.split('\n\nview ')[0] + '\n'


def kmh(magnitude):
    return Number(Decimal(magnitude), 'km/h')


def sample():
    model = parse_model(SAMPLE_TEXT, SAMPLE_FILE)
    return model, model.nets['CarComfort']


def with_view(body, header='view Mutant on CarComfort'):
    """The sample model plus one more view."""
    model = parse_model('%s\n%s {\n%s\n}\n' % (SAMPLE_TEXT, header, body))
    return model.views['Mutant'], model


def oracle_consistent(view, net):
    """
    Straightforward C1-C5 over a net with unique short block names, walking parent links
    instead of using closures.
    """
    tree = block_tree(net)

    def above(a, b):
        parent = tree.get(b)
        while parent is not None:
            if parent == a:
                return True
            parent = tree.get(parent)
        return False

    markers = {}
    children = {}
    edges = []
    stack = [(None, block) for block in view.blocks]
    while stack:
        parent, block = stack.pop()
        name = block.name.text
        markers.setdefault(name, block.marker)
        if parent is not None:
            edges.append((parent, name))
            children.setdefault(parent, []).append(name)
        stack.extend((name, child) for child in block.children)
    for conn in view.connectors:
        for end in (conn.source.text, conn.target.text):
            markers.setdefault(end, Marker.PLAIN)
    shown = {name for name, marker in markers.items() if marker is not Marker.ENV}

    if any(name not in tree for name in shown):
        return False
    if any(not above(a, b) for a, b in edges):
        return False

    def nested(a, b):
        todo = list(children.get(a, ()))
        while todo:
            name = todo.pop()
            if name == b:
                return True
            todo.extend(children.get(name, ()))
        return False

    for a in shown:
        for b in shown:
            if above(a, b) and not nested(a, b):
                return False

    def fits(drawn, real):
        return drawn == real or (above(drawn, real) and real not in shown)

    for conn in view.connectors:
        if conn.kind is not PortKind.SIGNAL:
            continue
        source, target = conn.source.text, conn.target.text
        if source not in shown or target not in shown:
            continue
        for net_conn in net.connectors:
            carried = set(conn.signals) <= set(net_conn.signals) if conn.signals else bool(net_conn.signals)
            if carried and fits(source, net_conn.source.text) and fits(target, net_conn.target.text):
                break
        else:
            return False
    return True


numbers = st.builds(Number, st.integers(-20, 20).map(Decimal), st.sampled_from([None, 'km/h']))
numeric_samples = st.one_of(numbers, st.just(INVALID))
symbols = st.sampled_from(['Open', 'Close', 'On']).map(Symbol)
any_samples = st.one_of(numeric_samples, symbols)


class Tests(unittest.TestCase):

    # Mutants of the sample, each violating exactly one condition.
    view_mutants = {
        'C1': [
            '  block WindowLifter',
            '  ext Door',
            '  block CLRequestProc.Nothing',
        ],
        'C2': [
            '  block Doors {\n    block Arbiter\n  }',
            '  block VehicleState {\n    block ButtonOn\n  }',
            '  block left {\n    block right\n  }',
        ],
        'C3': [
            '  block CarComfort\n  block ButtonOn',
            '  block Doors\n  block left',
            '  block CLRequestProc\n  block Arbiter',
        ],
        'C4': [
            '  block EvalSpeed\n  block Arbiter\n  connect Ghost : EvalSpeed -> Arbiter',
            '  block EvalSpeed\n  block Arbiter\n  connect LockRequest : Arbiter -> EvalSpeed',
            '  ext VehicleState\n  block EvalSpeed\n  connect AutoLockStatus, VehicleSpeed : VehicleState -> EvalSpeed',
        ],
        'C5': [
            '  ext VehicleState\n  block Arbiter\n  connect VehicleSpeed : VehicleState -> Arbiter',
            '  ext VehicleState\n  block CLRequestProc {\n    block EvalSpeed\n  }\n  connect VehicleSpeed : VehicleState -> CLRequestProc',
            '  block CentralSettingsUnit\n  block Arbiter\n  connect DriverRequestCL : CentralSettingsUnit -> Arbiter',
        ],
    }

    specialization_mutants = [
        '  ext VehicleState\n  block EvalSpeed\n  block Arbiter\n  block ButtonOn\n  connect VehicleSpeed : VehicleState -> EvalSpeed',
        '  block VehicleState\n  block EvalSpeed\n  connect VehicleSpeed : VehicleState -> EvalSpeed',
        '  block Arbiter\n  block Doors {\n    block left\n  }\n  mech : Arbiter -> left',
    ]

    def test_sample(self):
        t0 = time.time()
        model, net = sample()
        views = model.views
        self.assertEqual(validate_net(net), ())
        reports = [
            check_view(views['AutoLock'], net),
            check_view(views['AutoLockDegraded'], net),
            check_specialization(views['AutoLockSpeed'], views['AutoLock'], net),
            check_scenario(model.scenarios['SpeedLock'], net, views['AutoLockSpeed']),
            check_mode_machine(model.mode_machines['AutoLockModes'], net, views),
            check_variants(model.variant_sets['CentralLockingVariants'], net, views),
        ]
        td = time.time() - t0
        print('Checked sample in %s seconds.' % td)
        for report in reports:
            print(report.artifact, report.verdict)
            self.assertTrue(report.consistent, report.findings)
        self.assertLess(td, 1.0)

    def test_resolve_reference(self):
        _, net = sample()
        self.assertEqual(resolve_reference('EvalSpeed', net), ('CarComfort', 'CLRequestProc', 'EvalSpeed'))
        self.assertEqual(resolve_reference('Doors.left.LockCtrl', net), ('CarComfort', 'Doors', 'left', 'LockCtrl'))
        self.assertEqual(resolve_reference('CarComfort.Doors', net), ('CarComfort', 'Doors'))
        self.assertEqual(resolve_reference('left', net), ('CarComfort', 'Doors', 'left'))
        with self.assertRaises(ResolutionError) as cm:
            resolve_reference('Door', net)
        self.assertEqual(cm.exception.code, 'AMBIGUOUS')
        self.assertEqual(cm.exception.candidates, ('CarComfort.Doors.left', 'CarComfort.Doors.right'))
        with self.assertRaises(ResolutionError) as cm:
            resolve_reference('LockCtrl', net)
        self.assertEqual(cm.exception.code, 'AMBIGUOUS')
        with self.assertRaises(ResolutionError) as cm:
            resolve_reference('WindowLifter', net)
        self.assertEqual(cm.exception.code, 'NOT_FOUND')

    def test_containment_closure(self):
        _, net = sample()
        closure = containment_closure(net)
        self.assertEqual(len(closure), 20)
        self.assertIn((('CarComfort',), ('CarComfort', 'Doors', 'left', 'LockCtrl')), closure)
        self.assertIn((('CarComfort', 'Doors'), ('CarComfort', 'Doors', 'right', 'LockCtrl')), closure)
        self.assertNotIn((('CarComfort', 'Doors'), ('CarComfort', 'CLRequestProc', 'Arbiter')), closure)
        self.assertNotIn((('CarComfort', 'Doors'), ('CarComfort', 'Doors')), closure)
        self.assertEqual(closure.closed(), closure)

    def test_validate_net(self):
        net = parse_model(
            'net Bad {\n'
            '  block A {}\n'
            '  block A {}\n'
            '  blockdef Loop {\n'
            '    instance again : Loop\n'
            '  }\n'
            '  block Holder {\n'
            '    instance x : Loop\n'
            '    instance y : Missing\n'
            '  }\n'
            '  connect S : A -> Nowhere\n'
            '  connect : A -> A\n'
            '}\n'
        ).nets['Bad']
        rules = {d.rule for d in validate_net(net)}
        print('Diagnostics:', sorted(rules))
        for rule in ('DUPLICATE_CHILD', 'CYCLIC_HIERARCHY', 'UNKNOWN_DEFINITION', 'DANGLING_ENDPOINT', 'SELF_LOOP', 'MISSING_SIGNAL'):
            self.assertIn(rule, rules)
        self.assertNotIn('AMBIGUOUS_ENDPOINT', rules)

        net = parse_model('net Doubled {\n  blockdef Door {}\n  block Doors {\n    instance left : Door\n    instance right : Door\n  }\n'
                          '  connect S : Doors -> Door\n}\n').nets['Doubled']
        self.assertEqual([d.rule for d in validate_net(net)], ['AMBIGUOUS_ENDPOINT'])

    def test_parse_errors(self):
        with self.assertRaises(ParseErrors) as cm:
            parse_model('net N {\n  block A {}\n  block {}\n}\n', 'broken.fnet')
        error = cm.exception.errors[0]
        self.assertEqual(error.code, 'SYNTAX')
        self.assertEqual(error.span.line, 3)
        self.assertEqual(error.span.file, 'broken.fnet')

        gap = 'scenario Gap on AutoLock policy free {\n  1 VehicleState -> EvalSpeed : VehicleSpeed > 1\n  3 EvalSpeed -> Arbiter : LockRequest == Close\n}\n'
        with self.assertRaises(ParseErrors) as cm:
            parse_model(SAMPLE_TEXT + '\n' + gap)
        self.assertEqual(cm.exception.errors[0].code, 'BAD_SEQUENCE')
        self.assertGreater(cm.exception.errors[0].span.line, SAMPLE_TEXT.count('\n'))

        cases = [
            ('view X on Nowhere {}\n', 'UNKNOWN_BASE'),
            ('net N {}\nnet N {}\n', 'DUPLICATE_NAME'),
            (NET_TEXT + 'modes M on CarComfort {\n  state A view V\n  initial B\n}\nview V on CarComfort {}\n', 'UNKNOWN_MODE'),
            (NET_TEXT + 'variants Vs of V {\n  variant A view W\n}\nview V on CarComfort {}\n', 'UNKNOWN_VIEW'),
            (SAMPLE_TEXT + '\nview Mutant on CarComfort {\n  block EvalSpeed\n  block Arbiter\n  mech Phantom : EvalSpeed -> Arbiter\n}\n', 'PHYSICAL_SIGNALS'),
        ]
        for text, code in cases:
            with self.assertRaises(ParseErrors) as cm:
                parse_model(text)
            self.assertIn(code, [e.code for e in cm.exception.errors])

        # Physical connectors may name signals towards the environment, or none at all.
        view, _ = with_view('block Arbiter\n  block Doors\n  env Lock\n  mech Force : Arbiter -> Lock\n  hydr : Arbiter -> Doors')
        self.assertEqual(len(view.connectors), 2)

        for text, line, column in [('net view {}\n', 1, 5), ('net N {\n  block trigger {}\n}\n', 2, 9)]:
            with self.assertRaises(ParseErrors) as cm:
                parse_model(text)
            error = cm.exception.errors[0]
            self.assertEqual((error.code, error.span.line, error.span.column), ('SYNTAX', line, column))

        with self.assertRaises(ParseErrors):
            parse_condition('> Open')
        with self.assertRaises(ParseErrors):
            parse_model('// only a comment\nnet {\n')

        # Unresolved references are fine until scopes are checked.
        model = parse_model('view X on Nowhere {}\n', resolve=False)
        self.assertEqual(list(model.views), ['X'])

    def test_error_locality(self):
        misses = []
        deletions = 0
        for match in re.finditer(r'\S+', SAMPLE_TEXT):
            if '{' in match.group() or '}' in match.group():
                continue
            line = SAMPLE_TEXT.count('\n', 0, match.start()) + 1
            try:
                parse_model(SAMPLE_TEXT[:match.start()] + SAMPLE_TEXT[match.end():])
            except ParseErrors as exc:
                deletions += 1
                if not any(abs(e.span.line - line) <= 2 for e in exc.errors):
                    misses.append((line, match.group(), [str(e) for e in exc.errors]))
        print('Broke the sample in %d places.' % deletions)
        self.assertGreater(deletions, 100)
        self.assertEqual(misses, [])

    def test_parse_condition(self):
        self.assertEqual(parse_condition('>> 10km/h'), BecomesGreater(kmh(10)))
        self.assertEqual(parse_condition(': Open -> Close'), Transition(Symbol('Open'), Symbol('Close')))
        self.assertEqual(parse_condition('invalid | > 200km/h'), Or((IsInvalid(), Greater(kmh(200)))))
        self.assertEqual(parse_condition('== invalid'), Equals(INVALID))
        self.assertEqual(parse_condition('= -2.5'), BecomesEqual(Number(Decimal('-2.5'))))
        self.assertEqual(parse_condition('<< 0 // comment'), BecomesLess(Number(Decimal(0))))

    def test_render_sample(self):
        model, _ = sample()
        self.assertEqual(render_model(model), SAMPLE_TEXT)

    def test_round_trip(self):
        rng = random_state(7)
        for _ in range(150):
            model = random_model(rng)
            text = render_model(model)
            parsed = parse_model(text)
            self.assertEqual(parsed, model, text)
            self.assertEqual(render_model(parsed), text)

    def test_check_view_examples(self):
        _, net = sample()
        self.assertTrue(check_view(mirror_view(net), net).consistent)

        view, _ = with_view('  block Doors {\n    block Arbiter\n  }')
        report = check_view(view, net)
        self.assertEqual(report.conditions, {'C2'})
        self.assertEqual(len(report.findings), 1)
        self.assertEqual(report.findings[0].subjects, ('CarComfort.Doors', 'CarComfort.CLRequestProc.Arbiter'))
        self.assertIsNotNone(report.findings[0].span)

        view, _ = with_view('  block CarComfort\n  block ButtonOn')
        self.assertEqual(check_view(view, net).conditions, {'C3'})

        view, _ = with_view('  block EvalSpeed\n  block Arbiter\n  connect Ghost : EvalSpeed -> Arbiter')
        self.assertEqual(check_view(view, net).conditions, {'C4'})

        # ENV blocks are exempt from every check.
        view, _ = with_view('  env Driver {\n    block ButtonOn\n  }\n  block Arbiter\n  connect Ghost : Driver -> Arbiter')
        self.assertTrue(check_view(view, net).consistent)

        other = replace(view, base_net='Elsewhere')
        with self.assertRaises(BaseMismatch):
            check_view(other, net)

    def test_mutants(self):
        _, net = sample()
        for condition, bodies in self.view_mutants.items():
            self.assertGreaterEqual(len(bodies), 3)
            for body in bodies:
                view, _ = with_view(body)
                report = check_view(view, net)
                print(condition, [str(f) for f in report.findings])
                self.assertEqual(report.conditions, {condition}, body)

        for body in self.specialization_mutants:
            view, model = with_view(body)
            report = check_specialization(view, model.views['AutoLock'], net)
            print('C6', [str(f) for f in report.findings])
            self.assertEqual(report.conditions, {'C6'}, body)
            self.assertTrue(all(f.subjects[0] == 'Mutant' for f in report.findings))

    def test_match_connector(self):
        _, net = sample()
        result = match_connector(Connector(Ref(('VehicleState',)), Ref(('EvalSpeed',)), ('VehicleSpeed',)), net)
        self.assertTrue(result.matched)
        self.assertEqual(result.net_source, ('CarComfort', 'VehicleState'))
        self.assertFalse(result.source_lifted or result.target_lifted)

        result = match_connector(Connector(Ref(('ButtonOn',)), Ref(('CLRequestProc',)), ('DriverRequestCL',)), net)
        self.assertTrue(result.matched)
        self.assertTrue(result.target_lifted)
        self.assertEqual(result.net_target, ('CarComfort', 'CLRequestProc', 'Arbiter'))

        result = match_connector(Connector(Ref(('ButtonOn',)), Ref(('Arbiter',))), net)
        self.assertTrue(result.matched)
        self.assertEqual(result.net_connector.signals, ('DriverRequestCL',))

        result = match_connector(Connector(Ref(('Arbiter',)), Ref(('EvalSpeed',)), ('LockRequest',)), net)
        self.assertFalse(result.matched)
        self.assertFalse(result.to_dict()['matched'])

        # The exact endpoint is shown, so lifting is not allowed.
        shown = {('CarComfort', 'ButtonOn'), ('CarComfort', 'CLRequestProc'), ('CarComfort', 'CLRequestProc', 'Arbiter')}
        conn = Connector(Ref(('ButtonOn',)), Ref(('CLRequestProc',)), ('DriverRequestCL',))
        self.assertFalse(match_connector(conn, net, shown=shown).matched)

    def test_explain_view(self):
        model, net = sample()
        results = explain_view(model.views['AutoLock'], net)
        self.assertEqual(len(results), 5)
        self.assertTrue(all(r.matched for r in results))
        lifted = [r for r in results if r.target_lifted]
        self.assertEqual([r.net_target for r in lifted], [('CarComfort', 'Doors', 'left', 'LockCtrl'), ('CarComfort', 'Doors', 'right', 'LockCtrl')])

    def test_oracle(self):
        rng = random_state(1)
        inconsistent = 0
        for n in range(10000):
            net = random_net(rng)
            view = random_view(rng, net)
            expected = oracle_consistent(view, net)
            report = check_view(view, net)
            self.assertEqual(report.consistent, expected, (n, view, net, report.findings))
            inconsistent += not expected
        print('Inconsistent views: %d of 10000' % inconsistent)
        self.assertGreater(inconsistent, 0)
        self.assertLess(inconsistent, 10000)

    def test_mirror_and_weakening(self):
        rng = random_state(2)
        for _ in range(300):
            net = random_net(rng)
            self.assertTrue(check_view(mirror_view(net), net).consistent)

            index = index_net(net)
            paths = [p for p in index.occurrences if p != index.root]
            dropped = paths[int(rng.randint(0, len(paths)))]
            kept = [p for p in paths if p != dropped]
            conns = [Connector(Ref(s), Ref(t), c.signals) for c, s, t in index.resolved_connectors() if dropped not in (s, t)]
            if not kept:
                continue
            report = check_view(sub_view(net, kept, conns, 'Weaker'), net)
            self.assertNotIn('C1', report.conditions)
            self.assertTrue(report.consistent, report.findings)

    def test_nesting_duality(self):
        rng = random_state(3)
        for _ in range(2000):
            net = random_net(rng)
            view, edges = full_view(rng, net)
            index = index_net(net)
            net_pairs = {(a, b) for a, b in containment_closure(net) if a != index.root}
            report = check_view(view, net)
            faithful = not ({'C2', 'C3'} & report.conditions)
            self.assertEqual(faithful, set(close_pairs(edges)) == net_pairs, (view, net))

    def test_specialization(self):
        model, net = sample()
        views = model.views
        for view in views.values():
            self.assertTrue(check_specialization(view, view, net).consistent)
        self.assertTrue(check_specialization(views['AutoLockDegraded'], views['AutoLock'], net).consistent)
        report = check_specialization(views['AutoLock'], views['AutoLockSpeed'], net)
        self.assertEqual(report.conditions, {'C6'})

        other = replace(views['AutoLock'], base_net='Elsewhere')
        with self.assertRaises(BaseMismatch):
            check_specialization(views['AutoLockSpeed'], other, net)

    def test_specialization_preorder(self):
        rng = random_state(4)
        refined = 0
        for _ in range(600):
            net = random_net(rng)
            base, middle, leaf = specialization_chain(rng, net)
            self.assertTrue(check_specialization(base, base, net).consistent)
            first = check_specialization(leaf, middle, net).consistent
            second = check_specialization(middle, base, net).consistent
            if first and second:
                refined += 1
                self.assertTrue(check_specialization(leaf, base, net).consistent, (leaf, base))
        print('Refining chains: %d of 600' % refined)
        self.assertGreater(refined, 0)

    def test_check_scenario(self):
        model, net = sample()
        views = model.views
        report = check_scenario(model.scenarios['SpeedLock'], net, views['AutoLockSpeed'])
        self.assertTrue(report.consistent)
        self.assertTrue(any('realized by' in note and 'LockCtrl' in note for note in report.notes), report.notes)

        ghost = Scenario('Ghostly', 'AutoLockSpeed', Policy.FREE, (Interaction(1, Ref(('EvalSpeed',)), Ref(('Arbiter',)), 'Ghost', Equals(Symbol('On')), True),))
        self.assertEqual(check_scenario(ghost, net, views['AutoLockSpeed']).conditions, {'C4'})

        hidden = Scenario(
            'Hidden', 'AutoLockSpeed', Policy.FREE,
            (Interaction(1, Ref(('CentralSettingsUnit',)), Ref(('EvalSpeed',)), 'AutoLockStatus', Equals(Symbol('On')), True),)
        )
        report = check_scenario(hidden, net, views['AutoLockSpeed'])
        self.assertTrue(report.consistent)
        self.assertTrue(any('CentralSettingsUnit' in note and 'not shown' in note for note in report.notes), report.notes)

        with self.assertRaises(BaseMismatch):
            check_scenario(model.scenarios['SpeedLock'], net, views['AutoLock'])

    def test_eval_condition(self):
        self.assertTrue(eval_condition(BecomesGreater(kmh(10)), kmh(5), kmh(12)))
        self.assertFalse(eval_condition(BecomesGreater(kmh(10)), kmh(12), kmh(15)))
        self.assertFalse(eval_condition(BecomesGreater(kmh(10)), None, kmh(12)))
        self.assertTrue(eval_condition(Greater(kmh(10)), None, kmh(12)))
        self.assertFalse(eval_condition(Greater(kmh(10)), None, INVALID))
        self.assertFalse(eval_condition(Greater(kmh(10)), None, Number(Decimal(12))))
        self.assertTrue(eval_condition(IsInvalid(), kmh(3), INVALID))
        self.assertTrue(eval_condition(Transition(Symbol('Open'), Symbol('Close')), Symbol('Open'), Symbol('Close')))
        self.assertFalse(eval_condition(Transition(Symbol('Open'), Symbol('Close')), None, Symbol('Close')))
        self.assertTrue(eval_condition(BecomesEqual(Symbol('Close')), Symbol('Open'), Symbol('Close')))
        self.assertFalse(eval_condition(BecomesEqual(Symbol('Close')), Symbol('Close'), Symbol('Close')))
        self.assertTrue(eval_condition(Or((IsInvalid(), Greater(kmh(200)))), None, kmh(210)))
        with self.assertRaises(ConditionTypeError):
            eval_condition(Greater(kmh(10)), None, Symbol('Open'))
        with self.assertRaises(ConditionTypeError):
            eval_condition(Less(Symbol('Open')), None, kmh(1))

    @settings(max_examples=1000, deadline=None)
    @given(prev=st.one_of(st.none(), numeric_samples), curr=numeric_samples, bound=numbers)
    def test_becomes_implies_holds(self, prev, curr, bound):
        if eval_condition(BecomesGreater(bound), prev, curr):
            self.assertTrue(eval_condition(Greater(bound), prev, curr))
        if eval_condition(BecomesLess(bound), prev, curr):
            self.assertTrue(eval_condition(Less(bound), prev, curr))
        self.assertFalse(eval_condition(BecomesGreater(bound), prev, curr) and eval_condition(BecomesLess(bound), prev, curr))
        self.assertFalse(eval_condition(Greater(bound), prev, curr) and eval_condition(Less(bound), prev, curr))

    @settings(max_examples=1000, deadline=None)
    @given(prev=st.one_of(st.none(), any_samples), curr=any_samples, before=any_samples, after=any_samples)
    def test_transition_implies_becomes_equal(self, prev, curr, before, after):
        if before != after and eval_condition(Transition(before, after), prev, curr):
            self.assertTrue(eval_condition(BecomesEqual(after), prev, curr))
        if eval_condition(BecomesEqual(after), prev, curr):
            self.assertTrue(eval_condition(Equals(after), prev, curr))

    @settings(max_examples=1000, deadline=None)
    @given(prev=st.one_of(st.none(), numeric_samples), curr=numeric_samples, low=numbers, high=numbers)
    def test_or_is_any(self, prev, curr, low, high):
        atoms = (Less(low), Greater(high), IsInvalid())
        self.assertEqual(eval_condition(Or(atoms), prev, curr), any(eval_condition(a, prev, curr) for a in atoms))

    def test_compile_monitor(self):
        model, net = sample()
        monitor = compile_monitor(model.scenarios['SpeedLock'], net)
        self.assertEqual(monitor.state_count, 4)
        self.assertEqual(monitor.accepting_state, 3)
        self.assertEqual(monitor.trigger_index, 0)
        self.assertIn(('CarComfort', 'Doors'), monitor.scope)
        self.assertTrue(monitor.in_scope(('CarComfort', 'Doors', 'left', 'LockCtrl')))
        self.assertFalse(monitor.in_scope(('CarComfort', 'CentralSettingsUnit')))

        single = Scenario('One', 'V', Policy.FREE, (Interaction(1, Ref(('A',)), Ref(('B',)), 'S0', Equals(Symbol('On'))),))
        self.assertEqual(compile_monitor(single).state_count, 2)
        with self.assertRaises(ScenarioError):
            compile_monitor(Scenario('Empty', 'V', Policy.FREE))

        rng = random_state(5)
        for _ in range(50):
            scenario, _ = random_monitor_case(rng)
            self.assertEqual(compile_monitor(scenario).state_count, len(scenario.interactions) + 1)

    def test_load_trace(self):
        trace = load_trace('# header\n1 VehicleState -> EvalSpeed VehicleSpeed 12km/h\n\n2 A -> B S0 invalid  # lost\n')
        self.assertEqual(trace, (
            TraceEvent(1, 'VehicleState', 'EvalSpeed', 'VehicleSpeed', kmh(12)),
            TraceEvent(2, 'A', 'B', 'S0', INVALID),
        ))
        self.assertEqual(load_trace(''), ())
        self.assertEqual(str(trace[0]), '1 VehicleState -> EvalSpeed VehicleSpeed 12km/h')

        with self.assertRaises(ParseErrors) as cm:
            load_trace('2 A -> B S0 On\n1 A -> B S0 On\n', 'bad.trace')
        error = cm.exception.errors[0]
        self.assertEqual(error.code, 'NON_MONOTONIC_STEP')
        self.assertEqual(error.span.line, 2)

        with self.assertRaises(ParseErrors) as cm:
            load_trace('garbage\n')
        self.assertEqual(cm.exception.errors[0].code, 'BAD_EVENT')

    def test_run_simulation(self):
        model, net = sample()
        stubs = model.stub_rules(net.name)
        trace = run_simulation(net, stubs, read_trace(os.path.join(SAMPLES_DIR, 'nominal.stim')), 4)
        for event in trace:
            print(event)
        self.assertEqual(trace, read_trace(os.path.join(SAMPLES_DIR, 'nominal.trace')))
        self.assertIn(
            TraceEvent(1, 'CarComfort.CLRequestProc.EvalSpeed', 'CarComfort.CLRequestProc.Arbiter', 'LockRequest', Symbol('Close')), trace
        )
        self.assertEqual(run_simulation(net, (), (), 5), ())
        self.assertEqual(run_simulation(net, stubs, (), 5), ())

        with self.assertRaises(SimulationError) as cm:
            run_simulation(net, stubs, (TraceEvent(0, 'ENV', 'Nowhere', 'VehicleSpeed', kmh(1)),), 2)
        self.assertEqual(cm.exception.code, 'UNKNOWN_BLOCK')
        with self.assertRaises(SimulationError) as cm:
            run_simulation(net, stubs, (TraceEvent(0, 'ENV', 'EvalSpeed', 'Ghost', kmh(1)),), 2)
        self.assertEqual(cm.exception.code, 'UNKNOWN_SIGNAL')

    def test_chain_propagation(self):
        for k in range(1, 7):
            net = chain_net(k)
            stubs = [StubRule(Ref(('B%d' % i,)), 'S0', Equals(Symbol('On')), (('S0', Symbol('On')),)) for i in range(k)]
            trace = run_simulation(net, stubs, (TraceEvent(0, 'ENV', 'B0', 'S0', Symbol('On')),), k + 2)
            arrival = min(e.step for e in trace if e.target == 'Net.B%d' % k)
            self.assertEqual(arrival, k - 1)

    def test_same_step_order(self):
        # Blocks A, B are declared in the opposite order of the connectors they emit on.
        text = '\n'.join([
            'net N {',
            '  block S {}',
            '  block A {}',
            '  block B {}',
            '  block C {}',
            '  connect Go : S -> A',
            '  connect Go : S -> B',
            '  connect X : B -> C',
            '  connect Y : A -> C',
            '}',
            'view V on N {',
            '  block S',
            '  block A',
            '  block B',
            '  block C',
            '  connect Go : S -> A',
            '  connect X : B -> C',
            '  connect Y : A -> C',
            '}',
            'scenario Order on V policy free {',
            '  1 trigger S -> A : Go == On',
            '  2 B -> C : X == On',
            '  3 A -> C : Y == On',
            '}',
            'stubs Rules on N {',
            '  rule A when Go == On emit Y = On',
            '  rule B when Go == On emit X = On',
            '}',
            '',
        ])
        model = parse_model(text)
        net = model.nets['N']
        on = Symbol('On')
        stimuli = (TraceEvent(0, 'ENV', 'A', 'Go', on), TraceEvent(0, 'ENV', 'B', 'Go', on))
        trace = run_simulation(net, model.stub_rules('N'), stimuli, 1)
        self.assertEqual(trace, (
            TraceEvent(0, 'N.S', 'N.A', 'Go', on),
            TraceEvent(0, 'N.S', 'N.B', 'Go', on),
            TraceEvent(0, 'N.B', 'N.C', 'X', on),
            TraceEvent(0, 'N.A', 'N.C', 'Y', on),
        ))
        verdict = run_monitor(compile_monitor(model.scenarios['Order'], net), trace)
        self.assertEqual((verdict.outcome, verdict.matched), (Outcome.PASS, 3))

    def test_run_monitor(self):
        model, net = sample()
        monitor = compile_monitor(model.scenarios['SpeedLock'], net)
        nominal = read_trace(os.path.join(SAMPLES_DIR, 'nominal.trace'))
        extra = read_trace(os.path.join(SAMPLES_DIR, 'extra_event.trace'))

        verdict = run_monitor(monitor, nominal)
        self.assertEqual(verdict.outcome, Outcome.PASS)
        self.assertEqual(verdict.matched, 3)

        verdict = run_monitor(monitor, extra)
        print(verdict)
        self.assertEqual(verdict.outcome, Outcome.FAIL)
        self.assertEqual(verdict.failing_step, 1)
        self.assertEqual(run_monitor(replace(monitor, policy=Policy.FREE), extra).outcome, Outcome.PASS)
        self.assertEqual(run_monitor(replace(monitor, policy=Policy.VISIBLE), extra).outcome, Outcome.PASS)

        verdict = run_monitor(monitor, nominal[:4])
        self.assertEqual((verdict.outcome, verdict.reason, verdict.failing_step, verdict.matched), (Outcome.FAIL, 'incomplete', None, 2))

        flat = run_simulation(net, model.stub_rules(net.name), read_trace(os.path.join(SAMPLES_DIR, 'flat.stim')), 3)
        self.assertEqual(run_monitor(monitor, flat).outcome, Outcome.INCONCLUSIVE)
        self.assertEqual(run_monitor(monitor, ()).outcome, Outcome.INCONCLUSIVE)

    def test_policy_monotonicity(self):
        rng = random_state(6)
        outcomes = {o: 0 for o in Outcome}
        for _ in range(1500):
            scenario, trace = random_monitor_case(rng)
            complete, visible, free = (run_monitor(compile_monitor(replace(scenario, policy=p)), trace) for p in Policy)
            outcomes[complete.outcome] += 1
            if complete.outcome is Outcome.PASS:
                self.assertIs(visible.outcome, Outcome.PASS)
            if visible.outcome is Outcome.PASS:
                self.assertIs(free.outcome, Outcome.PASS)
            if free.outcome is Outcome.FAIL:
                self.assertIs(visible.outcome, Outcome.FAIL)
            if visible.outcome is Outcome.FAIL:
                self.assertIs(complete.outcome, Outcome.FAIL)
            if Outcome.INCONCLUSIVE in (complete.outcome, free.outcome):
                self.assertEqual({complete.outcome, visible.outcome, free.outcome}, {Outcome.INCONCLUSIVE})
        print('Outcomes under complete:', {o.value: n for o, n in outcomes.items()})

    def test_prefix_persistence(self):
        rng = random_state(8)
        for _ in range(300):
            scenario, trace = random_monitor_case(rng)
            monitor = compile_monitor(scenario)
            verdicts = [run_monitor(monitor, trace[:k]) for k in range(len(trace) + 1)]
            for k, verdict in enumerate(verdicts):
                if verdict.outcome is Outcome.FAIL and verdict.failing_step is not None:
                    for later in verdicts[k:]:
                        self.assertEqual(later, verdict)
                if verdict.outcome is Outcome.PASS:
                    for later in verdicts[k:]:
                        self.assertIs(later.outcome, Outcome.PASS)

    def test_derive_stimuli(self):
        model, net = sample()
        scenario = model.scenarios['SpeedLock']
        stimuli = derive_stimuli(scenario, net)
        self.assertEqual(stimuli, (
            TraceEvent(0, 'ENV', 'CarComfort.CLRequestProc.EvalSpeed', 'VehicleSpeed', kmh(9)),
            TraceEvent(1, 'ENV', 'CarComfort.CLRequestProc.EvalSpeed', 'VehicleSpeed', kmh(11)),
        ))
        trace = run_simulation(net, model.stub_rules(net.name), stimuli, 4)
        self.assertEqual(run_monitor(compile_monitor(scenario, net), trace).outcome, Outcome.PASS)

    def test_modes(self):
        model, net = sample()
        views = dict(model.views)
        machine = model.mode_machines['AutoLockModes']

        trace = (
            TraceEvent(0, 'VehicleState', 'EvalSpeed', 'VehicleSpeed', kmh(100)),
            TraceEvent(1, 'VehicleState', 'EvalSpeed', 'VehicleSpeed', INVALID),
        )
        self.assertEqual(mode_timeline(machine, trace), [(0, 'Normal'), (1, 'Degraded')])
        self.assertEqual(mode_timeline(machine, ()), [(0, 'Normal')])
        self.assertEqual(mode_timeline(replace(machine, transitions=()), trace), [(0, 'Normal')])
        loop = ModeTransition('Normal', 'Normal', 'VehicleSpeed', Greater(kmh(0)))
        self.assertEqual(mode_timeline(replace(machine, transitions=(loop,)), trace + (TraceEvent(2, 'A', 'B', 'VehicleSpeed', kmh(5)),)), [(0, 'Normal')])

        ghost = ModeMachine('M', 'CarComfort', (('Normal', 'AutoLock'),), (ModeTransition('Normal', 'Normal', 'Ghost', Greater(kmh(3))),), 'Normal')
        report = check_mode_machine(ghost, net, views)
        self.assertEqual(report.conditions, {'C4'})
        self.assertEqual(report.findings[0].subjects, ('transition Normal -> Normal', 'Ghost'))

        views['Broken'] = replace(views['AutoLockDegraded'], name='Broken', blocks=(ViewBlock(Ref(('Doors',)), Marker.PLAIN, (ViewBlock(Ref(('Arbiter',))),)),), connectors=())
        broken = ModeMachine('M', 'CarComfort', (('Normal', 'AutoLock'), ('Odd', 'Broken')), (), 'Normal')
        report = check_mode_machine(broken, net, views)
        self.assertEqual(report.conditions, {'C2'})
        self.assertEqual(report.findings[0].subjects[0], 'mode Odd')

        # Mode views must refine a base view.
        views['Wide'] = replace(views['AutoLock'], name='Wide', blocks=views['AutoLock'].blocks + (ViewBlock(Ref(('ButtonOn',))),))
        wide = ModeMachine('M', 'AutoLockSpeed', (('Normal', 'Wide'),), (), 'Normal')
        self.assertEqual(check_mode_machine(wide, net, views).conditions, {'C6'})

    def test_variants(self):
        model, net = sample()
        views = dict(model.views)
        self.assertTrue(check_variants(model.variant_sets['CentralLockingVariants'], net, views).consistent)
        self.assertTrue(check_variants(VariantSet('Same', 'AutoLock', (('All', 'AutoLock'),)), net, views).consistent)

        speed = views['AutoLockSpeed']
        views['Big'] = replace(speed, name='Big', blocks=speed.blocks + (ViewBlock(Ref(('ButtonOn',))),))
        report = check_variants(VariantSet('Vs', 'AutoLock', (('Big', 'Big'),)), net, views)
        self.assertEqual(report.conditions, {'C6'})
        self.assertEqual(report.findings[0].subjects[:2], ('variant Big', 'Big'))

    def _cli(self, *argv):
        out, err = StringIO(), StringIO()
        code = main(list(argv), out, err)
        return code, out.getvalue(), err.getvalue()

    def _validate(self, text):
        with io.open(SCHEMA_FILE, 'r', encoding='utf-8') as fin:
            schema = json.load(fin)
        data = json.loads(text)
        jsonschema.validate(data, schema)
        return data

    def test_cli(self):
        d = tempfile.mkdtemp()
        print('Temp dir:', d)
        try:
            code, out, _ = self._cli('check', SAMPLE_FILE)
            print(out)
            self.assertEqual(code, EXIT_OK)
            code, out, _ = self._cli('check', '--format', 'json', SAMPLE_FILE)
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(self._validate(out)['verdict'], 'CONSISTENT')

            bad = os.path.join(d, 'bad.fnet')
            with io.open(bad, 'w', encoding='utf-8') as fout:
                fout.write(NET_TEXT + '\nview Bad on CarComfort {\n  block Doors {\n    block Arbiter\n  }\n}\n')
            code, out, _ = self._cli('check', '--format', 'json', bad)
            self.assertEqual(code, EXIT_FINDINGS)
            data = self._validate(out)
            findings = [f for report in data['reports'] for f in report['findings']]
            self.assertEqual([f['condition'] for f in findings], ['C2'])
            self.assertEqual(findings[0]['file'], bad)

            broken = os.path.join(d, 'broken.fnet')
            with io.open(broken, 'w', encoding='utf-8') as fout:
                fout.write('net Loose {\n  block A {}\n  connect : A -> A\n}\n\nview V on Loose {\n  block A\n}\n')
            code, out, _ = self._cli('check', '--format', 'json', broken)
            self.assertEqual(code, EXIT_FINDINGS)
            data = self._validate(out)
            self.assertEqual(data['skipped'], ['view V'])
            self.assertEqual({diag['rule'] for diag in data['nets'][0]['diagnostics']}, {'SELF_LOOP', 'MISSING_SIGNAL'})

            garbled = os.path.join(d, 'garbled.fnet')
            with io.open(garbled, 'w', encoding='utf-8') as fout:
                fout.write('net {\n')
            code, _, err = self._cli('check', garbled)
            self.assertEqual(code, EXIT_PARSE)
            self.assertIn('garbled.fnet:1:', err)

            self.assertEqual(self._cli('check', os.path.join(d, 'missing.fnet'))[0], EXIT_USAGE)
            self.assertEqual(self._cli()[0], EXIT_USAGE)
            self.assertEqual(self._cli('--version')[0], EXIT_OK)
        finally:
            shutil.rmtree(d)

    def test_cli_run(self):
        nominal = os.path.join(SAMPLES_DIR, 'nominal.trace')
        extra = os.path.join(SAMPLES_DIR, 'extra_event.trace')
        stimuli = os.path.join(SAMPLES_DIR, 'nominal.stim')
        flat = os.path.join(SAMPLES_DIR, 'flat.stim')

        code, out, _ = self._cli('run', '--scenario', 'SpeedLock', '--trace', nominal, SAMPLE_FILE)
        self.assertEqual(code, EXIT_OK)
        code, out, _ = self._cli('run', '--scenario', 'SpeedLock', '--stimuli', stimuli, '--horizon', '4', '--format', 'json', SAMPLE_FILE)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(self._validate(out)['verdict']['outcome'], 'PASS')

        code, out, _ = self._cli('run', '--scenario', 'SpeedLock', '--trace', extra, SAMPLE_FILE)
        print(out)
        self.assertEqual(code, EXIT_FINDINGS)
        self.assertIn('at step 1', out)

        code, out, _ = self._cli('run', '--scenario', 'SpeedLock', '--stimuli', flat, '--horizon', '3', '--format', 'json', SAMPLE_FILE)
        self.assertEqual(code, EXIT_INCONCLUSIVE)
        self.assertEqual(self._validate(out)['verdict']['outcome'], 'INCONCLUSIVE')

        usage = [
            ('run', '--scenario', 'SpeedLock', '--trace', nominal, '--stimuli', stimuli, '--horizon', '4', SAMPLE_FILE),
            ('run', '--scenario', 'SpeedLock', '--stimuli', stimuli, SAMPLE_FILE),
            ('run', '--scenario', 'SpeedLock', '--trace', nominal, '--horizon', '4', SAMPLE_FILE),
            ('run', '--scenario', 'Nope', '--trace', nominal, SAMPLE_FILE),
        ]
        for argv in usage:
            self.assertEqual(self._cli(*argv)[0], EXIT_USAGE, argv)

    def test_cli_tools(self):
        d = tempfile.mkdtemp()
        try:
            code, out, _ = self._cli('explain', '--view', 'AutoLock', '--format', 'json', SAMPLE_FILE)
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(len(self._validate(out)['connectors']), 5)
            code, out, _ = self._cli('explain', '--view', 'AutoLock', SAMPLE_FILE)
            self.assertIn('target lifted', out)

            code, out, _ = self._cli('derive', '--scenario', 'SpeedLock', SAMPLE_FILE)
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(
                out, '0 ENV -> CarComfort.CLRequestProc.EvalSpeed VehicleSpeed 9km/h\n'
                '1 ENV -> CarComfort.CLRequestProc.EvalSpeed VehicleSpeed 11km/h\n'
            )

            trace = os.path.join(d, 'degraded.trace')
            with io.open(trace, 'w', encoding='utf-8') as fout:
                fout.write('0 VehicleState -> EvalSpeed VehicleSpeed 100km/h\n1 VehicleState -> EvalSpeed VehicleSpeed invalid\n')
            code, out, _ = self._cli('timeline', '--machine', 'AutoLockModes', '--trace', trace, '--format', 'json', SAMPLE_FILE)
            self.assertEqual(code, EXIT_OK)
            self.assertEqual(self._validate(out)['timeline'], [{'step': 0, 'mode': 'Normal'}, {'step': 1, 'mode': 'Degraded'}])

            messy = os.path.join(d, 'messy.fnet')
            with io.open(messy, 'w', encoding='utf-8') as fout:
                fout.write('// reformat me\n' + SAMPLE_TEXT.replace('\n  ', '\n\t  ').replace('\n\n', '\n\n\n'))
            self.assertEqual(self._cli('fmt', '--check', messy)[0], EXIT_FINDINGS)
            with self.assertLogs(level='WARNING') as logs:
                self.assertEqual(self._cli('fmt', messy)[0], EXIT_OK)
            self.assertIn('1 comments are not kept', logs.output[-1])
            with io.open(messy, 'r', encoding='utf-8') as fin:
                self.assertEqual(fin.read(), SAMPLE_TEXT)
            self.assertEqual(self._cli('fmt', '--check', messy)[0], EXIT_OK)
            self.assertEqual(self._cli('fmt', '--check', SAMPLE_FILE)[0], EXIT_OK)
        finally:
            shutil.rmtree(d)


if __name__ == '__main__':
    unittest.main()
