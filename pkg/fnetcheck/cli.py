# coding: utf-8
"""
Command line frontend.

    fnet check [--format text|json] FILE...
    fnet run --scenario NAME (--trace FILE | --stimuli FILE --horizon N) [--format text|json] FILE...
    fnet fmt [--check] FILE...
    fnet explain --view NAME [--format text|json] FILE...
    fnet derive --scenario NAME FILE...
    fnet timeline --machine NAME --trace FILE [--format text|json] FILE...

Exit codes: 0 consistent/pass, 1 findings/fail, 2 parse error, 3 usage, 4 inconclusive.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Optional, Tuple

from . import __version__
from .consistency import CONSISTENT, INCONSISTENT, check_specialization, check_view, explain_view
from .dsl import count_comments, load_model, parse_model, render_model
from .model import FnetError, Model, ParseErrors, UsageError, ViewKind
from .modes import check_mode_machine, check_variants, mode_timeline
from .net import validate_net
from .scenario import check_scenario, compile_monitor
from .sim import Outcome, derive_stimuli, dump_trace, read_trace, run_monitor, run_simulation

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_PARSE = 2
EXIT_USAGE = 3
EXIT_INCONCLUSIVE = 4

OUTCOME_EXIT = {
    Outcome.PASS: EXIT_OK,
    Outcome.FAIL: EXIT_FINDINGS,
    Outcome.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}

FNET_LOG_LEVEL = os.environ.get('FNET_LOG_LEVEL', 'WARNING')

_COLORS = {
    CONSISTENT: '32',
    INCONSISTENT: '31',
    Outcome.PASS.value: '32',
    Outcome.FAIL.value: '31',
    Outcome.INCONCLUSIVE.value: '33',
}


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage problems as UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    paths: Tuple[str, ...]
    output_format: str = 'text'
    scenario: Optional[str] = None
    trace: Optional[str] = None
    stimuli: Optional[str] = None
    horizon: Optional[int] = None

    @classmethod
    def from_args(cls, args):
        config = cls(
            args.command,
            tuple(args.files),
            getattr(args, 'format', 'text'),
            getattr(args, 'scenario', None),
            getattr(args, 'trace', None),
            getattr(args, 'stimuli', None),
            getattr(args, 'horizon', None),
        )
        config.validate()
        return config

    def validate(self):
        for path in self.paths + tuple(p for p in (self.trace, self.stimuli) if p):
            if not os.path.isfile(path):
                raise UsageError('No such file: %s' % path)
        if self.command != 'run':
            return
        if (self.trace is None) == (self.stimuli is None):
            raise UsageError('run needs exactly one of --trace and --stimuli.')
        if self.stimuli is not None and (self.horizon is None or self.horizon <= 0):
            raise UsageError('--stimuli needs a positive --horizon.')
        if self.trace is not None and self.horizon is not None:
            raise UsageError('--horizon only applies to --stimuli.')


def build_parser():
    parser = ArgumentParser(prog='fnet', description='Check function nets, views, scenarios and modes.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('-v', '--verbose', action='store_true', help='log debug output to stderr')
    commands = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    commands.required = True

    def add(name, help_text, formats=True):
        command = commands.add_parser(name, help=help_text)
        if formats:
            command.add_argument('--format', choices=('text', 'json'), default='text')
        command.add_argument('files', nargs='+', metavar='FILE')
        return command

    add('check', 'check every net, view, scenario, mode machine and variant set')

    run = add('run', 'run a scenario monitor on a trace or on simulated stimuli')
    run.add_argument('--scenario', required=True)
    run.add_argument('--trace')
    run.add_argument('--stimuli')
    run.add_argument('--horizon', type=int)

    fmt = add('fmt', 'rewrite files in canonical form', formats=False)
    fmt.add_argument('--check', action='store_true', help='only report files that would change')

    explain = add('explain', 'show how the net realizes the connectors of a view')
    explain.add_argument('--view', required=True)

    derive = add('derive', 'print test stimuli for the triggers of a scenario', formats=False)
    derive.add_argument('--scenario', required=True)

    timeline = add('timeline', 'evaluate a mode machine over a trace')
    timeline.add_argument('--machine', required=True)
    timeline.add_argument('--trace', required=True)
    return parser


class Printer:

    def __init__(self, out, output_format):
        self.out = out
        self.json = output_format == 'json'
        self.color = not os.environ.get('NO_COLOR') and hasattr(out, 'isatty') and out.isatty()

    def style(self, text):
        code = _COLORS.get(text)
        if not self.color or code is None:
            return text
        return '\033[%sm%s\033[0m' % (code, text)

    def line(self, text=''):
        self.out.write(text + '\n')

    def document(self, command, **fields):
        data = {'schemaVersion': SCHEMA_VERSION, 'command': command}
        data.update(fields)
        self.out.write(json.dumps(data, indent=2, sort_keys=True) + '\n')

    def report(self, report):
        self.line('%s: %s' % (report.artifact, self.style(report.verdict)))
        for finding in report.findings:
            self.line('  %s' % finding)
        for note in report.notes:
            self.line('  note: %s' % note)


def _model(config) -> Model:
    return load_model(config.paths)


def _lookup(table, name, kind):
    if name not in table:
        raise UsageError('No %s named %s.' % (kind, name))
    return table[name]


def cmd_check(config, printer):
    model = _model(config)
    nets = model.nets
    net_results = []
    broken = set()
    for net in nets.values():
        diagnostics = validate_net(net)
        net_results.append((net, diagnostics))
        if diagnostics:
            broken.add(net.name)

    reports = []
    skipped = []

    def run(artifact, net_name, check):
        if net_name in broken or net_name not in nets:
            skipped.append(artifact)
            return
        reports.append(check(nets[net_name]))

    views = model.views
    for view in views.values():
        if view.kind is ViewKind.VARIANT and view.specializes:
            base = views[view.specializes]
            run('view %s' % view.name, view.base_net, lambda net, view=view, base=base: check_specialization(view, base, net))
        else:
            run('view %s' % view.name, view.base_net, lambda net, view=view: check_view(view, net))
    for scenario in model.scenarios.values():
        base = views[scenario.base_view]
        run('scenario %s' % scenario.name, base.base_net, lambda net, s=scenario, base=base: check_scenario(s, net, base))
    for machine in model.mode_machines.values():
        net_name = machine.base if machine.base in nets else views[machine.base].base_net
        run('modes %s' % machine.name, net_name, lambda net, m=machine: check_mode_machine(m, net, views))
    for variant_set in model.variant_sets.values():
        net_name = views[variant_set.feature_view].base_net
        run('variants %s' % variant_set.name, net_name, lambda net, v=variant_set: check_variants(v, net, views))

    ok = not broken and not skipped and all(r.consistent for r in reports)
    logging.info('Checked %d artifacts: %d inconsistent.', len(reports), sum(1 for r in reports if not r.consistent))
    if printer.json:
        printer.document(
            'check',
            verdict=CONSISTENT if ok else INCONSISTENT,
            nets=[{
                'net': net.name,
                'diagnostics': [d.to_dict() for d in diagnostics]
            } for net, diagnostics in net_results],
            reports=[r.to_dict() for r in reports],
            skipped=skipped,
        )
    else:
        for net, diagnostics in net_results:
            printer.line('net %s: %s' % (net.name, 'well-formed' if not diagnostics else '%d problems' % len(diagnostics)))
            for diagnostic in diagnostics:
                where = '%s: ' % diagnostic.span if diagnostic.span else ''
                printer.line('  %s%s [%s] %s' % (where, diagnostic.rule, diagnostic.path, diagnostic.message))
        for report in reports:
            printer.report(report)
        for artifact in skipped:
            printer.line('%s: skipped, its net is not well-formed' % artifact)
    return EXIT_OK if ok else EXIT_FINDINGS


def _scenario_setup(model, name):
    scenario = _lookup(model.scenarios, name, 'scenario')
    base = model.views[scenario.base_view]
    net = _lookup(model.nets, base.base_net, 'net')
    return scenario, base, net


def cmd_run(config, printer):
    model = _model(config)
    scenario, base, net = _scenario_setup(model, config.scenario)
    report = check_scenario(scenario, net, base)
    if not report.consistent:
        if printer.json:
            printer.document('run', scenario=scenario.name, policy=scenario.policy.value, consistency=report.to_dict(), verdict=None)
        else:
            printer.report(report)
        return EXIT_FINDINGS

    if config.trace is not None:
        trace = read_trace(config.trace)
    else:
        stimuli = read_trace(config.stimuli)
        trace = run_simulation(net, model.stub_rules(net.name), stimuli, config.horizon)
        logging.info('Simulated %d steps: %d events.', config.horizon, len(trace))
    verdict = run_monitor(compile_monitor(scenario, net), trace)
    logging.info('Scenario %s: %s', scenario.name, verdict)
    if printer.json:
        printer.document('run', scenario=scenario.name, policy=scenario.policy.value, consistency=report.to_dict(), verdict=verdict.to_dict())
    else:
        printer.line('scenario %s (%s): %s' % (scenario.name, scenario.policy.value, printer.style(verdict.outcome.value)))
        printer.line('  %s' % verdict)
    return OUTCOME_EXIT[verdict.outcome]


def cmd_fmt(config, printer, check_only):
    changed = []
    errors = []
    for path in config.paths:
        with io.open(path, 'r', encoding='utf-8') as fin:
            text = fin.read()
        try:
            canonical = render_model(parse_model(text, path, resolve=False))
        except ParseErrors as exc:
            errors.extend(exc.errors)
            continue
        if canonical == text:
            continue
        changed.append(path)
        comments = count_comments(text)
        if comments:
            logging.warning('%s: %d comments are not kept by fmt.', path, comments)
        if check_only:
            printer.line('would reformat %s' % path)
        else:
            with io.open(path, 'w', encoding='utf-8') as fout:
                fout.write(canonical)
            printer.line('reformatted %s' % path)
    if errors:
        raise ParseErrors(errors)
    return EXIT_FINDINGS if check_only and changed else EXIT_OK


def cmd_explain(config, printer, view_name):
    model = _model(config)
    view = _lookup(model.views, view_name, 'view')
    net = _lookup(model.nets, view.base_net, 'net')
    results = explain_view(view, net)
    if printer.json:
        printer.document('explain', view=view.name, connectors=[r.to_dict() for r in results])
    else:
        for result in results:
            data = result.to_dict()
            label = '%s [%s]' % (data['connector'], ', '.join(data['signals']) or 'unlabeled')
            if not result.matched:
                printer.line('%s: not realized' % label)
                continue
            lifted = [end for end, flag in (('source', result.source_lifted), ('target', result.target_lifted)) if flag]
            printer.line(
                '%s: %s -> %s [%s]%s' % (
                    label, data['netSource'], data['netTarget'], ', '.join(data['netSignals']),
                    ' (%s lifted)' % ' and '.join(lifted) if lifted else ''
                )
            )
    return EXIT_OK if all(r.matched for r in results) else EXIT_FINDINGS


def cmd_derive(config, printer, scenario_name):
    model = _model(config)
    scenario, _, net = _scenario_setup(model, scenario_name)
    printer.out.write(dump_trace(derive_stimuli(scenario, net)))
    return EXIT_OK


def cmd_timeline(config, printer, machine_name):
    model = _model(config)
    machine = _lookup(model.mode_machines, machine_name, 'mode machine')
    timeline = mode_timeline(machine, read_trace(config.trace))
    if printer.json:
        printer.document('timeline', machine=machine.name, timeline=[{'step': step, 'mode': mode} for step, mode in timeline])
    else:
        for step, mode in timeline:
            printer.line('%d %s' % (step, mode))
    return EXIT_OK


def _dispatch(args, config, printer):
    if args.command == 'check':
        return cmd_check(config, printer)
    if args.command == 'run':
        return cmd_run(config, printer)
    if args.command == 'fmt':
        return cmd_fmt(config, printer, args.check)
    if args.command == 'explain':
        return cmd_explain(config, printer, args.view)
    if args.command == 'derive':
        return cmd_derive(config, printer, args.scenario)
    return cmd_timeline(config, printer, args.machine)


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        err.write('fnet: error: %s\n' % exc.message)
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code or EXIT_OK

    logging.basicConfig(level=logging.DEBUG if args.verbose else FNET_LOG_LEVEL.upper(), format='%(levelname)s %(message)s')
    try:
        config = RunConfig.from_args(args)
        return _dispatch(args, config, Printer(out, config.output_format))
    except ParseErrors as exc:
        for error in exc.errors:
            err.write('%s\n' % error)
        return EXIT_PARSE
    except FnetError as exc:
        err.write('fnet: error: %s\n' % exc.message)
        return EXIT_USAGE


def command_line_runner():
    sys.exit(main())


if __name__ == '__main__':
    command_line_runner()
