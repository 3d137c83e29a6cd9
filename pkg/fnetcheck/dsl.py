# coding: utf-8
"""
Textual syntax for function nets, views, mode machines, variant sets, scenarios and
behavior stubs (`.fnet` files), with a canonical printer.

Grammar (layout-insensitive, `//` line comments):

    model      := element*
    element    := net | view | modeMachine | variantSet | scenario | stubs
    net        := "net" ID "{" blockItem* connect* "}"
    blockItem  := "block" ID "{" blockItem* "}" | "instance" ID ":" ID | "blockdef" ID "{" blockItem* "}"
    connect    := "connect" (ID ("," ID)*)? ":" pathRef "->" pathRef
    view       := "view" ID kind? "on" ID "{" viewBlock* viewConnect* "}"
    kind       := "feature" | "variant" "of" ID | "mode" | "scenariobase"
    viewBlock  := ("block" | "ext" | "env") pathRef ("{" viewBlock* "}")?
    viewConnect:= ("connect" | "mech" | "hydr" | "elec") (ID ("," ID)*)? ":" pathRef "->" pathRef
    scenario   := "scenario" ID "on" ID "policy" ("complete"|"visible"|"free") "{" interaction* "}"
    interaction:= NAT "trigger"? pathRef "->" pathRef ":" ID cond
    cond       := atom ("|" atom)*
    atom       := (">"|">>"|"=="|"="|"<"|"<<") value | ":" value "->" value | "invalid"
    modeMachine:= "modes" ID "on" ID "{" ("state" ID "view" ID)+ ("from" ID "to" ID "when" ID cond)* "initial" ID "}"
    variantSet := "variants" ID "of" ID "{" ("variant" ID "view" ID)+ "}"
    stubs      := "stubs" ID "on" ID "{" ("rule" pathRef "when" ID cond "emit" ID "=" value ("," ID "=" value)*)* "}"
    pathRef    := ID ("." ID)*
"""
from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass
from decimal import Decimal

import pyparsing as pp

from .model import (
    INVALID,
    BecomesEqual,
    BecomesGreater,
    BecomesLess,
    BlockDef,
    Connector,
    Equals,
    FunctionNet,
    Greater,
    InstanceRef,
    Interaction,
    Invalid,
    IsInvalid,
    Less,
    Marker,
    Model,
    ModeMachine,
    ModeTransition,
    Number,
    Or,
    ParseError,
    ParseErrors,
    Policy,
    PortKind,
    Ref,
    Scenario,
    SourceSpan,
    StubRule,
    StubSet,
    Symbol,
    Transition,
    VariantSet,
    View,
    ViewBlock,
    ViewKind,
)

FILE_EXTENSION = '.fnet'
INDENT = '  '

RESERVED_WORDS = (
    'net', 'view', 'env', 'ext', 'scenario', 'trigger', 'policy', 'mode', 'variant',
    'block', 'blockdef', 'instance', 'connect', 'mech', 'hydr', 'elec', 'on', 'of',
    'feature', 'scenariobase', 'complete', 'visible', 'free', 'modes', 'state', 'from',
    'to', 'when', 'initial', 'variants', 'invalid', 'stubs', 'rule', 'emit',
)

_WORD = r'(?!(?:%s)\b)[A-Za-z_][A-Za-z0-9_]*' % '|'.join(RESERVED_WORDS)
IDENT_RE = re.compile(_WORD)
PATH_RE = re.compile(r'%s(?:\.%s)*' % (_WORD, _WORD))
NUMBER_RE = re.compile(r'(?P<magnitude>-?\d+(?:\.\d+)?)(?P<unit>[A-Za-z_%][A-Za-z0-9_%/]*)?')

_OPERATORS = {
    '>': Greater,
    '>>': BecomesGreater,
    '==': Equals,
    '=': BecomesEqual,
    '<': Less,
    '<<': BecomesLess,
}
_OPERATOR_OF = {cls: op for op, cls in _OPERATORS.items()}
_NUMERIC_OPERATORS = ('>', '>>', '<', '<<')

_VIEW_CONNECTOR_KINDS = {kind.value: kind for kind in PortKind}


class _SemanticError(pp.ParseFatalException):
    """A fatal parse failure with one of the ParseError codes."""

    def __init__(self, s, loc, msg, code, span=None):
        super().__init__(s, loc, msg)
        self.code = code
        self.span = span


@dataclass(frozen=True)
class _Kind:
    kind: ViewKind
    parent: str = None


def parse_number(text):
    match = NUMBER_RE.fullmatch(text)
    if match is None:
        return None
    return Number(Decimal(match.group('magnitude')), match.group('unit'))


def parse_value(text):
    """Parses one signal value: `invalid`, a number with optional unit tag, or a symbol."""
    text = text.strip()
    if text == 'invalid':
        return INVALID
    number = parse_number(text)
    if number is not None:
        return number
    if IDENT_RE.fullmatch(text):
        return Symbol(text)
    raise ParseErrors([ParseError(SourceSpan(length=len(text)), 'Not a signal value: %r' % text, ('value',), 'BAD_VALUE')])


class _Grammar:
    """pyparsing grammar whose parse actions build model values with spans in `filename`."""

    def __init__(self, filename):
        self.filename = filename

        lbrace, rbrace, colon, pipe, equals = map(pp.Suppress, '{}:|=')
        arrow = pp.Suppress('->')
        k = self.keyword

        ident = pp.Regex(IDENT_RE).set_name('identifier')
        path = pp.Regex(PATH_RE).set_name('block path')
        path.set_parse_action(lambda s, loc, t: Ref.parse(t[0], self.span(s, loc, loc + len(t[0]))))
        nat = pp.Regex(r'\d+').set_name('sequence number')

        number = pp.Regex(NUMBER_RE).set_name('number')
        number.set_parse_action(lambda t: parse_number(t[0]))
        symbol = ident.copy().set_parse_action(lambda t: Symbol(t[0]))
        value = (k('invalid').set_parse_action(lambda: INVALID) | number | symbol).set_name('value')

        operator = pp.one_of('>> > == = << <').set_name('operator')
        comparison = (operator + value).set_parse_action(self._comparison)
        transition = (colon + value + arrow - value).set_parse_action(lambda t: Transition(t[0], t[1]))
        invalid = k('invalid').set_parse_action(lambda: IsInvalid())
        atom = (comparison | transition | invalid).set_name('condition')
        cond = (atom + pp.ZeroOrMore(pipe - atom)).set_parse_action(lambda t: t[0] if len(t) == 1 else Or(tuple(t)))
        self.condition = cond

        signals = pp.Group(pp.Optional(pp.DelimitedList(ident)))

        block_item = pp.Forward()
        block = self.node(k('block').suppress() - ident - lbrace - pp.Group(pp.ZeroOrMore(block_item)) - rbrace, self._block)
        blockdef = self.node(k('blockdef').suppress() - ident - lbrace - pp.Group(pp.ZeroOrMore(block_item)) - rbrace, self._blockdef)
        instance = self.node(k('instance').suppress() - ident - colon - ident, lambda span, t: InstanceRef(t[0], t[1], span))
        block_item <<= block | blockdef | instance
        connect = self.node(k('connect') - signals - colon - path - arrow - path, self._connector)
        net = self.node(
            k('net').suppress() - ident - lbrace - pp.Group(pp.ZeroOrMore(block_item)) - pp.Group(pp.ZeroOrMore(connect)) - rbrace,
            lambda span, t: FunctionNet(t[0], tuple(t[1]), tuple(t[2]), span)
        )

        kind = (
            k('feature').set_parse_action(lambda: _Kind(ViewKind.FEATURE))
            | (k('variant').suppress() - k('of').suppress() - ident).set_parse_action(lambda t: _Kind(ViewKind.VARIANT, t[0]))
            | k('mode').set_parse_action(lambda: _Kind(ViewKind.MODE))
            | k('scenariobase').set_parse_action(lambda: _Kind(ViewKind.SCENARIO_BASE))
        )
        view_block = pp.Forward()
        view_block <<= self.node(
            (k('block') | k('ext') | k('env')) - path - pp.Optional(lbrace - pp.Group(pp.ZeroOrMore(view_block)) - rbrace), self._view_block
        )
        view_connect = self.node((k('connect') | k('mech') | k('hydr') | k('elec')) - signals - colon - path - arrow - path, self._connector)
        view = self.node(
            k('view').suppress() - ident - pp.Optional(kind) - k('on').suppress() - ident - lbrace - pp.Group(pp.ZeroOrMore(view_block)) -
            pp.Group(pp.ZeroOrMore(view_connect)) - rbrace, self._view
        )

        interaction = self.node(nat - pp.Optional(k('trigger')) - path - arrow - path - colon - ident - cond, self._interaction)
        policy = k('complete') | k('visible') | k('free')
        scenario = self.node(
            k('scenario').suppress() - ident - k('on').suppress() - ident - k('policy').suppress() - policy - lbrace -
            pp.Group(pp.ZeroOrMore(interaction)) - rbrace, self._scenario
        )

        state = pp.Group(k('state').suppress() - ident - k('view').suppress() - ident)
        mode_transition = self.node(
            k('from').suppress() - ident - k('to').suppress() - ident - k('when').suppress() - ident - cond,
            lambda span, t: ModeTransition(t[0], t[1], t[2], t[3], span)
        )
        machine = self.node(
            k('modes').suppress() - ident - k('on').suppress() - ident - lbrace - pp.Group(pp.OneOrMore(state)) -
            pp.Group(pp.ZeroOrMore(mode_transition)) - k('initial').suppress() - ident - rbrace, self._machine
        )

        variant = pp.Group(k('variant').suppress() - ident - k('view').suppress() - ident)
        variant_set = self.node(
            k('variants').suppress() - ident - k('of').suppress() - ident - lbrace - pp.Group(pp.OneOrMore(variant)) - rbrace,
            lambda span, t: VariantSet(t[0], t[1], tuple((name, view) for name, view in t[2]), span)
        )

        emission = pp.Group(ident - equals - value)
        rule = self.node(
            k('rule').suppress() - path - k('when').suppress() - ident - cond - k('emit').suppress() - pp.Group(pp.DelimitedList(emission)),
            lambda span, t: StubRule(t[0], t[1], t[2], tuple((name, v) for name, v in t[3]), span)
        )
        stubs = self.node(
            k('stubs').suppress() - ident - k('on').suppress() - ident - lbrace - pp.Group(pp.ZeroOrMore(rule)) - rbrace,
            lambda span, t: StubSet(t[0], t[1], tuple(t[2]), span)
        )

        element = net | view | machine | variant_set | scenario | stubs
        self.model = pp.ZeroOrMore(element) + pp.StringEnd()
        self.model.ignore(pp.dbl_slash_comment)
        self.condition_only = cond + pp.StringEnd()
        self.condition_only.ignore(pp.dbl_slash_comment)

    @staticmethod
    def keyword(word):
        return pp.Keyword(word)

    def span(self, s, start, end):
        return SourceSpan(self.filename, pp.lineno(start, s), pp.col(start, s), end - start)

    def node(self, expr, build):
        located = pp.Located(expr)
        located.set_parse_action(lambda s, loc, t: build(self.span(s, t.locn_start, t.locn_end), t.value))
        return located

    @staticmethod
    def _comparison(s, loc, t):
        op, value = t[0], t[1]
        if op in _NUMERIC_OPERATORS and not isinstance(value, Number):
            raise _SemanticError(s, loc, 'Operator %s needs a numeric value.' % op, 'SYNTAX')
        return _OPERATORS[op](value)

    @staticmethod
    def _block(span, t):
        return BlockDef(t[0], tuple(t[1]), span=span)

    @staticmethod
    def _blockdef(span, t):
        return BlockDef(t[0], tuple(t[1]), reusable=True, span=span)

    @staticmethod
    def _connector(span, t):
        return Connector(t[2], t[3], tuple(t[1]), _VIEW_CONNECTOR_KINDS[t[0]], span)

    @staticmethod
    def _view_block(span, t):
        children = tuple(t[2]) if len(t) > 2 else ()
        return ViewBlock(t[1], Marker(t[0]), children, span)

    @staticmethod
    def _view(span, t):
        t = list(t)
        kind = t.pop(1) if isinstance(t[1], _Kind) else None
        name, base, blocks, connectors = t
        return View(
            name,
            base,
            tuple(blocks),
            tuple(connectors),
            kind.kind if kind else None,
            kind.parent if kind else None,
            span,
        )

    @staticmethod
    def _interaction(span, t):
        t = list(t)
        trigger = t[1] == 'trigger'
        if trigger:
            del t[1]
        seq, source, target, signal, cond = t
        return Interaction(int(seq), source, target, signal, cond, trigger, span)

    @staticmethod
    def _scenario(span, t):
        interactions = tuple(sorted(t[3], key=lambda i: i.seq))
        seqs = [i.seq for i in interactions]
        if seqs != list(range(1, len(seqs) + 1)):
            raise _SemanticError('', 0, 'Interaction numbers of scenario %s must run 1..%d without gaps: %s' % (t[0], len(seqs), seqs), 'BAD_SEQUENCE', span)
        return Scenario(t[0], t[1], Policy(t[2]), interactions, span)

    @staticmethod
    def _machine(span, t):
        states = tuple((mode, view) for mode, view in t[2])
        return ModeMachine(t[0], t[1], states, tuple(t[3]), t[4], span)


def _error_from(exc, filename):
    code = getattr(exc, 'code', 'SYNTAX')
    if getattr(exc, 'span', None) is not None:
        span = exc.span
    elif not exc.pstr:
        span = SourceSpan(filename)
    else:
        span = SourceSpan(filename, exc.lineno, exc.col, 1)
    element = getattr(exc, 'parser_element', None) or getattr(exc, 'parserElement', None)
    expected = (str(element),) if element is not None else ()
    return ParseError(span, exc.msg, expected, code)


def _parse(expr, text, filename):
    try:
        return expr.parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        raise ParseErrors([_error_from(exc, filename)]) from None


def parse_model(text, filename='<string>', resolve=True) -> Model:
    """
    Parses `.fnet` text into a Model. With `resolve`, references between elements are
    checked within this text; pass False when several files form one namespace and call
    `check_scopes` on the merged model instead.
    """
    grammar = _Grammar(filename)
    model = Model(tuple(_parse(grammar.model, text, filename)))
    logging.debug('Parsed %s: %d elements.', filename, len(model))
    if resolve:
        errors = check_scopes(model)
        if errors:
            raise ParseErrors(errors)
    return model


def parse_condition(text, filename='<string>'):
    return _parse(_Grammar(filename).condition_only, text, filename)[0]


def count_comments(text):
    return len(pp.dbl_slash_comment.search_string(text))


def check_scopes(model: Model):
    """Name-level checks across elements: unique names and resolvable references."""
    errors = []

    def error(element, message, code):
        errors.append(ParseError(element.span or SourceSpan(), message, (), code))

    seen = set()
    for element in model.elements:
        if element.name in seen:
            error(element, 'Duplicate top-level name %s.' % element.name, 'DUPLICATE_NAME')
        seen.add(element.name)

    nets, views = model.nets, model.views
    for view in views.values():
        if view.base_net not in nets:
            error(view, 'View %s is on unknown net %s.' % (view.name, view.base_net), 'UNKNOWN_BASE')
        if view.specializes is not None and view.specializes not in views:
            error(view, 'View %s is a variant of unknown view %s.' % (view.name, view.specializes), 'UNKNOWN_BASE')
        env = {block.name.text for _, block in view.walk() if block.marker is Marker.ENV}
        for conn in view.connectors:
            if conn.kind is PortKind.SIGNAL or not conn.signals:
                continue
            if conn.source.text not in env and conn.target.text not in env:
                errors.append(ParseError(
                    conn.span or view.span or SourceSpan(),
                    'Physical connector %s -> %s in view %s names signals %s but has no env endpoint.' %
                    (conn.source.text, conn.target.text, view.name, ', '.join(conn.signals)),
                    (),
                    'PHYSICAL_SIGNALS',
                ))
    for scenario in model.scenarios.values():
        if scenario.base_view not in views:
            error(scenario, 'Scenario %s is on unknown view %s.' % (scenario.name, scenario.base_view), 'UNKNOWN_BASE')
    for machine in model.mode_machines.values():
        if machine.base not in nets and machine.base not in views:
            error(machine, 'Mode machine %s is on unknown net or view %s.' % (machine.name, machine.base), 'UNKNOWN_BASE')
        modes = set()
        for mode, view_name in machine.states:
            if mode in modes:
                error(machine, 'Mode %s is declared twice in %s.' % (mode, machine.name), 'DUPLICATE_NAME')
            modes.add(mode)
            if view_name not in views:
                error(machine, 'Mode %s refers to unknown view %s.' % (mode, view_name), 'UNKNOWN_VIEW')
        if machine.initial not in modes:
            error(machine, 'Initial mode %s is not a declared state.' % machine.initial, 'UNKNOWN_MODE')
        for transition in machine.transitions:
            for mode in (transition.source, transition.target):
                if mode not in modes:
                    errors.append(ParseError(transition.span or SourceSpan(), 'Transition names unknown mode %s.' % mode, (), 'UNKNOWN_MODE'))
    for variant_set in model.variant_sets.values():
        if variant_set.feature_view not in views:
            error(variant_set, 'Variant set %s is of unknown view %s.' % (variant_set.name, variant_set.feature_view), 'UNKNOWN_BASE')
        names = set()
        for name, view_name in variant_set.variants:
            if name in names:
                error(variant_set, 'Variant %s is declared twice in %s.' % (name, variant_set.name), 'DUPLICATE_NAME')
            names.add(name)
            if view_name not in views:
                error(variant_set, 'Variant %s refers to unknown view %s.' % (name, view_name), 'UNKNOWN_VIEW')
    for stubs in model.stub_sets.values():
        if stubs.base_net not in nets:
            error(stubs, 'Stubs %s are on unknown net %s.' % (stubs.name, stubs.base_net), 'UNKNOWN_BASE')
    return errors


def load_model(paths) -> Model:
    """Loads several `.fnet` files into one namespace."""
    models = []
    errors = []
    for path in paths:
        logging.info('Loading %s...', path)
        with io.open(path, 'r', encoding='utf-8') as fin:
            text = fin.read()
        try:
            models.append(parse_model(text, path, resolve=False))
        except ParseErrors as exc:
            errors.extend(exc.errors)
    if errors:
        raise ParseErrors(errors)
    model = Model.merge(models)
    errors = check_scopes(model)
    if errors:
        raise ParseErrors(errors)
    return model


# Canonical printer.


def render_value(value):
    if isinstance(value, Invalid):
        return 'invalid'
    if isinstance(value, Symbol):
        return value.name
    return '%s%s' % (format(value.magnitude, 'f'), value.unit or '')


def render_condition(cond):
    if isinstance(cond, Or):
        return ' | '.join(render_condition(atom) for atom in cond.atoms)
    if isinstance(cond, IsInvalid):
        return 'invalid'
    if isinstance(cond, Transition):
        return ': %s -> %s' % (render_value(cond.before), render_value(cond.after))
    return '%s %s' % (_OPERATOR_OF[type(cond)], render_value(cond.value))


def _braced(header, body, depth):
    pad = INDENT * depth
    if not body:
        return ['%s%s {}' % (pad, header)]
    return ['%s%s {' % (pad, header)] + body + ['%s}' % pad]


def _render_block(item, depth):
    if isinstance(item, InstanceRef):
        return ['%sinstance %s : %s' % (INDENT * depth, item.name, item.definition)]
    body = [line for child in item.children for line in _render_block(child, depth + 1)]
    return _braced('%s %s' % ('blockdef' if item.reusable else 'block', item.name), body, depth)


def _render_connector(conn, depth):
    signals = '%s ' % ', '.join(conn.signals) if conn.signals else ''
    return '%s%s %s: %s -> %s' % (INDENT * depth, conn.kind.value, signals, conn.source.text, conn.target.text)


def _render_view_block(block, depth):
    header = '%s %s' % (block.marker.value, block.name.text)
    if not block.children:
        return [INDENT * depth + header]
    body = [line for child in block.children for line in _render_view_block(child, depth + 1)]
    return _braced(header, body, depth)


def _render_net(net):
    body = [line for item in net.blocks for line in _render_block(item, 1)]
    body += [_render_connector(c, 1) for c in net.connectors]
    return _braced('net %s' % net.name, body, 0)


def _render_view(view):
    header = 'view %s' % view.name
    if view.kind is ViewKind.VARIANT:
        header += ' variant of %s' % view.specializes
    elif view.kind is not None:
        header += ' %s' % view.kind.value
    header += ' on %s' % view.base_net
    body = [line for block in view.blocks for line in _render_view_block(block, 1)]
    body += [_render_connector(c, 1) for c in view.connectors]
    return _braced(header, body, 0)


def _render_scenario(scenario):
    body = [
        '%s%d %s%s -> %s : %s %s' % (
            INDENT, i.seq, 'trigger ' if i.trigger else '', i.source.text, i.target.text, i.signal, render_condition(i.condition)
        ) for i in scenario.interactions
    ]
    return _braced('scenario %s on %s policy %s' % (scenario.name, scenario.base_view, scenario.policy.value), body, 0)


def _render_machine(machine):
    body = ['%sstate %s view %s' % (INDENT, mode, view) for mode, view in machine.states]
    body += [
        '%sfrom %s to %s when %s %s' % (INDENT, t.source, t.target, t.signal, render_condition(t.condition)) for t in machine.transitions
    ]
    body.append('%sinitial %s' % (INDENT, machine.initial))
    return _braced('modes %s on %s' % (machine.name, machine.base), body, 0)


def _render_variants(variant_set):
    body = ['%svariant %s view %s' % (INDENT, name, view) for name, view in variant_set.variants]
    return _braced('variants %s of %s' % (variant_set.name, variant_set.feature_view), body, 0)


def _render_stubs(stubs):
    body = [
        '%srule %s when %s %s emit %s' % (
            INDENT, r.owner.text, r.signal, render_condition(r.guard), ', '.join('%s = %s' % (s, render_value(v)) for s, v in r.emissions)
        ) for r in stubs.rules
    ]
    return _braced('stubs %s on %s' % (stubs.name, stubs.base_net), body, 0)


_RENDERERS = {
    FunctionNet: _render_net,
    View: _render_view,
    Scenario: _render_scenario,
    ModeMachine: _render_machine,
    VariantSet: _render_variants,
    StubSet: _render_stubs,
}


def render_model(model: Model) -> str:
    """Canonical text: declaration order, one item per line, blank line between elements."""
    chunks = ['\n'.join(_RENDERERS[type(element)](element)) for element in model.elements]
    return '\n\n'.join(chunks) + '\n'
