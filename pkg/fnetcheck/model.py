# coding: utf-8
"""
Immutable model of function nets and everything that refers to them: views, scenarios,
mode machines, variant sets and behavior stubs.

Every value here is a frozen dataclass. Source spans never take part in equality, so two
models parsed from differently formatted text compare equal when their structure does.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Dict, Iterator, Optional, Tuple, Union

ENV_SOURCE = 'ENV'
PATH_SEPARATOR = '.'

BlockPath = Tuple[str, ...]


class FnetError(Exception):
    """Base class of every failure raised by fnetcheck operations."""

    code = 'ERROR'

    def __init__(self, message, code=None):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code


class ResolutionError(FnetError):

    def __init__(self, name, code, candidates=()):
        if code == 'AMBIGUOUS':
            message = 'Block name %r is ambiguous: %s' % (name, ', '.join(candidates))
        else:
            message = 'Block %r does not exist.' % name
        super().__init__(message, code)
        self.name = name
        self.candidates = tuple(candidates)


class BaseMismatch(FnetError):
    code = 'BASE_MISMATCH'


class ConditionTypeError(FnetError):
    code = 'TYPE_MISMATCH'


class ScenarioError(FnetError):
    code = 'EMPTY_SCENARIO'


class SimulationError(FnetError):
    pass


class UsageError(FnetError):
    code = 'USAGE'


@dataclass(frozen=True)
class SourceSpan:
    file: str = '<string>'
    line: int = 1
    column: int = 1
    length: int = 0

    def __str__(self):
        return '%s:%d:%d' % (self.file, self.line, self.column)


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    message: str
    expected: Tuple[str, ...] = ()
    code: str = 'SYNTAX'

    def __str__(self):
        return '%s: error[%s]: %s' % (self.span, self.code, self.message)


class ParseErrors(FnetError):
    """Raised for rejected text. Always carries at least one ParseError."""

    code = 'PARSE'

    def __init__(self, errors):
        errors = tuple(errors)
        assert errors, 'ParseErrors needs at least one error.'
        super().__init__('\n'.join(str(e) for e in errors))
        self.errors = errors


def qualified(path):
    return PATH_SEPARATOR.join(path)


def split_path(text):
    return tuple(text.split(PATH_SEPARATOR))


# Signal values.


@dataclass(frozen=True)
class Number:
    magnitude: Decimal
    unit: Optional[str] = None


@dataclass(frozen=True)
class Symbol:
    name: str


@dataclass(frozen=True)
class Invalid:
    pass


INVALID = Invalid()

Value = Union[Number, Symbol, Invalid]

# Signal conditions. Relational atoms only ever hold Number values.


@dataclass(frozen=True)
class Greater:
    value: Value


@dataclass(frozen=True)
class BecomesGreater:
    value: Value


@dataclass(frozen=True)
class Equals:
    value: Value


@dataclass(frozen=True)
class BecomesEqual:
    value: Value


@dataclass(frozen=True)
class Less:
    value: Value


@dataclass(frozen=True)
class BecomesLess:
    value: Value


@dataclass(frozen=True)
class Transition:
    before: Value
    after: Value


@dataclass(frozen=True)
class IsInvalid:
    pass


@dataclass(frozen=True)
class Or:
    atoms: Tuple['Condition', ...]

    def __post_init__(self):
        assert len(self.atoms) >= 2, 'Or needs at least two atoms.'
        assert not any(isinstance(a, Or) for a in self.atoms), 'Or atoms must not nest.'


Condition = Union[Greater, BecomesGreater, Equals, BecomesEqual, Less, BecomesLess, Transition, IsInvalid, Or]

RELATIONAL_CONDITIONS = (Greater, BecomesGreater, Less, BecomesLess)

# Function nets.


class PortKind(enum.Enum):
    SIGNAL = 'connect'
    M = 'mech'
    H = 'hydr'
    E = 'elec'


@dataclass(frozen=True)
class Port:
    kind: PortKind
    name: Optional[str] = None


@dataclass(frozen=True)
class Ref:
    """A block reference as written: a short name or a dotted path."""

    names: Tuple[str, ...]
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @classmethod
    def parse(cls, text, span=None):
        return cls(split_path(text), span)

    @property
    def text(self):
        return qualified(self.names)

    @property
    def is_qualified(self):
        return len(self.names) > 1

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class BlockDef:
    """A block occurrence with an inline definition, or a reusable `blockdef`."""

    name: str
    children: Tuple[Union['BlockDef', 'InstanceRef'], ...] = ()
    ports: Tuple[Port, ...] = ()
    reusable: bool = False
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class InstanceRef:
    name: str
    definition: str
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Connector:
    source: Ref
    target: Ref
    signals: Tuple[str, ...] = ()
    kind: PortKind = PortKind.SIGNAL
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class FunctionNet:
    name: str
    blocks: Tuple[Union[BlockDef, InstanceRef], ...] = ()
    connectors: Tuple[Connector, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)


# Views.


class Marker(enum.Enum):
    PLAIN = 'block'
    EXT = 'ext'
    ENV = 'env'


class ViewKind(enum.Enum):
    FEATURE = 'feature'
    VARIANT = 'variant'
    MODE = 'mode'
    SCENARIO_BASE = 'scenariobase'


@dataclass(frozen=True)
class ViewBlock:
    name: Ref
    marker: Marker = Marker.PLAIN
    children: Tuple['ViewBlock', ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class View:
    name: str
    base_net: str
    blocks: Tuple[ViewBlock, ...] = ()
    connectors: Tuple[Connector, ...] = ()
    kind: Optional[ViewKind] = None
    specializes: Optional[str] = None
    span: Optional[SourceSpan] = field(default=None, compare=False)

    def walk(self) -> Iterator[Tuple[Optional[ViewBlock], ViewBlock]]:
        """Yields (parent, block) pairs in declaration order, parents first."""
        stack = [(None, block) for block in reversed(self.blocks)]
        while stack:
            parent, block = stack.pop()
            yield parent, block
            stack.extend((block, child) for child in reversed(block.children))

    def ports(self):
        """M/H/E ports implied by non-signal connectors, as (block name, Port) pairs."""
        found = []
        for conn in self.connectors:
            if conn.kind is PortKind.SIGNAL:
                continue
            for end in (conn.source, conn.target):
                entry = (end.text, Port(conn.kind))
                if entry not in found:
                    found.append(entry)
        return tuple(found)


# Scenarios.


class Policy(enum.Enum):
    COMPLETE = 'complete'
    VISIBLE = 'visible'
    FREE = 'free'


@dataclass(frozen=True)
class Interaction:
    seq: int
    source: Ref
    target: Ref
    signal: str
    condition: Condition
    trigger: bool = False
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class Scenario:
    name: str
    base_view: str
    policy: Policy
    interactions: Tuple[Interaction, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @property
    def triggers(self):
        return tuple(i for i in self.interactions if i.trigger)


# Modes and variants.


@dataclass(frozen=True)
class ModeTransition:
    source: str
    target: str
    signal: str
    condition: Condition
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class ModeMachine:
    name: str
    base: str
    states: Tuple[Tuple[str, str], ...]
    transitions: Tuple[ModeTransition, ...] = ()
    initial: str = ''
    span: Optional[SourceSpan] = field(default=None, compare=False)

    @property
    def modes(self):
        return tuple(mode for mode, _ in self.states)

    def view_of(self, mode):
        return dict(self.states)[mode]


@dataclass(frozen=True)
class VariantSet:
    name: str
    feature_view: str
    variants: Tuple[Tuple[str, str], ...]
    span: Optional[SourceSpan] = field(default=None, compare=False)


# Behavior stubs.


@dataclass(frozen=True)
class StubRule:
    owner: Ref
    signal: str
    guard: Condition
    emissions: Tuple[Tuple[str, Value], ...]
    span: Optional[SourceSpan] = field(default=None, compare=False)


@dataclass(frozen=True)
class StubSet:
    name: str
    base_net: str
    rules: Tuple[StubRule, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)


Element = Union[FunctionNet, View, ModeMachine, VariantSet, Scenario, StubSet]

ELEMENT_KEYWORDS = {
    FunctionNet: 'net',
    View: 'view',
    ModeMachine: 'modes',
    VariantSet: 'variants',
    Scenario: 'scenario',
    StubSet: 'stubs',
}


@dataclass(frozen=True)
class Model:
    """All elements of one or more files, in declaration order, sharing one namespace."""

    elements: Tuple[Element, ...] = ()

    def _of(self, cls) -> Dict[str, Element]:
        return {e.name: e for e in self.elements if isinstance(e, cls)}

    @property
    def nets(self) -> Dict[str, FunctionNet]:
        return self._of(FunctionNet)

    @property
    def views(self) -> Dict[str, View]:
        return self._of(View)

    @property
    def scenarios(self) -> Dict[str, Scenario]:
        return self._of(Scenario)

    @property
    def mode_machines(self) -> Dict[str, ModeMachine]:
        return self._of(ModeMachine)

    @property
    def variant_sets(self) -> Dict[str, VariantSet]:
        return self._of(VariantSet)

    @property
    def stub_sets(self) -> Dict[str, StubSet]:
        return self._of(StubSet)

    def stub_rules(self, net_name):
        return tuple(rule for stubs in self.stub_sets.values() if stubs.base_net == net_name for rule in stubs.rules)

    def net_of(self, view_name):
        return self.nets.get(self.views[view_name].base_net)

    @classmethod
    def merge(cls, models):
        return cls(tuple(e for m in models for e in m.elements))

    def __len__(self):
        return len(self.elements)
