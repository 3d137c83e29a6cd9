# coding: utf-8
"""
Seeded random models for the property tests: nets, candidate views, specialization chains,
scenarios with traces, conditions and whole models for the printer.
"""
from __future__ import annotations

from decimal import Decimal

import numpy as np

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
    IsInvalid,
    Less,
    Marker,
    Model,
    ModeMachine,
    ModeTransition,
    Number,
    Or,
    Policy,
    PortKind,
    Ref,
    Scenario,
    StubRule,
    StubSet,
    Symbol,
    Transition,
    VariantSet,
    View,
    ViewBlock,
    ViewKind,
)
from .net import index_net
from .sim import TraceEvent

NET_NAME = 'Net'
SIGNALS = ('S0', 'S1', 'S2', 'S3')
SYMBOLS = ('Open', 'Close', 'On', 'Off')
UNITS = (None, 'km/h')
GHOST_SIGNAL = 'Ghost'
ENV_BLOCK = 'Env0'


def random_state(seed=0):
    return np.random.RandomState(seed)


def _pick(rng, items):
    return items[int(rng.randint(0, len(items)))]


def _subset(rng, items, at_least=0):
    items = list(items)
    chosen = [item for item in items if rng.rand() < 0.5]
    if len(chosen) < at_least:
        chosen.append(items[int(rng.randint(0, len(items)))])
    return tuple(sorted(set(chosen)))


def block_tree(net: FunctionNet):
    """Parent name of every block of an instance-free net (None at top level)."""
    tree = {}

    def walk(items, parent):
        for item in items:
            tree[item.name] = parent
            walk(item.children, item.name)

    walk(net.blocks, None)
    return tree


def random_net(rng, max_blocks=8, name=NET_NAME):
    """A net of 1..max_blocks uniquely named blocks B0, B1, ... with random signal connectors."""
    count = int(rng.randint(1, max_blocks + 1))
    parents = [int(rng.randint(-1, i)) for i in range(count)]

    def children(parent):
        return tuple(BlockDef('B%d' % c, children(c)) for c in range(count) if parents[c] == parent)

    connectors = []
    for _ in range(int(rng.randint(0, count + 3))):
        a, b = (int(x) for x in rng.randint(0, count, size=2))
        if a == b:
            continue
        connectors.append(Connector(Ref(('B%d' % a,)), Ref(('B%d' % b,)), _subset(rng, SIGNALS, at_least=1)))
    return FunctionNet(name, children(-1), tuple(connectors))


def _depth(tree, name):
    depth = 0
    while tree.get(name) is not None:
        name = tree[name]
        depth += 1
    return depth


def _nearest_shown(tree, name, shown):
    parent = tree.get(name)
    while parent is not None and parent not in shown:
        parent = tree.get(parent)
    return parent


def _view_blocks(names, parent_of, markers):

    def block(name):
        kids = tuple(block(child) for child in names if parent_of.get(child) == name)
        return ViewBlock(Ref((name,)), markers.get(name, Marker.PLAIN), kids)

    return tuple(block(name) for name in names if parent_of.get(name) is None)


def random_view(rng, net, max_blocks=6, name='V'):
    """
    A candidate view over an instance-free net: mostly faithful, with random mis-nesting,
    omissions, phantom blocks and signals, and a random ENV block.
    """
    tree = block_tree(net)
    names = sorted(tree)
    size = int(rng.randint(1, min(max_blocks, len(names)) + 1))
    chosen = [str(n) for n in rng.choice(names, size=size, replace=False)]
    chosen.sort(key=lambda n: (_depth(tree, n), n))
    if rng.rand() < 0.1:
        chosen[-1] = 'Ghost%d' % int(rng.randint(0, 3))
    shown = set(chosen)

    parent_of = {}
    for i, block in enumerate(chosen):
        roll = rng.rand()
        if roll < 0.65:
            parent = _nearest_shown(tree, block, shown)
            if parent is not None and chosen.index(parent) < i:
                parent_of[block] = parent
        elif roll < 0.85 and i > 0:
            parent_of[block] = chosen[int(rng.randint(0, i))]

    markers = {block: Marker.EXT for block in chosen if rng.rand() < 0.15}
    connectors = []
    for conn in net.connectors:
        if rng.rand() < 0.3:
            continue
        ends = []
        for end in (conn.source.names[0], conn.target.names[0]):
            ends.append(end if end in shown else _nearest_shown(tree, end, shown))
        if None in ends or ends[0] == ends[1]:
            continue
        if rng.rand() < 0.1:
            ends[int(rng.randint(0, 2))] = chosen[int(rng.randint(0, len(chosen)))]
            if ends[0] == ends[1]:
                continue
        labels = _subset(rng, conn.signals)
        if rng.rand() < 0.05:
            labels = labels + (GHOST_SIGNAL,)
        connectors.append(Connector(Ref((ends[0],)), Ref((ends[1],)), labels))
    if len(chosen) > 1 and rng.rand() < 0.2:
        a, b = (chosen[int(i)] for i in rng.choice(len(chosen), size=2, replace=False))
        connectors.append(Connector(Ref((a,)), Ref((b,)), _subset(rng, SIGNALS)))

    if rng.rand() < 0.2:
        markers[ENV_BLOCK] = Marker.ENV
        chosen.append(ENV_BLOCK)
        connectors.append(Connector(Ref((chosen[0],)), Ref((ENV_BLOCK,)), (), PortKind.M))
        if rng.rand() < 0.5:
            connectors.append(Connector(Ref((ENV_BLOCK,)), Ref((chosen[0],)), (GHOST_SIGNAL,)))
    return View(name, net.name, _view_blocks(chosen, parent_of, markers), tuple(connectors))


def sub_view(net, paths, connectors, name, markers=None):
    """A view showing `paths` (qualified) nested as in the net, with the given connectors."""
    index = index_net(net)
    shown = set(paths)
    parent_of = {}
    for path in paths:
        parent = index.parent.get(path)
        while parent is not None and parent not in shown:
            parent = index.parent.get(parent)
        if parent is not None:
            parent_of[path] = parent
    markers = markers or {}

    def block(path):
        kids = tuple(block(child) for child in paths if parent_of.get(child) == path)
        return ViewBlock(Ref(path), markers.get(path, Marker.PLAIN), kids)

    blocks = tuple(block(path) for path in paths if path not in parent_of)
    return View(name, net.name, blocks, tuple(connectors))


def specialization_chain(rng, net):
    """
    Three views base, middle, leaf where each one drops random blocks and connectors (and
    signal labels) of the one before it. Occasionally the leaf gains a connector its middle
    view does not have.
    """
    index = index_net(net)
    paths = [p for p in index.occurrences if p != index.root]
    markers = {p: Marker.EXT for p in paths if rng.rand() < 0.2}
    resolved = [(c, s, t) for c, s, t in index.resolved_connectors()]
    base_conns = [Connector(Ref(s), Ref(t), c.signals) for c, s, t in resolved]

    def shrink(kept_paths, conns):
        keep = [p for p in kept_paths if rng.rand() < 0.75] or kept_paths[:1]
        shown = set(keep)
        result = []
        for conn in conns:
            if conn.source.names in shown and conn.target.names in shown and rng.rand() < 0.8:
                labels = conn.signals if rng.rand() < 0.5 else _subset(rng, conn.signals)
                result.append(Connector(conn.source, conn.target, labels))
        return keep, result

    base = sub_view(net, paths, base_conns, 'Base', markers)
    middle_paths, middle_conns = shrink(paths, base_conns)
    middle = sub_view(net, middle_paths, middle_conns, 'Middle', markers)
    leaf_paths, leaf_conns = shrink(middle_paths, middle_conns)
    if rng.rand() < 0.1 and resolved:
        conn, source, target = resolved[int(rng.randint(0, len(resolved)))]
        leaf_conns.append(Connector(Ref(source), Ref(target), conn.signals))
        leaf_paths = leaf_paths + [p for p in (source, target) if p not in leaf_paths]
    leaf = sub_view(net, leaf_paths, leaf_conns, 'Leaf', markers)
    return base, middle, leaf


def random_value(rng, numeric=False):
    roll = rng.rand()
    if numeric or roll < 0.6:
        return Number(Decimal(int(rng.randint(-10, 31))) / Decimal(2), _pick(rng, UNITS))
    if roll < 0.9:
        return Symbol(_pick(rng, SYMBOLS))
    return INVALID


def random_atom(rng):
    kind = int(rng.randint(0, 8))
    if kind < 4:
        return (Greater, BecomesGreater, Less, BecomesLess)[kind](random_value(rng, numeric=True))
    if kind == 4:
        return Equals(random_value(rng))
    if kind == 5:
        return BecomesEqual(random_value(rng))
    if kind == 6:
        return Transition(random_value(rng), random_value(rng))
    return IsInvalid()


def random_condition(rng):
    if rng.rand() < 0.2:
        return Or(tuple(random_atom(rng) for _ in range(int(rng.randint(2, 4)))))
    return random_atom(rng)


def random_model(rng):
    """A scope-correct model exercising every element kind, for the printer round trip."""
    plain = random_net(rng)
    names = sorted(block_tree(plain))
    net = plain
    if rng.rand() < 0.5:
        extra = (BlockDef('Part', (BlockDef('Leaf'),), reusable=True), InstanceRef('I0', 'Part'))
        net = FunctionNet(plain.name, plain.blocks + extra, plain.connectors)

    views = [random_view(rng, plain, name='V0')]
    second = random_view(rng, plain, name='V1')
    kind = _pick(rng, (None, ViewKind.FEATURE, ViewKind.MODE, ViewKind.SCENARIO_BASE, ViewKind.VARIANT))
    views.append(View(second.name, second.base_net, second.blocks, second.connectors, kind, 'V0' if kind is ViewKind.VARIANT else None))

    interactions = []
    for seq in range(1, int(rng.randint(1, 4)) + 1):
        source, target = _pick(rng, names), _pick(rng, names)
        interactions.append(Interaction(seq, Ref((source,)), Ref((target,)), _pick(rng, SIGNALS), random_condition(rng), seq == 1 or rng.rand() < 0.2))
    scenario = Scenario('Sc', 'V0', _pick(rng, tuple(Policy)), tuple(interactions))

    states = (('Normal', 'V0'), ('Other', 'V1'))
    transitions = tuple(
        ModeTransition(_pick(rng, ('Normal', 'Other')), _pick(rng, ('Normal', 'Other')), _pick(rng, SIGNALS), random_condition(rng))
        for _ in range(int(rng.randint(0, 3)))
    )
    machine = ModeMachine('M', _pick(rng, (net.name, 'V0')), states, transitions, _pick(rng, ('Normal', 'Other')))
    variants = VariantSet('Vs', 'V0', (('A', 'V0'), ('B', 'V1')))
    rules = tuple(
        StubRule(
            Ref((_pick(rng, names),)), _pick(rng, SIGNALS), random_condition(rng),
            tuple((_pick(rng, SIGNALS), random_value(rng)) for _ in range(int(rng.randint(1, 3))))
        ) for _ in range(int(rng.randint(0, 3)))
    )
    stubs = StubSet('St', net.name, rules)
    return Model((net,) + tuple(views) + (scenario, machine, variants, stubs))


MONITOR_BLOCKS = ('A', 'B', 'C', 'D', 'E')


def _monitor_condition(rng):
    kind = int(rng.randint(0, 3))
    if kind == 0:
        return Equals(Symbol(_pick(rng, SYMBOLS)))
    if kind == 1:
        return Greater(Number(Decimal(int(rng.randint(0, 10)))))
    return Transition(Symbol(_pick(rng, SYMBOLS)), Symbol(_pick(rng, SYMBOLS)))


def random_monitor_case(rng, max_interactions=5, max_events=12):
    """
    A scenario over blocks A..D (no net) and a trace of at most `max_events` events that
    mixes satisfying events for the interactions, in order, with random noise.
    """
    interactions = []
    for seq in range(1, int(rng.randint(1, max_interactions + 1)) + 1):
        source, target = (MONITOR_BLOCKS[int(i)] for i in rng.choice(4, size=2, replace=False))
        interactions.append(Interaction(seq, Ref((source,)), Ref((target,)), _pick(rng, SIGNALS[:2]), _monitor_condition(rng), rng.rand() < 0.3))
    scenario = Scenario('Random', 'V', _pick(rng, tuple(Policy)), tuple(interactions))

    events = []
    step = 0
    pending = list(interactions)
    while len(events) < max_events:
        step += int(rng.randint(0, 2))
        if pending and rng.rand() < 0.6:
            interaction = pending.pop(0)
            source, target = interaction.source.text, interaction.target.text
            cond = interaction.condition
            if isinstance(cond, Transition):
                events.append(TraceEvent(step, source, target, interaction.signal, cond.before))
                value = cond.after
            elif isinstance(cond, Greater):
                value = Number(cond.value.magnitude + 1)
            else:
                value = cond.value
            events.append(TraceEvent(step, source, target, interaction.signal, value))
        else:
            source, target = (MONITOR_BLOCKS[int(i)] for i in rng.choice(len(MONITOR_BLOCKS), size=2, replace=False))
            value = Symbol(_pick(rng, SYMBOLS)) if rng.rand() < 0.5 else Number(Decimal(int(rng.randint(0, 12))))
            events.append(TraceEvent(step, source, target, _pick(rng, SIGNALS[:2]), value))
        if not pending and rng.rand() < 0.3:
            break
    return scenario, tuple(events[:max_events])


def chain_net(length, signal='S0'):
    """Blocks B0 -> B1 -> ... -> B<length> wired in a row, all carrying `signal`."""
    blocks = tuple(BlockDef('B%d' % i) for i in range(length + 1))
    connectors = tuple(Connector(Ref(('B%d' % i,)), Ref(('B%d' % (i + 1),)), (signal,)) for i in range(length))
    return FunctionNet(NET_NAME, blocks, connectors)


def full_view(rng, net, name='Full'):
    """
    A view of every block of the net (qualified names), each nested under its real parent,
    under an earlier block, or at top level. Returns the view and its nesting edges.
    """
    index = index_net(net)
    paths = sorted((p for p in index.occurrences if p != index.root), key=lambda p: (len(p), p))
    parent_of = {}
    for i, path in enumerate(paths):
        roll = rng.rand()
        real = index.parent.get(path)
        if roll < 0.6 and real != index.root:
            parent_of[path] = real
        elif roll < 0.85 and i > 0:
            parent_of[path] = paths[int(rng.randint(0, i))]

    def block(path):
        kids = tuple(block(child) for child in paths if parent_of.get(child) == path)
        return ViewBlock(Ref(path), Marker.PLAIN, kids)

    view = View(name, net.name, tuple(block(path) for path in paths if path not in parent_of))
    return view, [(parent, child) for child, parent in parent_of.items()]
