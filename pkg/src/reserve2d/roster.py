"""Roster lotteries: unbiased integer rosters drawn from a scheme table.

A *scheme table* of height k repeats the scheme fractions in every one of
its k rows, so that column j sums to k*a_j, an integer when k is a multiple
of every fraction's denominator.  An *integral block* is a 0/1 table of the
same shape with one 1 per row whose column prefix counts never stray from
the fair prefix l*a_j by one or more; reading row l's 1 as "position l is
reserved for category j" makes a block a roster segment that satisfies every
category's quota at every prefix length.

Blocks are drawn from a flow network whose vertices are the constraints of
the scheme table:

* one *cell* vertex per table cell (value in [0, 1]),
* one *row* vertex per row (row sums are 1),
* one *prefix* vertex per column j and depth l in 2..k (the sum of the
  first l cells of column j lies within floor/ceil of l*a_j).

Column j's flow enters at its deepest prefix vertex carrying k*a_j, peels
off one cell's worth (a_j) at each depth, and every row forwards exactly 1
to the sink.  All flows start inside width-<=1 bounds; repeatedly picking a
cycle of fractional edges and pushing it to a bound — direction randomized
so the expected flow is unchanged — terminates in an integral flow, i.e. a
block.  Each step removes at least one fractional edge, the choice
probabilities make the current network the exact mixture of the two
branches, and the two candidate cycle adjustments are the headrooms d+
(raising the cycle's forward edges) and d− (lowering them); the raising
branch is chosen with probability d−/(d−+d+).

Rosters longer than one block either concatenate independent block draws
(the default) or tile a single draw (``repeat-block``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property, lru_cache
from math import lcm
from typing import Callable, Optional, Sequence, Union

from .core import ReservationScheme, Roster

__all__ = [
    "SchemeTable",
    "FlowEdge",
    "FlowNetwork",
    "FlowStep",
    "IntegralBlock",
    "minimal_height",
    "build_scheme_table",
    "build_flow_network",
    "find_flow_cycle",
    "decompose_flow_once",
    "draw_block",
    "draw_roster",
    "source_vertex",
    "prefix_vertex",
    "cell_vertex",
    "row_vertex",
    "sink_vertex",
]

# Vertices are plain tuples so cycles can be written down literally in tests
# and error messages.
Vertex = tuple


def source_vertex() -> Vertex:
    return ("source",)


def prefix_vertex(depth: int, column: int) -> Vertex:
    """Constraint vertex for the first ``depth`` cells of ``column`` (depth >= 2)."""
    return ("prefix", depth, column)


def cell_vertex(row: int, column: int) -> Vertex:
    return ("cell", row, column)


def row_vertex(row: int) -> Vertex:
    return ("row", row)


def sink_vertex() -> Vertex:
    return ("sink",)


def minimal_height(scheme: ReservationScheme) -> int:
    """Smallest block height that makes every column total integral."""
    return lcm(*(f.denominator for f in scheme.fractions))


@dataclass(frozen=True)
class SchemeTable:
    """Height-k table repeating the scheme fractions in every row."""

    scheme: ReservationScheme
    height: int

    def __post_init__(self):
        if self.height < 2:
            raise ValueError(f"scheme table height must be at least 2, got {self.height}")
        for cat, f in zip(self.scheme.categories, self.scheme.fractions):
            if (self.height * f).denominator != 1:
                raise ValueError(
                    f"height {self.height} leaves column {cat!r} with the "
                    f"non-integral total {self.height * f}; the smallest valid "
                    f"height is {minimal_height(self.scheme)} (any multiple of it works)"
                )

    @property
    def rows(self) -> tuple[tuple[Fraction, ...], ...]:
        return (self.scheme.fractions,) * self.height

    @property
    def column_totals(self) -> tuple[int, ...]:
        return tuple(int(self.height * f) for f in self.scheme.fractions)


@lru_cache(maxsize=64)
def build_scheme_table(
    scheme: ReservationScheme, height: Optional[int] = None
) -> SchemeTable:
    """Scheme table of the given height (default: the minimal valid height)."""
    if height is None:
        height = minimal_height(scheme)
    return SchemeTable(scheme, height)


@dataclass(frozen=True)
class FlowEdge:
    """One edge with its current flow and its fixed floor/ceil bounds."""

    tail: Vertex
    head: Vertex
    flow: Fraction
    lower: int
    upper: int


@lru_cache(maxsize=64)
def _vertex_orders(height: int, n: int) -> dict:
    """Canonical vertex enumeration used for deterministic tie-breaking."""
    seq: list[Vertex] = [source_vertex()]
    for j in range(n):
        for depth in range(height, 1, -1):
            seq.append(prefix_vertex(depth, j))
    for i in range(height):
        for j in range(n):
            seq.append(cell_vertex(i, j))
    for i in range(height):
        seq.append(row_vertex(i))
    seq.append(sink_vertex())
    return {v: pos for pos, v in enumerate(seq)}


@lru_cache(maxsize=64)
def _edge_skeleton(height: int, n: int) -> tuple[tuple[Vertex, Vertex], ...]:
    """Edge list for a height x n network, sorted by vertex order."""
    order = _vertex_orders(height, n)
    pairs: list[tuple[Vertex, Vertex]] = []
    for j in range(n):
        pairs.append((source_vertex(), prefix_vertex(height, j)))
        for depth in range(height, 2, -1):
            pairs.append((prefix_vertex(depth, j), prefix_vertex(depth - 1, j)))
        for depth in range(height, 1, -1):
            pairs.append((prefix_vertex(depth, j), cell_vertex(depth - 1, j)))
        pairs.append((prefix_vertex(2, j), cell_vertex(0, j)))
    for i in range(height):
        for j in range(n):
            pairs.append((cell_vertex(i, j), row_vertex(i)))
    for i in range(height):
        pairs.append((row_vertex(i), sink_vertex()))
    pairs.sort(key=lambda e: (order[e[0]], order[e[1]]))
    return tuple(pairs)


@lru_cache(maxsize=64)
def _incidence(height: int, n: int) -> tuple[dict, dict]:
    """Per-vertex incident edges as (edge_index, direction) sorted by index.

    Direction +1 means the edge leaves the vertex, -1 that it enters it.
    Also returns the map from cell->row edge index to its (row, column).
    """
    skeleton = _edge_skeleton(height, n)
    inc: dict[Vertex, list[tuple[int, int]]] = {}
    cell_edges: dict[int, tuple[int, int]] = {}
    for idx, (tail, head) in enumerate(skeleton):
        inc.setdefault(tail, []).append((idx, +1))
        inc.setdefault(head, []).append((idx, -1))
        if tail[0] == "cell":
            cell_edges[idx] = (tail[1], tail[2])
    for edges in inc.values():
        edges.sort()
    return inc, cell_edges


def _initial_flow(table: SchemeTable, tail: Vertex, head: Vertex) -> Fraction:
    alphas = table.scheme.fractions
    if tail == source_vertex():
        return table.height * alphas[head[2]]
    if tail[0] == "prefix" and head[0] == "prefix":
        return head[1] * alphas[head[2]]
    if tail[0] == "prefix" and head[0] == "cell":
        return alphas[head[2]]
    if tail[0] == "cell":
        return alphas[tail[2]]
    return Fraction(1)  # row -> sink


@dataclass(frozen=True)
class FlowNetwork:
    """The constraint network of a scheme table, with current edge flows."""

    table: SchemeTable
    edges: tuple[FlowEdge, ...]

    def __post_init__(self):
        balance: dict[Vertex, Fraction] = {}
        indeg: dict[Vertex, int] = {}
        outdeg: dict[Vertex, int] = {}
        for e in self.edges:
            if not e.lower <= e.flow <= e.upper:
                raise ValueError(
                    f"edge {e.tail}->{e.head}: flow {e.flow} outside [{e.lower}, {e.upper}]"
                )
            if e.upper - e.lower > 1:
                raise ValueError(
                    f"edge {e.tail}->{e.head}: bound width {e.upper - e.lower} exceeds 1"
                )
            balance[e.tail] = balance.get(e.tail, Fraction(0)) - e.flow
            balance[e.head] = balance.get(e.head, Fraction(0)) + e.flow
            outdeg[e.tail] = outdeg.get(e.tail, 0) + 1
            indeg[e.head] = indeg.get(e.head, 0) + 1
        for v, b in balance.items():
            if v[0] in ("source", "sink"):
                continue
            if b != 0:
                raise ValueError(f"flow is not conserved at {v}: imbalance {b}")
            if v[0] in ("prefix", "cell") and indeg.get(v, 0) != 1:
                raise ValueError(f"{v} must have exactly one incoming edge")
            if v[0] in ("cell", "row") and outdeg.get(v, 0) != 1:
                raise ValueError(f"{v} must have exactly one outgoing edge")

    @property
    def is_integral(self) -> bool:
        return all(e.flow.denominator == 1 for e in self.edges)


def build_flow_network(table: SchemeTable) -> FlowNetwork:
    """Flow network of ``table`` with every edge at its constraint's sum."""
    edges = []
    for tail, head in _edge_skeleton(table.height, table.scheme.size):
        flow = _initial_flow(table, tail, head)
        lower = flow.numerator // flow.denominator
        upper = lower if flow.denominator == 1 else lower + 1
        edges.append(FlowEdge(tail, head, flow, lower, upper))
    return FlowNetwork(table, tuple(edges))


# --- cycle search and decomposition -------------------------------------
#
# The internal routines below work on scaled integer flows: with S the lcm
# of the fraction denominators, every edge flow is a multiple of 1/S
# throughout the decomposition, so flows are stored as flow*S and an edge is
# fractional exactly when its scaled flow is not a multiple of S.


def _scaled(network: FlowNetwork) -> tuple[int, tuple[int, ...], tuple[tuple[int, int], ...]]:
    scale = lcm(*(f.denominator for f in network.table.scheme.fractions))
    flows = tuple(int(e.flow * scale) for e in network.edges)
    bounds = tuple((e.lower * scale, e.upper * scale) for e in network.edges)
    return scale, flows, bounds


def _find_cycle_scaled(
    height: int, n: int, scale: int, flows: Sequence[int]
) -> Optional[tuple[tuple[int, int], ...]]:
    """Deterministic cycle of fractional edges as ((edge, direction), ...).

    Walks from the smallest vertex touching a fractional edge, always taking
    the smallest-indexed eligible fractional edge other than the one used to
    enter the current vertex, closing at the first revisited vertex and
    discarding the walk prefix before it.  Conservation guarantees every
    vertex incident to a fractional edge has at least two, so the walk never
    stalls.  The cycle is normalized to start at its smallest edge index,
    traversed forward.
    """
    incidence, _ = _incidence(height, n)
    order = _vertex_orders(height, n)
    skeleton = _edge_skeleton(height, n)

    start = None
    for v in sorted(incidence, key=order.__getitem__):
        if any(flows[e] % scale for e, _ in incidence[v]):
            start = v
            break
    if start is None:
        return None

    path_vertices = [start]
    seen = {start: 0}
    path_edges: list[tuple[int, int]] = []
    entered_by = None
    while True:
        v = path_vertices[-1]
        step = next(
            (e, d)
            for e, d in incidence[v]
            if flows[e] % scale and e != entered_by
        )
        e, d = step
        tail, head = skeleton[e]
        w = head if d == +1 else tail
        path_edges.append((e, d))
        if w in seen:
            cut = seen[w]
            cycle = path_edges[cut:]
            break
        seen[w] = len(path_vertices)
        path_vertices.append(w)
        entered_by = e

    # Normalize: smallest edge first, traversed forward.
    smallest = min(range(len(cycle)), key=lambda s: cycle[s][0])
    if cycle[smallest][1] == -1:
        cycle = [(e, -d) for e, d in reversed(cycle)]
        smallest = min(range(len(cycle)), key=lambda s: cycle[s][0])
    return tuple(cycle[smallest:] + cycle[:smallest])


def _branch_data(
    scale: int,
    flows: Sequence[int],
    bounds: Sequence[tuple[int, int]],
    cycle: Sequence[tuple[int, int]],
) -> tuple[int, int, tuple[int, ...], tuple[int, ...]]:
    """Scaled headrooms (d+, d-) and both branch flow vectors for a cycle."""
    d_plus = d_minus = None
    for e, d in cycle:
        lo, up = bounds[e]
        room_up, room_down = up - flows[e], flows[e] - lo
        up_room = room_up if d == +1 else room_down
        down_room = room_down if d == +1 else room_up
        d_plus = up_room if d_plus is None else min(d_plus, up_room)
        d_minus = down_room if d_minus is None else min(d_minus, down_room)
    if not d_plus or not d_minus:
        raise RuntimeError(
            "internal error: degenerate cycle (an edge has no headroom); "
            "cycles must consist of fractional edges"
        )
    plus = list(flows)
    minus = list(flows)
    for e, d in cycle:
        plus[e] += d * d_plus
        minus[e] -= d * d_minus
    return d_plus, d_minus, tuple(plus), tuple(minus)


def find_flow_cycle(network: FlowNetwork) -> Optional[tuple[tuple[int, int], ...]]:
    """Deterministic cycle of fractional edges, or None if already integral."""
    scale, flows, _ = _scaled(network)
    return _find_cycle_scaled(network.table.height, network.table.scheme.size, scale, flows)


def _with_flows(network: FlowNetwork, scale: int, flows: Sequence[int]) -> FlowNetwork:
    edges = tuple(
        replace(e, flow=Fraction(f, scale)) for e, f in zip(network.edges, flows)
    )
    return FlowNetwork(network.table, edges)


def _coerce_cycle(
    network: FlowNetwork, cycle: Sequence
) -> tuple[tuple[int, int], ...]:
    """Validate a caller-supplied cycle; accept vertex paths or (edge, dir) pairs."""
    skeleton = _edge_skeleton(network.table.height, network.table.scheme.size)
    if cycle and isinstance(cycle[0], tuple) and isinstance(cycle[0][0], str):
        # A closed vertex path; translate consecutive vertex pairs to edges.
        index = {(t, h): i for i, (t, h) in enumerate(skeleton)}
        vertices = list(cycle)
        out = []
        for a, b in zip(vertices, vertices[1:] + vertices[:1]):
            if (a, b) in index:
                out.append((index[(a, b)], +1))
            elif (b, a) in index:
                out.append((index[(b, a)], -1))
            else:
                raise ValueError(f"no edge joins {a} and {b}")
        cycle = out
    cycle = tuple((int(e), int(d)) for e, d in cycle)
    if len(cycle) < 2 or len(set(e for e, _ in cycle)) != len(cycle):
        raise ValueError("a cycle must list at least two distinct edges")
    for (e, d), (e2, d2) in zip(cycle, cycle[1:] + cycle[:1]):
        if d not in (+1, -1):
            raise ValueError(f"direction must be +1 or -1, got {d}")
        tail, head = skeleton[e]
        reached = head if d == +1 else tail
        t2, h2 = skeleton[e2]
        departed = t2 if d2 == +1 else h2
        if reached != departed:
            raise ValueError(
                f"cycle breaks between edges {skeleton[e]} and {skeleton[e2]}"
            )
        if network.edges[e].flow.denominator == 1:
            raise ValueError(f"edge {tail}->{head} is integral; cycles must be fractional")
    return cycle


@dataclass(frozen=True)
class FlowStep:
    """One randomized decomposition step with both branches materialized.

    The pre-step network is the exact mixture of the branches:
    probability * raise_forward + (1 - probability) * raise_backward equals
    ``network`` edge by edge, which is validated on construction.
    """

    network: FlowNetwork
    cycle: tuple[tuple[int, int], ...]
    d_plus: Fraction
    d_minus: Fraction
    probability: Fraction
    raise_forward: FlowNetwork
    raise_backward: FlowNetwork
    branch: str
    result: FlowNetwork

    def __post_init__(self):
        if self.d_plus <= 0 or self.d_minus <= 0:
            raise ValueError("both adjustments must be positive")
        if self.probability != self.d_minus / (self.d_minus + self.d_plus):
            raise ValueError("branch probability must equal d-/(d- + d+)")
        if self.branch not in ("raise-forward", "raise-backward"):
            raise ValueError(f"unknown branch {self.branch!r}")
        expected = self.raise_forward if self.branch == "raise-forward" else self.raise_backward
        if self.result is not expected:
            raise ValueError("result must be the branch named by 'branch'")
        beta = self.probability
        for e, fwd, bwd in zip(
            self.network.edges, self.raise_forward.edges, self.raise_backward.edges
        ):
            if beta * fwd.flow + (1 - beta) * bwd.flow != e.flow:
                raise ValueError(
                    f"branches do not mix back to the network at {e.tail}->{e.head}"
                )


def decompose_flow_once(
    network: FlowNetwork,
    rng,
    *,
    cycle: Optional[Sequence] = None,
    on_step: Optional[Callable[[FlowStep], None]] = None,
) -> FlowNetwork:
    """One randomized step: push a fractional cycle to a bound.

    The number of fractional edges strictly decreases, flows stay within
    their bounds, and the expectation of the result is the input network.
    ``cycle`` overrides the deterministic cycle choice (as (edge, direction)
    pairs or a closed vertex path); ``on_step`` observes the realized step.
    """
    scale, flows, bounds = _scaled(network)
    if cycle is None:
        cycle = _find_cycle_scaled(
            network.table.height, network.table.scheme.size, scale, flows
        )
        if cycle is None:
            raise ValueError("network is already integral; nothing to decompose")
    else:
        cycle = _coerce_cycle(network, cycle)
    dp, dm, plus, minus = _branch_data(scale, flows, bounds, cycle)
    probability = Fraction(dm, dm + dp)
    forward = _with_flows(network, scale, plus)
    backward = _with_flows(network, scale, minus)
    take_forward = rng.bernoulli(probability)
    step = FlowStep(
        network=network,
        cycle=cycle,
        d_plus=Fraction(dp, scale),
        d_minus=Fraction(dm, scale),
        probability=probability,
        raise_forward=forward,
        raise_backward=backward,
        branch="raise-forward" if take_forward else "raise-backward",
        result=forward if take_forward else backward,
    )
    if on_step is not None:
        on_step(step)
    return step.result


@dataclass(frozen=True)
class IntegralBlock:
    """A 0/1 scheme-table rounding: one category per roster position.

    Column prefix counts stay within floor/ceil of the fair prefix at every
    depth and are exact at the block boundary.
    """

    scheme: ReservationScheme
    height: int
    entries: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = self.scheme.size
        if len(self.entries) != self.height:
            raise ValueError(f"expected {self.height} rows, got {len(self.entries)}")
        counts = [0] * n
        for depth, row in enumerate(self.entries, start=1):
            if len(row) != n or any(v not in (0, 1) for v in row):
                raise ValueError(f"row {depth} is not a 0/1 row of width {n}")
            if sum(row) != 1:
                raise ValueError(f"row {depth} must contain exactly one 1")
            for j, v in enumerate(row):
                counts[j] += v
                target = depth * self.scheme.fractions[j]
                if not target - 1 < counts[j] < target + 1:
                    raise ValueError(
                        f"column {self.scheme.categories[j]!r} has {counts[j]} of the "
                        f"first {depth} positions; fair share is {target}"
                    )

    @cached_property
    def positions(self) -> tuple[str, ...]:
        """Category per 1-based block position."""
        return tuple(
            self.scheme.categories[row.index(1)] for row in self.entries
        )

    @classmethod
    def from_network(cls, network: FlowNetwork) -> "IntegralBlock":
        if not network.is_integral:
            raise ValueError("network still has fractional flows")
        table = network.table
        grid = [[0] * table.scheme.size for _ in range(table.height)]
        for e in network.edges:
            if e.tail[0] == "cell":
                grid[e.tail[1]][e.tail[2]] = int(e.flow)
        return cls(table.scheme, table.height, tuple(tuple(r) for r in grid))


class _BlockSampler:
    """Memoized decomposition walk for one scheme table.

    States are scaled flow vectors; each visited state caches the branch
    probability and both successor states, so repeated draws replay dict
    lookups and consume exactly the Bernoulli sequence the uncached
    decomposition would.
    """

    _CACHE_CAP = 1 << 17

    def __init__(self, table: SchemeTable):
        network = build_flow_network(table)
        self.table = table
        self.scale, self.start, self.bounds = _scaled(network)
        self.steps: dict = {}
        self.blocks: dict = {}

    def _expand(self, state: tuple[int, ...]):
        if all(f % self.scale == 0 for f in state):
            grid = [[0] * self.table.scheme.size for _ in range(self.table.height)]
            _, cell_edges = _incidence(self.table.height, self.table.scheme.size)
            for e, (i, j) in cell_edges.items():
                grid[i][j] = state[e] // self.scale
            block = IntegralBlock(
                self.table.scheme, self.table.height, tuple(tuple(r) for r in grid)
            )
            self.blocks[state] = block
            return None
        cycle = _find_cycle_scaled(
            self.table.height, self.table.scheme.size, self.scale, state
        )
        dp, dm, plus, minus = _branch_data(self.scale, state, self.bounds, cycle)
        # The branch probability dm/(dm+dp) is stored in lowest terms so the
        # direct randrange below consumes exactly the draws that
        # SplitStream.bernoulli would.
        beta = Fraction(dm, dm + dp)
        step = (beta.numerator, beta.denominator, plus, minus)
        if len(self.steps) < self._CACHE_CAP:
            self.steps[state] = step
        return step

    def draw(self, rng) -> IntegralBlock:
        state = self.start
        while True:
            block = self.blocks.get(state)
            if block is not None:
                return block
            step = self.steps.get(state)
            if step is None:
                step = self._expand(state)
                if step is None:
                    return self.blocks[state]
            num, den, plus, minus = step
            state = plus if rng.randrange(den) < num else minus


_SAMPLERS: dict[tuple[ReservationScheme, int], _BlockSampler] = {}


def _sampler(scheme: ReservationScheme, height: int) -> _BlockSampler:
    key = (scheme, height)
    sampler = _SAMPLERS.get(key)
    if sampler is None:
        sampler = _SAMPLERS[key] = _BlockSampler(build_scheme_table(scheme, height))
    return sampler


def draw_block(
    scheme: ReservationScheme,
    height: Optional[int],
    rng,
    *,
    on_step: Optional[Callable[[FlowStep], None]] = None,
) -> IntegralBlock:
    """Draw one integral block; every cell's expectation is its fraction."""
    table = build_scheme_table(scheme, height)
    if on_step is None:
        return _sampler(scheme, table.height).draw(rng)
    network = build_flow_network(table)
    while not network.is_integral:
        network = decompose_flow_once(network, rng, on_step=on_step)
    return IntegralBlock.from_network(network)


def _draw_positions(
    scheme: ReservationScheme,
    length: int,
    rng,
    extension_policy: str,
    height: Optional[int],
) -> tuple[tuple[str, ...], int]:
    table = build_scheme_table(scheme, height)
    k = table.height
    if length < 0:
        raise ValueError(f"roster length must be nonnegative, got {length}")
    blocks_needed = -(-length // k)
    sampler = _sampler(scheme, k)
    if extension_policy == "repeat-block":
        block = sampler.draw(rng).positions if blocks_needed else ()
        positions = (block * blocks_needed)[:length]
    elif extension_policy == "independent-blocks":
        drawn: list[str] = []
        for _ in range(blocks_needed):
            drawn.extend(sampler.draw(rng).positions)
        positions = tuple(drawn[:length])
    else:
        raise ValueError(
            f"unknown extension policy {extension_policy!r}; expected "
            "'independent-blocks' or 'repeat-block'"
        )
    return positions, k


def draw_roster(
    scheme: ReservationScheme,
    length: int,
    rng,
    extension_policy: str = "independent-blocks",
    *,
    height: Optional[int] = None,
) -> Roster:
    """Draw a random roster of the given length.

    Positions come from consecutive block draws (independent by default, a
    single tiled draw under ``repeat-block``), so every prefix of length q
    holds within one of q*a_j positions of each category, exactly at block
    boundaries, and position marginals equal the scheme fractions.
    """
    positions, k = _draw_positions(scheme, length, rng, extension_policy, height)
    return Roster(
        categories=scheme.categories,
        assignment=positions,
        block_length=k,
        extension_policy=extension_policy,
    )
