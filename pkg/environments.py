#!/usr/bin/env python3
"""
Benchmark worlds
- GridWorld: robots collecting targets among obstacles, 8-cell local observations
- LoadWorld: factories keeping or passing arriving items to balance backlog
"""

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from loguru import logger

from learning import StateVec
from numerics import ParameterError, RngStream

Cell = Tuple[int, int]
Observation8 = Tuple[int, int, int, int, int, int, int, int]

EMPTY, OBSTACLE, TARGET = 0, 1, 2

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
MOVES = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0)}

# N, NE, E, SE, S, SW, W, NW with y growing downwards
OBSERVATION_OFFSETS = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))

REWARD_TARGET = 10.0
REWARD_HIT = -5.0
REWARD_STEP = 0.0

GRID_SETTINGS = ("static", "dynamic1", "dynamic2")

MAP_CHARS = {".": EMPTY, "#": OBSTACLE, "T": TARGET}


@dataclass
class StepOutcome:
    reward: float = 0.0
    hit: bool = False
    achieved: bool = False
    moved: bool = False


@dataclass(frozen=True)
class GridLayout:
    width: int
    height: int
    obstacles: FrozenSet[Cell]
    targets: Tuple[Cell, ...]


class GridWorld:
    """Cell contents indexed [y][x]; agents live beside the cells, never inside them"""

    def __init__(self, width: int, height: int, setting: str = "static",
                 p_spawn: float = 0.02, p_move: float = 0.1):
        if width < 1 or height < 1:
            raise ParameterError(f"grid must be at least 1x1, got {width}x{height}")
        if setting not in GRID_SETTINGS:
            raise ParameterError(f"unknown grid setting '{setting}'")
        for name, p in (("p_spawn", p_spawn), ("p_move", p_move)):
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name} must be a probability, got {p}")
        self.width = width
        self.height = height
        self.setting = setting
        self.p_spawn = p_spawn
        self.p_move = p_move
        self.cells: List[List[int]] = [[EMPTY] * width for _ in range(height)]
        self.agent_positions: Dict[int, Cell] = {}
        self.initial_target_count = 0
        self.spawned = 0
        self.achieved = 0

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def cell(self, x: int, y: int) -> int:
        return self.cells[y][x]

    def target_cells(self) -> List[Cell]:
        return [(x, y) for y in range(self.height) for x in range(self.width) if self.cells[y][x] == TARGET]

    def target_count(self) -> int:
        return sum(row.count(TARGET) for row in self.cells)

    def occupied(self) -> Set[Cell]:
        return set(self.agent_positions.values())

    def free_cells(self) -> List[Cell]:
        """Empty cells without an agent, row-major"""
        taken = self.occupied()
        return [(x, y) for y in range(self.height) for x in range(self.width)
                if self.cells[y][x] == EMPTY and (x, y) not in taken]

    def place(self, layout: GridLayout, agent_positions: Dict[int, Cell]) -> None:
        self.cells = [[EMPTY] * self.width for _ in range(self.height)]
        for x, y in layout.obstacles:
            self.cells[y][x] = OBSTACLE
        for x, y in layout.targets:
            self.cells[y][x] = TARGET
        for agent, (x, y) in agent_positions.items():
            if self.cells[y][x] != EMPTY:
                raise ParameterError(f"agent {agent} placed on a non-empty cell {(x, y)}")
        if len(set(agent_positions.values())) != len(agent_positions):
            raise ParameterError("two agents placed on one cell")
        self.agent_positions = dict(agent_positions)
        self.initial_target_count = len(layout.targets)
        self.spawned = 0
        self.achieved = 0


def free_cells_connected(width: int, height: int, obstacles: Iterable[Cell]) -> bool:
    """Flood fill over non-obstacle cells (4-neighborhood)"""
    blocked = set(obstacles)
    open_cells = [(x, y) for y in range(height) for x in range(width) if (x, y) not in blocked]
    if not open_cells:
        return False
    seen = {open_cells[0]}
    queue = deque([open_cells[0]])
    while queue:
        x, y = queue.popleft()
        for dx, dy in MOVES.values():
            nxt = (x + dx, y + dy)
            if 0 <= nxt[0] < width and 0 <= nxt[1] < height and nxt not in blocked and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == len(open_cells)


def generate_obstacles(width: int, height: int, obstacle_count: int, rng: RngStream,
                       max_attempts: int = 1000) -> FrozenSet[Cell]:
    """Random obstacle set whose complement is one connected region"""
    cells = [(x, y) for y in range(height) for x in range(width)]
    if obstacle_count >= len(cells):
        raise ParameterError(f"{obstacle_count} obstacles do not fit a {width}x{height} grid")
    for attempt in range(1, max_attempts + 1):
        obstacles = frozenset(rng.sample(cells, obstacle_count))
        if free_cells_connected(width, height, obstacles):
            return obstacles
        logger.debug(f"🔄 layout attempt {attempt} left unreachable cells, regenerating")
    raise ParameterError(f"no connected layout found in {max_attempts} attempts")


def populate_grid(world: GridWorld, obstacles: FrozenSet[Cell], target_count: int,
                  agent_count: int, rng: RngStream, targets: Optional[Sequence[Cell]] = None) -> None:
    """Place targets (unless given) and agents uniformly on the non-obstacle cells"""
    open_cells = [(x, y) for y in range(world.height) for x in range(world.width) if (x, y) not in obstacles]
    if targets is None:
        needed = target_count + agent_count
        if needed > len(open_cells):
            raise ParameterError(f"{target_count} targets and {agent_count} agents do not fit {len(open_cells)} free cells")
        chosen = rng.sample(open_cells, needed)
        targets, starts = chosen[:target_count], chosen[target_count:]
    else:
        remaining = [c for c in open_cells if c not in set(targets)]
        if agent_count > len(remaining):
            raise ParameterError(f"{agent_count} agents do not fit {len(remaining)} free cells")
        starts = rng.sample(remaining, agent_count)
    world.place(GridLayout(world.width, world.height, obstacles, tuple(targets)),
                {agent: cell for agent, cell in enumerate(starts)})


def generate_grid(width: int, height: int, agent_count: int, target_count: int, obstacle_count: int,
                  rng: RngStream, setting: str = "static", p_spawn: float = 0.02, p_move: float = 0.1,
                  obstacles: Optional[FrozenSet[Cell]] = None) -> GridWorld:
    """Procedural layout: connected free space so every target is reachable"""
    world = GridWorld(width, height, setting, p_spawn, p_move)
    if obstacles is None:
        obstacles = generate_obstacles(width, height, obstacle_count, rng)
    populate_grid(world, obstacles, target_count, agent_count, rng)
    return world


def parse_grid_map(text: str) -> GridLayout:
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows:
        raise ParameterError("empty map")
    width = len(rows[0])
    obstacles = set()
    targets = []
    for y, row in enumerate(rows):
        if len(row) != width:
            raise ParameterError(f"map row {y} has width {len(row)}, expected {width}")
        for x, char in enumerate(row):
            if char not in MAP_CHARS:
                raise ParameterError(f"unknown map character '{char}' at {(x, y)}")
            if MAP_CHARS[char] == OBSTACLE:
                obstacles.add((x, y))
            elif MAP_CHARS[char] == TARGET:
                targets.append((x, y))
    if not free_cells_connected(width, len(rows), obstacles):
        raise ParameterError("map has unreachable free cells")
    return GridLayout(width, len(rows), frozenset(obstacles), tuple(targets))


def load_grid_map(path: Union[str, Path]) -> GridLayout:
    return parse_grid_map(Path(path).read_text())


def grid_observe(world: GridWorld, agent: int) -> Observation8:
    """Eight surrounding cells; off-grid cells and other agents read as obstacles"""
    if agent not in world.agent_positions:
        raise ParameterError(f"agent {agent} is not placed")
    x, y = world.agent_positions[agent]
    others = {pos for other, pos in world.agent_positions.items() if other != agent}
    observation = []
    for dx, dy in OBSERVATION_OFFSETS:
        cx, cy = x + dx, y + dy
        if not world.in_bounds(cx, cy) or (cx, cy) in others:
            observation.append(OBSTACLE)
        else:
            observation.append(world.cells[cy][cx])
    return tuple(observation)


def _spawn_target(world: GridWorld, rng: RngStream) -> None:
    if world.spawned >= world.initial_target_count:
        return
    if not rng.bernoulli(world.p_spawn):
        return
    free = world.free_cells()
    if not free:
        return
    x, y = rng.choice(free)
    world.cells[y][x] = TARGET
    world.spawned += 1


def _move_targets(world: GridWorld, rng: RngStream) -> None:
    taken = world.occupied()
    for x, y in world.target_cells():
        if not rng.bernoulli(world.p_move):
            continue
        options = []
        for dx, dy in MOVES.values():
            cx, cy = x + dx, y + dy
            if world.in_bounds(cx, cy) and world.cells[cy][cx] == EMPTY and (cx, cy) not in taken:
                options.append((cx, cy))
        if options:
            cx, cy = rng.choice(options)
            world.cells[y][x] = EMPTY
            world.cells[cy][cx] = TARGET


def grid_step(world: GridWorld, joint_actions: Dict[int, int], rng: RngStream) -> Dict[int, StepOutcome]:
    """Resolve moves in ascending agent id, then apply the setting's target dynamics"""
    for agent in joint_actions:
        if agent not in world.agent_positions:
            raise ParameterError(f"unknown agent {agent}")
    missing = set(world.agent_positions) - set(joint_actions)
    if missing:
        raise ParameterError(f"agents without an action: {sorted(missing)}")

    outcomes: Dict[int, StepOutcome] = {}
    for agent in sorted(joint_actions):
        action = joint_actions[agent]
        if action not in MOVES:
            raise ParameterError(f"unknown action {action} for agent {agent}")
        outcome = StepOutcome(reward=REWARD_STEP)
        x, y = world.agent_positions[agent]
        dx, dy = MOVES[action]
        nx, ny = x + dx, y + dy
        if not world.in_bounds(nx, ny):
            pass
        elif world.cells[ny][nx] == OBSTACLE:
            outcome.reward = REWARD_HIT
            outcome.hit = True
        elif any(pos == (nx, ny) for other, pos in world.agent_positions.items() if other != agent):
            pass
        else:
            if world.cells[ny][nx] == TARGET:
                world.cells[ny][nx] = EMPTY
                world.achieved += 1
                outcome.reward = REWARD_TARGET
                outcome.achieved = True
            world.agent_positions[agent] = (nx, ny)
            outcome.moved = True
        outcomes[agent] = outcome

    if world.setting == "dynamic1":
        _spawn_target(world, rng)
    elif world.setting == "dynamic2":
        _move_targets(world, rng)
    return outcomes


def grid_round_done(world: GridWorld) -> bool:
    return world.target_count() == 0


KEEP, PASS = 0, 1
LOAD_BASE_REWARD = 50.0
PASS_COST_FACTOR = 2.0


def item_weights(item_types: int) -> List[float]:
    """5, 4, 3, ... one less per further item type, never below 1"""
    if item_types < 1:
        raise ParameterError(f"item_types must be >= 1, got {item_types}")
    return [float(max(5 - i, 1)) for i in range(item_types)]


@dataclass
class LoadOutcome:
    reward: float = 0.0
    processed: Optional[int] = None
    arrived: Optional[int] = None
    passed_to: Optional[int] = None
    discarded: bool = False


class LoadWorld:
    def __init__(self, agent_count: int, item_types: int, max_stock: Union[int, Sequence[int]],
                 p_process: float, p_arrive: float, weights: Optional[Sequence[float]] = None):
        if agent_count < 1:
            raise ParameterError(f"agent_count must be >= 1, got {agent_count}")
        if isinstance(max_stock, int):
            max_stock = [max_stock] * item_types
        if len(max_stock) != item_types or min(max_stock) < 1:
            raise ParameterError(f"max_stock needs {item_types} positive entries, got {list(max_stock)}")
        for name, p in (("p_process", p_process), ("p_arrive", p_arrive)):
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name} must be a probability, got {p}")
        self.agent_count = agent_count
        self.k = item_types
        self.max_stock = list(max_stock)
        self.weights = list(weights) if weights is not None else item_weights(item_types)
        if len(self.weights) != item_types:
            raise ParameterError(f"weights need {item_types} entries, got {len(self.weights)}")
        if min(self.weights) <= 0:
            raise ParameterError(f"weights must be positive, got {self.weights}")
        self.p_process = p_process
        self.p_arrive = p_arrive
        self.stocks: List[List[int]] = [[0] * item_types for _ in range(agent_count)]

    def backlog_reward(self, agent: int) -> float:
        return LOAD_BASE_REWARD - sum(w * m for w, m in zip(self.weights, self.stocks[agent]))

    def _add(self, agent: int, item: int) -> bool:
        if self.stocks[agent][item] >= self.max_stock[item]:
            return False
        self.stocks[agent][item] += 1
        return True

    def _process_one(self, agent: int, rng: RngStream) -> Optional[int]:
        stock = self.stocks[agent]
        total = sum(stock)
        if total == 0:
            return None
        pick = rng.integers(total)
        for item, count in enumerate(stock):
            if pick < count:
                stock[item] -= 1
                return item
            pick -= count
        return None


def load_observe(world: LoadWorld, agent: int) -> StateVec:
    return tuple(world.stocks[agent])


def load_step(world: LoadWorld, decisions: Dict[int, int], rng: RngStream) -> Dict[int, LoadOutcome]:
    """Per agent: maybe process one item, maybe receive one and keep or pass it; then rewards"""
    outcomes = {agent: LoadOutcome() for agent in range(world.agent_count)}
    pass_costs = [0.0] * world.agent_count
    for agent in range(world.agent_count):
        outcome = outcomes[agent]
        if rng.bernoulli(world.p_process):
            outcome.processed = world._process_one(agent, rng)
        if not rng.bernoulli(world.p_arrive):
            continue
        item = rng.integers(world.k)
        outcome.arrived = item
        if agent not in decisions:
            raise ParameterError(f"agent {agent} received an item without a keep/pass decision")
        decision = decisions[agent]
        if decision == KEEP:
            outcome.discarded = not world._add(agent, item)
        elif decision == PASS:
            others = [other for other in range(world.agent_count) if other != agent]
            pass_costs[agent] += PASS_COST_FACTOR * world.weights[item]
            if others:
                destination = rng.choice(others)
                outcome.passed_to = destination
                outcome.discarded = not world._add(destination, item)
            else:
                outcome.discarded = True
        else:
            raise ParameterError(f"unknown load decision {decision} for agent {agent}")
    for agent, outcome in outcomes.items():
        outcome.reward = world.backlog_reward(agent) - pass_costs[agent]
    return outcomes
