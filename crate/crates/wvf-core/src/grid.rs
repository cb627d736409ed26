//! Deterministic tabular gridworlds: four-rooms navigation and a
//! fixed-layout object-pickup world, plus the `WVFMAP 1` map file format.
//!
//! States are free cells indexed in row-major order. Both worlds share the
//! action layout `{North, South, East, West, <terminal>}` where the fifth
//! action is `Done` (terminate anywhere) in four-rooms and `PickUp`
//! (terminate on an object cell, costed no-op elsewhere) in pickup grids.
//! Movement into a wall or off the border leaves the agent in place.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

use crate::world::{compose_task_reward, TaskSpec, WorldSpec};
use crate::{Action, Error, Result, State};

pub const NORTH: Action = 0;
pub const SOUTH: Action = 1;
pub const EAST: Action = 2;
pub const WEST: Action = 3;
/// Ordinal of the terminal action (`Done` or `PickUp`).
pub const TERMINAL_ACTION: Action = 4;
pub const ACTION_COUNT: usize = 5;

/// Grid cell as (row, col), row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Colour {
    Blue,
    Beige,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Shape {
    Square,
    Circle,
}

/// A collectible object in a pickup world.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Object {
    pub cell: Cell,
    pub colour: Colour,
    pub shape: Shape,
}

/// Static grid geometry: walls, hallway markers, declared task goals and
/// objects. Hallway, goal and object cells are free cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    pub walls: BTreeSet<Cell>,
    pub hallways: BTreeSet<Cell>,
    pub goal_cells: Vec<Cell>,
    pub objects: Vec<Object>,
}

impl GridLayout {
    pub fn new(
        width: usize,
        height: usize,
        walls: BTreeSet<Cell>,
        hallways: BTreeSet<Cell>,
        goal_cells: Vec<Cell>,
        objects: Vec<Object>,
    ) -> Result<Self> {
        let layout = Self {
            width,
            height,
            walls,
            hallways,
            goal_cells,
            objects,
        };
        let issues = layout.validate();
        if issues.is_empty() {
            Ok(layout)
        } else {
            Err(Error::InvalidLayout { issues })
        }
    }

    fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.width == 0 || self.height == 0 {
            issues.push("grid dimensions must be positive".into());
            return issues;
        }
        let in_bounds = |c: &Cell| c.row < self.height && c.col < self.width;
        for c in &self.walls {
            if !in_bounds(c) {
                issues.push(format!("wall {c} out of bounds"));
            }
        }
        for c in &self.hallways {
            if !in_bounds(c) {
                issues.push(format!("hallway {c} out of bounds"));
            } else if self.walls.contains(c) {
                issues.push(format!("hallway {c} overlaps a wall"));
            }
        }
        for c in &self.goal_cells {
            if !in_bounds(c) {
                issues.push(format!("goal {c} out of bounds"));
            } else if self.walls.contains(c) {
                issues.push(format!("goal {c} is not a free cell"));
            }
        }
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !in_bounds(&o.cell) {
                issues.push(format!("object {} out of bounds", o.cell));
            } else if self.walls.contains(&o.cell) {
                issues.push(format!("object {} overlaps a wall", o.cell));
            }
            if !seen.insert(o.cell) {
                issues.push(format!("duplicate object cell {}", o.cell));
            }
        }
        issues
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width && !self.walls.contains(&cell)
    }

    /// Free cells in row-major order; the state indexing of every
    /// environment built from this layout.
    pub fn free_cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let c = Cell::new(row, col);
                if !self.walls.contains(&c) {
                    cells.push(c);
                }
            }
        }
        cells
    }

    pub fn object_at(&self, cell: Cell) -> Option<&Object> {
        self.objects.iter().find(|o| o.cell == cell)
    }

    /// Free cells on the lowest row that contains any free cell.
    pub fn bottom_row_free_cells(&self) -> Vec<Cell> {
        let free = self.free_cells();
        match free.iter().map(|c| c.row).max() {
            Some(row) => free.into_iter().filter(|c| c.row == row).collect(),
            None => Vec::new(),
        }
    }
}

/// Parses the `WVFMAP 1` text format.
///
/// Line 1 is the magic `WVFMAP 1`, line 2 is `width height`, followed by
/// `height` rows of cells: `#` wall, `.` free, `H` hallway, `G` task goal,
/// and `B`/`b`/`Q`/`q` for blue-square/blue-circle/beige-square/beige-circle
/// objects. Any other character is rejected.
pub fn parse_map(text: &str) -> Result<GridLayout> {
    let err = |line: usize, message: String| Error::MapParse { line, message };
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("");
    if magic.trim_end() != "WVFMAP 1" {
        return Err(err(1, format!("expected magic 'WVFMAP 1', found '{magic}'")));
    }
    let dims = lines.next().unwrap_or("");
    let mut parts = dims.split_whitespace();
    let width: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .filter(|&w| w > 0)
        .ok_or_else(|| err(2, format!("expected 'width height', found '{dims}'")))?;
    let height: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .filter(|&h| h > 0)
        .ok_or_else(|| err(2, format!("expected 'width height', found '{dims}'")))?;
    if parts.next().is_some() {
        return Err(err(2, format!("trailing tokens after dimensions: '{dims}'")));
    }

    let mut walls = BTreeSet::new();
    let mut hallways = BTreeSet::new();
    let mut goal_cells = Vec::new();
    let mut objects = Vec::new();
    for row in 0..height {
        let line_no = row + 3;
        let line = lines
            .next()
            .ok_or_else(|| err(line_no, format!("missing map row {row}")))?;
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != width {
            return Err(err(
                line_no,
                format!("row has {} cells, expected {width}", chars.len()),
            ));
        }
        for (col, ch) in chars.into_iter().enumerate() {
            let cell = Cell::new(row, col);
            match ch {
                '#' => {
                    walls.insert(cell);
                }
                '.' => {}
                'H' => {
                    hallways.insert(cell);
                }
                'G' => goal_cells.push(cell),
                'B' | 'b' | 'Q' | 'q' => {
                    let colour = if matches!(ch, 'B' | 'b') {
                        Colour::Blue
                    } else {
                        Colour::Beige
                    };
                    let shape = if matches!(ch, 'B' | 'Q') {
                        Shape::Square
                    } else {
                        Shape::Circle
                    };
                    objects.push(Object {
                        cell,
                        colour,
                        shape,
                    });
                }
                other => {
                    return Err(err(
                        line_no,
                        format!("unknown cell character '{other}' at column {col}"),
                    ));
                }
            }
        }
    }
    for (i, line) in lines.enumerate() {
        if !line.trim().is_empty() {
            return Err(err(
                height + 3 + i,
                format!("unexpected content after map rows: '{line}'"),
            ));
        }
    }
    GridLayout::new(width, height, walls, hallways, goal_cells, objects)
}

/// Canonical shipped maps, identical to the files under `maps/`.
pub mod maps {
    /// 13x13 four-rooms: 104 free cells, four hallways, task goals at the
    /// top-left and bottom-right room centers.
    pub const FOUR_ROOMS: &str = "WVFMAP 1
13 13
#############
#.....#.....#
#.....#.....#
#..G..H.....#
#.....#.....#
#.....#.....#
###H#####H###
#.....#.....#
#.....#.....#
#.....#..G..#
#.....#.....#
#.....H.....#
#############
";

    /// 11x11 open pickup grid with one object of each colour/shape combo.
    pub const PICKUP: &str = "WVFMAP 1
11 11
###########
#.........#
#.B.....b.#
#.........#
#.........#
#.........#
#.........#
#.........#
#.Q.....q.#
#.........#
###########
";
}

/// Environment flavour; fixes the name and semantics of action 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    FourRooms,
    Pickup,
}

impl EnvKind {
    pub fn action_names(self) -> [&'static str; ACTION_COUNT] {
        match self {
            EnvKind::FourRooms => ["N", "S", "E", "W", "Done"],
            EnvKind::Pickup => ["N", "S", "E", "W", "PickUp"],
        }
    }
}

/// Start-state distribution used by learning and evaluation rollouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartDist {
    UniformFree,
    Fixed(Cell),
}

/// Reward parameters of the shipped worlds. Defaults follow the
/// step/goal/non-goal convention `{-0.1, 2, -0.1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// Background reward per non-terminal step.
    pub step: f64,
    /// Terminal reward at a task goal.
    pub goal: f64,
    /// Terminal reward when terminating anywhere else.
    pub non_goal: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            step: -0.1,
            goal: 2.0,
            non_goal: -0.1,
        }
    }
}

impl RewardParams {
    fn bounds(&self) -> (f64, f64) {
        let lo = self.step.min(self.goal).min(self.non_goal);
        let hi = self.step.max(self.goal).max(self.non_goal);
        (lo, hi)
    }
}

/// Episode state: the agent's current state ordinal and termination flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvState {
    pub state: State,
    pub terminated: bool,
}

/// A task bound to a grid world. Tasks over the same layout share an
/// identical [`WorldSpec`]; swapping the task leaves the dynamics untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnv {
    kind: EnvKind,
    layout: GridLayout,
    world: WorldSpec,
    task: TaskSpec,
    rewards: RewardParams,
    cells: Vec<Cell>,
    state_of: Vec<Option<State>>,
    start: StartDist,
}

impl GridEnv {
    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn world(&self) -> &WorldSpec {
        &self.world
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn rewards(&self) -> RewardParams {
        self.rewards
    }

    pub fn state_count(&self) -> usize {
        self.world.state_count()
    }

    pub fn action_count(&self) -> usize {
        self.world.action_count()
    }

    /// Cell of a state ordinal.
    pub fn cell_of(&self, s: State) -> Cell {
        self.cells[s]
    }

    /// State ordinal of a free cell.
    pub fn state_at(&self, cell: Cell) -> Result<State> {
        if cell.row >= self.layout.height || cell.col >= self.layout.width {
            return Err(Error::Domain(format!("cell {cell} out of bounds")));
        }
        self.state_of[cell.row * self.layout.width + cell.col]
            .ok_or_else(|| Error::Domain(format!("cell {cell} is a wall")))
    }

    pub fn with_start(mut self, start: StartDist) -> Self {
        self.start = start;
        self
    }

    /// Rebinds this environment to another task over the identical world.
    pub fn with_task(&self, task: TaskSpec) -> Self {
        Self {
            task,
            ..self.clone()
        }
    }

    /// Samples an initial episode state from the start distribution.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let state = match self.start {
            StartDist::UniformFree => rng.random_range(0..self.cells.len()),
            StartDist::Fixed(cell) => self.state_at(cell).expect("fixed start must be free"),
        };
        EnvState {
            state,
            terminated: false,
        }
    }

    /// Steps the environment. Deterministic; matches the world's transition
    /// rule and composed task reward exactly.
    pub fn step(&self, at: EnvState, action: Action) -> Result<(EnvState, f64, bool)> {
        if at.terminated {
            return Err(Error::EpisodeTerminated);
        }
        self.world.check_state(at.state)?;
        self.world.check_action(action)?;
        let (next, absorbing) = self.world.transition(at.state, action);
        let reward = compose_task_reward(&self.world, &self.task, at.state, action, next, absorbing);
        Ok((
            EnvState {
                state: next,
                terminated: absorbing,
            },
            reward,
            absorbing,
        ))
    }

    /// All states within `radius` grid steps of `s` (wall-aware graph
    /// distance over movement actions), always including `s` itself.
    pub fn neighbourhood(&self, s: State, radius: usize) -> Vec<State> {
        let mut dist = vec![usize::MAX; self.state_count()];
        dist[s] = 0;
        let mut frontier = vec![s];
        let mut out = vec![s];
        for d in 1..=radius {
            let mut next_frontier = Vec::new();
            for &u in &frontier {
                for a in [NORTH, SOUTH, EAST, WEST] {
                    let (v, absorbing) = self.world.transition(u, a);
                    if !absorbing && dist[v] == usize::MAX {
                        dist[v] = d;
                        next_frontier.push(v);
                        out.push(v);
                    }
                }
            }
            if next_frontier.is_empty() {
                break;
            }
            frontier = next_frontier;
        }
        out.sort_unstable();
        out
    }

    /// States from which a terminal transition exists: the full goal space
    /// an exhaustive oracle would enumerate.
    pub fn terminal_capable_states(&self) -> Vec<State> {
        (0..self.state_count())
            .filter(|&s| (0..self.action_count()).any(|a| self.world.is_terminal(s, a)))
            .collect()
    }
}

fn index_cells(layout: &GridLayout) -> (Vec<Cell>, Vec<Option<State>>) {
    let cells = layout.free_cells();
    let mut state_of = vec![None; layout.width * layout.height];
    for (i, c) in cells.iter().enumerate() {
        state_of[c.row * layout.width + c.col] = Some(i);
    }
    (cells, state_of)
}

fn move_target(layout: &GridLayout, cell: Cell, action: Action) -> Cell {
    let (row, col) = (cell.row as isize, cell.col as isize);
    let (dr, dc) = match action {
        NORTH => (-1, 0),
        SOUTH => (1, 0),
        EAST => (0, 1),
        WEST => (0, -1),
        _ => (0, 0),
    };
    let (nr, nc) = (row + dr, col + dc);
    if nr < 0 || nc < 0 {
        return cell;
    }
    let target = Cell::new(nr as usize, nc as usize);
    if layout.is_free(target) {
        target
    } else {
        cell
    }
}

fn build_world(
    layout: &GridLayout,
    rewards: RewardParams,
    terminal_at: impl Fn(Cell) -> bool,
) -> Result<(WorldSpec, Vec<Cell>, Vec<Option<State>>)> {
    let (cells, state_of) = index_cells(layout);
    let n = cells.len();
    if n == 0 {
        return Err(Error::InvalidLayout {
            issues: vec!["layout has no free cells".into()],
        });
    }
    let mut next = vec![0; n * ACTION_COUNT];
    let mut absorbing = vec![false; n * ACTION_COUNT];
    let background = vec![rewards.step; n * ACTION_COUNT];
    for (s, &cell) in cells.iter().enumerate() {
        for a in [NORTH, SOUTH, EAST, WEST] {
            let t = move_target(layout, cell, a);
            next[s * ACTION_COUNT + a] = state_of[t.row * layout.width + t.col].unwrap();
        }
        let i = s * ACTION_COUNT + TERMINAL_ACTION;
        next[i] = s;
        absorbing[i] = terminal_at(cell);
    }
    let (lo, hi) = rewards.bounds();
    let world = WorldSpec::new(n, ACTION_COUNT, next, absorbing, background, lo, hi)?;
    Ok((world, cells, state_of))
}

/// Builds the four-rooms navigation world. The `Done` action terminates at
/// any cell; it earns `rewards.goal` on the given goal cells and
/// `rewards.non_goal` elsewhere.
pub fn four_rooms(
    layout: GridLayout,
    goal_cells: &[Cell],
    rewards: RewardParams,
) -> Result<GridEnv> {
    let bad: Vec<String> = goal_cells
        .iter()
        .filter(|c| !layout.is_free(**c))
        .map(|c| format!("goal {c} is not a free cell"))
        .collect();
    if !bad.is_empty() {
        return Err(Error::InvalidLayout { issues: bad });
    }
    let (world, cells, state_of) = build_world(&layout, rewards, |_| true)?;
    let goal_set: BTreeSet<Cell> = goal_cells.iter().copied().collect();
    let task = four_rooms_task_inner(&world, &cells, &goal_set, rewards, task_name(&goal_set))?;
    Ok(GridEnv {
        kind: EnvKind::FourRooms,
        layout,
        world,
        task,
        rewards,
        cells,
        state_of,
        start: StartDist::UniformFree,
    })
}

fn task_name(goals: &BTreeSet<Cell>) -> String {
    let parts: Vec<String> = goals.iter().map(|c| c.to_string()).collect();
    format!("goals[{}]", parts.join(";"))
}

fn four_rooms_task_inner(
    world: &WorldSpec,
    cells: &[Cell],
    goals: &BTreeSet<Cell>,
    rewards: RewardParams,
    name: String,
) -> Result<TaskSpec> {
    TaskSpec::from_fn(world, name, |s, _| {
        if goals.contains(&cells[s]) {
            rewards.goal
        } else {
            rewards.non_goal
        }
    })
}

impl GridEnv {
    /// A new task over this four-rooms world, rewarding termination at the
    /// given cells.
    pub fn four_rooms_task(&self, name: impl Into<String>, goal_cells: &[Cell]) -> Result<TaskSpec> {
        if self.kind != EnvKind::FourRooms {
            return Err(Error::Domain("not a four-rooms environment".into()));
        }
        let bad: Vec<String> = goal_cells
            .iter()
            .filter(|c| self.state_at(**c).is_err())
            .map(|c| format!("goal {c} is not a free cell"))
            .collect();
        if !bad.is_empty() {
            return Err(Error::InvalidLayout { issues: bad });
        }
        let goals: BTreeSet<Cell> = goal_cells.iter().copied().collect();
        four_rooms_task_inner(&self.world, &self.cells, &goals, self.rewards, name.into())
    }

    /// A pickup task paying `rewards.goal` for collecting objects matching
    /// the predicate and `rewards.non_goal` for any other pickup.
    pub fn pickup_task(
        &self,
        name: impl Into<String>,
        pred: impl Fn(&Object) -> bool,
    ) -> Result<TaskSpec> {
        if self.kind != EnvKind::Pickup {
            return Err(Error::Domain("not a pickup environment".into()));
        }
        let rewards = self.rewards;
        let layout = &self.layout;
        let cells = &self.cells;
        TaskSpec::from_fn(&self.world, name, |s, _| {
            match layout.object_at(cells[s]) {
                Some(o) if pred(o) => rewards.goal,
                _ => rewards.non_goal,
            }
        })
    }

    /// A pickup task from an attribute name: `blue`, `beige`, `square`,
    /// `circle`, or the extreme tasks `sup` (every object rewarded) and
    /// `inf` (no object rewarded).
    pub fn pickup_task_by_attribute(&self, attr: &str) -> Result<TaskSpec> {
        let pred: fn(&Object) -> bool = match attr {
            "blue" => |o| o.colour == Colour::Blue,
            "beige" => |o| o.colour == Colour::Beige,
            "square" => |o| o.shape == Shape::Square,
            "circle" => |o| o.shape == Shape::Circle,
            "sup" => |_| true,
            "inf" => |_| false,
            other => {
                return Err(Error::Domain(format!(
                    "unknown object attribute '{other}' (expected blue/beige/square/circle/sup/inf)"
                )))
            }
        };
        self.pickup_task(attr, pred)
    }
}

/// Builds the object-pickup world. `PickUp` terminates on object cells and
/// is a costed no-op elsewhere; the initial task rewards every object
/// matching no attribute (callers typically rebind via
/// [`GridEnv::pickup_task`]).
pub fn pickup_grid(layout: GridLayout, rewards: RewardParams) -> Result<GridEnv> {
    if layout.objects.is_empty() {
        return Err(Error::InvalidLayout {
            issues: vec!["pickup world requires at least one object".into()],
        });
    }
    let object_cells: BTreeSet<Cell> = layout.objects.iter().map(|o| o.cell).collect();
    let (world, cells, state_of) = build_world(&layout, rewards, |c| object_cells.contains(&c))?;
    let task = TaskSpec::from_fn(&world, "sup", |_, _| rewards.goal)?;
    let mut env = GridEnv {
        kind: EnvKind::Pickup,
        layout,
        world,
        task,
        rewards,
        cells,
        state_of,
        start: StartDist::UniformFree,
    };
    env.task = env.pickup_task("sup", |_| true)?;
    Ok(env)
}

/// Convenience constructor: canonical four-rooms environment with the
/// shipped map's task goals.
pub fn canonical_four_rooms() -> GridEnv {
    let layout = parse_map(maps::FOUR_ROOMS).expect("canonical map parses");
    let goals = layout.goal_cells.clone();
    four_rooms(layout, &goals, RewardParams::default()).expect("canonical map builds")
}

/// Convenience constructor: canonical pickup environment (task `sup`).
pub fn canonical_pickup() -> GridEnv {
    let layout = parse_map(maps::PICKUP).expect("canonical map parses");
    pickup_grid(layout, RewardParams::default()).expect("canonical map builds")
}
