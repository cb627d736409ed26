//! MDP/task/goal data model shared by every other module.
//!
//! A world is a finite deterministic MDP skeleton: states, actions, a total
//! transition rule and a background reward on non-terminal transitions.
//! Individual tasks only add terminal rewards on top of it, so any number of
//! tasks can share one world. The extended reward wraps a task's reward with
//! a large negative penalty for terminating at a state other than the
//! intended goal; that single extra bit is what turns a task value function
//! into a world value function.

use crate::{Action, Error, Result, State};

/// Finite deterministic world: states, actions, transition rule, background
/// reward and reward bounds. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    state_count: usize,
    action_count: usize,
    /// Successor state per (s, a), row-major `s * action_count + a`.
    next: Vec<State>,
    /// Absorbing flag per (s, a).
    absorbing: Vec<bool>,
    /// Background reward per (s, a). With deterministic transitions the
    /// successor is a function of (s, a), so a dense (s, a) table encodes
    /// R_0(s, a, s') exactly. Applied on non-terminal transitions only.
    background: Vec<f64>,
    reward_min: f64,
    reward_max: f64,
}

impl WorldSpec {
    /// Builds a world from dense per-(s, a) tables. All three tables must
    /// have length `state_count * action_count` (the transition rule is
    /// total) and every reward must respect the declared bounds.
    pub fn new(
        state_count: usize,
        action_count: usize,
        next: Vec<State>,
        absorbing: Vec<bool>,
        background: Vec<f64>,
        reward_min: f64,
        reward_max: f64,
    ) -> Result<Self> {
        if state_count == 0 || action_count == 0 {
            return Err(Error::InvalidConfig(
                "state_count and action_count must be positive".into(),
            ));
        }
        let len = state_count * action_count;
        if next.len() != len || absorbing.len() != len || background.len() != len {
            return Err(Error::InvalidConfig(format!(
                "transition tables must have {len} entries"
            )));
        }
        if reward_min > reward_max {
            return Err(Error::InvalidConfig(format!(
                "reward_min {reward_min} exceeds reward_max {reward_max}"
            )));
        }
        if let Some(s) = next.iter().find(|&&s| s >= state_count) {
            return Err(Error::UnknownState(*s));
        }
        if let Some(r) = background
            .iter()
            .find(|r| !r.is_finite() || **r < reward_min || **r > reward_max)
        {
            return Err(Error::InvalidConfig(format!(
                "background reward {r} outside [{reward_min}, {reward_max}]"
            )));
        }
        Ok(Self {
            state_count,
            action_count,
            next,
            absorbing,
            background,
            reward_min,
            reward_max,
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn reward_min(&self) -> f64 {
        self.reward_min
    }

    pub fn reward_max(&self) -> f64 {
        self.reward_max
    }

    pub fn check_state(&self, s: State) -> Result<()> {
        if s < self.state_count {
            Ok(())
        } else {
            Err(Error::UnknownState(s))
        }
    }

    pub fn check_action(&self, a: Action) -> Result<()> {
        if a < self.action_count {
            Ok(())
        } else {
            Err(Error::UnknownAction(a))
        }
    }

    /// Deterministic transition: successor state and absorbing flag.
    pub fn transition(&self, s: State, a: Action) -> (State, bool) {
        let i = s * self.action_count + a;
        (self.next[i], self.absorbing[i])
    }

    /// True when taking `a` in `s` ends the episode.
    pub fn is_terminal(&self, s: State, a: Action) -> bool {
        self.absorbing[s * self.action_count + a]
    }

    /// Background reward R_0 for the (non-terminal) transition out of (s, a).
    pub fn background_reward(&self, s: State, a: Action) -> f64 {
        self.background[s * self.action_count + a]
    }

    /// Default wrong-goal termination penalty, derived from the reward
    /// bounds: `(reward_min - reward_max) * state_count`. This lower-bounds
    /// the return gap of any episode of at most `state_count` non-repeating
    /// steps, so an optimal world policy never prefers terminating at an
    /// unintended goal. Degenerate zero-range bounds yield 0, which fails
    /// validation downstream; callers must override with a negative value.
    pub fn default_min_penalty(&self) -> f64 {
        (self.reward_min - self.reward_max) * self.state_count as f64
    }
}

/// Per-task terminal rewards over a shared world. Only consulted on
/// transitions whose absorbing flag is set.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    name: String,
    /// Terminal reward per (s, a), row-major; meaningful only where the
    /// world's absorbing flag is set.
    terminal: Vec<f64>,
}

impl TaskSpec {
    pub fn new(world: &WorldSpec, name: impl Into<String>, terminal: Vec<f64>) -> Result<Self> {
        let len = world.state_count() * world.action_count();
        if terminal.len() != len {
            return Err(Error::InvalidConfig(format!(
                "terminal reward table must have {len} entries"
            )));
        }
        for (i, r) in terminal.iter().enumerate() {
            if world.absorbing[i] && (*r < world.reward_min || *r > world.reward_max) {
                return Err(Error::InvalidConfig(format!(
                    "terminal reward {r} at entry {i} outside [{}, {}]",
                    world.reward_min, world.reward_max
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            terminal,
        })
    }

    /// Builds a task from a closure over terminal (s, a) pairs. Non-terminal
    /// entries are filled with `reward_min` but never consulted.
    pub fn from_fn(
        world: &WorldSpec,
        name: impl Into<String>,
        mut reward: impl FnMut(State, Action) -> f64,
    ) -> Result<Self> {
        let mut terminal = vec![world.reward_min(); world.state_count() * world.action_count()];
        for s in 0..world.state_count() {
            for a in 0..world.action_count() {
                if world.is_terminal(s, a) {
                    terminal[s * world.action_count() + a] = reward(s, a);
                }
            }
        }
        Self::new(world, name, terminal)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Task-specific terminal reward R^tau(s, a).
    pub fn terminal_reward(&self, world: &WorldSpec, s: State, a: Action) -> f64 {
        self.terminal[s * world.action_count() + a]
    }

    /// Highest terminal reward available at `s`, maximised over the actions
    /// whose transition out of `s` is absorbing. `None` when no action
    /// terminates at `s`.
    pub fn max_terminal_reward(&self, world: &WorldSpec, s: State) -> Option<f64> {
        (0..world.action_count())
            .filter(|&a| world.is_terminal(s, a))
            .map(|a| self.terminal[s * world.action_count() + a])
            .fold(None, |acc, r| Some(acc.map_or(r, |m: f64| m.max(r))))
    }
}

/// Extended-reward parameters: the wrong-goal termination penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedRewardConfig {
    min_penalty: f64,
}

impl ExtendedRewardConfig {
    /// Validates `min_penalty < reward_min` against the owning world.
    pub fn new(world: &WorldSpec, min_penalty: f64) -> Result<Self> {
        if !min_penalty.is_finite() || min_penalty >= world.reward_min() {
            return Err(Error::InvalidConfig(format!(
                "min_penalty {min_penalty} must be strictly below reward_min {}",
                world.reward_min()
            )));
        }
        Ok(Self { min_penalty })
    }

    /// Default penalty derived from the world's reward bounds.
    pub fn derived(world: &WorldSpec) -> Result<Self> {
        Self::new(world, world.default_min_penalty())
    }

    pub fn min_penalty(&self) -> f64 {
        self.min_penalty
    }
}

/// Composed reward of a full task: background reward on non-terminal
/// transitions, task terminal reward on terminal ones (the background
/// contribution on terminal transitions is defined to be zero, so the full
/// terminal reward equals R^tau exactly).
pub fn compose_task_reward(
    world: &WorldSpec,
    task: &TaskSpec,
    s: State,
    a: Action,
    _s_next: State,
    absorbing: bool,
) -> f64 {
    if absorbing {
        task.terminal_reward(world, s, a)
    } else {
        world.background_reward(s, a)
    }
}

/// A task bound to its world together with the extended-reward penalty;
/// the view every solver and learner works against.
#[derive(Debug, Clone, Copy)]
pub struct ComposedTask<'a> {
    pub world: &'a WorldSpec,
    pub task: &'a TaskSpec,
    pub ext: ExtendedRewardConfig,
}

impl<'a> ComposedTask<'a> {
    pub fn new(world: &'a WorldSpec, task: &'a TaskSpec, ext: ExtendedRewardConfig) -> Self {
        Self { world, task, ext }
    }

    /// Binds with the default derived penalty.
    pub fn with_derived_penalty(world: &'a WorldSpec, task: &'a TaskSpec) -> Result<Self> {
        Ok(Self::new(world, task, ExtendedRewardConfig::derived(world)?))
    }

    pub fn min_penalty(&self) -> f64 {
        self.ext.min_penalty()
    }

    /// Task reward R_M(s, a, s') for the observed transition.
    pub fn reward(&self, s: State, a: Action, s_next: State, absorbing: bool) -> f64 {
        compose_task_reward(self.world, self.task, s, a, s_next, absorbing)
    }

    /// Extended reward: the penalty when terminating at a state other
    /// than the intended goal, the task reward otherwise.
    pub fn extended_reward(
        &self,
        s: State,
        g: State,
        a: Action,
        s_next: State,
        absorbing: bool,
    ) -> Result<f64> {
        self.world.check_state(s)?;
        self.world.check_state(g)?;
        self.world.check_action(a)?;
        self.world.check_state(s_next)?;
        Ok(self.extended_reward_unchecked(s, g, a, s_next, absorbing))
    }

    /// As [`Self::extended_reward`] without identifier validation; used in
    /// inner solver loops where indices come from the world itself.
    #[inline]
    pub fn extended_reward_unchecked(
        &self,
        s: State,
        g: State,
        a: Action,
        s_next: State,
        absorbing: bool,
    ) -> f64 {
        if absorbing && g != s {
            self.ext.min_penalty()
        } else {
            self.reward(s, a, s_next, absorbing)
        }
    }
}

/// The agent's internal goal space: states where a terminal transition has
/// been experienced (or declared by an oracle enumeration). Insertion is
/// idempotent; iteration order is ascending state ordinal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoalBuffer {
    sorted: Vec<State>,
    member: Vec<bool>,
}

impl GoalBuffer {
    pub fn new(state_count: usize) -> Self {
        Self {
            sorted: Vec::new(),
            member: vec![false; state_count],
        }
    }

    /// Declares the full goal set up front (oracle enumeration path).
    pub fn from_states(state_count: usize, goals: impl IntoIterator<Item = State>) -> Self {
        let mut buf = Self::new(state_count);
        for g in goals {
            buf.insert(g);
        }
        buf
    }

    /// Records a goal; returns true when the goal is new.
    pub fn insert(&mut self, g: State) -> bool {
        if self.member[g] {
            return false;
        }
        self.member[g] = true;
        let at = self.sorted.partition_point(|&x| x < g);
        self.sorted.insert(at, g);
        true
    }

    pub fn contains(&self, g: State) -> bool {
        self.member.get(g).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Goals in ascending state-ordinal order.
    pub fn goals(&self) -> &[State] {
        &self.sorted
    }
}
