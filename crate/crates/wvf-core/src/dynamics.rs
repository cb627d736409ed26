//! Transition inference from a WVF and rollouts on the inferred model.
//!
//! A (near-)optimal WVF pins down the world's deterministic dynamics: for a
//! non-terminal pair (s, a) the true successor is the candidate s' that
//! makes the Bellman identity `Q(s, g, a) = r + V(s', g)` hold across
//! goals. We pick the candidate minimising the summed squared residual; on
//! an exact table the true successor is the unique zero. On an imperfect
//! table, restricting candidates and goals to a neighbourhood of s discards
//! the badly-learned far-goal slices and improves accuracy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::grid::GridEnv;
use crate::table::WVFTable;
use crate::world::ComposedTask;
use crate::{Action, Error, Result, State};

/// Candidate/goal restriction used when inferring each (s, a).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateScope {
    /// All states as candidates, every table goal in the residual.
    Full,
    /// States within the given wall-aware radius of s, on both axes.
    Neighbourhood(usize),
}

impl CandidateScope {
    pub fn label(&self) -> String {
        match self {
            CandidateScope::Full => "full".into(),
            CandidateScope::Neighbourhood(r) => format!("neighbourhood({r})"),
        }
    }
}

/// Deterministic model recovered from a WVF: one successor per queried
/// non-terminal (s, a), plus the residual diagnostics.
#[derive(Debug, Clone)]
pub struct InferredModel {
    /// (s, a) -> (inferred successor, best-candidate residual).
    entries: BTreeMap<(State, Action), (State, f64)>,
    /// (s, a) pairs excluded from inference because they terminate.
    terminal: BTreeSet<(State, Action)>,
    pub scope: CandidateScope,
}

impl InferredModel {
    pub fn successor(&self, s: State, a: Action) -> Option<State> {
        self.entries.get(&(s, a)).map(|e| e.0)
    }

    pub fn residual(&self, s: State, a: Action) -> Option<f64> {
        self.entries.get(&(s, a)).map(|e| e.1)
    }

    pub fn is_terminal(&self, s: State, a: Action) -> bool {
        self.terminal.contains(&(s, a))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(State, Action), &(State, f64))> {
        self.entries.iter()
    }

    /// Fraction of queried pairs whose successor matches the environment.
    pub fn accuracy(&self, env: &GridEnv) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let correct = self
            .entries
            .iter()
            .filter(|(&(s, a), &(succ, _))| env.world().transition(s, a).0 == succ)
            .count();
        correct as f64 / self.entries.len() as f64
    }

    /// CSV export: `state,action,successor,residual[,correct]`. The
    /// `correct` column is present only when ground truth is supplied.
    pub fn to_csv(&self, ground_truth: Option<&GridEnv>) -> String {
        let mut out = String::new();
        out.push_str(match ground_truth {
            Some(_) => "state,action,successor,residual,correct\n",
            None => "state,action,successor,residual\n",
        });
        for (&(s, a), &(succ, residual)) in &self.entries {
            match ground_truth {
                Some(env) => {
                    let actual = env.world().transition(s, a).0;
                    let _ = writeln!(out, "{s},{a},{succ},{residual},{}", (actual == succ) as u8);
                }
                None => {
                    let _ = writeln!(out, "{s},{a},{succ},{residual}");
                }
            }
        }
        out
    }
}

/// Infers the successor of one non-terminal (s, a): the candidate s'
/// minimising `sum_g (Q(s, g, a) - r - V(s', g))^2` over the goal scope,
/// ties broken by lowest state ordinal. The reward term is the task's
/// background reward at (s, a) since candidate transitions are
/// non-terminal by construction.
pub fn infer_transition(
    table: &WVFTable,
    ct: &ComposedTask,
    s: State,
    a: Action,
    candidates: &[State],
    goal_scope: &[State],
) -> Result<(State, f64)> {
    if candidates.is_empty() {
        return Err(Error::Domain("candidate set must be non-empty".into()));
    }
    let goal_ords: Vec<usize> = goal_scope
        .iter()
        .filter_map(|&g| table.goal_ordinal(g))
        .collect();
    if goal_ords.is_empty() {
        return Err(Error::Domain(
            "goal scope contains no goals of this table".into(),
        ));
    }
    let reward = ct.world.background_reward(s, a);
    let mut best: Option<(State, f64)> = None;
    for &cand in candidates {
        let mut residual = 0.0;
        for &gi in &goal_ords {
            let d = table.get(s, gi, a) - reward - table.state_value(cand, gi);
            residual += d * d;
        }
        let better = match best {
            None => true,
            Some((b_s, b_r)) => residual < b_r || (residual == b_r && cand < b_s),
        };
        if better {
            best = Some((cand, residual));
        }
    }
    Ok(best.expect("candidates non-empty"))
}

/// Applies [`infer_transition`] to every non-terminal (s, a) of the
/// environment. With a neighbourhood scope, candidates and goals are both
/// restricted to states near s; pairs whose restricted goal scope is empty
/// are skipped.
pub fn infer_model(
    table: &WVFTable,
    env: &GridEnv,
    ct: &ComposedTask,
    scope: CandidateScope,
) -> Result<InferredModel> {
    let world = env.world();
    let all_states: Vec<State> = (0..world.state_count()).collect();
    let mut entries = BTreeMap::new();
    let mut terminal = BTreeSet::new();
    for s in 0..world.state_count() {
        let local: Vec<State> = match scope {
            CandidateScope::Full => Vec::new(),
            CandidateScope::Neighbourhood(r) => env.neighbourhood(s, r),
        };
        let (candidates, goal_scope): (&[State], &[State]) = match scope {
            CandidateScope::Full => (&all_states, table.goals()),
            CandidateScope::Neighbourhood(_) => (&local, &local),
        };
        for a in 0..world.action_count() {
            if world.is_terminal(s, a) {
                terminal.insert((s, a));
                continue;
            }
            match infer_transition(table, ct, s, a, candidates, goal_scope) {
                Ok(entry) => {
                    entries.insert((s, a), entry);
                }
                Err(Error::Domain(_)) => {} // no goals in scope: unqueried
                Err(e) => return Err(e),
            }
        }
    }
    Ok(InferredModel {
        entries,
        terminal,
        scope,
    })
}

/// Value source steered by an imagined rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutGoal {
    /// Follow the greedy policy of one goal slice.
    Goal(State),
    /// Follow the greedy policy of the max-over-goals table.
    TaskMax,
}

/// Trajectory generated by stepping the inferred model instead of the
/// environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ImaginedTrajectory {
    pub states: Vec<State>,
    pub actions: Vec<Action>,
    /// Value prediction per visited state, normalised to [0, 1] across the
    /// trajectory (0.5 everywhere when the range is degenerate).
    pub norm_values: Vec<f64>,
    /// True when the greedy action at the final state terminates.
    pub terminated: bool,
    /// True when the rollout reached a (state, action) absent from the
    /// model and was cut short.
    pub truncated_missing: bool,
}

/// Follows the table's greedy policy through the inferred successors,
/// never touching the real environment.
pub fn imagined_rollout(
    model: &InferredModel,
    table: &WVFTable,
    start: State,
    goal: RolloutGoal,
    horizon: usize,
) -> Result<ImaginedTrajectory> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let goal_ord = match goal {
        RolloutGoal::Goal(g) => Some(
            table
                .goal_ordinal(g)
                .ok_or(Error::UnknownGoal(g))?,
        ),
        RolloutGoal::TaskMax => None,
    };
    let value_of = |s: State| match goal_ord {
        Some(gi) => table.state_value(s, gi),
        None => (0..table.action_count())
            .map(|a| table.max_over_goals(s, a))
            .fold(f64::NEG_INFINITY, f64::max),
    };
    let action_of = |s: State| match goal_ord {
        Some(gi) => table.greedy_action(s, gi),
        None => {
            let mut best = 0;
            let mut best_v = table.max_over_goals(s, 0);
            for a in 1..table.action_count() {
                let v = table.max_over_goals(s, a);
                if v > best_v {
                    best_v = v;
                    best = a;
                }
            }
            best
        }
    };

    let mut states = vec![start];
    let mut actions = Vec::new();
    let mut values = vec![value_of(start)];
    let mut terminated = false;
    let mut truncated_missing = false;
    let mut current = start;
    for _ in 0..horizon {
        let a = action_of(current);
        if model.is_terminal(current, a) {
            actions.push(a);
            terminated = true;
            break;
        }
        match model.successor(current, a) {
            Some(next) => {
                actions.push(a);
                states.push(next);
                values.push(value_of(next));
                current = next;
            }
            None => {
                truncated_missing = true;
                break;
            }
        }
    }

    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let norm_values = if hi - lo > 1e-12 {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; values.len()]
    };

    Ok(ImaginedTrajectory {
        states,
        actions,
        norm_values,
        terminated,
        truncated_missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{canonical_four_rooms, Cell, EnvState, NORTH};
    use crate::oracle::{vi_wvf, ViParams};
    use crate::world::ExtendedRewardConfig;

    fn oracle_setup() -> (crate::grid::GridEnv, WVFTable, f64) {
        let env = canonical_four_rooms();
        let world = env.world();
        let goals: Vec<State> = (0..world.state_count()).collect();
        let penalty = world.default_min_penalty();
        let table = vi_wvf(world, env.task(), &goals, penalty, &ViParams::default()).unwrap();
        (env, table, penalty)
    }

    #[test]
    fn oracle_inference_is_exact_at_a_room_center() {
        let (env, table, penalty) = oracle_setup();
        let ext = ExtendedRewardConfig::new(env.world(), penalty).unwrap();
        let ct = ComposedTask::new(env.world(), env.task(), ext);
        let s = env.state_at(Cell::new(3, 3)).unwrap();
        let all: Vec<State> = (0..env.state_count()).collect();
        let (succ, residual) = infer_transition(&table, &ct, s, NORTH, &all, &all).unwrap();
        let (truth, _) = env.world().transition(s, NORTH);
        assert_eq!(succ, truth);
        assert!(residual <= 1e-12, "residual {residual}");

        // the true successor is the unique argmin
        for &cand in &all {
            if cand == truth {
                continue;
            }
            let mut r = 0.0;
            for gi in 0..table.goal_count() {
                let d = table.get(s, gi, NORTH)
                    - env.world().background_reward(s, NORTH)
                    - table.state_value(cand, gi);
                r += d * d;
            }
            assert!(r > 1e-6, "candidate {cand} residual {r} is not separated");
        }
    }

    #[test]
    fn infer_transition_preconditions() {
        let (env, table, penalty) = oracle_setup();
        let ext = ExtendedRewardConfig::new(env.world(), penalty).unwrap();
        let ct = ComposedTask::new(env.world(), env.task(), ext);
        assert!(infer_transition(&table, &ct, 0, NORTH, &[], &[0]).is_err());
        assert!(infer_transition(&table, &ct, 0, NORTH, &[0], &[]).is_err());
    }

    #[test]
    fn imagined_rollout_matches_real_rollout_on_oracle_model() {
        let (env, table, penalty) = oracle_setup();
        let ext = ExtendedRewardConfig::new(env.world(), penalty).unwrap();
        let ct = ComposedTask::new(env.world(), env.task(), ext);
        let model = infer_model(&table, &env, &ct, CandidateScope::Full).unwrap();

        let start = env.state_at(Cell::new(11, 1)).unwrap();
        let goal = env.state_at(Cell::new(3, 3)).unwrap();
        let gi = table.goal_ordinal(goal).unwrap();
        let imagined =
            imagined_rollout(&model, &table, start, RolloutGoal::Goal(goal), 200).unwrap();

        // replay against the real environment
        let mut real_states = vec![start];
        let mut at = EnvState {
            state: start,
            terminated: false,
        };
        while !at.terminated && real_states.len() <= 200 {
            let a = table.greedy_action(at.state, gi);
            let (next, _, absorbing) = env.step(at, a).unwrap();
            if !absorbing {
                real_states.push(next.state);
            }
            at = next;
        }
        assert!(imagined.terminated);
        assert!(!imagined.truncated_missing);
        assert_eq!(imagined.states, real_states);
        assert_eq!(*imagined.states.last().unwrap(), goal);
    }

    #[test]
    fn rollout_edge_cases() {
        let (env, table, penalty) = oracle_setup();
        let ext = ExtendedRewardConfig::new(env.world(), penalty).unwrap();
        let ct = ComposedTask::new(env.world(), env.task(), ext);
        let model = infer_model(&table, &env, &ct, CandidateScope::Full).unwrap();
        let g = env.state_at(Cell::new(3, 3)).unwrap();

        assert!(imagined_rollout(&model, &table, g, RolloutGoal::Goal(g), 0).is_err());

        // start = goal: a single-state trajectory terminating immediately
        let t = imagined_rollout(&model, &table, g, RolloutGoal::Goal(g), 50).unwrap();
        assert!(t.terminated);
        assert_eq!(t.states, vec![g]);
        assert_eq!(t.actions.len(), 1);
        assert_eq!(t.norm_values, vec![0.5], "degenerate range maps to mid");
    }

    #[test]
    fn csv_export_shape() {
        let (env, table, penalty) = oracle_setup();
        let ext = ExtendedRewardConfig::new(env.world(), penalty).unwrap();
        let ct = ComposedTask::new(env.world(), env.task(), ext);
        let model = infer_model(&table, &env, &ct, CandidateScope::Full).unwrap();

        let with_truth = model.to_csv(Some(&env));
        let mut lines = with_truth.lines();
        assert_eq!(
            lines.next().unwrap(),
            "state,action,successor,residual,correct"
        );
        assert_eq!(with_truth.lines().count(), 1 + model.len());
        assert!(with_truth.lines().skip(1).all(|l| l.ends_with(",1")));

        let without = model.to_csv(None);
        assert_eq!(without.lines().next().unwrap(), "state,action,successor,residual");
    }
}
