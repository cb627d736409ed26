//! Everything computed from a WVF once it exists: task value/policy
//! recovery, mastery evaluation, zero-shot task inference from terminal
//! rewards, and the Boolean composition algebra over tasks and tables.
//!
//! Composition semantics: disjunction is an entrywise max, conjunction an
//! entrywise min, and negation the affine reflection
//! `(Q_SUP + Q_INF) - Q` through the extreme tasks' tables. The expression
//! evaluator eliminates double negations structurally before evaluating, so
//! `~~x` is bit-identical to `x`; the remaining laws (De Morgan,
//! idempotence, absorption) are exact because max/min select operands and
//! floating-point rounding is monotone.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;

use crate::grid::{EnvState, GridEnv};
use crate::oracle::reachable_states;
use crate::table::{QTable, TableMeta, WVFTable};
use crate::world::{TaskSpec, WorldSpec};
use crate::{Action, Error, Result, State};

/// Recovers the task-level Q table by maximising the WVF over its goal
/// axis; acting greedily on the result is the task policy.
pub fn recover_task(table: &WVFTable) -> QTable {
    let mut q = QTable::zeros(table.state_count(), table.action_count(), table.meta.clone())
        .expect("dimensions of an existing table are valid");
    for s in 0..table.state_count() {
        for a in 0..table.action_count() {
            q.set(s, a, table.max_over_goals(s, a));
        }
    }
    q
}

/// Outcome of one greedy goal-reaching rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasteryOutcome {
    pub start: State,
    pub goal: State,
    /// True when the rollout terminated exactly at the goal.
    pub reached: bool,
    pub steps: usize,
    /// State the episode terminated at, when it terminated.
    pub terminal_state: Option<State>,
}

/// Exhaustive goal-reaching evaluation of a WVF.
#[derive(Debug, Clone)]
pub struct MasteryReport {
    pub outcomes: Vec<MasteryOutcome>,
    /// Fraction of evaluated (start, goal) pairs that reached their goal.
    pub success_rate: f64,
    /// (start, goal) pairs skipped because the goal is unreachable.
    pub excluded_pairs: usize,
}

impl MasteryReport {
    pub fn failures(&self) -> impl Iterator<Item = &MasteryOutcome> {
        self.outcomes.iter().filter(|o| !o.reached)
    }
}

/// Rolls out the greedy goal-conditioned policy of `table` from every start
/// state to every reachable goal and records whether each episode
/// terminates exactly at its goal. Non-termination within `horizon` counts
/// as failure; pairs whose goal is unreachable are excluded from the
/// denominator.
pub fn mastery_eval(table: &WVFTable, env: &GridEnv, horizon: usize) -> Result<MasteryReport> {
    let world = env.world();
    if table.state_count() != world.state_count() || table.action_count() != world.action_count()
    {
        return Err(Error::IndexMapMismatch(
            "table does not index this environment".into(),
        ));
    }
    let mut outcomes = Vec::new();
    let mut excluded = 0usize;
    let mut successes = 0usize;
    for start in 0..world.state_count() {
        let reach = reachable_states(world, start);
        for (gi, &goal) in table.goals().iter().enumerate() {
            if !reach[goal] {
                excluded += 1;
                continue;
            }
            let mut at = EnvState {
                state: start,
                terminated: false,
            };
            let mut steps = 0;
            let mut terminal_state = None;
            while !at.terminated && steps < horizon {
                let a = table.greedy_action(at.state, gi);
                let source = at.state;
                let (next, _r, absorbing) = env.step(at, a)?;
                steps += 1;
                if absorbing {
                    terminal_state = Some(source);
                }
                at = next;
            }
            let reached = terminal_state == Some(goal);
            successes += reached as usize;
            outcomes.push(MasteryOutcome {
                start,
                goal,
                reached,
                steps,
                terminal_state,
            });
        }
    }
    let evaluated = outcomes.len();
    Ok(MasteryReport {
        outcomes,
        success_rate: if evaluated == 0 {
            0.0
        } else {
            successes as f64 / evaluated as f64
        },
        excluded_pairs: excluded,
    })
}

/// Estimated goal-value table over (state, goal).
#[derive(Debug, Clone, PartialEq)]
pub struct GoalValueTable {
    state_count: usize,
    goals: Vec<State>,
    /// Row-major `s * |G| + g`.
    values: Vec<f64>,
}

impl GoalValueTable {
    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn goals(&self) -> &[State] {
        &self.goals
    }

    pub fn get(&self, s: State, g: usize) -> f64 {
        self.values[s * self.goals.len() + g]
    }

    /// Goal ordinal maximising the value at `s`, lowest ordinal on ties.
    pub fn best_goal(&self, s: State) -> usize {
        let mut best = 0;
        let mut best_v = self.get(s, 0);
        for g in 1..self.goals.len() {
            let v = self.get(s, g);
            if v > best_v {
                best_v = v;
                best = g;
            }
        }
        best
    }

    /// `max_g` of the estimated values: the task value estimate.
    pub fn state_value(&self, s: State) -> f64 {
        self.get(s, self.best_goal(s))
    }
}

/// Estimates the WVF state values of a new task from a pretrained table and
/// the new task's terminal rewards alone:
/// `V~(s, g) = max_a Q(s, g, a) + (max_a R_new(g, a) - max_a Q(g, g, a))`
/// with the reward max taken over the terminal actions at `g`. Exact for
/// every reachable (s, g) when the table is optimal for any task over the
/// same world.
pub fn zero_shot_values(
    table: &WVFTable,
    world: &WorldSpec,
    new_task: &TaskSpec,
) -> Result<GoalValueTable> {
    if table.state_count() != world.state_count() || table.action_count() != world.action_count()
    {
        return Err(Error::IndexMapMismatch(
            "table does not index this world".into(),
        ));
    }
    let goals = table.goals().to_vec();
    let mut corrections = Vec::with_capacity(goals.len());
    for (gi, &g) in goals.iter().enumerate() {
        let r_new = new_task.max_terminal_reward(world, g).ok_or_else(|| {
            Error::Domain(format!("goal state {g} has no terminal action"))
        })?;
        corrections.push(r_new - table.state_value(g, gi));
    }
    let mut values = Vec::with_capacity(world.state_count() * goals.len());
    for s in 0..world.state_count() {
        for gi in 0..goals.len() {
            values.push(table.state_value(s, gi) + corrections[gi]);
        }
    }
    Ok(GoalValueTable {
        state_count: world.state_count(),
        goals,
        values,
    })
}

/// Zero-shot task policy: per state, pick the goal maximising the estimated
/// values, then act greedily on the pretrained table toward that goal.
pub fn zero_shot_policy(table: &WVFTable, vtilde: &GoalValueTable) -> Result<Vec<Action>> {
    if vtilde.state_count != table.state_count() || vtilde.goals != table.goals() {
        return Err(Error::IndexMapMismatch(
            "estimated values were not computed from this table".into(),
        ));
    }
    Ok((0..table.state_count())
        .map(|s| table.greedy_action(s, vtilde.best_goal(s)))
        .collect())
}

/// SUP/INF anchor tables for negation; both must share index maps.
#[derive(Debug, Clone)]
pub struct AlgebraContext {
    sup: WVFTable,
    inf: WVFTable,
}

impl AlgebraContext {
    pub fn new(sup: WVFTable, inf: WVFTable) -> Result<Self> {
        if !sup.same_index_maps(&inf) {
            return Err(Error::IndexMapMismatch(
                "SUP and INF tables disagree".into(),
            ));
        }
        Ok(Self { sup, inf })
    }

    pub fn sup(&self) -> &WVFTable {
        &self.sup
    }

    pub fn inf(&self) -> &WVFTable {
        &self.inf
    }
}

/// Boolean expression over named tasks/tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskExpression {
    Ident(String),
    Or(Box<TaskExpression>, Box<TaskExpression>),
    And(Box<TaskExpression>, Box<TaskExpression>),
    Not(Box<TaskExpression>),
}

impl TaskExpression {
    pub fn or(a: TaskExpression, b: TaskExpression) -> Self {
        Self::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: TaskExpression, b: TaskExpression) -> Self {
        Self::And(Box::new(a), Box::new(b))
    }

    pub fn not(a: TaskExpression) -> Self {
        Self::Not(Box::new(a))
    }

    pub fn ident(name: impl Into<String>) -> Self {
        Self::Ident(name.into())
    }

    /// Leaf identifiers in first-occurrence order.
    pub fn idents(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_idents(&mut out);
        out
    }

    fn collect_idents<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            TaskExpression::Ident(n) => {
                if !out.contains(&n.as_str()) {
                    out.push(n);
                }
            }
            TaskExpression::Or(a, b) | TaskExpression::And(a, b) => {
                a.collect_idents(out);
                b.collect_idents(out);
            }
            TaskExpression::Not(a) => a.collect_idents(out),
        }
    }

    fn contains_not(&self) -> bool {
        match self {
            TaskExpression::Ident(_) => false,
            TaskExpression::Or(a, b) | TaskExpression::And(a, b) => {
                a.contains_not() || b.contains_not()
            }
            TaskExpression::Not(_) => true,
        }
    }

    /// Structural double-negation elimination.
    fn normalized(&self) -> &TaskExpression {
        match self {
            TaskExpression::Not(inner) => match inner.as_ref() {
                TaskExpression::Not(x) => x.normalized(),
                _ => self,
            },
            _ => self,
        }
    }
}

impl fmt::Display for TaskExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskExpression::Ident(n) => write!(f, "{n}"),
            TaskExpression::Or(a, b) => write!(f, "({a}|{b})"),
            TaskExpression::And(a, b) => write!(f, "({a}&{b})"),
            TaskExpression::Not(a) => write!(f, "~{a}"),
        }
    }
}

/// Parses `ident`, `|`, `&`, `~` and parentheses with the usual
/// precedence (`~` binds tightest, then `&`, then `|`).
pub fn parse_expression(text: &str) -> Result<TaskExpression> {
    let mut p = ExprParser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(Error::ExprParse {
            at: p.pos,
            message: format!("unexpected trailing input '{}'", &text[p.pos..]),
        });
    }
    Ok(expr)
}

struct ExprParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<TaskExpression> {
        let mut acc = self.term()?;
        while self.peek() == Some(b'|') {
            self.pos += 1;
            acc = TaskExpression::or(acc, self.term()?);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<TaskExpression> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'&') {
            self.pos += 1;
            acc = TaskExpression::and(acc, self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<TaskExpression> {
        match self.peek() {
            Some(b'~') => {
                self.pos += 1;
                Ok(TaskExpression::not(self.factor()?))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(Error::ExprParse {
                        at: self.pos,
                        message: "expected ')'".into(),
                    })
                }
            }
            Some(c) if c.is_ascii_alphanumeric() || c == b'_' => {
                let start = self.pos;
                while self
                    .bytes
                    .get(self.pos)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
                Ok(TaskExpression::ident(name))
            }
            other => Err(Error::ExprParse {
                at: self.pos,
                message: match other {
                    Some(c) => format!("unexpected character '{}'", c as char),
                    None => "unexpected end of expression".into(),
                },
            }),
        }
    }
}

/// Evaluates a Boolean expression over named WVF tables entrywise. All
/// referenced tables (and the SUP/INF context, required whenever the
/// expression negates) must share index maps.
pub fn compose(
    expr: &TaskExpression,
    ctx: Option<&AlgebraContext>,
    tables: &BTreeMap<String, WVFTable>,
) -> Result<WVFTable> {
    let names = expr.idents();
    let first = names
        .first()
        .and_then(|n| tables.get(*n))
        .ok_or_else(|| Error::UnknownTable(names.first().unwrap_or(&"<empty>").to_string()))?;
    for name in &names {
        let t = tables
            .get(*name)
            .ok_or_else(|| Error::UnknownTable(name.to_string()))?;
        if !t.same_index_maps(first) {
            return Err(Error::IndexMapMismatch(format!(
                "table '{name}' disagrees with '{}'",
                names[0]
            )));
        }
    }
    if expr.contains_not() {
        let ctx = ctx.ok_or(Error::MissingAlgebraContext)?;
        if !ctx.sup.same_index_maps(first) {
            return Err(Error::IndexMapMismatch(
                "SUP/INF context disagrees with operand tables".into(),
            ));
        }
    }
    let values = eval_values(expr.normalized(), ctx, tables)?;
    let mut out = WVFTable::zeros(
        first.state_count(),
        first.action_count(),
        first.goals().to_vec(),
        TableMeta::new(
            expr.to_string(),
            first.meta.penalty,
            first.meta.discount,
            first.meta.iterations,
        ),
    )?;
    out.values_mut().copy_from_slice(&values);
    Ok(out)
}

fn eval_values(
    expr: &TaskExpression,
    ctx: Option<&AlgebraContext>,
    tables: &BTreeMap<String, WVFTable>,
) -> Result<Vec<f64>> {
    match expr {
        TaskExpression::Ident(name) => Ok(tables
            .get(name)
            .ok_or_else(|| Error::UnknownTable(name.clone()))?
            .values()
            .to_vec()),
        TaskExpression::Or(a, b) => {
            let mut va = eval_values(a.normalized(), ctx, tables)?;
            let vb = eval_values(b.normalized(), ctx, tables)?;
            for (x, y) in va.iter_mut().zip(&vb) {
                *x = x.max(*y);
            }
            Ok(va)
        }
        TaskExpression::And(a, b) => {
            let mut va = eval_values(a.normalized(), ctx, tables)?;
            let vb = eval_values(b.normalized(), ctx, tables)?;
            for (x, y) in va.iter_mut().zip(&vb) {
                *x = x.min(*y);
            }
            Ok(va)
        }
        TaskExpression::Not(inner) => {
            let ctx = ctx.ok_or(Error::MissingAlgebraContext)?;
            let mut v = eval_values(inner.normalized(), Some(ctx), tables)?;
            let sup = ctx.sup.values();
            let inf = ctx.inf.values();
            for (i, x) in v.iter_mut().enumerate() {
                *x = sup[i] + inf[i] - *x;
            }
            Ok(v)
        }
    }
}

/// Composes tasks at the reward level: terminal rewards combine with
/// max/min and the SUP/INF reflection, mirroring the table algebra.
pub fn compose_task_rewards(
    expr: &TaskExpression,
    world: &WorldSpec,
    sup: &TaskSpec,
    inf: &TaskSpec,
    tasks: &BTreeMap<String, TaskSpec>,
) -> Result<TaskSpec> {
    fn eval(
        expr: &TaskExpression,
        world: &WorldSpec,
        sup: &TaskSpec,
        inf: &TaskSpec,
        tasks: &BTreeMap<String, TaskSpec>,
        s: State,
        a: Action,
    ) -> Result<f64> {
        Ok(match expr {
            TaskExpression::Ident(name) => tasks
                .get(name)
                .ok_or_else(|| Error::UnknownTable(name.clone()))?
                .terminal_reward(world, s, a),
            TaskExpression::Or(x, y) => eval(x, world, sup, inf, tasks, s, a)?
                .max(eval(y, world, sup, inf, tasks, s, a)?),
            TaskExpression::And(x, y) => eval(x, world, sup, inf, tasks, s, a)?
                .min(eval(y, world, sup, inf, tasks, s, a)?),
            TaskExpression::Not(x) => {
                sup.terminal_reward(world, s, a) + inf.terminal_reward(world, s, a)
                    - eval(x, world, sup, inf, tasks, s, a)?
            }
        })
    }
    let expr = expr.normalized();
    let mut terminal = vec![world.reward_min(); world.state_count() * world.action_count()];
    for s in 0..world.state_count() {
        for a in 0..world.action_count() {
            if world.is_terminal(s, a) {
                // the reflection through extreme tasks stays inside the
                // reward bounds in exact arithmetic; clamp off the rounding
                // dust so the composed task passes bounds validation
                terminal[s * world.action_count() + a] = eval(expr, world, sup, inf, tasks, s, a)?
                    .clamp(world.reward_min(), world.reward_max());
            }
        }
    }
    TaskSpec::new(world, expr.to_string(), terminal)
}

/// Number of Boolean functions over `n` base tasks: `2^(2^n)`.
pub fn count_compositions(n: u32) -> BigUint {
    assert!(n < 32, "2^(2^{n}) does not fit in addressable memory");
    BigUint::from(1u8) << (1usize << n)
}

/// One of the `2^(2^n)` Boolean functions over named base tasks, as a
/// truth-table bitmask plus a disjunctive-normal-form expression. Minterm
/// `i` is included when bit `i` of `mask` is set; bit `j` of `i` selects
/// whether base task `j` appears positively in the minterm.
#[derive(Debug, Clone)]
pub struct BooleanFunction {
    pub mask: u32,
    pub expr: TaskExpression,
}

/// Enumerates every Boolean function over the given base task names
/// (2^(2^n) functions; n is expected to be small).
pub fn enumerate_boolean_functions(names: &[String]) -> Vec<BooleanFunction> {
    let n = names.len();
    assert!(n > 0 && n <= 4, "enumeration is intended for a few base tasks");
    let minterms = 1usize << n;
    let functions = 1u64 << minterms;
    let mut out = Vec::with_capacity(functions as usize);
    for mask in 0..functions {
        let mask = mask as u32;
        let mut dnf: Option<TaskExpression> = None;
        for i in 0..minterms {
            if mask & (1 << i) == 0 {
                continue;
            }
            let mut term: Option<TaskExpression> = None;
            for (j, name) in names.iter().enumerate() {
                let lit = if i & (1 << j) != 0 {
                    TaskExpression::ident(name)
                } else {
                    TaskExpression::not(TaskExpression::ident(name))
                };
                term = Some(match term {
                    Some(t) => TaskExpression::and(t, lit),
                    None => lit,
                });
            }
            let term = term.expect("n > 0");
            dnf = Some(match dnf {
                Some(d) => TaskExpression::or(d, term),
                None => term,
            });
        }
        let expr = dnf.unwrap_or_else(|| {
            // the constant-false function: a contradiction over the first task
            TaskExpression::and(
                TaskExpression::ident(&names[0]),
                TaskExpression::not(TaskExpression::ident(&names[0])),
            )
        });
        out.push(BooleanFunction { mask, expr });
    }
    out
}
