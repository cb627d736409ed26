//! Dense value tables and their text serialization.
//!
//! A [`WVFTable`] holds Q(s, g, a) over explicit state/goal/action index
//! maps; a [`QTable`] holds the goal-free Q(s, a). Both serialize to a plain
//! text format whose float encoding (shortest round-trip decimal) restores
//! every `f64` bit-exactly:
//!
//! ```text
//! WVFTBL 1
//! |S| |G| |A|
//! task=<name> penalty=<r> discount=<g> iterations=<n> goals=<csv>
//! <|A| values per line, one (s, g) block per line, s-major>
//! ```
//!
//! `QTBL 1` files are identical with dims `|S| |A|`, no `goals=` entry and
//! one line per state.

use std::fmt::Write as _;

use crate::{Action, Error, Result, State};

/// Table provenance carried through serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    /// Task the table was solved or learned for.
    pub task: String,
    /// Wrong-goal termination penalty used (0 for plain task tables).
    pub penalty: f64,
    pub discount: f64,
    /// Solver sweeps or learning episodes that produced the table.
    pub iterations: u64,
}

impl TableMeta {
    pub fn new(task: impl Into<String>, penalty: f64, discount: f64, iterations: u64) -> Self {
        Self {
            task: task.into(),
            penalty,
            discount,
            iterations,
        }
    }
}

/// Dense goal-conditioned value table Q(s, g, a).
#[derive(Debug, Clone, PartialEq)]
pub struct WVFTable {
    state_count: usize,
    action_count: usize,
    /// Goal ordinal -> state ordinal, strictly ascending.
    goals: Vec<State>,
    /// State ordinal -> goal ordinal.
    goal_ord: Vec<Option<usize>>,
    /// Row-major `(s * |G| + g) * |A| + a`.
    values: Vec<f64>,
    pub meta: TableMeta,
}

impl WVFTable {
    /// Zero-initialized table over the given goal set. Goals must be
    /// strictly ascending state ordinals within range.
    pub fn zeros(
        state_count: usize,
        action_count: usize,
        goals: Vec<State>,
        meta: TableMeta,
    ) -> Result<Self> {
        if state_count == 0 || action_count == 0 || goals.is_empty() {
            return Err(Error::InvalidConfig(
                "table dimensions and goal set must be non-empty".into(),
            ));
        }
        let mut goal_ord = vec![None; state_count];
        let mut prev: Option<State> = None;
        for (i, &g) in goals.iter().enumerate() {
            if g >= state_count {
                return Err(Error::UnknownGoal(g));
            }
            if prev.is_some_and(|p| p >= g) {
                return Err(Error::InvalidConfig(
                    "goal set must be strictly ascending".into(),
                ));
            }
            prev = Some(g);
            goal_ord[g] = Some(i);
        }
        let values = vec![0.0; state_count * goals.len() * action_count];
        Ok(Self {
            state_count,
            action_count,
            goals,
            goal_ord,
            values,
            meta,
        })
    }

    /// Zero-initialized table whose goal axis is the whole state set.
    pub fn zeros_full_goals(state_count: usize, action_count: usize, meta: TableMeta) -> Self {
        Self::zeros(state_count, action_count, (0..state_count).collect(), meta)
            .expect("full goal axis is always valid")
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn goal_count(&self) -> usize {
        self.goals.len()
    }

    /// Goal ordinal -> state ordinal map.
    pub fn goals(&self) -> &[State] {
        &self.goals
    }

    /// Goal ordinal of a state, when the state is in the goal set.
    pub fn goal_ordinal(&self, g: State) -> Option<usize> {
        self.goal_ord.get(g).copied().flatten()
    }

    #[inline]
    fn idx(&self, s: State, g: usize, a: Action) -> usize {
        (s * self.goals.len() + g) * self.action_count + a
    }

    #[inline]
    pub fn get(&self, s: State, g: usize, a: Action) -> f64 {
        self.values[self.idx(s, g, a)]
    }

    #[inline]
    pub fn set(&mut self, s: State, g: usize, a: Action, v: f64) {
        let i = self.idx(s, g, a);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// State value for a goal: `max_a Q(s, g, a)`.
    pub fn state_value(&self, s: State, g: usize) -> f64 {
        (0..self.action_count)
            .map(|a| self.get(s, g, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action for a goal, ties broken by lowest action ordinal.
    pub fn greedy_action(&self, s: State, g: usize) -> Action {
        let mut best = 0;
        let mut best_v = self.get(s, g, 0);
        for a in 1..self.action_count {
            let v = self.get(s, g, a);
            if v > best_v {
                best_v = v;
                best = a;
            }
        }
        best
    }

    /// `max_g Q(s, g, a)` over the goal axis.
    pub fn max_over_goals(&self, s: State, a: Action) -> f64 {
        (0..self.goals.len())
            .map(|g| self.get(s, g, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when both tables index identical state/goal/action spaces.
    pub fn same_index_maps(&self, other: &Self) -> bool {
        self.state_count == other.state_count
            && self.action_count == other.action_count
            && self.goals == other.goals
    }

    pub fn to_text(&self) -> Result<String> {
        check_meta(&self.meta)?;
        let mut out = String::new();
        out.push_str("WVFTBL 1\n");
        let _ = writeln!(
            out,
            "{} {} {}",
            self.state_count,
            self.goals.len(),
            self.action_count
        );
        let goals_csv: Vec<String> = self.goals.iter().map(|g| g.to_string()).collect();
        let _ = writeln!(
            out,
            "task={} penalty={} discount={} iterations={} goals={}",
            self.meta.task,
            self.meta.penalty,
            self.meta.discount,
            self.meta.iterations,
            goals_csv.join(",")
        );
        for s in 0..self.state_count {
            for g in 0..self.goals.len() {
                let row = &self.values[self.idx(s, g, 0)..=self.idx(s, g, self.action_count - 1)];
                push_value_row(&mut out, row);
            }
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        expect_magic(&mut lines, "WVFTBL 1")?;
        let dims = parse_dims(&mut lines, 3)?;
        let (state_count, goal_count, action_count) = (dims[0], dims[1], dims[2]);
        let (meta, goals) = parse_meta(&mut lines)?;
        let goals = goals.ok_or_else(|| Error::TableParse {
            line: 3,
            message: "missing goals= entry".into(),
        })?;
        if goals.len() != goal_count {
            return Err(Error::TableParse {
                line: 3,
                message: format!("goals= lists {} goals, dims say {goal_count}", goals.len()),
            });
        }
        let mut table = Self::zeros(state_count, action_count, goals, meta)?;
        read_values(&mut lines, &mut table.values, action_count)?;
        Ok(table)
    }
}

/// Dense task-level value table Q(s, a).
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    state_count: usize,
    action_count: usize,
    /// Row-major `s * |A| + a`.
    values: Vec<f64>,
    pub meta: TableMeta,
}

impl QTable {
    pub fn zeros(state_count: usize, action_count: usize, meta: TableMeta) -> Result<Self> {
        if state_count == 0 || action_count == 0 {
            return Err(Error::InvalidConfig(
                "table dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            state_count,
            action_count,
            values: vec![0.0; state_count * action_count],
            meta,
        })
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    #[inline]
    pub fn get(&self, s: State, a: Action) -> f64 {
        self.values[s * self.action_count + a]
    }

    #[inline]
    pub fn set(&mut self, s: State, a: Action, v: f64) {
        self.values[s * self.action_count + a] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `V(s) = max_a Q(s, a)`.
    pub fn state_value(&self, s: State) -> f64 {
        (0..self.action_count)
            .map(|a| self.get(s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, ties broken by lowest action ordinal.
    pub fn greedy_action(&self, s: State) -> Action {
        let mut best = 0;
        let mut best_v = self.get(s, 0);
        for a in 1..self.action_count {
            let v = self.get(s, a);
            if v > best_v {
                best_v = v;
                best = a;
            }
        }
        best
    }

    /// Per-state greedy policy.
    pub fn greedy_policy(&self) -> Vec<Action> {
        (0..self.state_count).map(|s| self.greedy_action(s)).collect()
    }

    pub fn to_text(&self) -> Result<String> {
        check_meta(&self.meta)?;
        let mut out = String::new();
        out.push_str("QTBL 1\n");
        let _ = writeln!(out, "{} {}", self.state_count, self.action_count);
        let _ = writeln!(
            out,
            "task={} penalty={} discount={} iterations={}",
            self.meta.task, self.meta.penalty, self.meta.discount, self.meta.iterations
        );
        for s in 0..self.state_count {
            let row = &self.values[s * self.action_count..(s + 1) * self.action_count];
            push_value_row(&mut out, row);
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        expect_magic(&mut lines, "QTBL 1")?;
        let dims = parse_dims(&mut lines, 2)?;
        let (meta, _) = parse_meta(&mut lines)?;
        let mut table = Self::zeros(dims[0], dims[1], meta)?;
        read_values(&mut lines, &mut table.values, dims[1])?;
        Ok(table)
    }
}

fn check_meta(meta: &TableMeta) -> Result<()> {
    if meta.task.is_empty() || meta.task.chars().any(|c| c.is_whitespace()) {
        return Err(Error::InvalidConfig(format!(
            "task name '{}' must be non-empty without whitespace",
            meta.task
        )));
    }
    Ok(())
}

fn push_value_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

type Lines<'a> = std::iter::Enumerate<std::str::Lines<'a>>;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::TableParse {
        line,
        message: message.into(),
    }
}

fn expect_magic(lines: &mut Lines, magic: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l.trim_end() == magic => Ok(()),
        Some((i, l)) => Err(parse_err(i + 1, format!("expected '{magic}', found '{l}'"))),
        None => Err(parse_err(1, "empty file")),
    }
}

fn parse_dims(lines: &mut Lines, n: usize) -> Result<Vec<usize>> {
    let (i, l) = lines.next().ok_or_else(|| parse_err(2, "missing dims"))?;
    let dims: Vec<usize> = l
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(i + 1, format!("bad dims '{l}': {e}")))?;
    if dims.len() != n || dims.iter().any(|&d| d == 0) {
        return Err(parse_err(
            i + 1,
            format!("expected {n} positive dims, found '{l}'"),
        ));
    }
    Ok(dims)
}

fn parse_meta(lines: &mut Lines) -> Result<(TableMeta, Option<Vec<State>>)> {
    let (i, l) = lines.next().ok_or_else(|| parse_err(3, "missing metadata"))?;
    let line_no = i + 1;
    let mut task = None;
    let mut penalty = None;
    let mut discount = None;
    let mut iterations = None;
    let mut goals = None;
    for pair in l.split_whitespace() {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("bad metadata token '{pair}'")))?;
        match k {
            "task" => task = Some(v.to_string()),
            "penalty" => penalty = Some(parse_f64(v, line_no)?),
            "discount" => discount = Some(parse_f64(v, line_no)?),
            "iterations" => {
                iterations = Some(
                    v.parse::<u64>()
                        .map_err(|e| parse_err(line_no, format!("bad iterations '{v}': {e}")))?,
                )
            }
            "goals" => {
                let parsed: std::result::Result<Vec<State>, _> =
                    v.split(',').map(|t| t.parse::<State>()).collect();
                goals = Some(
                    parsed.map_err(|e| parse_err(line_no, format!("bad goals list: {e}")))?,
                );
            }
            other => return Err(parse_err(line_no, format!("unknown metadata key '{other}'"))),
        }
    }
    let meta = TableMeta {
        task: task.ok_or_else(|| parse_err(line_no, "missing task="))?,
        penalty: penalty.ok_or_else(|| parse_err(line_no, "missing penalty="))?,
        discount: discount.ok_or_else(|| parse_err(line_no, "missing discount="))?,
        iterations: iterations.ok_or_else(|| parse_err(line_no, "missing iterations="))?,
    };
    Ok((meta, goals))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|e| parse_err(line, format!("bad float '{tok}': {e}")))?;
    Ok(v)
}

fn read_values(lines: &mut Lines, values: &mut [f64], per_line: usize) -> Result<()> {
    let rows = values.len() / per_line;
    for r in 0..rows {
        let (i, l) = lines
            .next()
            .ok_or_else(|| parse_err(r + 4, format!("missing value row {r}")))?;
        let line_no = i + 1;
        let mut count = 0;
        for (j, tok) in l.split_whitespace().enumerate() {
            if j >= per_line {
                return Err(parse_err(line_no, format!("row has more than {per_line} values")));
            }
            let v = parse_f64(tok, line_no)?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value '{tok}'")));
            }
            values[r * per_line + j] = v;
            count += 1;
        }
        if count != per_line {
            return Err(parse_err(
                line_no,
                format!("row has {count} values, expected {per_line}"),
            ));
        }
    }
    for (i, l) in lines {
        if !l.trim().is_empty() {
            return Err(parse_err(i + 1, format!("unexpected trailing content '{l}'")));
        }
    }
    Ok(())
}
