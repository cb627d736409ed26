//! Property tests: serialization round-trips, Boolean algebra laws on
//! arbitrary tables, neighbourhood monotonicity and the pointwise reward
//! recovery identity.

use std::collections::BTreeMap;

use proptest::prelude::*;

use wvf_core::algebra::{compose, parse_expression, AlgebraContext, TaskExpression};
use wvf_core::grid::canonical_four_rooms;
use wvf_core::table::{QTable, TableMeta, WVFTable};
use wvf_core::world::ComposedTask;

fn meta() -> TableMeta {
    TableMeta::new("prop", -4.2, 1.0, 0)
}

/// Any finite f64, including subnormals and signed zeros.
fn finite_f64() -> impl Strategy<Value = f64> {
    any::<u64>()
        .prop_map(f64::from_bits)
        .prop_filter("finite", |v| v.is_finite())
}

fn table_with_values(values: Vec<f64>) -> WVFTable {
    // 3 states, 2 goals, 2 actions = 12 values
    let mut t = WVFTable::zeros(3, 2, vec![0, 2], meta()).unwrap();
    t.values_mut().copy_from_slice(&values);
    t
}

proptest! {
    #[test]
    fn wvf_text_round_trip_is_bit_exact(values in prop::collection::vec(finite_f64(), 12)) {
        let t = table_with_values(values);
        let back = WVFTable::from_text(&t.to_text().unwrap()).unwrap();
        for (a, b) in t.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn qtable_text_round_trip_is_bit_exact(values in prop::collection::vec(finite_f64(), 8)) {
        let mut t = QTable::zeros(4, 2, meta()).unwrap();
        t.values_mut().copy_from_slice(&values);
        let back = QTable::from_text(&t.to_text().unwrap()).unwrap();
        for (a, b) in t.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn boolean_algebra_laws_hold_entrywise(
        a in prop::collection::vec(-1e6f64..1e6, 12),
        b in prop::collection::vec(-1e6f64..1e6, 12),
        c in prop::collection::vec(-1e6f64..1e6, 12),
        sup in prop::collection::vec(-1e6f64..1e6, 12),
        inf in prop::collection::vec(-1e6f64..1e6, 12),
    ) {
        let mut tables = BTreeMap::new();
        tables.insert("a".to_string(), table_with_values(a.clone()));
        tables.insert("b".to_string(), table_with_values(b));
        tables.insert("c".to_string(), table_with_values(c));
        let ctx = AlgebraContext::new(table_with_values(sup), table_with_values(inf)).unwrap();

        let ev = |src: &str| -> Vec<f64> {
            compose(&parse_expression(src).unwrap(), Some(&ctx), &tables)
                .unwrap()
                .values()
                .to_vec()
        };

        // commutativity and associativity
        prop_assert_eq!(ev("a|b"), ev("b|a"));
        prop_assert_eq!(ev("a&b"), ev("b&a"));
        prop_assert_eq!(ev("(a|b)|c"), ev("a|(b|c)"));
        prop_assert_eq!(ev("(a&b)&c"), ev("a&(b&c)"));

        // idempotence and absorption
        prop_assert_eq!(ev("a|a"), ev("a"));
        prop_assert_eq!(ev("a&a"), ev("a"));
        prop_assert_eq!(ev("a|(a&b)"), ev("a"));
        prop_assert_eq!(ev("a&(a|b)"), ev("a"));

        // De Morgan (exact: rounding is monotone, max/min select operands)
        prop_assert_eq!(ev("~(a|b)"), ev("~a&~b"));
        prop_assert_eq!(ev("~(a&b)"), ev("~a|~b"));

        // double negation is bit-identical by construction
        let nn = ev("~~a");
        let base = ev("a");
        for (x, y) in nn.iter().zip(&base) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn neighbourhood_is_monotone_and_contains_origin(s in 0usize..104, r in 0usize..6) {
        let env = canonical_four_rooms();
        let smaller = env.neighbourhood(s, r);
        let larger = env.neighbourhood(s, r + 1);
        prop_assert!(smaller.contains(&s));
        prop_assert!(smaller.iter().all(|x| larger.contains(x)));
    }

    #[test]
    fn max_over_goals_of_extended_reward_is_the_task_reward(s in 0usize..104, a in 0usize..5) {
        let env = canonical_four_rooms();
        let ct = ComposedTask::with_derived_penalty(env.world(), env.task()).unwrap();
        let (succ, absorbing) = env.world().transition(s, a);
        let composed = ct.reward(s, a, succ, absorbing);
        let max_over_goals = (0..env.state_count())
            .map(|g| ct.extended_reward(s, g, a, succ, absorbing).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(max_over_goals, composed);
    }

    #[test]
    fn expression_text_round_trips(expr in arb_expression()) {
        let text = expr.to_string();
        let parsed = parse_expression(&text).unwrap();
        prop_assert_eq!(parsed, expr);
    }
}

fn arb_expression() -> impl Strategy<Value = TaskExpression> {
    let leaf = prop::sample::select(vec!["blue", "square", "x1", "t_2"])
        .prop_map(TaskExpression::ident);
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TaskExpression::or(a, b)),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| TaskExpression::and(a, b)),
            inner.prop_map(TaskExpression::not),
        ]
    })
}
