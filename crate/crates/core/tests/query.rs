use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;
use uuis_core::error::Error;
use uuis_core::query::{self, Expr, FieldSchema, QueryAst, ValueKind};
use uuis_core::storage::Value;
use uuis_core::{assets, software};

const ASSET_QUERY: &str = r#"Location: "H-623 through H-629" AND Type: "Plastic Classroom Chair""#;
const SOFTWARE_QUERY: &str = r#"Contact: "Professor John Smith" AND ReqNum: "Req-28100we""#;

#[test]
fn example_strings_are_two_clause_ands_and_round_trip() {
    for (q, schema) in [
        (ASSET_QUERY, assets::search_schema()),
        (SOFTWARE_QUERY, software::search_schema()),
    ] {
        let ast = query::parse(q, &schema).unwrap();
        match &ast.root {
            Some(Expr::And(a, b)) => {
                assert!(matches!(**a, Expr::Clause { .. }));
                assert!(matches!(**b, Expr::Clause { .. }));
            }
            other => panic!("{other:?}"),
        }
        let once = query::serialize(&ast);
        assert_eq!(once, q);
        let twice = query::serialize(&query::parse(&once, &schema).unwrap());
        assert_eq!(twice, q);
    }
}

#[test]
fn helper_composes_the_asset_example() {
    let inputs: BTreeMap<String, String> = [
        ("Type", "Plastic Classroom Chair"),
        ("Location", "H-623 through H-629"),
        ("Color", "  "),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let ast = query::build_from_fields(&inputs, &assets::search_schema()).unwrap();
    assert_eq!(query::serialize(&ast), ASSET_QUERY);
}

#[test]
fn errors_carry_positions_and_limits() {
    let s = assets::search_schema();
    match query::parse("Type: a AND", &s) {
        Err(Error::Syntax { position, .. }) => assert_eq!(position, 11),
        other => panic!("{other:?}"),
    }
    match query::parse("Type \"x\"", &s) {
        Err(Error::Syntax { position, .. }) => assert_eq!(position, 5),
        other => panic!("{other:?}"),
    }
    assert!(matches!(query::parse("Nope: x", &s), Err(Error::UnknownField { .. })));
    let deep = format!("{}Type: x{}", "(".repeat(40), ")".repeat(40));
    assert!(matches!(query::parse(&deep, &s), Err(Error::DepthExceeded(_))));
    let long = "x".repeat(query::MAX_QUERY_LEN + 1);
    assert!(matches!(query::parse(&long, &s), Err(Error::QueryTooLong(_))));
    // (a OR b) repeated 13 times under AND expands to 8192 alternatives
    let wide = vec!["(Type: a OR Type: b)"; 13].join(" AND ");
    let ast = query::parse(&wide, &s).unwrap();
    assert!(matches!(query::compile(&ast, &s), Err(Error::TooComplex)));
    assert!(matches!(
        query::compile(&query::parse("ItemId: 1*", &s).unwrap(), &s),
        Err(Error::BadValueForType { .. })
    ));
    assert!(matches!(
        query::compile(&query::parse("DatePurchased: 2010-13-01", &s).unwrap(), &s),
        Err(Error::BadValueForType { .. })
    ));
}

#[test]
fn empty_query_matches_everything() {
    let s = assets::search_schema();
    let ast = query::parse("   ", &s).unwrap();
    assert!(ast.is_match_all());
    assert_eq!(query::serialize(&ast), "");
    assert!(query::matches(&query::compile(&ast, &s).unwrap(), &BTreeMap::new()));
}

#[test]
fn field_names_are_case_insensitive_and_canonicalized() {
    let s = assets::search_schema();
    let ast = query::parse("type: chair OR LOCATION: \"H-623\"", &s).unwrap();
    assert_eq!(query::serialize(&ast), r#"Type: "chair" OR Location: "H-623""#);
}

fn fuzz_schema() -> FieldSchema {
    FieldSchema::new(
        "Fuzz",
        &[
            ("Name", ValueKind::Text),
            ("Room", ValueKind::Text),
            ("Count", ValueKind::Number),
            ("Bought", ValueKind::Date),
        ],
    )
}

fn any_pattern() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z0-9 ]{0,8}",
        "[\"\\\\():*]{1,4}",
        Just("AND".to_string()),
        Just("OR".to_string()),
        "\\PC{0,6}",
    ]
}

fn arb_expr(pattern: BoxedStrategy<(String, String)>) -> impl Strategy<Value = Expr> {
    let leaf = pattern.prop_map(|(f, p)| Expr::clause(f, p));
    leaf.prop_recursive(6, 48, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::or(a, b)),
        ]
    })
}

fn text_clause() -> BoxedStrategy<(String, String)> {
    (prop::sample::select(vec!["Name", "Room"]), any_pattern())
        .prop_map(|(f, p)| (f.to_string(), p))
        .boxed()
}

/// Patterns compile() accepts for each field kind.
fn valid_clause() -> BoxedStrategy<(String, String)> {
    let text = prop::sample::select(vec!["ab", "AB", "a*", "*b", "*a*", "a*b", "*", "", "a**b", "ba"]);
    prop_oneof![
        (prop::sample::select(vec!["Name", "Room"]), text.clone())
            .prop_map(|(f, p)| (f.to_string(), p.to_string())),
        (0i64..4).prop_map(|n| ("Count".to_string(), n.to_string())),
        prop_oneof![
            (1u32..4).prop_map(|d| format!("2011-01-0{d}")),
            Just("2011*".to_string()),
            Just("*-02".to_string()),
        ]
        .prop_map(|p| ("Bought".to_string(), p)),
    ]
    .boxed()
}

fn arb_row() -> impl Strategy<Value = BTreeMap<String, Value>> {
    let text = prop::option::of(prop::sample::select(vec!["ab", "Ab", "aab", "ba", "b", "", "axxb"]));
    (
        text.clone(),
        text,
        prop::option::of(0i64..4),
        prop::option::of(1u32..4),
    )
        .prop_map(|(n, r, c, d)| {
            let mut m = BTreeMap::new();
            m.insert("Name".into(), Value::from(n.map(str::to_string)));
            m.insert("Room".into(), Value::from(r.map(str::to_string)));
            m.insert("Count".into(), c.map_or(Value::Null, Value::Int));
            m.insert(
                "Bought".into(),
                Value::from(d.map(|d| {
                    NaiveDate::from_ymd_opt(2011, 1, d)
                        .unwrap()
                        .format("%Y-%m-%d")
                        .to_string()
                })),
            );
            m
        })
}

/// Reference semantics straight from the tree: `*` is a wildcard over
/// case-folded text, anything else is whole-value equality.
fn naive_glob(p: &[char], t: &[char]) -> bool {
    match p.split_first() {
        None => t.is_empty(),
        Some(('*', rest)) => (0..=t.len()).any(|i| naive_glob(rest, &t[i..])),
        Some((c, rest)) => t.first() == Some(c) && naive_glob(rest, &t[1..]),
    }
}

fn interpret(e: &Expr, row: &BTreeMap<String, Value>) -> bool {
    match e {
        Expr::And(a, b) => interpret(a, row) && interpret(b, row),
        Expr::Or(a, b) => interpret(a, row) || interpret(b, row),
        Expr::Clause { field, pattern } => {
            let v = &row[field];
            if field == "Count" {
                return v.as_int() == pattern.parse::<i64>().ok();
            }
            let Some(t) = v.as_text() else { return false };
            let p: Vec<char> = pattern.to_lowercase().chars().collect();
            let t: Vec<char> = t.to_lowercase().chars().collect();
            naive_glob(&p, &t)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fuzzed_trees_round_trip(e in arb_expr(text_clause())) {
        let s = fuzz_schema();
        let ast = QueryAst { root: Some(e) };
        let text = query::serialize(&ast);
        let back = query::parse(&text, &s).unwrap();
        prop_assert_eq!(&back, &ast);
        prop_assert_eq!(query::serialize(&back), text);
    }

    #[test]
    fn compiled_dnf_agrees_with_interpreter(e in arb_expr(valid_clause()), row in arb_row()) {
        let s = fuzz_schema();
        let ast = QueryAst { root: Some(e.clone()) };
        let dnf = query::compile(&ast, &s).unwrap();
        prop_assert_eq!(query::matches(&dnf, &row), interpret(&e, &row));
    }

    #[test]
    fn arbitrary_input_never_panics(s in "\\PC{0,40}") {
        let _ = query::parse(&s, &fuzz_schema());
    }
}
