use std::collections::BTreeSet;

use proptest::prelude::*;
use subchal_core::expr::{evaluate, membership, print, variables_used, ArithOp, CmpOp, LogicOp};
use subchal_core::trial_data::CovariateDef;
use subchal_core::{parse, Arm, CovariateSchema, CovariateValue, Expr, SubjectRecord, Tri, TrialDataset};

#[test]
fn conjunction_example_ast() {
    let want = Expr::and(
        Expr::cmp(CmpOp::Gt, Expr::var("CRP"), Expr::num(2.5)),
        Expr::cmp(CmpOp::Lt, Expr::var("AGE"), Expr::num(40.0)),
    );
    assert_eq!(parse("CRP > 2.5 & AGE < 40").unwrap(), want);
}

#[test]
fn score_example_ast() {
    let score = Expr::arith(
        ArithOp::Sub,
        Expr::arith(ArithOp::Mul, Expr::num(0.1), Expr::var("AGE")),
        Expr::arith(ArithOp::Mul, Expr::num(0.5), Expr::cmp(CmpOp::Eq, Expr::var("MTXUSE"), Expr::string("Yes"))),
    );
    let want = Expr::cmp(CmpOp::Gt, score, Expr::num(4.7));
    assert_eq!(parse("0.1*AGE - 0.5*(MTXUSE == 'Yes') > 4.7").unwrap(), want);
}

#[test]
fn canonical_spacing() {
    assert_eq!(print(&parse("CRP>2.5&AGE<40").unwrap()), "CRP > 2.5 & AGE < 40");
    assert_eq!(print(&parse("(AGE > 40)").unwrap()), "AGE > 40");
}

#[test]
fn variables_used_examples() {
    let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(variables_used(&parse("CRP > 2.5 & AGE < 40").unwrap()), set(&["AGE", "CRP"]));
    assert_eq!(variables_used(&parse("AGE > 40 | AGE < 20").unwrap()), set(&["AGE"]));
    assert_eq!(variables_used(&parse("1 < 2").unwrap()), set(&[]));
}

fn subject(id: usize, values: Vec<CovariateValue>) -> SubjectRecord {
    SubjectRecord {
        subject_id: format!("S{id:03}"),
        study_id: "T".into(),
        arm: if id % 2 == 0 { Arm::Control } else { Arm::Treatment },
        outcome: Some(false),
        discontinued: false,
        covariates: values,
    }
}

fn two_numeric() -> CovariateSchema {
    CovariateSchema::new(vec![CovariateDef::numeric("A"), CovariateDef::numeric("B"), CovariateDef::boolean("M")]).unwrap()
}

const STATES: [Tri; 3] = [Tri::Out, Tri::Unknown, Tri::In];

fn level(t: Tri) -> u8 {
    match t {
        Tri::Out => 0,
        Tri::Unknown => 1,
        Tri::In => 2,
    }
}

/// Value of `A` or `B` making `X > 0` evaluate to `t`.
fn value_for(t: Tri) -> CovariateValue {
    match t {
        Tri::In => CovariateValue::Numeric(1.0),
        Tri::Out => CovariateValue::Numeric(-1.0),
        Tri::Unknown => CovariateValue::Missing,
    }
}

#[test]
fn kleene_tables_are_min_max_and_negation() {
    for a in STATES {
        assert_eq!(level(a.not()), 2 - level(a));
        for b in STATES {
            assert_eq!(level(a.and(b)), level(a).min(level(b)), "{a:?} & {b:?}");
            assert_eq!(level(a.or(b)), level(a).max(level(b)), "{a:?} | {b:?}");
        }
    }
}

#[test]
fn kleene_semantics_through_evaluation() {
    let schema = two_numeric();
    let conj = parse("A > 0 & B > 0").unwrap();
    let disj = parse("A > 0 | B > 0").unwrap();
    let neg = parse("!(A > 0)").unwrap();
    let sum = parse("A + B > -5").unwrap();
    for a in STATES {
        for b in STATES {
            let s = subject(0, vec![value_for(a), value_for(b), CovariateValue::Boolean(true)]);
            let eval = |e: &Expr| evaluate(e, &schema, &s).unwrap();
            assert_eq!(eval(&conj), a.and(b));
            assert_eq!(eval(&disj), a.or(b));
            assert_eq!(eval(&neg), a.not());
            let any_missing = a == Tri::Unknown || b == Tri::Unknown;
            assert_eq!(eval(&sum), if any_missing { Tri::Unknown } else { Tri::In });
        }
    }
}

#[test]
fn documented_missing_data_cases() {
    let schema = CovariateSchema::new(vec![CovariateDef::numeric("CRP"), CovariateDef::numeric("AGE")]).unwrap();
    let e = parse("CRP > 2.5 & AGE < 40").unwrap();
    let eval = |crp: CovariateValue, age: f64| evaluate(&e, &schema, &subject(0, vec![crp, CovariateValue::Numeric(age)])).unwrap();
    assert_eq!(eval(CovariateValue::Numeric(3.0), 30.0), Tri::In);
    assert_eq!(eval(CovariateValue::Missing, 50.0), Tri::Out);
    assert_eq!(eval(CovariateValue::Missing, 30.0), Tri::Unknown);
}

#[test]
fn boolean_coercion_and_division_by_zero() {
    let schema = two_numeric();
    let s = subject(0, vec![CovariateValue::Numeric(2.0), CovariateValue::Numeric(0.0), CovariateValue::Boolean(true)]);
    let eval = |t: &str| evaluate(&parse(t).unwrap(), &schema, &s).unwrap();
    assert_eq!(eval("A + (M == TRUE) > 2.5"), Tri::In);
    assert_eq!(eval("A + (M == FALSE) > 2.5"), Tri::Out);
    assert_eq!(eval("A / B > 1"), Tri::Unknown);
    let missing = subject(1, vec![CovariateValue::Numeric(2.0), CovariateValue::Numeric(0.0), CovariateValue::Missing]);
    assert_eq!(evaluate(&parse("A + (M == TRUE) > 0").unwrap(), &schema, &missing).unwrap(), Tri::Unknown);
}

#[test]
fn tautology_contradiction_and_unknown_count() {
    let schema = CovariateSchema::new(vec![CovariateDef::numeric("AGE"), CovariateDef::numeric("CRP")]).unwrap();
    let subjects = (0..6)
        .map(|i| {
            let crp = if i == 3 { CovariateValue::Missing } else { CovariateValue::Numeric(i as f64) };
            subject(i, vec![CovariateValue::Numeric(20.0 + i as f64), crp])
        })
        .collect();
    let ds = TrialDataset::new("T", schema, subjects).unwrap();
    let m = |t: &str| membership(&parse(t).unwrap(), &ds).unwrap();
    assert!(m("AGE > 0 | AGE <= 0").flags.iter().all(|&f| f));
    assert!(m("AGE > 0 & AGE < 0").flags.iter().all(|&f| !f));
    let crp = m("CRP > 2.5");
    assert_eq!(crp.flags, vec![false, false, false, false, true, true]);
    assert_eq!(crp.unknown_count, 1);
}

const NAMES: [&str; 4] = ["AGE", "CRP", "tnf_naive", "X.v2"];

fn number() -> impl Strategy<Value = Expr> {
    prop_oneof![(0u32..1000).prop_map(|n| Expr::num(f64::from(n))), (0.0f64..1e4).prop_map(Expr::num)]
}

fn numeric_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![number(), prop::sample::select(NAMES.to_vec()).prop_map(Expr::var)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (prop::sample::select(vec![ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::arith(op, l, r)),
            inner.prop_map(Expr::neg),
        ]
    })
}

fn comparison() -> impl Strategy<Value = Expr> {
    let ops = vec![CmpOp::Gt, CmpOp::Ge, CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne];
    prop_oneof![
        (prop::sample::select(ops), numeric_expr(), numeric_expr()).prop_map(|(op, l, r)| Expr::cmp(op, l, r)),
        (prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne]), prop::sample::select(NAMES.to_vec()), "[a-zA-Z ]{1,6}")
            .prop_map(|(op, v, s)| Expr::cmp(op, Expr::var(v), Expr::string(&s))),
        (any::<bool>(), prop::sample::select(NAMES.to_vec())).prop_map(|(b, v)| Expr::cmp(CmpOp::Eq, Expr::var(v), Expr::Bool(b))),
    ]
}

fn boolean_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        3 => comparison(),
        1 => (any::<bool>(), comparison()).prop_map(|(b, c)| Expr::or(Expr::Bool(b), c)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (prop::sample::select(vec![LogicOp::And, LogicOp::Or]), inner.clone(), inner.clone()).prop_map(|(op, l, r)| match op {
                LogicOp::And => Expr::and(l, r),
                LogicOp::Or => Expr::or(l, r),
            }),
            inner.prop_map(Expr::not),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_parse_round_trip(e in boolean_expr()) {
        let text = print(&e);
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(&back, &e, "{}", text);
        prop_assert_eq!(print(&back), text);
    }

    #[test]
    fn spacing_does_not_change_the_tree(e in boolean_expr()) {
        let once = print(&e);
        let squeezed = squeeze(&once);
        prop_assert_eq!(print(&parse(&squeezed).unwrap()), once);
    }

    #[test]
    fn variables_used_matches_ast_walk(e in boolean_expr()) {
        let mut want = BTreeSet::new();
        collect_vars(&e, &mut want);
        prop_assert_eq!(variables_used(&e), want);
    }
}

/// Drops spaces outside string literals.
fn squeeze(text: &str) -> String {
    let mut out = String::new();
    let mut quote = None;
    for c in text.chars() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, ' ') => continue,
            _ => {}
        }
        out.push(c);
    }
    out
}

fn collect_vars(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(name) => {
            out.insert(name.clone());
        }
        Expr::Neg(x) | Expr::Not(x) => collect_vars(x, out),
        Expr::Arith(_, l, r) | Expr::Compare(_, l, r) | Expr::Logic(_, l, r) => {
            collect_vars(l, out);
            collect_vars(r, out);
        }
        Expr::Number(_) | Expr::Str(_) | Expr::Bool(_) => {}
    }
}
