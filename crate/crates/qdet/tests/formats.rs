use proptest::prelude::*;
use qdet::formats::*;
use qdet_core::analyzer::Prepared;
use qdet_core::generators::*;
use qdet_core::*;

#[test]
fn expression_json_examples() {
    let mut ar = ExprArena::new();
    let b1 = ar.named("b1", &[]);
    let b2 = ar.named("b2", &[]);
    let sum = ar.binary(Op::Add, b1, b2).unwrap();
    let neg = ar.unary(Op::Neg, b1).unwrap();
    assert_eq!(parse_expr(&mut ar, r#"{"op":"+","fO":"b1","sO":"b2"}"#).unwrap(), sum);
    assert_eq!(parse_expr(&mut ar, r#"{"op":"neg","od":"b1"}"#).unwrap(), neg);
    assert_eq!(parse_expr(&mut ar, r#"{"op":"-","od":"b1"}"#).unwrap(), neg);
    assert_eq!(serialize_expr(&ar, sum), r#"{"op":"add","fO":"b1","sO":"b2"}"#);
    assert_eq!(serialize_expr(&ar, neg), r#"{"op":"neg","od":"b1"}"#);

    let c = parse_expr(&mut ar, r#"{"op":"le","fO":"A(1,2)","sO":0.5}"#).unwrap();
    assert_eq!(serialize_expr(&ar, c), r#"{"op":"le","fO":"A(1,2)","sO":0.5}"#);
    let g = parse_expr(&mut ar, r#"{"op":"and","fO":"p","sO":{"op":"eq","fO":"q","sO":true}}"#).unwrap();
    assert_eq!(ar.evaluate(g, &[(VarRef::scalar("p"), Value::Bool(true)), (VarRef::scalar("q"), Value::Bool(true))].into()), Ok(Value::Bool(true)));

    for bad in [r#"{"op":"add","fO":"b1"}"#, r#"{"op":"pow","fO":"b1","sO":"b2"}"#, r#"{"op":"and","fO":1,"sO":"b2"}"#, "[1]", r#""1x""#] {
        assert!(parse_expr(&mut ar, bad).is_err(), "{bad}");
    }
}

fn recipe() -> impl Strategy<Value = Vec<(u8, usize, usize)>> {
    prop::collection::vec((0u8..8, any::<usize>(), any::<usize>()), 1..30)
}

proptest! {
    #[test]
    fn expressions_round_trip(steps in recipe()) {
        let mut ar = ExprArena::new();
        let mut nums: Vec<ExprId> = (0..3).map(|i| ar.named("x", &[i])).collect();
        nums.push(ar.num(-2.5).unwrap());
        let mut bools: Vec<ExprId> = vec![ar.boolean(false)];
        for (o, a, b) in steps {
            let (x, y) = (nums[a % nums.len()], nums[b % nums.len()]);
            let (p, q) = (bools[a % bools.len()], bools[b % bools.len()]);
            match o {
                0 => nums.push(ar.binary(Op::Add, x, y).unwrap()),
                1 => nums.push(ar.binary(Op::Div, x, y).unwrap()),
                2 => nums.push(ar.unary(Op::Abs, x).unwrap()),
                3 => nums.push(ar.unary(Op::Neg, x).unwrap()),
                4 => bools.push(ar.binary(Op::Lt, x, y).unwrap()),
                5 => bools.push(ar.binary(Op::Or, p, q).unwrap()),
                6 => bools.push(ar.unary(Op::Not, p).unwrap()),
                _ => bools.push(ar.binary(Op::Ne, p, q).unwrap()),
            }
        }
        for &id in nums.iter().chain(&bools) {
            let text = serialize_expr(&ar, id);
            prop_assert_eq!(parse_expr(&mut ar, &text).unwrap(), id);
            let mut fresh = ExprArena::new();
            let again = parse_expr(&mut fresh, &text).unwrap();
            prop_assert_eq!(serialize_expr(&fresh, again), text);
        }
    }
}

fn determinants() -> Vec<(&'static str, QDeterminant)> {
    let b = |fc: Flowchart, cfg: BuildConfig| build_qdet(&fc, &cfg).unwrap();
    vec![
        ("scalar", b(gen_scalar_product(5, true), BuildConfig::new(&[("n", 5)]))),
        ("matmul", gen_matmul(2, 3, 2, false)),
        ("gauss-jordan", b(gen_gauss_jordan(3), BuildConfig::new(&[("n", 3)]))),
        ("jacobi", b(gen_jacobi_linear(2, 3), BuildConfig::new(&[("n", 2)]).with_iterations(3))),
        ("jacobi-long", b(gen_jacobi_linear(4, 40), BuildConfig::new(&[("n", 4)]).with_iterations(40))),
        ("gauss-seidel", b(gen_gauss_seidel(3, 2), BuildConfig::new(&[("n", 3)]).with_iterations(2))),
        ("grid", gen_grid_jacobi(2, 3, 2)),
    ]
}

#[test]
fn determinant_files_are_byte_stable() {
    for (name, q) in determinants() {
        let text = serialize_qdet(&q);
        let back = parse_qdet(&text).unwrap();
        assert_eq!(serialize_qdet(&back), text, "{name}");
        assert_eq!(back.key(), q.key(), "{name}");
        assert_eq!(back.classify(), q.classify(), "{name}");
        let f = AnalysisFlags::default();
        let (a, b) = (analyze(&q, f), analyze(&back, f));
        assert_eq!((a.d, a.p), (b.d, b.p), "{name}");
    }
}

#[test]
fn large_determinants_name_shared_parts() {
    let all = determinants();
    let text = serialize_qdet(&all.iter().find(|d| d.0 == "jacobi-long").unwrap().1);
    assert!(text.contains("\n#def 1 = "));
    assert!(text.len() < 1 << 20);
    let small = serialize_qdet(&all[0].1);
    assert!(!small.contains("#def"));
}

#[test]
fn unconditional_line_shape() {
    let mut ar = ExprArena::new();
    let b1 = ar.named("b1", &[]);
    let b2 = ar.named("b2", &[]);
    let w = ar.binary(Op::Add, b1, b2).unwrap();
    let mut q = QDeterminant::new(ar, Default::default(), 0);
    q.insert(VarRef::scalar("y"), QTerm::Unconditional(w)).unwrap();
    assert_eq!(serialize_qdet(&q), "y =   ; {\"op\":\"add\",\"fO\":\"b1\",\"sO\":\"b2\"}\n");
}

#[test]
fn conditional_values_survive() {
    let text = "y = {\"op\":\"gt\",\"fO\":\"b1\",\"sO\":0} ; \"b2\"\n\
                y = {\"op\":\"le\",\"fO\":\"b1\",\"sO\":0} ; {\"op\":\"neg\",\"od\":\"b2\"}\n";
    let q = parse_qdet(text).unwrap();
    assert_eq!(serialize_qdet(&q), text);
    let i: Interpretation = [(VarRef::scalar("b1"), Value::Num(1.0)), (VarRef::scalar("b2"), Value::Num(7.0))].into();
    assert_eq!(q.value(&i).unwrap()[&VarRef::scalar("y")], Outcome::Value(Value::Num(7.0)));
}

#[test]
fn parse_errors_name_the_line() {
    let cases = [
        ("#param n=2\ny = \"b\"\n", 2),
        ("#param n=x\n", 1),
        ("y =   ; \"b\"\ny =   ; \"c\"\n", 1),
        ("#bogus\n", 1),
        ("\n\ny = {\"op\":\"gt\",\"fO\":\"b\"} ; \"b\"\n", 3),
        ("#def 2 = \"b\"\n", 1),
    ];
    for (text, line) in cases {
        match parse_qdet(text) {
            Err(FormatError::Line { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn flowcharts() {
    let min = r#"{"Vertices":[{"Id":0,"Type":0,"Content":""},{"Id":1,"Type":1,"Content":""}],
                 "Edges":[{"From":0,"To":1,"Type":2}]}"#;
    assert!(parse_flowchart(min).unwrap().validate().is_empty());
    let bad = min.replace("\"Type\":1,", "\"Type\":9,");
    assert!(matches!(
        parse_flowchart(&bad),
        Err(FormatError::Flowchart(qdet_core::flowchart::FlowchartError::UnknownBlockType { ty: 9, .. }))
    ));
    let dangling = min.replace("\"To\":1", "\"To\":7");
    assert!(parse_flowchart(&dangling).is_err());

    let fc = gen_gauss_seidel(3, 4);
    let text = serialize_flowchart(&fc);
    let back = parse_flowchart(&text).unwrap();
    assert_eq!(back, fc);
    assert_eq!(serialize_flowchart(&back), text);
}

#[test]
fn schedules() {
    let q = build_qdet(&gen_scalar_product(4, false), &BuildConfig::new(&[("n", 4)])).unwrap();
    for sharing in [Sharing::Dag, Sharing::Tree] {
        let prep = Prepared::new(&q, true);
        let s = prep.schedule(sharing);
        let text = export_schedule(&prep.arena, &s);
        let doc = parse_schedule(&text).unwrap();
        assert_eq!(doc.sizes(), [4, 2, 1]);
        assert_eq!(doc, schedule_doc(&prep.arena, &s));
        assert_eq!(doc.levels[0][0].op, "mul");
        assert!(matches!(doc.levels[1][0].args[0], Arg::Node(_)));
    }
}

#[test]
fn bindings() {
    let b = parse_bindings("A(1,2)=3, e=1e-6,ok=true").unwrap();
    assert_eq!(b[0], (VarRef::new("A", &[1, 2]), Value::Num(3.0)));
    assert_eq!(b[1].1, Value::Num(1e-6));
    assert_eq!(b[2].1, Value::Bool(true));
    assert!(parse_bindings("x").is_err());
    assert!(parse_bindings("x=abc").is_err());
}
