use super::ast::pretty;
use super::*;

const ACK: &str = include_str!("../../programs/ack.mc");
const SIEVE: &str = include_str!("../../programs/sieve.mc");

// The printer is a deterministic function of structure alone, so reaching a
// print fixpoint after one reparse means the reparse preserved the program
// (spans legitimately move).
fn round_trip(src: &str) {
    let first = parse(src).expect("source parses");
    let printed = pretty(&first);
    let second = parse(&printed)
        .unwrap_or_else(|e| panic!("printed form does not reparse: {e}\n{printed}"));
    assert_eq!(printed, pretty(&second), "printed form changed meaning");
}

mod parsing {
    use super::*;

    #[test]
    fn ackermann_round_trips() {
        round_trip(ACK);
    }

    #[test]
    fn sieve_round_trips() {
        round_trip(SIEVE);
    }

    #[test]
    fn kitchen_sink_round_trips() {
        round_trip(
            r#"
            const int CAP = 8;
            int seen;                 // a global scalar, zero by default
            int table[CAP] = {[0 ... 3] = 1, 5, 6,};

            /* entry: walks a local array through a restrict pointer */
            int main(int n) {
                int a[4] = {3, 1, 4, 1};
                int *p restrict a = a + 3;
                struct { int lo; int hi; } bounds;
                bounds.lo = 0;
                bounds.hi = -1;
                while (1) {
                    if (bounds.lo >= 4 || !n) break;
                    p = p - 1;
                    ;
                    bounds.lo = bounds.lo + 1;
                }
                for (int i = 0; i < 4; ++i) {
                    if (a[i] == 1) continue;
                    seen = seen + *p + table[i] + bounds.hi;
                }
                return seen % 13 + CAP * (n != 0 && seen <= 99);
            }
            "#,
        );
    }

    #[test]
    fn dynamic_array_declarations_parse() {
        round_trip("int f(int n) { int a[n]; a[0] = n; return a[0]; }");
    }

    // The published prime-sieve listing, keystroke for keystroke (its inner
    // loop steps by one — see programs/sieve.mc for the executable variant).
    #[test]
    fn published_sieve_listing_parses() {
        round_trip(
            "int S(int n) { int a[N]={[0 ... N-1]=1,};
                if (n>N||n<3) return 0;
                for (int i=2; i<n; ++i) {
                    if (!a[i]) continue;
                    for (int j= 2*i; j<n; ++j) a[j]=0;
                    };
                for (int i=n-1; i>2; --i)
                    if (a[i]) return i;
                return 0;
            }",
        );
    }

    #[test]
    fn pointer_without_restrict_still_parses() {
        // Rejection happens in the type checker, with a type error.
        let prog = parse("int f() { int *p; return 0; }").expect("parses");
        assert!(matches!(
            &prog.items[..],
            [Item::Function(f)]
                if matches!(&f.body.stmts[..], [Stmt::Decl(Decl::Pointer { array: None, .. }), ..])
        ));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("int f() {\n  return 1 +;\n}").unwrap_err();
        match err {
            FrontendError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert!(col > 1);
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn unterminated_comments_are_syntax_errors() {
        assert!(matches!(
            parse("int f() { /* no end").unwrap_err(),
            FrontendError::Syntax { .. }
        ));
    }

    #[test]
    fn prefix_increment_becomes_plus_one() {
        let prog = parse("int f(int i) { ++i; return i; }").unwrap();
        let printed = pretty(&prog);
        assert!(printed.contains("i = i + 1"), "desugared form missing:\n{printed}");
    }
}

mod typing {
    use super::*;

    fn check(src: &str) -> TProgram {
        check_source(src).expect("program type-checks")
    }

    fn check_err(src: &str) -> FrontendError {
        check_source(src).expect_err("program must be rejected")
    }

    #[test]
    fn ackermann_layout_is_exact() {
        let prog = check(ACK);
        let f = prog.entry();
        assert_eq!(f.name, "A");
        assert_eq!(f.params, ["m", "n"]);
        // two params, no locals, three spill slots for the nested call
        assert_eq!(f.frame.vars, 2);
        assert_eq!(f.frame.scratch_count, 3);
        assert_eq!(f.frame.size, 7);
        assert_eq!(f.frame.ra_slot, 5);
        assert_eq!(f.frame.fp_slot, 6);
    }

    #[test]
    fn sieve_layout_is_exact() {
        let prog = check(SIEVE);
        let f = prog.entry();
        // n, a[30], i, j, i  → 34 variable words
        assert_eq!(f.frame.vars, 34);
        assert_eq!(f.frame.scratch_count, 1);
        assert_eq!(f.frame.size, 37);
    }

    #[test]
    fn layout_is_deterministic() {
        let a = check(SIEVE);
        let b = check(SIEVE);
        assert_eq!(a.entry().frame, b.entry().frame);
    }

    #[test]
    fn struct_fields_are_contiguous_slots() {
        let prog = check(
            "int f() { struct { int a; int b; } s; s.a = 1; s.b = 2; return s.a + s.b; }",
        );
        let body = &prog.entry().body;
        let slot_of = |stmt: &TStmt| match stmt {
            TStmt::Expr(TExpr { kind: TExprKind::Assign { target: LValue::Slot { slot, .. }, .. }, .. }) => *slot,
            other => panic!("expected slot assignment, got {other:?}"),
        };
        assert_eq!(slot_of(&body.stmts[0]), 0);
        assert_eq!(slot_of(&body.stmts[1]), 1);
    }

    #[test]
    fn globals_get_ascending_heap_addresses() {
        let prog = check("int g = 5; int h[3] = {7, 8}; int f() { return g + h[0]; }");
        assert_eq!(prog.globals.len(), 2);
        assert_eq!(prog.globals[0].base, GLOBAL_BASE);
        assert_eq!(prog.globals[0].init, [5]);
        assert_eq!(prog.globals[1].base, GLOBAL_BASE + 1);
        assert_eq!(prog.globals[1].init, [7, 8, 0]);
        assert_eq!(prog.heap_end(), GLOBAL_BASE + 4);
    }

    #[test]
    fn pointer_without_restrict_is_a_type_error() {
        assert!(matches!(
            check_err("int f() { int a[4]; int *p; return 0; }"),
            FrontendError::Type { .. }
        ));
    }

    #[test]
    fn pointer_cannot_leave_its_array() {
        let err = check_err(
            "int f() { int a[4]; int b[4]; int *p restrict a; p = b; return 0; }",
        );
        assert!(matches!(err, FrontendError::Type { .. }), "{err}");
    }

    #[test]
    fn pointer_value_is_not_an_int() {
        let err = check_err("int f() { int a[4]; int *p restrict a = a; return p; }");
        assert!(matches!(err, FrontendError::Type { .. }), "{err}");
    }

    #[test]
    fn zero_size_array_is_a_layout_error() {
        assert!(matches!(
            check_err("int f() { int a[0]; return 0; }"),
            FrontendError::Layout { .. }
        ));
        assert!(matches!(
            check_err("int f() { int a[1-2]; return 0; }"),
            FrontendError::Layout { .. }
        ));
    }

    #[test]
    fn dynamic_array_size_must_be_a_parameter() {
        let prog = check("int f(int n) { int a[n]; a[0] = n; return a[0]; }");
        let names = &prog.entry().frame.names;
        assert!(names.iter().any(|(n, s)| n == "a" && *s == 1));
        // one cap-sized reservation: n, a[64]  (+ no other locals)
        assert_eq!(prog.entry().frame.vars, 1 + DYNAMIC_ARRAY_CAP);

        let err = check_err("int f(int n) { int m = n; int a[m]; return 0; }");
        assert!(matches!(err, FrontendError::Type { .. }), "{err}");
    }

    #[test]
    fn dynamic_arrays_cannot_take_initializers() {
        assert!(matches!(
            check_err("int f(int n) { int a[n] = {1}; return 0; }"),
            FrontendError::Type { .. }
        ));
    }

    #[test]
    fn oversized_initializers_are_rejected() {
        assert!(matches!(
            check_err("int f() { int a[2] = {1, 2, 3}; return 0; }"),
            FrontendError::Type { .. }
        ));
        assert!(matches!(
            check_err("int f() { int a[4] = {[0 ... 4] = 1}; return 0; }"),
            FrontendError::Type { .. }
        ));
    }

    #[test]
    fn ordered_comparisons_normalize_to_less_than() {
        let prog = check("int f(int a, int b) { return a <= b; }");
        let ret = match &prog.entry().body.stmts[..] {
            [TStmt::Return(e)] => e,
            other => panic!("unexpected body {other:?}"),
        };
        // a <= b  ⇒  !(b < a)
        match &ret.kind {
            TExprKind::Not(inner) => match &inner.kind {
                TExprKind::Cmp { op: CmpOp::Lt, lhs, rhs } => {
                    assert!(matches!(&lhs.kind, TExprKind::Load(LValue::Slot { slot: 1, .. })));
                    assert!(matches!(&rhs.kind, TExprKind::Load(LValue::Slot { slot: 0, .. })));
                }
                other => panic!("expected <, got {other:?}"),
            },
            other => panic!("expected negation, got {other:?}"),
        }
    }

    #[test]
    fn constant_subexpressions_fold() {
        let prog = check("int f() { return 6 * 7 + (10 < 3); }");
        assert!(matches!(
            &prog.entry().body.stmts[..],
            [TStmt::Return(TExpr { kind: TExprKind::Int(42), .. })]
        ));
    }

    #[test]
    fn constant_division_by_zero_is_rejected() {
        assert!(matches!(check_err("int f() { return 1 / 0; }"), FrontendError::Type { .. }));
    }

    #[test]
    fn call_arity_is_checked() {
        let err = check_err("int f(int x) { return g(1, 2); } int g(int a) { return a; }");
        assert!(matches!(err, FrontendError::Type { .. }), "{err}");
        let err = check_err("int f() { return missing(); }");
        assert!(matches!(err, FrontendError::Type { .. }), "{err}");
    }

    #[test]
    fn too_many_parameters_are_rejected() {
        let err = check_err("int f(int a, int b, int c, int d, int e) { return 0; }");
        assert!(matches!(err, FrontendError::Type { .. }), "{err}");
    }

    #[test]
    fn break_outside_a_loop_is_rejected() {
        assert!(matches!(check_err("int f() { break; return 0; }"), FrontendError::Type { .. }));
        assert!(matches!(
            check_err("int f() { if (1) continue; return 0; }"),
            FrontendError::Type { .. }
        ));
    }

    #[test]
    fn unknown_names_report_their_position() {
        match check_err("int f() {\n    return x;\n}") {
            FrontendError::Type { line, col, msg } => {
                assert_eq!(line, 2);
                assert!(col >= 12, "col {col}");
                assert!(msg.contains('x'));
            }
            other => panic!("expected type error, got {other}"),
        }
    }

    #[test]
    fn block_scoped_shadowing_gets_distinct_slots() {
        let prog = check(
            "int f() { int x = 1; { int x = 2; x = 3; } x = 4; return x; }",
        );
        let names = &prog.entry().frame.names;
        let slots: Vec<u32> =
            names.iter().filter(|(n, _)| n == "x").map(|(_, s)| *s).collect();
        assert_eq!(slots, [0, 1]);
        assert_eq!(prog.entry().frame.vars, 2);
    }

    #[test]
    fn local_constants_fold_and_leave_no_slot() {
        let prog = check("int f() { const int K = 6; return K * 7; }");
        assert_eq!(prog.entry().frame.vars, 0);
        assert!(matches!(
            &prog.entry().body.stmts[..],
            [TStmt::Return(TExpr { kind: TExprKind::Int(42), .. })]
        ));
    }

    #[test]
    fn entry_point_is_the_first_function() {
        let prog = check("int first() { return second(); } int second() { return 9; }");
        assert_eq!(prog.entry().name, "first");
        assert_eq!(prog.functions[1].name, "second");
    }

    #[test]
    fn spill_depths_cover_nested_calls() {
        // g(g(1,2), g(3, g(4,5)))'s arguments need three in-flight slots.
        let prog = check(
            "int f() { return g(g(1, 2), g(3, g(4, 5))); } int g(int a, int b) { return a + b; }",
        );
        assert!(prog.entry().frame.scratch_count >= 3);
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    /// Expression generator over a fixed set of declared variables.
    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0u32..3).prop_map(|i| ["x", "y", "z"][i as usize].to_string()),
            (-9i32..100).prop_map(|n| if n < 0 { format!("({n})") } else { n.to_string() }),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), 0usize..13).prop_map(|(a, b, op)| {
                    let sym = ["+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||"][op];
                    format!("{a} {sym} {b}")
                }),
                inner.clone().prop_map(|a| format!("!({a})")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.prop_map(|a| format!("({a})")),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn generated_expressions_round_trip(body in arb_expr()) {
            let src = format!("int f(int x, int y, int z) {{ return {body}; }}");
            let first = parse(&src).expect("generated source parses");
            let printed = pretty(&first);
            let second = parse(&printed).expect("printed source parses");
            prop_assert_eq!(printed, pretty(&second));
        }

        #[test]
        fn spill_estimate_never_shrinks_under_wrapping(extra in 0u32..4) {
            // Deeper right-leaning towers need monotonically more slots.
            let mut body = String::from("x");
            for _ in 0..extra {
                body = format!("x + ({body})");
            }
            let src = format!("int f(int x) {{ return {body}; }}");
            let prog = check_source(&src).expect("checks");
            prop_assert!(prog.entry().frame.scratch_count >= extra.min(1));
        }
    }
}
