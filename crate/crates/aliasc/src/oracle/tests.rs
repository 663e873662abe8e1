use super::*;
use crate::frontend::check_source;

const ACK: &str = include_str!("../../programs/ack.mc");
const SIEVE: &str = include_str!("../../programs/sieve.mc");

const FUEL: u64 = 10_000_000;

fn run(src: &str, args: &[i32]) -> Outcome {
    let prog = check_source(src).expect("program checks");
    eval_program(&prog, args, FUEL).expect("evaluation completes").outcome
}

fn run_err(src: &str, args: &[i32], fuel: u64) -> OracleError {
    let prog = check_source(src).expect("program checks");
    eval_program(&prog, args, fuel).expect_err("evaluation must fail")
}

#[test]
fn ackermann_values_are_frozen() {
    for (m, n, expect) in [(0, 0, 1), (1, 1, 3), (2, 2, 7), (2, 3, 9), (3, 1, 13), (3, 3, 61)] {
        assert_eq!(run(ACK, &[m, n]), Outcome::Value(expect), "A({m},{n})");
    }
}

#[test]
fn sieve_values_are_frozen() {
    for (n, expect) in [(2, 0), (3, 0), (4, 3), (10, 7), (29, 23), (30, 29), (31, 0)] {
        assert_eq!(run(SIEVE, &[n]), Outcome::Value(expect), "S({n})");
    }
}

#[test]
fn arithmetic_wraps_like_the_machine() {
    let src = "int f(int x, int y) { return x + y; }";
    assert_eq!(run(src, &[i32::MAX, 1]), Outcome::Value(i32::MIN));
    let src = "int f(int x, int y) { return x * y; }";
    assert_eq!(run(src, &[1 << 20, 1 << 20]), Outcome::Value(0));
    let src = "int f(int x) { return -x; }";
    assert_eq!(run(src, &[i32::MIN]), Outcome::Value(i32::MIN));
}

#[test]
fn division_truncates_toward_zero() {
    let src = "int f(int a, int b) { return a / b; }";
    assert_eq!(run(src, &[-7, 3]), Outcome::Value(-2));
    assert_eq!(run(src, &[7, -3]), Outcome::Value(-2));
    assert_eq!(run(src, &[i32::MIN, -1]), Outcome::Value(i32::MIN));
    let src = "int f(int a, int b) { return a % b; }";
    assert_eq!(run(src, &[-7, 3]), Outcome::Value(-1));
    assert_eq!(run(src, &[7, -3]), Outcome::Value(1));
    assert_eq!(run(src, &[i32::MIN, -1]), Outcome::Value(0));
}

#[test]
fn division_by_zero_traps() {
    assert_eq!(
        run("int f(int d) { return 10 / d; }", &[0]),
        Outcome::Trap(Trap::DivideByZero)
    );
    assert_eq!(
        run("int f(int d) { return 10 % d; }", &[0]),
        Outcome::Trap(Trap::DivideByZero)
    );
}

#[test]
fn out_of_bounds_indexing_traps() {
    let src = "int f(int i) { int a[4] = {1, 2, 3, 4}; return a[i]; }";
    assert_eq!(run(src, &[0]), Outcome::Value(1));
    assert_eq!(run(src, &[3]), Outcome::Value(4));
    assert_eq!(run(src, &[4]), Outcome::Trap(Trap::OutOfBounds));
    assert_eq!(run(src, &[-1]), Outcome::Trap(Trap::OutOfBounds));
}

#[test]
fn dynamic_arrays_bound_by_runtime_size_and_capacity() {
    let src = "
        int f(int n, int i) {
            int a[n];
            for (int d = 0; d < n && d < 64; d = d + 1) a[d] = d * 10;
            return a[i];
        }";
    assert_eq!(run(src, &[5, 4]), Outcome::Value(40));
    assert_eq!(run(src, &[5, 5]), Outcome::Trap(Trap::OutOfBounds));
    // Size above the reserved capacity: the capacity bounds the access.
    assert_eq!(run(src, &[100, 63]), Outcome::Value(630));
    assert_eq!(run(src, &[100, 70]), Outcome::Trap(Trap::OutOfBounds));
}

#[test]
fn dynamic_array_size_outside_reservation_falls_back_to_capacity() {
    // The runtime bound loop counts upward and stops on equality, so a
    // negative size never stops it; the reservation cap rules instead.
    let src = "
        int f(int n, int i) {
            int a[n];
            a[i] = 9;
            return a[i];
        }";
    assert_eq!(run(src, &[-5, 2]), Outcome::Value(9));
    assert_eq!(run(src, &[-5, 64]), Outcome::Trap(Trap::OutOfBounds));
    assert_eq!(run(src, &[-5, -1]), Outcome::Trap(Trap::OutOfBounds));
}

#[test]
fn pointers_step_within_their_array() {
    let src = "
        int f() {
            int a[8] = {10, 11, 12, 13, 14, 15, 16, 17};
            int *p restrict a = a + 7;
            p = p - 1;
            p = p - 1;
            p = p - 1;
            p = p - 1;
            p = p - 1;
            return *p;
        }";
    assert_eq!(run(src, &[]), Outcome::Value(12));
}

#[test]
fn deref_with_offset_reads_the_shifted_element() {
    let src = "
        int f(int k) {
            int a[6] = {0, 10, 20, 30, 40, 50};
            int *p restrict a = a;
            return *(p + k) + *(p + 2);
        }";
    assert_eq!(run(src, &[3]), Outcome::Value(50));
    assert_eq!(run(src, &[6]), Outcome::Trap(Trap::OutOfBounds));
}

#[test]
fn pointer_aimed_past_the_end_traps_on_use() {
    let src = "
        int f() {
            int a[4] = {1, 2, 3, 4};
            int *p restrict a = a + 4;
            return *p;
        }";
    assert_eq!(run(src, &[]), Outcome::Trap(Trap::OutOfBounds));
}

#[test]
fn globals_persist_across_calls() {
    let src = "
        int calls;
        int f() { bump(); bump(); bump(); return calls; }
        int bump() { calls = calls + 1; return 0; }";
    assert_eq!(run(src, &[]), Outcome::Value(3));
}

#[test]
fn global_arrays_start_from_their_initializers() {
    let src = "
        int t[5] = {[0 ... 2] = 7, 9};
        int f() { return t[0] + t[2] + t[3] + t[4]; }";
    assert_eq!(run(src, &[]), Outcome::Value(7 + 7 + 9 + 0));
}

#[test]
fn short_circuits_skip_side_effects() {
    let src = "
        int f() {
            int x = 0;
            0 && (x = 5);
            1 || (x = 7);
            return x;
        }";
    assert_eq!(run(src, &[]), Outcome::Value(0));
}

#[test]
fn struct_fields_hold_independent_values() {
    let src = "
        int f() {
            struct { int a; int b; } s;
            s.a = 3;
            s.b = 4;
            s.a = s.a + s.b;
            return s.a * 10 + s.b;
        }";
    assert_eq!(run(src, &[]), Outcome::Value(74));
}

#[test]
fn assignment_log_tracks_scalars_in_order() {
    let src = "
        int g;
        int f(int n) {
            int x = n + 1;
            g = x * 2;
            x = g - n;
            return x;
        }";
    let prog = check_source(src).unwrap();
    let eval = eval_program(&prog, &[10], FUEL).unwrap();
    assert_eq!(eval.outcome, Outcome::Value(12));
    let log: Vec<(&str, i32)> =
        eval.assignments.iter().map(|a| (a.name.as_str(), a.value)).collect();
    assert_eq!(log, [("x", 11), ("g", 22), ("x", 12)]);
}

#[test]
fn loop_flow_matches_c() {
    let src = "
        int f(int n) {
            int total = 0;
            for (int i = 0; i < n; ++i) {
                if (i % 2 == 0) continue;
                if (i > 7) break;
                total = total + i;
            }
            while (n) {
                total = total + 100;
                n = n - 2;
                if (n < 0) return -1;
            }
            return total;
        }";
    // odd i in 1..=7 → 1+3+5+7 = 16; n=10 → five while turns
    assert_eq!(run(src, &[10]), Outcome::Value(516));
    assert_eq!(run(src, &[9]), Outcome::Value(-1));
}

#[test]
fn fuel_runs_out_on_infinite_loops() {
    let err = run_err("int f() { int x = 0; while (1) x = x + 1; return x; }", &[], 10_000);
    assert!(matches!(err, OracleError::FuelExhausted { .. }));
}

#[test]
fn uninitialized_reads_are_flagged() {
    let err = run_err("int f() { int x; return x; }", &[], FUEL);
    assert_eq!(err, OracleError::Uninitialized { name: "x".into() });
}

#[test]
fn input_arity_is_enforced() {
    let err = run_err(ACK, &[1], FUEL);
    assert!(matches!(err, OracleError::InputArity { expected: 2, got: 1, .. }));
}

#[test]
fn trap_codes_round_trip() {
    for trap in [Trap::OutOfBounds, Trap::DivideByZero, Trap::Internal] {
        assert_eq!(Trap::from_code(trap.code()), Some(trap));
    }
    assert_eq!(Trap::from_code(0), None);
}
