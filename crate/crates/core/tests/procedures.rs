mod common;

use proptest::prelude::*;
use subci::procedures::{bound_function, interval, is_admissible, truncate, uniform_grid};
use subci::{PiecewiseLinearBound, Procedure, ProcedureKind, SummaryStat};

const ALPHAS: [f64; 4] = [0.05, 0.1, 0.25, 0.5];

#[test]
fn truncated_bounds_are_admissible() {
    for p in Procedure::ALL {
        for alpha in ALPHAS {
            for truncated in [true, false] {
                let b = truncate(&bound_function(ProcedureKind::new(p, truncated), alpha).unwrap());
                assert!(is_admissible(&b, 1e-12), "{p} {alpha}");
            }
        }
    }
}

#[test]
fn only_sd_and_np_are_inadmissible_raw() {
    for p in Procedure::ALL {
        for alpha in ALPHAS {
            let b = bound_function(ProcedureKind::raw(p), alpha).unwrap();
            assert_eq!(is_admissible(&b, 1e-12), !p.can_be_inadmissible(), "{p} {alpha}");
        }
    }
}

#[test]
fn bounds_match_direct_formulas() {
    for p in Procedure::ALL {
        for alpha in ALPHAS {
            let b = bound_function(ProcedureKind::truncated(p), alpha).unwrap();
            let (oracle, jumps) = common::oracle_bound(p, alpha);
            for u in uniform_grid(2001) {
                if jumps.iter().any(|j| (u - j).abs() < 1e-6) && p == Procedure::MinEffort {
                    continue;
                }
                assert!((b.eval(u) - oracle(u)).abs() < 1e-12, "{p} {alpha} u={u}");
            }
        }
    }
}

#[test]
fn np_and_ump_coincide_at_half() {
    let np = bound_function(ProcedureKind::truncated(Procedure::Np), 0.5).unwrap();
    let ump = bound_function(ProcedureKind::truncated(Procedure::Ump), 0.5).unwrap();
    let sup = np
        .breakpoints()
        .iter()
        .chain(ump.breakpoints())
        .chain(&uniform_grid(10_001))
        .map(|&u| (np.eval(u) - ump.eval(u)).abs())
        .fold(0.0, f64::max);
    assert!(sup <= 1e-12, "{sup}");
}

#[test]
fn min_cond_width_equals_truncated_sd() {
    for alpha in [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.99] {
        let a = bound_function(ProcedureKind::truncated(Procedure::MinCondWidth), alpha).unwrap();
        let b = bound_function(ProcedureKind::truncated(Procedure::Sd), alpha).unwrap();
        for u in uniform_grid(4001) {
            assert!((a.eval(u) - b.eval(u)).abs() <= 1e-12, "{alpha} u={u}");
        }
    }
}

#[test]
fn bounds_nest_monotonically_in_level() {
    let grid = uniform_grid(2001);
    let alphas = [0.02, 0.05, 0.1, 0.2, 0.25, 0.35, 0.5];
    for p in Procedure::ALL {
        for truncated in [false, true] {
            let kind = ProcedureKind::new(p, truncated);
            for w in alphas.windows(2) {
                let tight = bound_function(kind, w[0]).unwrap();
                let loose = bound_function(kind, w[1]).unwrap();
                for &u in &grid {
                    assert!(tight.eval(u) >= loose.eval(u) - 1e-15, "{kind} {w:?} u={u}");
                }
            }
        }
    }
}

#[test]
fn figure_values() {
    // minimum-effort jump locations and the clipped-constant plateau
    let me = bound_function(ProcedureKind::truncated(Procedure::MinEffort), 0.25).unwrap();
    let k = 2.0 * (1.0 - 0.75f64.sqrt());
    assert!((k - 0.267_949).abs() < 1e-6);
    assert_eq!(me.eval(k - 1e-6), 0.0);
    assert!((me.eval(k + 1e-6) - (1.0 - (k + 1e-6) / 2.0)).abs() < 1e-12);

    let mcw = bound_function(ProcedureKind::truncated(Procedure::MinCondWidth), 0.5).unwrap();
    assert!((mcw.eval(0.3) - 0.292_893_218_813).abs() < 1e-12);

    let sd = bound_function(ProcedureKind::raw(Procedure::Sd), 0.5).unwrap();
    assert!((sd.eval(1.9) - 0.292_893_218_813).abs() < 1e-12);
    assert!(sd.eval(1.5) > 1.0 - 1.5 / 2.0);
    assert!(sd.eval(1.4) < 1.0 - 1.4 / 2.0);
}

fn arb_bound() -> impl Strategy<Value = PiecewiseLinearBound> {
    (prop::collection::btree_set(1u32..1999, 0..8), prop::collection::vec(0.0f64..2.5, 10))
        .prop_map(|(inner, ys)| {
            let mut xs = vec![0.0];
            xs.extend(inner.into_iter().map(|i| i as f64 / 1000.0));
            xs.push(2.0);
            let vs = xs.iter().enumerate().map(|(i, _)| ys[i % ys.len()]).collect();
            PiecewiseLinearBound::new(xs, vs).unwrap()
        })
}

proptest! {
    #[test]
    fn truncate_is_pointwise_min_with_cap(b in arb_bound()) {
        let t = truncate(&b);
        prop_assert!(is_admissible(&t, 1e-12));
        for u in uniform_grid(801) {
            let expect = b.eval(u).min(common::cap(u));
            prop_assert!((t.eval(u) - expect).abs() <= 1e-12, "u={}", u);
        }
        prop_assert_eq!(truncate(&t).breakpoints().len(), t.breakpoints().len());
    }

    #[test]
    fn intervals_are_shift_equivariant(
        p in prop::sample::select(Procedure::ALL.to_vec()),
        truncated in any::<bool>(),
        alpha in prop::sample::select(ALPHAS.to_vec()),
        m in -4096i32..4096, v in -2048i32..=2048, c in -65536i32..65536,
    ) {
        let kind = ProcedureKind::new(p, truncated);
        let stat = SummaryStat { m: m as f64 / 1024.0, v: v as f64 / 1024.0, n: 2, k_scale: 1.0 };
        let shift = c as f64 / 64.0;
        let moved = SummaryStat { m: stat.m + shift, ..stat };
        let a = interval(kind, alpha, &stat).unwrap();
        let b = interval(kind, alpha, &moved).unwrap();
        prop_assert_eq!(b.center, a.center + shift);
        prop_assert_eq!(b.half_width, a.half_width);
        prop_assert_eq!(b.lower, a.lower + shift);
        prop_assert_eq!(b.upper, a.upper + shift);
    }

    #[test]
    fn intervals_scale_with_k(
        p in prop::sample::select(Procedure::ALL.to_vec()),
        alpha in prop::sample::select(ALPHAS.to_vec()),
        m in -3.0f64..3.0, u in 0.0f64..2.0, k in 0.01f64..100.0,
    ) {
        let kind = ProcedureKind::truncated(p);
        let unit = interval(kind, alpha, &SummaryStat { m, v: u, n: 2, k_scale: 1.0 }).unwrap();
        let scaled = interval(kind, alpha, &SummaryStat { m: m * k, v: u * k, n: 2, k_scale: k }).unwrap();
        prop_assert!((scaled.center - k * unit.center).abs() <= 1e-12 * k * (1.0 + m.abs()));
        // the MIN_EFFORT ramp is 1e-9 wide, so rounding in u*k/k can move across it
        let tol = if p == Procedure::MinEffort { 1e-6 } else { 1e-12 };
        prop_assert!((scaled.half_width - k * unit.half_width).abs() <= tol * k);
        prop_assert!(scaled.half_width <= k * (1.0 - u / 2.0) + 1e-12 * k);
    }
}
