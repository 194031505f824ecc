use harvest_core::model::{Family, ModelSpec, YieldFn};
use harvest_core::montecarlo::{
    reflect_step, simulate_payoff, trace_path, Chatter, HarvestPolicy, PolicyArgs, PolicyRegistry, PolicySpec,
    RelaxedSweep, SimConfig,
};
use harvest_core::pipeline::{fixtures, solve, Solved};
use harvest_core::psi::{GridParams, PsiSolverRegistry};
use harvest_core::threshold::find_bstar;
use harvest_core::value::value_at;
use proptest::prelude::*;

fn steep(p: f64, alpha: f64) -> Solved {
    solve(&fixtures::drifted_bm_steep(YieldFn::Exponential { p, alpha }), &GridParams::default()).unwrap()
}

fn v(s: &Solved, x: f64) -> f64 {
    value_at(&s.model, &s.fs, &s.threshold, x).unwrap().total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // V is linear in the price level and b* does not move
    #[test]
    fn value_scales_with_price(c in 0.1f64..10.0, alpha in 0.3f64..3.0, x0 in 0.01f64..4.0) {
        let one = steep(1.0, alpha);
        let many = steep(c, alpha);
        prop_assert!((one.threshold.bstar - many.threshold.bstar).abs() < 1e-9);
        let (a, b) = (v(&one, x0), v(&many, x0));
        prop_assert!((b - c * a).abs() <= 1e-10 * b.abs(), "{b} vs {}", c * a);
    }

    // any positive multiple of ψ gives the same b* and V
    #[test]
    fn value_ignores_psi_normalization(c in 1e-3f64..1e3, x0 in 0.01f64..4.0) {
        let s = steep(1.0, 1.0);
        let fs = s.fs.scaled(c);
        let th = find_bstar(&s.model, &fs).unwrap();
        prop_assert!((th.bstar - s.threshold.bstar).abs() < 1e-9);
        let a = v(&s, x0);
        let b = value_at(&s.model, &fs, &th, x0).unwrap().total;
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn value_nondecreasing(x in 0.001f64..5.0, dx in 0.0f64..2.0, alpha in 0.3f64..3.0) {
        let s = steep(1.0, alpha);
        prop_assert!(v(&s, x + dx) >= v(&s, x) - 1e-14);
    }

    #[test]
    fn value_continuous_at_threshold(alpha in 0.3f64..3.0, e in 1e-12f64..1e-7) {
        let s = steep(1.0, alpha);
        let b = s.threshold.bstar;
        prop_assume!(b > 0.0);
        let (lo, hi) = (v(&s, b * (1.0 - e)), v(&s, b * (1.0 + e)));
        // V′ ≤ f(0)·max(1, ψ′/ψ′(b*)) near b*, so the jump is O(e·b)
        prop_assert!((hi - lo).abs() <= 4.0 * e * b + 1e-14);
    }

    // refining the chatter grid never lowers the lump, which stays below the sweep
    #[test]
    fn chatter_lump_monotone(alpha in 0.0f64..3.0, b in 0.0f64..2.0, width in 0.01f64..3.0, k in 0u32..8) {
        let m = fixtures::drifted_bm_steep(YieldFn::Exponential { p: 1.0, alpha });
        let x0 = b + width;
        let n = 1u32 << k;
        let coarse = Chatter { b, n }.lump(&m, x0);
        let fine = Chatter { b, n: 2 * n }.lump(&m, x0);
        let sweep = RelaxedSweep { b }.initial_harvest(&m, x0).lump;
        prop_assert!(fine >= coarse - 1e-14 * coarse.abs());
        prop_assert!(fine <= sweep + 1e-14 * sweep.abs());
    }

    // projected step: state below the barrier, push ≥ 0, acting only at the barrier
    #[test]
    fn skorohod_step(x in 0.0f64..3.0, above in 0.0f64..3.0, dw in -1.0f64..1.0, dt in 1e-5f64..1e-1) {
        let m = fixtures::drifted_bm(fixtures::CONSTANT);
        let barrier = x + above;
        let (xn, dl) = reflect_step(x, barrier, dw, &m, dt);
        let proposal = x + m.drift_at(x) * dt + m.sigma_at(x) * dw;
        prop_assert!(xn <= barrier);
        prop_assert!(dl >= 0.0);
        prop_assert!(dl == 0.0 || xn == barrier);
        prop_assert!((xn + dl - proposal).abs() <= 1e-14 * (1.0 + proposal.abs()));
    }

    #[test]
    fn trace_stays_below_barrier(seed in any::<u64>(), index in 0usize..1000, start in 0.1f64..1.0) {
        let m = fixtures::drifted_bm(fixtures::CONSTANT);
        let cfg = SimConfig::new(1e-2, 2.0, 1, seed);
        let tr = trace_path(&m, 0.8, start.min(0.8), &cfg, index);
        prop_assert!(tr.iter().all(|s| s.x <= 0.8 && s.x >= 0.0 && s.dl >= 0.0));
        prop_assert!(tr.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn simulation_is_seed_deterministic(seed in any::<u64>()) {
        let m = fixtures::drifted_bm(fixtures::CONSTANT);
        let cfg = SimConfig::new(1e-2, 3.0, 64, seed);
        let p = RelaxedSweep { b: 0.86 };
        let a = simulate_payoff(&m, &p, 1.5, &cfg).unwrap();
        let b = simulate_payoff(&m, &p, 1.5, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn policies_round_trip_through_registry(b in 0.0f64..5.0, n in 1u32..100, which in 0usize..4) {
        let spec = [
            PolicySpec::ReflectAt { b },
            PolicySpec::JumpThenReflect { b },
            PolicySpec::Chatter { b, n },
            PolicySpec::RelaxedSweep { b },
        ][which];
        let p = spec.build().unwrap();
        prop_assert_eq!(p.spec(), spec);
        prop_assert_eq!(p.name(), spec.registry_name());
        prop_assert_eq!(p.barrier(), b);
    }
}

#[test]
fn registries_reject_unknown_names() {
    let reg = PolicyRegistry::default();
    assert_eq!(reg.names(), ["chatter", "jump", "reflect", "sweep"]);
    assert!(reg.create("bang_bang", &PolicyArgs { b: 1.0, n: None }).is_err());
    assert!(reg.create("reflect", &PolicyArgs { b: -1.0, n: None }).is_err());
    let psi = PsiSolverRegistry::default();
    assert_eq!(psi.names(), ["auto", "closed_form", "shooting"]);
    assert!(psi.get("spectral").is_none());
}

#[test]
fn different_seeds_differ() {
    let m = fixtures::drifted_bm(fixtures::CONSTANT);
    let p = RelaxedSweep { b: 0.86 };
    let a = simulate_payoff(&m, &p, 1.0, &SimConfig::new(1e-2, 3.0, 64, 1)).unwrap();
    let b = simulate_payoff(&m, &p, 1.0, &SimConfig::new(1e-2, 3.0, 64, 2)).unwrap();
    assert_ne!(a.mean, b.mean);
}

#[test]
fn invalid_models_are_rejected() {
    let bad = [
        ModelSpec::new(Family::DriftedBm { mu: 1.0, sigma: 0.0 }, 1.0, fixtures::CONSTANT),
        ModelSpec::new(Family::DriftedBm { mu: 1.0, sigma: 1.0 }, 0.0, fixtures::CONSTANT),
        ModelSpec::new(Family::Gbm { mu: 0.1, sigma: 0.2 }, 0.1, YieldFn::Exponential { p: 1.0, alpha: -1.0 }),
        ModelSpec::new(Family::Logistic { mu: 1.0, k: 0.0, sigma: 0.2 }, 0.5, fixtures::CONSTANT),
    ];
    for m in bad {
        assert!(m.is_err(), "{m:?}");
    }
}
