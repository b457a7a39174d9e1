use num_traits::{Signed, Zero};
use prop_subsidy::audit;
use prop_subsidy::equilibrium::FractionalAllocation;
use prop_subsidy::generate::{generate, Family};
use prop_subsidy::instance::{
    normalize, parse_instance, preprocess_zero_disutility, serialize_instance, Disutility,
    Instance, IntegralAllocation,
};
use prop_subsidy::pipeline::{self, SolveOptions};
use prop_subsidy::rational::{ratio, Rational};
use prop_subsidy::reduction;
use proptest::prelude::*;

/// Instances with `n ≤ 4`, `m ≤ 5`, some zero disutilities and values above 1.
fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=4, 0usize..=5).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(1i64..=9, n),
            proptest::collection::vec(proptest::collection::vec((0i64..=12, 1i64..=4), m), n),
        )
            .prop_map(|(raw_w, raw_d)| {
                let total: i64 = raw_w.iter().sum();
                let weights = raw_w.iter().map(|&w| ratio(w, total)).collect();
                let d = raw_d
                    .into_iter()
                    .map(|row| row.into_iter().map(|(p, q)| ratio(p, q)).collect())
                    .collect();
                Instance::new(weights, d).unwrap()
            })
    })
}

fn positive_instance() -> impl Strategy<Value = Instance> {
    instance().prop_map(|inst| preprocess_zero_disutility(&inst).instance)
}

fn owners(n: usize, m: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..n, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(inst in instance()) {
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn normalize_is_idempotent_and_bounded(inst in positive_instance()) {
        let once = normalize(&inst);
        prop_assert!(once.is_bounded());
        prop_assert_eq!(normalize(&once), once.clone());
        let factor = once.scale() / inst.scale();
        for i in 0..inst.agent_count() {
            for c in 0..inst.chore_count() {
                prop_assert_eq!(once.disutility(i, c) * &factor, inst.disutility(i, c).clone());
            }
        }
    }

    #[test]
    fn preprocessing_keeps_positive_chores_untouched(inst in instance()) {
        let pre = preprocess_zero_disutility(&inst);
        let n = inst.agent_count();
        for (j, &c) in pre.kept.iter().enumerate() {
            prop_assert!(pre.preassigned.owner_of(c).is_none());
            for i in 0..n {
                prop_assert!(pre.instance.disutility(i, j).is_positive());
                prop_assert_eq!(pre.instance.disutility(i, j), inst.disutility(i, c));
            }
        }
        for c in 0..inst.chore_count() {
            let all_positive = (0..n).all(|i| inst.disutility(i, c).is_positive());
            prop_assert_eq!(all_positive, pre.kept.contains(&c));
            if let Some(a) = pre.preassigned.owner_of(c) {
                prop_assert!(inst.disutility(a, c).is_zero());
                prop_assert!((0..a).all(|i| inst.disutility(i, c).is_positive()));
            }
        }
    }

    #[test]
    fn subsidy_report_invariants(
        (inst, own) in instance().prop_flat_map(|inst| {
            let (n, m) = (inst.agent_count(), inst.chore_count());
            (Just(inst), owners(n, m))
        })
    ) {
        let report = audit::subsidy(&inst, &IntegralAllocation::from_owners(own)).unwrap();
        prop_assert!(report.per_agent_subsidy.iter().all(|s| !s.is_negative()));
        let total: Rational = report.per_agent_subsidy.iter().sum();
        prop_assert_eq!(&total, &report.total);
        prop_assert_eq!(report.bound_satisfied, report.total <= report.bound);
    }

    #[test]
    fn weight_proportional_allocation_is_proportional(inst in instance()) {
        prop_assert!(audit::prop_check(&inst, &FractionalAllocation::by_weights(&inst)));
    }

    #[test]
    fn integral_rounding_has_zero_cost(
        (inst, own) in instance().prop_flat_map(|inst| {
            let (n, m) = (inst.agent_count(), inst.chore_count());
            (Just(inst), owners(n, m))
        })
    ) {
        let x = FractionalAllocation::from_integral(inst.agent_count(), &own);
        let a = IntegralAllocation::from_owners(own);
        prop_assert!(reduction::total_rounding_cost(&inst, &x, &a).unwrap().is_zero());
    }

    #[test]
    fn generation_is_a_pure_function(seed in any::<u64>(), n in 1usize..=6, m in 0usize..=7, f in 0usize..3) {
        let family = Family::ALL[f];
        let a = serialize_instance(&generate(family, n, m, seed).unwrap());
        let b = serialize_instance(&generate(family, n, m, seed).unwrap());
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solve_then_verify_always_succeeds(inst in instance(), jobs in 1usize..=3) {
        let sol = pipeline::solve(&inst, SolveOptions { jobs, dump_pieces: true, decimal: false }).unwrap();
        let r = &sol.report;
        prop_assert!(r.bound_satisfied);
        prop_assert!(r.certificates.fpo);
        prop_assert!(r.total_subsidy <= r.rounding_cost);
        prop_assert!(pipeline::verify(r).is_ok());
        let text = serde_json::to_string(r).unwrap();
        let back: pipeline::Report = serde_json::from_str(&text).unwrap();
        prop_assert!(pipeline::verify(&back).is_ok());
    }
}
