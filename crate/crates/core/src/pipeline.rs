//! End-to-end solver and report verification.
//!
//! [`solve`] runs preprocessing, normalization, the equilibrium LPs, the
//! identical-disutility reduction, forest decomposition and rounding, and
//! returns a [`Report`] that carries everything [`verify`] needs to re-check
//! the result without solving again.

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{self, SubsidyReport};
use crate::decomposition::{self, DecompositionError};
use crate::equilibrium::{
    self, consumption_graph, Equilibrium, EquilibriumError, FractionalAllocation,
};
use crate::instance::{self, Disutility, Instance, IntegralAllocation};
use crate::rational::{self, Rational};
use crate::reduction::{self, ReducedInstance};
use crate::rounding::{self, PieceRounding, RoundingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub jobs: usize,
    pub dump_pieces: bool,
    pub decimal: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            jobs: 1,
            dump_pieces: false,
            decimal: false,
        }
    }
}

/// Failures inside the pipeline. On a valid instance none of these is
/// expected; each one points at a defect.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
    #[error("certificate {certificate} failed: {detail}")]
    Certificate {
        certificate: &'static str,
        detail: String,
    },
}

/// A certificate that did not re-verify.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("certificate {certificate} failed: {detail}")]
pub struct VerifyError {
    pub certificate: &'static str,
    pub detail: String,
}

/// Certificate names in the order [`verify`] checks them.
pub const CERTIFICATES: [&str; 8] = [
    "preprocessing",
    "prop",
    "equilibrium",
    "duality",
    "rounding",
    "fpo",
    "subsidy-arithmetic",
    "bound",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificates {
    pub prop: bool,
    pub equilibrium: bool,
    pub duality: bool,
    pub acyclic: bool,
    pub rounding: bool,
    pub fpo: bool,
    pub subsidy_arithmetic: bool,
    pub bound: bool,
}

/// Solver output. `x`, `p`, `alpha` and `h` refer to the working instance:
/// the chores listed in `kept_chores`, with disutilities divided by `scale`.
/// Subsidies are in the same normalized units; multiply by `scale` to
/// restate them in input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub instance: Instance,
    #[serde(with = "rational::serde_scalar")]
    pub scale: Rational,
    pub kept_chores: Vec<usize>,
    /// `[chore, agent]` pairs for chores some agent does not mind.
    pub preassigned: Vec<(usize, usize)>,
    pub x: FractionalAllocation,
    #[serde(with = "rational::serde_vec")]
    pub p: Vec<Rational>,
    #[serde(with = "rational::serde_vec")]
    pub alpha: Vec<Rational>,
    #[serde(with = "rational::serde_vec")]
    pub h: Vec<Rational>,
    #[serde(with = "rational::serde_vec")]
    pub d_hat: Vec<Rational>,
    pub allocation: IntegralAllocation,
    #[serde(with = "rational::serde_vec")]
    pub per_agent_subsidy: Vec<Rational>,
    #[serde(with = "rational::serde_scalar")]
    pub total_subsidy: Rational,
    #[serde(with = "rational::serde_scalar")]
    pub total_subsidy_input_units: Rational,
    #[serde(with = "rational::serde_scalar")]
    pub bound: Rational,
    pub bound_satisfied: bool,
    #[serde(with = "rational::serde_scalar")]
    pub rounding_cost: Rational,
    #[serde(with = "rational::serde_scalar")]
    pub rounding_cost_reduced: Rational,
    #[serde(with = "rational::serde_scalar")]
    pub piece_cost_total: Rational,
    pub certificates: Certificates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceRounding>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimal: Option<serde_json::Value>,
}

/// Everything computed by [`solve`], for callers that want more than the report.
#[derive(Debug, Clone)]
pub struct Solution {
    pub working: Instance,
    pub equilibrium: Equilibrium,
    pub reduced: ReducedInstance,
    pub pieces: Vec<PieceRounding>,
    pub decomposition_steps: usize,
    pub subsidy: SubsidyReport,
    pub report: Report,
}

/// Preprocessed and normalized instance with the bookkeeping to map back.
struct Working {
    instance: Instance,
    factor: Rational,
    kept: Vec<usize>,
    preassigned: Vec<(usize, usize)>,
}

fn prepare(input: &Instance) -> Working {
    let pre = instance::preprocess_zero_disutility(input);
    let max = pre.instance.max_disutility();
    let factor = if max > Rational::one() {
        max
    } else {
        Rational::one()
    };
    let instance = instance::normalize(&pre.instance);
    let preassigned = (0..input.chore_count())
        .filter_map(|c| pre.preassigned.owner_of(c).map(|a| (c, a)))
        .collect();
    Working {
        instance,
        factor,
        kept: pre.kept,
        preassigned,
    }
}

/// Allocation over the kept chores expressed over all input chores.
fn lift(
    m: usize,
    kept: &[usize],
    preassigned: &[(usize, usize)],
    local: &IntegralAllocation,
) -> IntegralAllocation {
    let mut full = IntegralAllocation::empty(m);
    for &(c, a) in preassigned {
        full.assign(c, a);
    }
    for (j, &c) in kept.iter().enumerate() {
        if let Some(a) = local.owner_of(j) {
            full.assign(c, a);
        }
    }
    full
}

fn restrict(full: &IntegralAllocation, kept: &[usize]) -> IntegralAllocation {
    IntegralAllocation {
        owner: kept.iter().map(|&c| full.owner_of(c)).collect(),
    }
}

fn decimal_view(report: &Report) -> serde_json::Value {
    let floats = |v: &[Rational]| -> Vec<f64> { v.iter().map(rational::to_f64).collect() };
    serde_json::json!({
        "per_agent_subsidy": floats(&report.per_agent_subsidy),
        "total_subsidy": rational::to_f64(&report.total_subsidy),
        "total_subsidy_input_units": rational::to_f64(&report.total_subsidy_input_units),
        "bound": rational::to_f64(&report.bound),
        "p": floats(&report.p),
        "alpha": floats(&report.alpha),
    })
}

fn certificate_error(certificate: &'static str, detail: impl ToString) -> SolveError {
    SolveError::Certificate {
        certificate,
        detail: detail.to_string(),
    }
}

pub fn solve(input: &Instance, options: SolveOptions) -> Result<Solution, SolveError> {
    let n = input.agent_count();
    let m = input.chore_count();
    let w = prepare(input);

    let equilibrium = equilibrium::solve_equilibrium(&w.instance)?;
    if !audit::prop_check(&w.instance, &equilibrium.alloc) {
        return Err(certificate_error(
            "prop",
            "equilibrium allocation is not proportional",
        ));
    }
    let reduced = reduction::reduce_to_identical(&equilibrium, &w.instance);
    let graph = consumption_graph(&equilibrium.alloc);
    let (forced, rest) = decomposition::preassign_degree_one(&graph);
    let decomposition = decomposition::decompose(&rest)?;
    let forest = rounding::round_forest(
        &decomposition.pieces,
        &equilibrium.alloc,
        &reduced.common,
        &forced,
        options.jobs,
    )?;

    let allocation = lift(m, &w.kept, &w.preassigned, &forest.allocation);
    let measured = input.scaled_down(&w.factor);
    let mut subsidy =
        audit::subsidy(&measured, &allocation).map_err(|e| certificate_error("rounding", e))?;
    subsidy.fpo_certified = audit::certify_fpo(&w.instance, &equilibrium, &forest.allocation);
    let rounding_cost =
        reduction::total_rounding_cost(&w.instance, &equilibrium.alloc, &forest.allocation)
            .map_err(|e| certificate_error("rounding", e))?;
    let rounding_cost_reduced =
        reduction::total_rounding_cost(&reduced, &equilibrium.alloc, &forest.allocation)
            .map_err(|e| certificate_error("rounding", e))?;

    let certificates = Certificates {
        prop: true,
        equilibrium: true,
        duality: true,
        acyclic: true,
        rounding: true,
        fpo: subsidy.fpo_certified,
        subsidy_arithmetic: true,
        bound: subsidy.bound_satisfied,
    };
    let mut report = Report {
        instance: input.clone(),
        scale: w.factor.clone(),
        kept_chores: w.kept.clone(),
        preassigned: w.preassigned.clone(),
        x: equilibrium.alloc.clone(),
        p: equilibrium.payments.clone(),
        alpha: equilibrium.mpb.clone(),
        h: equilibrium.dual_h.clone(),
        d_hat: reduced.common.clone(),
        allocation,
        per_agent_subsidy: subsidy.per_agent_subsidy.clone(),
        total_subsidy: subsidy.total.clone(),
        total_subsidy_input_units: &subsidy.total * &w.factor,
        bound: subsidy.bound.clone(),
        bound_satisfied: subsidy.bound_satisfied,
        rounding_cost,
        rounding_cost_reduced,
        piece_cost_total: forest.total_cost.clone(),
        certificates,
        pieces: options.dump_pieces.then(|| forest.pieces.clone()),
        decimal: None,
    };
    if options.decimal {
        report.decimal = Some(decimal_view(&report));
    }
    debug_assert_eq!(report.bound, audit::subsidy_bound(n));
    verify(&report).map_err(|e| SolveError::Certificate {
        certificate: e.certificate,
        detail: e.detail,
    })?;
    Ok(Solution {
        working: w.instance,
        equilibrium,
        reduced,
        pieces: forest.pieces,
        decomposition_steps: decomposition.steps,
        subsidy,
        report,
    })
}

fn fail(certificate: &'static str, detail: impl ToString) -> VerifyError {
    VerifyError {
        certificate,
        detail: detail.to_string(),
    }
}

fn ensure(
    ok: bool,
    certificate: &'static str,
    detail: impl FnOnce() -> String,
) -> Result<(), VerifyError> {
    if ok {
        Ok(())
    } else {
        Err(fail(certificate, detail()))
    }
}

/// Re-checks every certificate of a report from its own contents.
pub fn verify(report: &Report) -> Result<(), VerifyError> {
    let input = &report.instance;
    let n = input.agent_count();
    let m = input.chore_count();
    let w = prepare(input);
    let mw = w.kept.len();

    ensure(report.kept_chores == w.kept, "preprocessing", || {
        format!(
            "kept chores {:?}, expected {:?}",
            report.kept_chores, w.kept
        )
    })?;
    ensure(report.preassigned == w.preassigned, "preprocessing", || {
        format!(
            "pre-assignment {:?}, expected {:?}",
            report.preassigned, w.preassigned
        )
    })?;
    ensure(report.scale == w.factor, "preprocessing", || {
        format!("scale {}, expected {}", report.scale, w.factor)
    })?;

    report.x.validate().map_err(|e| fail("prop", e))?;
    ensure(
        report.x.agent_count() == n && (report.x.chore_count() == mw || mw == 0),
        "prop",
        || {
            format!(
                "x is {}×{}, expected {n}×{mw}",
                report.x.agent_count(),
                report.x.chore_count()
            )
        },
    )?;
    ensure(audit::prop_check(&w.instance, &report.x), "prop", || {
        "some agent exceeds its proportional share under x".into()
    })?;

    let eq = Equilibrium {
        alloc: report.x.clone(),
        payments: report.p.clone(),
        mpb: report.alpha.clone(),
        dual_h: report.h.clone(),
    };
    ensure(
        report.h.len() == n && report.p.len() == mw,
        "equilibrium",
        || {
            format!(
                "{} payments and {} dual values",
                report.p.len(),
                report.h.len()
            )
        },
    )?;
    if let Some(i) = report.h.iter().position(Signed::is_negative) {
        return Err(fail("equilibrium", format!("h[{i}] is negative")));
    }
    let alpha_ok = report
        .alpha
        .iter()
        .zip(&report.h)
        .all(|(a, h)| a * (Rational::one() + h) == Rational::one());
    ensure(report.alpha.len() == n && alpha_ok, "equilibrium", || {
        "alpha is not 1/(1+h)".into()
    })?;
    equilibrium::check_equilibrium(&w.instance, &eq).map_err(|e| fail("equilibrium", e))?;

    let primal = equilibrium::primal_objective(&w.instance, &report.x);
    let dual = equilibrium::dual_objective(&w.instance, &report.p, &report.h);
    ensure(primal == dual, "duality", || {
        format!("primal objective {primal} ≠ dual objective {dual}")
    })?;
    ensure(!consumption_graph(&report.x).has_cycle(), "duality", || {
        "consumption graph has a cycle".into()
    })?;

    let alloc = &report.allocation;
    ensure(
        alloc.chore_count() == m && alloc.is_complete(),
        "rounding",
        || "allocation does not assign every chore".into(),
    )?;
    if let Some(&(c, a)) = report
        .preassigned
        .iter()
        .find(|&&(c, a)| alloc.owner_of(c) != Some(a))
    {
        return Err(fail(
            "rounding",
            format!("pre-assigned chore {c} is not with agent {a}"),
        ));
    }
    let local = restrict(alloc, &w.kept);
    let (common, _) = reduction::reduce_payments(&report.p);
    ensure(common == report.d_hat, "rounding", || {
        "d_hat is not p / max p".into()
    })?;
    let reduced = ReducedInstance {
        base: w.instance.clone(),
        common,
        p_max: Rational::one(),
    };
    let rcost = reduction::total_rounding_cost(&w.instance, &report.x, &local)
        .map_err(|e| fail("rounding", e))?;
    let rcost_reduced = reduction::total_rounding_cost(&reduced, &report.x, &local)
        .map_err(|e| fail("rounding", e))?;
    ensure(
        rcost == report.rounding_cost && rcost_reduced == report.rounding_cost_reduced,
        "rounding",
        || format!("recomputed rounding costs {rcost} and {rcost_reduced}"),
    )?;
    ensure(
        rcost <= rcost_reduced && rcost_reduced <= report.piece_cost_total,
        "rounding",
        || "rounding costs are out of order".into(),
    )?;

    ensure(audit::certify_fpo(&w.instance, &eq, &local), "fpo", || {
        "allocation is not an equilibrium allocation under p".into()
    })?;

    let measured = input.scaled_down(&w.factor);
    let sub = audit::subsidy(&measured, alloc).map_err(|e| fail("subsidy-arithmetic", e))?;
    ensure(
        sub.per_agent_subsidy == report.per_agent_subsidy
            && sub.total == report.total_subsidy
            && &sub.total * &w.factor == report.total_subsidy_input_units,
        "subsidy-arithmetic",
        || format!("recomputed total subsidy is {}", sub.total),
    )?;
    ensure(sub.total <= rcost, "subsidy-arithmetic", || {
        format!("subsidy {} exceeds rounding cost {rcost}", sub.total)
    })?;

    let bound = audit::subsidy_bound(n);
    ensure(
        report.bound == bound
            && report.bound_satisfied
            && report.total_subsidy <= bound
            && report.piece_cost_total <= bound,
        "bound",
        || format!("total {} against bound {bound}", report.total_subsidy),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;
    use crate::rational::{int, ratio};

    const WORKED: &str = r#"{ "weights": ["2/15","8/15","1/3"],
        "disutilities": [["1/2","1","1/2"],["1","1","1"],["1","2/3","1/3"]] }"#;

    #[test]
    fn worked_example_end_to_end() {
        let inst = parse_instance(WORKED).unwrap();
        let sol = solve(&inst, SolveOptions::default()).unwrap();
        let r = &sol.report;
        assert_eq!(r.bound, ratio(5, 6));
        assert!(r.bound_satisfied);
        assert!(r.total_subsidy <= ratio(1, 3));
        assert!(r.certificates.fpo);
        assert_eq!(r.scale, int(1));
        verify(r).unwrap();
    }

    #[test]
    fn empty_chore_list() {
        let inst = Instance::new(vec![ratio(1, 2), ratio(1, 2)], vec![vec![], vec![]]).unwrap();
        let sol = solve(&inst, SolveOptions::default()).unwrap();
        assert_eq!(sol.report.allocation.chore_count(), 0);
        assert_eq!(sol.report.total_subsidy, int(0));
        verify(&sol.report).unwrap();
    }

    #[test]
    fn zero_disutility_and_scaling() {
        let inst = Instance::new(
            vec![ratio(1, 2), ratio(1, 2)],
            vec![vec![int(0), int(4), int(2)], vec![int(3), int(6), int(0)]],
        )
        .unwrap();
        let sol = solve(
            &inst,
            SolveOptions {
                jobs: 2,
                dump_pieces: true,
                decimal: true,
            },
        )
        .unwrap();
        let r = &sol.report;
        assert_eq!(r.preassigned, vec![(0, 0), (2, 1)]);
        assert_eq!(r.kept_chores, vec![1]);
        assert_eq!(r.scale, int(6));
        assert_eq!(r.total_subsidy_input_units, &r.total_subsidy * int(6));
        assert!(r.pieces.is_some() && r.decimal.is_some());
        verify(r).unwrap();
    }

    #[test]
    fn tampering_is_detected() {
        let inst = parse_instance(WORKED).unwrap();
        let report = solve(&inst, SolveOptions::default()).unwrap().report;

        let mut r = report.clone();
        r.p[0] += int(1);
        assert_eq!(verify(&r).unwrap_err().certificate, "equilibrium");

        let mut r = report.clone();
        r.total_subsidy += ratio(1, 7);
        assert_eq!(verify(&r).unwrap_err().certificate, "subsidy-arithmetic");

        let mut r = report.clone();
        r.bound = int(0);
        assert_eq!(verify(&r).unwrap_err().certificate, "bound");

        let mut r = report;
        let c = (0..3)
            .find(|&c| r.allocation.owner_of(c) != Some(0))
            .unwrap();
        r.allocation.assign(c, 0);
        let err = verify(&r).unwrap_err().certificate;
        assert!(err == "rounding" || err == "fpo");
    }

    #[test]
    fn report_json_round_trip() {
        let inst = parse_instance(WORKED).unwrap();
        let report = solve(
            &inst,
            SolveOptions {
                jobs: 1,
                dump_pieces: true,
                decimal: false,
            },
        )
        .unwrap()
        .report;
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        verify(&back).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "instance",
            "x",
            "p",
            "alpha",
            "h",
            "allocation",
            "per_agent_subsidy",
            "total_subsidy",
            "bound",
            "certificates",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
