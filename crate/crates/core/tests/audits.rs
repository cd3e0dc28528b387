use std::sync::Arc;

use externa::audit::{
    audit_desirable, audit_efficiency, audit_ic, audit_ir, audit_wbb, check_necessary_conditions,
    check_sufficient_conditions, ir_margin, Deviation, Property, DEFAULT_TOL, QUAD_STEP,
};
use externa::mechanism::{give_withhold_family, AllocationRule, BestModelAllocation, GiveWithholdAllocation, PaymentRule};
use externa::valuation::DerivativeSupport;
use externa::{
    Error, GridSpec, LinearExternalityModel, Mechanism, PowerMarketModel, ProportionalFixedMarketModel,
    QualityFunction, QuasiMonotoneModel, Report, Result, Valuation,
};

fn grid(d: f64, eps: f64) -> GridSpec {
    GridSpec::new(d, eps, false).unwrap()
}

fn quasi() -> Arc<QuasiMonotoneModel> {
    Arc::new(
        QuasiMonotoneModel::polynomial(
            vec![1.0, 0.8],
            vec![0.3, 0.1],
            vec![vec![0.0, -0.4], vec![0.5, 0.0]],
        )
        .unwrap(),
    )
}

fn linear(rows: Vec<Vec<f64>>) -> Arc<LinearExternalityModel> {
    Arc::new(LinearExternalityModel::new(rows, false).unwrap())
}

#[test]
fn mep_is_ic_and_ir_with_zero_margins() {
    let q = QualityFunction::sigmoid();
    let model = quasi();
    let mech = Mechanism::mep_best_model(model.clone(), q.clone()).unwrap();
    let g = grid(1.0, 0.125);
    assert!(audit_ic(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap().passed);
    let ir = audit_ir(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap();
    assert!(ir.passed);
    assert_eq!(ir.property, Property::Ir);
    for truth in [[0.25, 0.5], [1.0, 0.0], [0.75, 0.875]] {
        for i in 0..2 {
            assert!(ir_margin(&mech, model.as_ref(), &q, &truth, i).unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn mep_efficient_linear_is_ic_with_positive_own_coefficients() {
    let q = QualityFunction::sigmoid();
    let model = linear(vec![vec![0.6, -0.9, 0.2], vec![0.3, 0.1, -0.5], vec![-0.7, 0.4, 0.9]]);
    let mech = Mechanism::mep_efficient_linear(model.clone(), q.clone()).unwrap();
    let g = grid(1.0, 0.25);
    assert!(audit_ic(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap().passed);
    assert!(audit_ir(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap().passed);
}

#[test]
fn mep_with_negative_own_coefficient_is_not_ic() {
    let q = QualityFunction::sigmoid();
    let model = linear(vec![vec![-0.5, 0.3], vec![0.8, 0.4]]);
    let mech = Mechanism::mep_efficient_linear(model.clone(), q.clone()).unwrap();
    let report = audit_ic(&mech, model.as_ref(), &q, &grid(1.0, 0.25), DEFAULT_TOL).unwrap();
    assert!(!report.passed);
    assert!(report.violations.iter().all(|v| v.agent == Some(0)));
}

#[test]
fn vcg_fails_ic_on_fixed_market() {
    let q = QualityFunction::identity_unbounded();
    let model = Arc::new(ProportionalFixedMarketModel::new(2).unwrap());
    let family = give_withhold_family(2, &q);
    let mech = Mechanism::vcg(model.clone(), family.clone(), q.clone()).unwrap();
    let g = grid(10.0, 1.0);
    let ic = audit_ic(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap();
    let hit = ic
        .violations
        .iter()
        .find(|v| v.agent == Some(0) && v.profile == [10.0, 1.0] && v.deviation == Some(Deviation::Report(3.0)))
        .expect("deviation to 3 is flagged");
    assert!((hit.margin + 17.0 / 308.0).abs() < 1e-12);
    assert!(ic.violations.iter().all(|v| v.margin < -DEFAULT_TOL));
    let all = audit_desirable(&mech, model.as_ref(), &q, &g, &family, DEFAULT_TOL).unwrap();
    assert!(!all.passed);
    assert!(all.violations.iter().any(|v| v.check == Property::Ic));
}

#[test]
fn free_mechanism_is_desirable_without_competition() {
    let q = QualityFunction::identity_unbounded();
    let model = PowerMarketModel::new(2, 0.0).unwrap();
    let mech = Mechanism::free(2, q.clone());
    let g = grid(4.0, 0.5);
    let family = give_withhold_family(2, &q);
    let report = audit_desirable(&mech, &model, &q, &g, &family, DEFAULT_TOL).unwrap();
    assert!(report.passed, "{:?}", report.violations.first());
    assert_eq!(report.property, Property::Desirable);
}

#[test]
fn overcharge_breaks_ir_everywhere() {
    let q = QualityFunction::sigmoid();
    let model = quasi();
    let mech = Mechanism::mep_best_model(model.clone(), q.clone()).unwrap().shifted(0.01);
    let g = grid(1.0, 0.25);
    let ir = audit_ir(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap();
    assert_eq!(ir.violations.len(), 2 * 25);
    assert!(ir.violations.iter().all(|v| (v.margin + 0.01).abs() < 1e-9));
}

struct Refund(usize);

impl PaymentRule for Refund {
    fn label(&self) -> &str {
        "refund"
    }

    fn agents(&self) -> usize {
        self.0
    }

    fn charge(&self, _: &[Report]) -> Result<Vec<f64>> {
        Ok(vec![-1.0; self.0])
    }
}

#[test]
fn budget_balance_cases() {
    let q = QualityFunction::sigmoid();
    let g = grid(1.0, 0.25);
    assert!(audit_wbb(&Mechanism::free(3, q.clone()), &g, DEFAULT_TOL).unwrap().passed);

    let model = linear(vec![vec![0.5, 0.2], vec![0.1, 0.9]]);
    let mep = Mechanism::mep_efficient_linear(model, q.clone()).unwrap();
    assert!(audit_wbb(&mep, &g, DEFAULT_TOL).unwrap().passed);

    let refund = Mechanism::new(Arc::new(BestModelAllocation::new(2, q)), Arc::new(Refund(2))).unwrap();
    let report = audit_wbb(&refund, &g, DEFAULT_TOL).unwrap();
    assert_eq!(report.violations.len(), 25);
    assert_eq!(report.worst_margin(), Some(-2.0));
}

#[test]
fn efficiency_cases() {
    let q = QualityFunction::identity_unbounded();
    let g = grid(3.0, 0.5);
    let family = give_withhold_family(2, &q);
    for alpha in [-1.0, -0.6, -0.2, 0.0] {
        let model = Arc::new(PowerMarketModel::new(2, alpha).unwrap());
        let mech = Mechanism::mep_best_model(model.clone(), q.clone()).unwrap();
        let r = audit_efficiency(&mech, model.as_ref(), &q, &g, &family, DEFAULT_TOL).unwrap();
        assert!(r.passed, "alpha {alpha}");
    }

    let sig = QualityFunction::sigmoid();
    let family = give_withhold_family(3, &sig);
    let model = linear(vec![vec![0.2, -0.9, 0.4], vec![0.1, 0.3, -0.8], vec![-0.6, 0.5, 0.1]]);
    let mech = Mechanism::mep_efficient_linear(model.clone(), sig.clone()).unwrap();
    let g = grid(1.0, 0.25);
    assert!(audit_efficiency(&mech, model.as_ref(), &sig, &g, &family, DEFAULT_TOL).unwrap().passed);

    let identity = LinearExternalityModel::identity(2);
    let withhold: Arc<dyn AllocationRule> = Arc::new(GiveWithholdAllocation::new(2, 0, sig.clone()));
    let starve = Mechanism::new(withhold, Arc::new(externa::mechanism::ZeroPayment::new(2))).unwrap();
    let family = give_withhold_family(2, &sig);
    let r = audit_efficiency(&starve, &identity, &sig, &g, &family, DEFAULT_TOL).unwrap();
    assert!(!r.passed);
    assert!(matches!(
        audit_efficiency(&starve, &identity, &sig, &g, &[], DEFAULT_TOL),
        Err(Error::EmptyFamily)
    ));
}

#[test]
fn necessary_conditions_cases() {
    let q = QualityFunction::sigmoid();
    let model = quasi();
    let mep = Mechanism::mep_best_model(model.clone(), q.clone()).unwrap();
    let g = grid(1.0, 0.25);
    let ok = check_necessary_conditions(&mep, model.as_ref(), &q, &g, QUAD_STEP, 1e-6).unwrap();
    assert!(ok.passed, "{:?}", ok.violations.first());

    let over = mep.shifted(0.01);
    let bad = check_necessary_conditions(&over, model.as_ref(), &q, &g, QUAD_STEP, 1e-6).unwrap();
    assert!(bad.violations.iter().any(|v| v.detail.as_deref() == Some("eq1")));

    let q = QualityFunction::identity_unbounded();
    let free = Mechanism::free(2, q.clone());
    let nc = PowerMarketModel::new(2, 0.0).unwrap();
    assert!(check_necessary_conditions(&free, &nc, &q, &g, QUAD_STEP, 1e-6).unwrap().passed);
}

#[test]
fn free_mechanism_against_sufficient_conditions() {
    // Zero payments fail the sufficient conditions through the own-data
    // kink. The eq3 check: once the true type exceeds the pooled data, the agent
    // deploys its own model and the report derivative drops to zero. The eq4 check:
    // with the other agent at zero the pooled model ties the own model on
    // the diagonal, halving the central-difference derivative there. Grid
    // IC and IR hold regardless.
    let q = QualityFunction::identity_unbounded();
    let model = PowerMarketModel::new(2, 0.0).unwrap();
    let free = Mechanism::free(2, q.clone());
    let g = grid(1.0, 0.25);
    let suff = check_sufficient_conditions(&free, &model, &q, &g, QUAD_STEP, 1e-6).unwrap();
    assert!(!suff.passed);
    assert!(suff.violations.iter().any(|v| v.detail.as_deref() == Some("eq3")));
    for v in suff.violations.iter().filter(|v| v.detail.as_deref() == Some("eq4")) {
        let other = 1 - v.agent.unwrap();
        assert_eq!(v.profile[other], 0.0);
    }
    assert!(audit_ic(&free, &model, &q, &g, DEFAULT_TOL).unwrap().passed);
    assert!(audit_ir(&free, &model, &q, &g, DEFAULT_TOL).unwrap().passed);
}

/// Gives each participant a model that worsens as its report grows.
struct Backwards {
    quality: QualityFunction,
}

impl AllocationRule for Backwards {
    fn label(&self) -> &str {
        "backwards"
    }

    fn agents(&self) -> usize {
        2
    }

    fn allocate(&self, reports: &[Report]) -> Result<Vec<f64>> {
        reports
            .iter()
            .map(|r| match r {
                Report::Absent => Ok(0.0),
                Report::Size(s) => self.quality.evaluate(4.0 - 3.0 * s),
            })
            .collect()
    }
}

#[test]
fn decreasing_allocation_is_flagged() {
    let q = QualityFunction::identity_unbounded();
    let model = ProportionalFixedMarketModel::new(2).unwrap();
    let mech = Mechanism::new(
        Arc::new(Backwards { quality: q.clone() }),
        Arc::new(externa::mechanism::ZeroPayment::new(2)),
    )
    .unwrap();
    let g = grid(1.0, 0.25);
    let suff = check_sufficient_conditions(&mech, &model, &q, &g, QUAD_STEP, 1e-6).unwrap();
    assert!(!suff.passed);
    assert!(!audit_ic(&mech, &model, &q, &g, DEFAULT_TOL).unwrap().passed);
}

struct Kinked;

impl Valuation for Kinked {
    fn label(&self) -> &str {
        "kinked"
    }

    fn agents(&self) -> usize {
        2
    }

    fn value_of(&self, i: usize, q: &[f64]) -> Result<f64> {
        Ok(q[i].min(0.5))
    }

    fn derivative_support(&self) -> DerivativeSupport {
        DerivativeSupport::None
    }
}

#[test]
fn non_differentiable_model_is_rejected() {
    let q = QualityFunction::identity();
    let free = Mechanism::free(2, q.clone());
    let g = grid(1.0, 0.5);
    assert!(matches!(
        check_necessary_conditions(&free, &Kinked, &q, &g, QUAD_STEP, 1e-6),
        Err(Error::NotDifferentiable(_))
    ));
    assert!(matches!(
        check_sufficient_conditions(&free, &Kinked, &q, &g, QUAD_STEP, 1e-6),
        Err(Error::NotDifferentiable(_))
    ));
}

#[test]
fn audits_are_deterministic() {
    let q = QualityFunction::identity_unbounded();
    let model = Arc::new(ProportionalFixedMarketModel::new(2).unwrap());
    let mech = Mechanism::vcg(model.clone(), give_withhold_family(2, &q), q.clone()).unwrap();
    let g = grid(6.0, 1.0);
    let a = audit_ic(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap();
    let b = audit_ic(&mech, model.as_ref(), &q, &g, DEFAULT_TOL).unwrap();
    assert_eq!(a, b);
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<externa::audit::AuditReport>(&json).unwrap(), a);
}
