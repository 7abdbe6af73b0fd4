//! Named verification checks, one per acceptance criterion. The CLI's
//! `verify` subcommand runs them all; the acceptance test suite asserts each
//! one individually.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::circuit::{self, ideal_tables, Variant};
use crate::loopholes::{
    self, apply_noise, eta_threshold, eta_threshold_closed_form, inefficiency_strategy_sim,
    s_of_eta, werner_fraction_for_fidelity, NoiseModel,
};
use crate::quantum::{DensityMatrix, Ket};
use crate::stats::{
    analytic_result, derive_seed, fine_lhv_membership, lhv_bound, lhv_strategies,
    monte_carlo_uncertainty, no_signalling_report, sample_all_counts,
};

const S_MAX: f64 = 2.8284271247461903;
const COS_TERM: f64 = 0.6532814824381883; // cos(π/8)/√2
const SIN_TERM: f64 = 0.2705980500730985; // sin(π/8)/√2

/// Numerical tolerances for the verification suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Exact double-precision algebra at dimension ≤ 64.
    pub exact: f64,
    /// Eigenvalue-based quantities (metrics, PSD checks).
    pub eigen: f64,
    /// Root finding against closed forms.
    pub root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-12,
            eigen: 1e-10,
            root: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &'static str, detail: String) -> Self {
        CheckResult {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        CheckResult {
            name,
            passed: false,
            detail,
        }
    }

    fn from(name: &'static str, failures: Vec<String>, ok_detail: String) -> Self {
        if failures.is_empty() {
            Self::pass(name, ok_detail)
        } else {
            Self::fail(name, failures.join("; "))
        }
    }
}

/// Criterion 1: every nonzero ideal outcome probability is `(1 ± 1/√2)/4`
/// and eigenvalue-0 outcomes carry no probability.
pub fn check_ideal_probabilities(tols: &Tolerances) -> CheckResult {
    const NAME: &str = "ideal_probability_table";
    let high = (1.0 + FRAC_1_SQRT_2) / 4.0;
    let low = (1.0 - FRAC_1_SQRT_2) / 4.0;
    let tables = match ideal_tables(Variant::Main) {
        Ok(t) => t,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let mut failures = Vec::new();
    for table in &tables {
        for e in &table.entries {
            let p = e.probability;
            let close_to = |t: f64| (p - t).abs() < tols.exact;
            if !(close_to(high) || close_to(low) || close_to(0.0)) {
                failures.push(format!(
                    "({},{}) outcome ({},{}): probability {p} not in the ideal set",
                    table.setting.x, table.setting.y, e.outcome_a, e.outcome_b
                ));
            }
            if (e.eigenvalue_a == 0.0 || e.eigenvalue_b == 0.0) && p >= tols.exact {
                failures.push(format!(
                    "zero-eigenvalue outcome ({},{}) has probability {p}",
                    e.outcome_a, e.outcome_b
                ));
            }
        }
    }
    CheckResult::from(
        NAME,
        failures,
        format!("64 outcomes all in {{{high:.10}, {low:.10}, 0}}"),
    )
}

/// Criterion 2: the ideal expectations are ±1/√2 and assemble to 2√2.
pub fn check_ideal_s(tols: &Tolerances) -> CheckResult {
    const NAME: &str = "ideal_s_value";
    let tables = match ideal_tables(Variant::Main) {
        Ok(t) => t,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let e: Vec<f64> = tables.iter().map(circuit::expectation).collect();
    let mut failures = Vec::new();
    let expect = [-FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2];
    for (k, (&got, &want)) in e.iter().zip(expect.iter()).enumerate() {
        if (got - want).abs() >= tols.exact {
            failures.push(format!("expectation {k}: {got} vs {want}"));
        }
    }
    let s = match crate::stats::s_value(e[3], e[2], e[1], e[0]) {
        Ok(s) => s,
        Err(err) => return CheckResult::fail(NAME, err.to_string()),
    };
    if (s - S_MAX).abs() >= tols.exact {
        failures.push(format!("S = {s} vs 2√2 = {S_MAX}"));
    }
    CheckResult::from(NAME, failures, format!("S = {s:.15}"))
}

/// Criterion 3, parameterised so a tampered state can be fed in: the branch
/// norm is 1/16 and all eight nonzero amplitudes match `±cos(π/8)/√2`,
/// `±sin(π/8)/√2` term by term (the other 12 basis kets are absent).
pub fn check_four_photon_amplitudes_of(state: &Ket, tols: &Tolerances) -> CheckResult {
    const NAME: &str = "four_photon_amplitudes";
    let mut failures = Vec::new();
    let norm2 = state.norm_sqr();
    if (norm2 - 1.0 / 16.0).abs() >= tols.exact {
        failures.push(format!("squared norm {norm2} vs 1/16"));
    }
    let state = match state.reordered(&["a", "α", "b", "β"]) {
        Ok(s) => s,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let normed = match state.normalized() {
        Ok(s) => s,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let expected = [
        ("hvvh", COS_TERM),
        ("vhhv", COS_TERM),
        ("hvhv", SIN_TERM),
        ("vhvh", -SIN_TERM),
    ];
    for (pols, want) in expected {
        let got = normed.amplitude(pols).expect("valid basis string");
        if (got.re - want).abs() >= tols.exact || got.im.abs() >= tols.exact {
            failures.push(format!("amplitude {pols}: {got} vs {want}"));
        }
    }
    for idx in 0..16usize {
        let pols: String = (0..4)
            .map(|k| if (idx >> (3 - k)) & 1 == 1 { 'v' } else { 'h' })
            .collect();
        if expected.iter().any(|(p, _)| *p == pols) {
            continue;
        }
        let got = normed.amplitude(&pols).expect("valid basis string");
        if got.norm() >= tols.exact {
            failures.push(format!("amplitude {pols} should vanish, got {got}"));
        }
    }
    CheckResult::from(
        NAME,
        failures,
        "branch norm 1/16, all 16 amplitudes as predicted".to_string(),
    )
}

/// Criterion 3 on the state the circuit actually produces.
pub fn check_four_photon_amplitudes(tols: &Tolerances) -> CheckResult {
    check_four_photon_amplitudes_of(&circuit::four_photon_state(), tols)
}

/// Criterion 4: the bisection threshold matches the closed form, rounds to
/// 0.875, roots the curve, and the plain-Bell reference rounds to 0.828.
pub fn check_detection_threshold(tols: &Tolerances) -> CheckResult {
    const NAME: &str = "detection_threshold";
    let mut failures = Vec::new();
    let t = eta_threshold();
    let closed = eta_threshold_closed_form();
    if (t - closed).abs() >= tols.root {
        failures.push(format!("bisection {t} vs closed form {closed}"));
    }
    if ((t * 1000.0).round() / 1000.0 - 0.875).abs() > 1e-12 {
        failures.push(format!("threshold {t} does not round to 0.875"));
    }
    match s_of_eta(t) {
        Ok(s) => {
            if (s - 2.0).abs() >= tols.root {
                failures.push(format!("S(threshold) = {s} vs 2"));
            }
        }
        Err(e) => failures.push(e.to_string()),
    }
    let chsh = loopholes::chsh_eta_reference();
    if ((chsh * 1000.0).round() / 1000.0 - 0.828).abs() > 1e-12 {
        failures.push(format!("CHSH reference {chsh} does not round to 0.828"));
    }
    CheckResult::from(
        NAME,
        failures,
        format!("threshold {t:.6} (reference {chsh:.6})"),
    )
}

/// Criterion 5: at the experiment's event budget the analytic and
/// Monte-Carlo uncertainties agree within 0.005 and σ_S lands in
/// [0.05, 0.10], for at least 16 of 20 fixed seeds.
pub fn check_error_machinery() -> CheckResult {
    const NAME: &str = "error_machinery_cross_validation";
    let tables = match ideal_tables(Variant::Main) {
        Ok(t) => t,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let per_setting = 1794.0 / 4.0;
    let mut good = 0u32;
    let mut agreements = 0u32;
    let mut in_range = 0u32;
    let mut worst_gap = 0.0f64;
    for seed in 0..20u64 {
        let counts = match sample_all_counts(&tables, per_setting, derive_seed(seed, 0x51)) {
            Ok(c) => c,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let ana = match analytic_result(&counts) {
            Ok(a) => a,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let mc = match monte_carlo_uncertainty(&counts, 100_000, derive_seed(seed, 0x52)) {
            Ok(m) => m,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let gap = (ana.s.sigma_mean() - mc.s.sigma_mean()).abs();
        worst_gap = worst_gap.max(gap);
        let agree = gap < 0.005;
        let ranged = (0.05..=0.10).contains(&ana.s.sigma_mean());
        agreements += agree as u32;
        in_range += ranged as u32;
        good += (agree && ranged) as u32;
    }
    let detail = format!(
        "{good}/20 seeds pass (agreement {agreements}/20, worst gap {worst_gap:.5}; σ in range {in_range}/20)"
    );
    if good >= 16 {
        CheckResult::pass(NAME, detail)
    } else {
        CheckResult::fail(NAME, detail)
    }
}

/// Criterion 6: the exhaustive deterministic oracle caps at exactly 2, the
/// ideal quantum tables fall outside the classical set and product-state
/// tables fall inside it.
pub fn check_lhv_oracle(tols: &Tolerances) -> CheckResult {
    const NAME: &str = "lhv_oracle";
    let mut failures = Vec::new();
    if lhv_bound() != 2.0 {
        failures.push(format!("deterministic bound {} != 2", lhv_bound()));
    }
    for (strategy, s) in lhv_strategies() {
        if s.abs() > 2.0 {
            failures.push(format!("strategy {strategy:?} exceeds the bound: {s}"));
        }
    }
    match ideal_tables(Variant::Main) {
        Ok(tables) => match fine_lhv_membership(&tables, tols.root) {
            Ok(false) => {}
            Ok(true) => failures.push("ideal tables admitted a joint distribution".into()),
            Err(e) => failures.push(e.to_string()),
        },
        Err(e) => failures.push(e.to_string()),
    }
    let product = Ket::basis(&["a", "α", "b", "β"], "hvhv").expect("product state");
    let tables: Vec<_> = circuit::all_settings(Variant::Main)
        .into_iter()
        .map(|s| circuit::outcome_probabilities(&product, s))
        .collect::<crate::error::Result<_>>()
        .expect("product tables");
    let tables: [circuit::ProbabilityTable; 4] = tables.try_into().expect("four settings");
    match fine_lhv_membership(&tables, tols.root) {
        Ok(true) => {}
        Ok(false) => failures.push("product-state tables rejected".into()),
        Err(e) => failures.push(e.to_string()),
    }
    CheckResult::from(
        NAME,
        failures,
        "bound 2 exact; quantum outside, product inside".to_string(),
    )
}

/// Criterion 7: ideal marginals are setting-independent and a hand-built
/// signalling table is flagged.
pub fn check_no_signalling(tols: &Tolerances) -> CheckResult {
    const NAME: &str = "no_signalling";
    let mut failures = Vec::new();
    match ideal_tables(Variant::Main) {
        Ok(tables) => {
            let report = no_signalling_report(&tables);
            if report.max() >= tols.exact {
                failures.push(format!("ideal marginal discrepancy {}", report.max()));
            }
            let mut tampered = tables;
            for e in &mut tampered[0].entries {
                e.probability = if e.outcome_a == "hv" && e.outcome_b == "vh" {
                    1.0
                } else {
                    0.0
                };
            }
            let flagged = no_signalling_report(&tampered);
            if flagged.alice_max_discrepancy <= 1e-6 {
                failures.push("hand-built signalling table not flagged".into());
            }
        }
        Err(e) => failures.push(e.to_string()),
    }
    CheckResult::from(
        NAME,
        failures,
        "ideal marginals consistent; tampered table flagged".to_string(),
    )
}

/// Criterion 8: both observable families give the same ideal S.
pub fn check_variant_equivalence(tols: &Tolerances) -> CheckResult {
    const NAME: &str = "variant_equivalence";
    let s = |v: Variant| -> crate::error::Result<f64> {
        loopholes::s_from_tables(&ideal_tables(v)?)
    };
    match (s(Variant::Main), s(Variant::AltObservables)) {
        (Ok(main), Ok(alt)) => {
            if (main - alt).abs() < tols.exact {
                CheckResult::pass(NAME, format!("both variants give S = {main:.15}"))
            } else {
                CheckResult::fail(NAME, format!("main {main} vs alternative {alt}"))
            }
        }
        (Err(e), _) | (_, Err(e)) => CheckResult::fail(NAME, e.to_string()),
    }
}

/// Noise model used for the plausibility criterion: per-wing white noise
/// accumulating the three source photons feeding each fusion gate, each at
/// the quoted 0.987 source fidelity, plus the measured Bell-analysis
/// infidelity.
pub fn plausibility_noise_model() -> NoiseModel {
    let per_source = werner_fraction_for_fidelity(0.987);
    NoiseModel {
        white_noise_fraction: 1.0 - (1.0 - per_source).powi(3),
        bsm_infidelity: 0.0316,
        ..NoiseModel::default()
    }
}

/// Criterion 9: with the plausibility noise model, sampled S at the
/// experiment's event budget stays in [2.2, 2.6] and the violation
/// σ-distance exceeds 2, each for at least 18 of 20 fixed seeds. This
/// brackets the reported value; it is explicitly not an exact reproduction.
pub fn check_noise_plausibility() -> CheckResult {
    const NAME: &str = "noise_plausibility";
    let model = plausibility_noise_model();
    let tables = match ideal_tables(Variant::Main).and_then(|t| apply_noise(&model, &t)) {
        Ok(t) => t,
        Err(e) => return CheckResult::fail(NAME, e.to_string()),
    };
    let per_setting = 1794.0 / 4.0;
    let mut bracketed = 0u32;
    let mut significant = 0u32;
    let mut s_sum = 0.0;
    for seed in 0..20u64 {
        let counts = match sample_all_counts(&tables, per_setting, derive_seed(seed, 0x91)) {
            Ok(c) => c,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let mc = match monte_carlo_uncertainty(&counts, 100_000, derive_seed(seed, 0x92)) {
            Ok(m) => m,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let s = mc.s.value;
        s_sum += s;
        bracketed += ((2.2..=2.6).contains(&s)) as u32;
        if mc.s.sigma_minus > 0.0 && (s - 2.0) / mc.s.sigma_minus > 2.0 {
            significant += 1;
        }
    }
    let detail = format!(
        "mean S {:.4}; bracketed {bracketed}/20, σ-distance > 2 for {significant}/20",
        s_sum / 20.0
    );
    if bracketed >= 18 && significant >= 18 {
        CheckResult::pass(NAME, detail)
    } else {
        CheckResult::fail(NAME, detail)
    }
}

/// Criterion 10: the no-click strategy simulation tracks the closed-form
/// efficiency curve within 4 Monte-Carlo sigmas at three efficiencies.
pub fn check_inefficiency_sim() -> CheckResult {
    const NAME: &str = "inefficiency_simulation";
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (eta, seed) in [(0.7f64, 0xa1u64), (0.875, 0xa2), (1.0, 0xa3)] {
        let sim = match inefficiency_strategy_sim(eta, 1_000_000, seed) {
            Ok(s) => s,
            Err(e) => return CheckResult::fail(NAME, e.to_string()),
        };
        let formula = s_of_eta(eta).expect("eta in range");
        let tol = (4.0 * sim.sigma_mean()).max(1e-9);
        let gap = (sim.value - formula).abs();
        details.push(format!("η={eta}: |{:.5}-{formula:.5}|={gap:.5}", sim.value));
        if gap >= tol {
            failures.push(format!(
                "η = {eta}: sim {} vs formula {formula} beyond 4σ = {tol}",
                sim.value
            ));
        }
    }
    CheckResult::from(NAME, failures, details.join(", "))
}

/// Criterion 11: the tomography metrics behave on known states and the
/// concurrence survives the resource rotation.
pub fn check_entanglement_metrics(tols: &Tolerances) -> CheckResult {
    const NAME: &str = "entanglement_metrics";
    let mut failures = Vec::new();
    let singlet = circuit::bell_state(circuit::BellKind::PsiMinus, "a", "b");
    let rho = DensityMatrix::from_ket(&singlet).expect("pure state");
    match rho.concurrence() {
        Ok(c) if (c - 1.0).abs() < tols.eigen => {}
        Ok(c) => failures.push(format!("singlet concurrence {c} vs 1")),
        Err(e) => failures.push(e.to_string()),
    }
    let purity = DensityMatrix::maximally_mixed(2).purity();
    if (purity - 0.25).abs() >= tols.eigen {
        failures.push(format!("maximally mixed purity {purity} vs 0.25"));
    }
    match rho.fidelity(&rho) {
        Ok(f) if (f - 1.0).abs() < tols.eigen => {}
        Ok(f) => failures.push(format!("self-fidelity {f} vs 1")),
        Err(e) => failures.push(e.to_string()),
    }
    let rotated = DensityMatrix::from_ket(&circuit::resource_state()).expect("pure state");
    match (rho.concurrence(), rotated.concurrence()) {
        (Ok(a), Ok(b)) => {
            if (a - b).abs() >= tols.eigen {
                failures.push(format!("concurrence changed under rotation: {a} vs {b}"));
            }
        }
        (Err(e), _) | (_, Err(e)) => failures.push(e.to_string()),
    }
    CheckResult::from(
        NAME,
        failures,
        "concurrence, purity and fidelity behave on reference states".to_string(),
    )
}

/// Runs the verification suite. Statistical checks (criteria 5, 9 and 10)
/// dominate the runtime and can be skipped for a quick structural pass.
pub fn run_all(tols: &Tolerances, include_statistical: bool) -> Vec<CheckResult> {
    let mut results = vec![
        check_ideal_probabilities(tols),
        check_ideal_s(tols),
        check_four_photon_amplitudes(tols),
        check_detection_threshold(tols),
        check_lhv_oracle(tols),
        check_no_signalling(tols),
        check_variant_equivalence(tols),
        check_entanglement_metrics(tols),
    ];
    if include_statistical {
        results.push(check_error_machinery());
        results.push(check_noise_plausibility());
        results.push(check_inefficiency_sim());
    }
    results
}
