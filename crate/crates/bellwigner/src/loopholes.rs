//! Detection-efficiency analysis, noise channels degrading the ideal
//! predictions, and the polarizer-based alternative measurement protocol.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    self, all_settings, expectation, outcome_probabilities, ProbabilityTable, SettingPair, Variant,
};
use crate::error::{Error, Result};
use crate::stats::{
    self, derive_seed, percentile, poisson_draw, BellWignerResult, CountEntry, CountsTable,
    ErrorMethod, UncertainValue, MIN_MC_SAMPLES, SIGMA_HIGH_PERCENTILE, SIGMA_LOW_PERCENTILE,
};

/// Imperfection parameters degrading the ideal predictions.
///
/// `white_noise_fraction` mixes each wing's effective photon/record qubit
/// pair with the maximally mixed state, standing in for multi-pair emission.
/// `bsm_infidelity` smears the Bell-state analysis over its four outcomes.
/// `polarizer_loss` is the per-wing transmission loss of the alternative
/// protocol and `detection_efficiency` the per-photon combined detection
/// efficiency η of the loophole analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub white_noise_fraction: f64,
    pub bsm_infidelity: f64,
    pub polarizer_loss: f64,
    pub detection_efficiency: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            white_noise_fraction: 0.0,
            bsm_infidelity: 0.0,
            polarizer_loss: 0.0,
            detection_efficiency: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("white_noise_fraction", self.white_noise_fraction),
            ("bsm_infidelity", self.bsm_infidelity),
            ("polarizer_loss", self.polarizer_loss),
            ("detection_efficiency", self.detection_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "[0, 1]",
                });
            }
        }
        Ok(())
    }
}

/// White-noise fraction of a Werner state with the given fidelity to the
/// pure target: `F = 1 − 3p/4`, so `p = 4(1 − F)/3`.
pub fn werner_fraction_for_fidelity(fidelity: f64) -> f64 {
    (4.0 * (1.0 - fidelity) / 3.0).clamp(0.0, 1.0)
}

/// The four expectation values at detection efficiency `eta` when every
/// no-click is replaced by the fixed outcome +1. Record measurements need
/// one detector (probability η); Bell-state analysis needs two (η²).
pub fn expectations_of_eta(eta: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "[0, 1]",
        });
    }
    let c = FRAC_1_SQRT_2;
    let e00 = eta.powi(2) * (-c) + (1.0 - eta).powi(2);
    let e01 = eta.powi(3) * c + (1.0 - eta) * (1.0 - eta.powi(2));
    let e10 = e01;
    let e11 = eta.powi(4) * c + (1.0 - eta.powi(2)).powi(2);
    Ok([e00, e01, e10, e11])
}

/// `S(η)` assembled from the four efficiency formulas.
pub fn s_of_eta(eta: f64) -> Result<f64> {
    let [e00, e01, e10, e11] = expectations_of_eta(eta)?;
    Ok(e11 + e10 + e01 - e00)
}

/// Minimal detection efficiency for a violation, found by bisecting
/// `S(η) = 2` on (0.5, 1). Matches `2√(3(1 − 1/√2)) − 1` to well below 1e-9.
pub fn eta_threshold() -> f64 {
    let mut lo = 0.5f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if s_of_eta(mid).expect("eta in range") > 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed form of the threshold above.
pub fn eta_threshold_closed_form() -> f64 {
    2.0 * (3.0 * (1.0 - FRAC_1_SQRT_2)).sqrt() - 1.0
}

/// The corresponding plain-Bell reference efficiency `2√2 − 2`.
pub fn chsh_eta_reference() -> f64 {
    2.0 * 2f64.sqrt() - 2.0
}

/// Samples the no-click strategy directly: ideal outcomes are drawn per
/// setting, then erased to +1 with probability `1 − η` (record settings) or
/// `1 − η²` (Bell-analysis settings) per party. Returns the estimated `S`
/// with its Monte-Carlo standard error.
pub fn inefficiency_strategy_sim(
    eta: f64,
    events_per_setting: u64,
    seed: u64,
) -> Result<UncertainValue> {
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "[0, 1]",
        });
    }
    if events_per_setting == 0 {
        return Err(Error::OutOfRange {
            name: "events",
            value: 0.0,
            range: "[1, inf)",
        });
    }
    let tables = circuit::ideal_tables(Variant::Main)?;
    let mut s = 0.0;
    let mut var_s = 0.0;
    for table in &tables {
        let (x, y) = (table.setting.x, table.setting.y);
        let click_a = if x == 0 { eta } else { eta * eta };
        let click_b = if y == 0 { eta } else { eta * eta };
        let mut cumulative = Vec::with_capacity(table.entries.len());
        let mut acc = 0.0;
        for e in &table.entries {
            acc += e.probability;
            cumulative.push((acc, e.eigenvalue_a, e.eigenvalue_b));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, table.setting.index() as u64));
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for _ in 0..events_per_setting {
            let r: f64 = rand::Rng::random(&mut rng);
            let &(_, la, lb) = cumulative
                .iter()
                .find(|(c, _, _)| r <= *c)
                .unwrap_or(cumulative.last().expect("non-empty table"));
            let a = if rand::Rng::random::<f64>(&mut rng) < click_a {
                la
            } else {
                1.0
            };
            let b = if rand::Rng::random::<f64>(&mut rng) < click_b {
                lb
            } else {
                1.0
            };
            sum += a * b;
            sum_sq += (a * b) * (a * b);
        }
        let n = events_per_setting as f64;
        let mean = sum / n;
        let var = ((sum_sq / n - mean * mean) / n).max(0.0);
        if x == 0 && y == 0 {
            s -= mean;
        } else {
            s += mean;
        }
        var_s += var;
    }
    Ok(UncertainValue::symmetric(s, var_s.sqrt()))
}

fn as_grid(table: &ProbabilityTable) -> Result<[[f64; 4]; 4]> {
    if table.entries.len() != 16 {
        return Err(Error::DimensionMismatch {
            expected: 16,
            actual: table.entries.len(),
        });
    }
    let mut grid = [[0.0; 4]; 4];
    for (idx, e) in table.entries.iter().enumerate() {
        grid[idx / 4][idx % 4] = e.probability;
    }
    Ok(grid)
}

fn mix_alice(grid: &mut [[f64; 4]; 4], q: f64) {
    if q == 0.0 {
        return;
    }
    let mut marginal_b = [0.0f64; 4];
    for row in grid.iter() {
        for (j, p) in row.iter().enumerate() {
            marginal_b[j] += p;
        }
    }
    for row in grid.iter_mut() {
        for (j, p) in row.iter_mut().enumerate() {
            *p = (1.0 - q) * *p + q * 0.25 * marginal_b[j];
        }
    }
}

fn mix_bob(grid: &mut [[f64; 4]; 4], q: f64) {
    if q == 0.0 {
        return;
    }
    let mut marginal_a = [0.0f64; 4];
    for (i, row) in grid.iter().enumerate() {
        marginal_a[i] = row.iter().sum();
    }
    for (i, row) in grid.iter_mut().enumerate() {
        for p in row.iter_mut() {
            *p = (1.0 - q) * *p + q * 0.25 * marginal_a[i];
        }
    }
}

/// Degrades ideal tables: first the white-noise admixture on each wing's
/// effective qubit pair (rescaling every correlation by `1 − p` per wing),
/// then the Bell-analysis smearing on settings that use it. The application
/// order is fixed; the two channels commute anyway.
pub fn apply_noise(
    model: &NoiseModel,
    tables: &[ProbabilityTable; 4],
) -> Result<[ProbabilityTable; 4]> {
    model.validate()?;
    let mut out = Vec::with_capacity(4);
    for table in tables {
        let mut grid = as_grid(table)?;
        mix_alice(&mut grid, model.white_noise_fraction);
        mix_bob(&mut grid, model.white_noise_fraction);
        if table.setting.x == 1 {
            mix_alice(&mut grid, model.bsm_infidelity);
        }
        if table.setting.y == 1 {
            mix_bob(&mut grid, model.bsm_infidelity);
        }
        let mut entries = table.entries.clone();
        for (idx, e) in entries.iter_mut().enumerate() {
            e.probability = grid[idx / 4][idx % 4];
        }
        out.push(ProbabilityTable {
            setting: table.setting,
            entries,
        });
    }
    Ok(out.try_into().expect("four settings"))
}

/// Ideal `S` as a function of the resource-rotation wave-plate angle.
pub fn s_versus_angle(thetas: &[f64]) -> Result<Vec<(f64, f64)>> {
    thetas
        .iter()
        .map(|&theta| {
            let state = circuit::four_photon_state_with_angle(theta);
            let mut e = [0.0f64; 4];
            for setting in all_settings(Variant::Main) {
                e[setting.index()] = expectation(&outcome_probabilities(&state, setting)?);
            }
            Ok((theta, e[3] + e[2] + e[1] - e[0]))
        })
        .collect()
}

/// `S(η)` sampled on a grid together with the violation threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyCurve {
    pub samples: Vec<(f64, f64)>,
    pub threshold: f64,
}

impl EfficiencyCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eta,s")?;
        for (eta, s) in &self.samples {
            writeln!(w, "{eta},{s}")?;
        }
        Ok(())
    }
}

/// Evaluates the efficiency formulas on a grid of η values.
pub fn efficiency_curve(etas: &[f64]) -> Result<EfficiencyCurve> {
    let samples = etas
        .iter()
        .map(|&eta| Ok((eta, s_of_eta(eta)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EfficiencyCurve {
        samples,
        threshold: eta_threshold(),
    })
}

/// One measured eigenvector pair of the polarizer protocol. Weights are
/// expected counts when built deterministically and integer draws when
/// Poisson-sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizerOutcome {
    pub outcome_a: String,
    pub outcome_b: String,
    pub eigenvalue_a: f64,
    pub eigenvalue_b: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizerSetting {
    pub setting: SettingPair,
    pub outcomes: Vec<PolarizerOutcome>,
}

/// Outcome of an emulated polarizer-protocol run. All expectations are
/// normalised against the joint-setting total, so their uncertainties are
/// correlated through that shared denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizerRun {
    pub loss: f64,
    pub exposure_per_setting: f64,
    pub measured: Vec<PolarizerSetting>,
    pub reference_total: f64,
    pub result: BellWignerResult,
}

fn polarizer_wings(setting: &SettingPair) -> i32 {
    (setting.x == 0) as i32 + (setting.y == 0) as i32
}

/// Emulates the alternative protocol: for the mixed and record settings only
/// the non-zero-eigenvalue eigenvector pairs are measured, their counts are
/// reduced by `1 − loss` per wing that measures through polarizers, and all
/// expectations are normalised with the joint-setting total. With `seed`
/// the counts are Poisson draws; without it they stay at their expectations.
pub fn alt_polarizer_protocol(
    tables: &[ProbabilityTable; 4],
    loss: f64,
    exposure_per_setting: f64,
    seed: Option<u64>,
) -> Result<PolarizerRun> {
    if !(0.0..=1.0).contains(&loss) || !loss.is_finite() {
        return Err(Error::OutOfRange {
            name: "loss",
            value: loss,
            range: "[0, 1]",
        });
    }
    if !exposure_per_setting.is_finite() || exposure_per_setting <= 0.0 {
        return Err(Error::OutOfRange {
            name: "exposure_per_setting",
            value: exposure_per_setting,
            range: "(0, inf)",
        });
    }
    for t in tables {
        if t.setting.variant == Variant::Main {
            return Err(Error::UnsupportedVariant(
                "polarizer protocol measures the alternative observables".into(),
            ));
        }
    }

    let mut measured = Vec::with_capacity(4);
    for table in tables {
        let joint = table.setting.x == 1 && table.setting.y == 1;
        let attenuation = (1.0 - loss).powi(polarizer_wings(&table.setting));
        let mut outcomes = Vec::new();
        for e in &table.entries {
            if !joint && (e.eigenvalue_a == 0.0 || e.eigenvalue_b == 0.0) {
                continue;
            }
            let mean = exposure_per_setting * e.probability * attenuation;
            let weight = match seed {
                Some(s) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        s,
                        (table.setting.index() * 16 + outcomes.len()) as u64,
                    ));
                    poisson_draw(&mut rng, mean) as f64
                }
                None => mean,
            };
            outcomes.push(PolarizerOutcome {
                outcome_a: e.outcome_a.clone(),
                outcome_b: e.outcome_b.clone(),
                eigenvalue_a: e.eigenvalue_a,
                eigenvalue_b: e.eigenvalue_b,
                weight,
            });
        }
        measured.push(PolarizerSetting {
            setting: table.setting,
            outcomes,
        });
    }

    let result = polarizer_result(&measured)?;
    let reference_total: f64 = measured[3].outcomes.iter().map(|o| o.weight).sum();
    Ok(PolarizerRun {
        loss,
        exposure_per_setting,
        measured,
        reference_total,
        result,
    })
}

fn polarizer_expectations(measured: &[PolarizerSetting]) -> Result<[f64; 4]> {
    let reference: f64 = measured[3].outcomes.iter().map(|o| o.weight).sum();
    if reference <= 0.0 {
        return Err(Error::EmptyCounts);
    }
    let mut es = [0.0f64; 4];
    for ps in measured {
        let num: f64 = ps
            .outcomes
            .iter()
            .map(|o| o.eigenvalue_a * o.eigenvalue_b * o.weight)
            .sum();
        es[ps.setting.index()] = num / reference;
    }
    Ok(es)
}

/// Error propagation with the shared normalisation: every count of the
/// joint setting enters all four expectations through the denominator.
fn polarizer_result(measured: &[PolarizerSetting]) -> Result<BellWignerResult> {
    let es = polarizer_expectations(measured)?;
    let reference: f64 = measured[3].outcomes.iter().map(|o| o.weight).sum();
    let s = es[3] + es[2] + es[1] - es[0];

    let mut sigmas = [0.0f64; 4];
    let mut var_s = 0.0;
    for ps in measured {
        let idx = ps.setting.index();
        let joint = idx == 3;
        let mut var_e = 0.0;
        for o in &ps.outcomes {
            let lambda = o.eigenvalue_a * o.eigenvalue_b;
            if joint {
                var_e += o.weight * (lambda - es[3]) * (lambda - es[3]);
                var_s += o.weight * (lambda - s) * (lambda - s);
            } else {
                var_e += o.weight * lambda * lambda;
                var_s += o.weight * lambda * lambda;
            }
        }
        if !joint {
            var_e += es[idx] * es[idx] * reference;
        }
        sigmas[idx] = var_e.sqrt() / reference;
    }
    let s_sigma = var_s.sqrt() / reference;
    BellWignerResult::assemble(
        UncertainValue::symmetric(es[0], sigmas[0]),
        UncertainValue::symmetric(es[1], sigmas[1]),
        UncertainValue::symmetric(es[2], sigmas[2]),
        UncertainValue::symmetric(es[3], sigmas[3]),
        (s_sigma, s_sigma),
        ErrorMethod::Analytic,
    )
}

/// Percentile-bootstrap uncertainties for a polarizer run, resampling every
/// measured cell and rebuilding the shared normalisation per replica.
pub fn polarizer_monte_carlo(
    run: &PolarizerRun,
    samples: usize,
    seed: u64,
) -> Result<BellWignerResult> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InsufficientSamples {
            min: MIN_MC_SAMPLES,
            actual: samples,
        });
    }
    let observed = polarizer_expectations(&run.measured)?;
    let s_obs = observed[3] + observed[2] + observed[1] - observed[0];

    let replicas: Vec<[f64; 5]> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut nums = [0.0f64; 4];
            let mut reference = 0.0f64;
            for ps in &run.measured {
                let idx = ps.setting.index();
                for o in &ps.outcomes {
                    let draw = poisson_draw(&mut rng, o.weight) as f64;
                    nums[idx] += o.eigenvalue_a * o.eigenvalue_b * draw;
                    if idx == 3 {
                        reference += draw;
                    }
                }
            }
            if reference == 0.0 {
                return [0.0; 5];
            }
            let es: Vec<f64> = nums.iter().map(|n| n / reference).collect();
            [es[0], es[1], es[2], es[3], es[3] + es[2] + es[1] - es[0]]
        })
        .collect();

    let component = |k: usize, center: f64| -> UncertainValue {
        let mut vals: Vec<f64> = replicas.iter().map(|r| r[k]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let lo = percentile(&vals, SIGMA_LOW_PERCENTILE);
        let hi = percentile(&vals, SIGMA_HIGH_PERCENTILE);
        UncertainValue {
            value: center,
            sigma_minus: (center - lo).max(0.0),
            sigma_plus: (hi - center).max(0.0),
        }
    };
    let s = component(4, s_obs);
    BellWignerResult::assemble(
        component(0, observed[0]),
        component(1, observed[1]),
        component(2, observed[2]),
        component(3, observed[3]),
        (s.sigma_minus, s.sigma_plus),
        ErrorMethod::MonteCarlo,
    )
}

impl PolarizerRun {
    /// Integer counts tables when the run was sampled (weights integral).
    pub fn counts_tables(&self) -> Option<Vec<CountsTable>> {
        let mut out = Vec::with_capacity(4);
        for ps in &self.measured {
            let mut entries = Vec::with_capacity(ps.outcomes.len());
            for o in &ps.outcomes {
                if o.weight.fract() != 0.0 || o.weight < 0.0 {
                    return None;
                }
                entries.push(CountEntry {
                    outcome_a: o.outcome_a.clone(),
                    outcome_b: o.outcome_b.clone(),
                    eigenvalue_a: o.eigenvalue_a,
                    eigenvalue_b: o.eigenvalue_b,
                    count: o.weight as u64,
                });
            }
            out.push(CountsTable {
                setting: ps.setting,
                entries,
                duration: self.exposure_per_setting,
            });
        }
        Some(out)
    }
}

/// Convenience: Bell-Wigner value for a set of degraded tables.
pub fn s_from_tables(tables: &[ProbabilityTable; 4]) -> Result<f64> {
    let mut e = [0.0f64; 4];
    for t in tables {
        e[t.setting.index()] = expectation(t);
    }
    stats::s_value(e[3], e[2], e[1], e[0])
}
