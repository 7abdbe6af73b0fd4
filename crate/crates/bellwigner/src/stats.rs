//! Finite-statistics machinery: Poisson count sampling, expectation values
//! from counts, analytic error propagation, Monte-Carlo resampling with
//! percentile intervals, the deterministic local-hidden-variable oracle, and
//! no-signalling diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{ProbabilityTable, SettingPair};
use crate::error::{Error, Result};

/// Lower percentile of a central 1σ-equivalent interval.
pub const SIGMA_LOW_PERCENTILE: f64 = 0.1587;
/// Upper percentile of a central 1σ-equivalent interval.
pub const SIGMA_HIGH_PERCENTILE: f64 = 0.8413;

/// Minimum accepted Monte-Carlo replica count.
pub const MIN_MC_SAMPLES: usize = 1000;

/// Central value with asymmetric 1σ bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertainValue {
    pub value: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
}

impl UncertainValue {
    pub fn symmetric(value: f64, sigma: f64) -> Self {
        UncertainValue {
            value,
            sigma_plus: sigma,
            sigma_minus: sigma,
        }
    }

    pub fn exact(value: f64) -> Self {
        Self::symmetric(value, 0.0)
    }

    /// Mean of the two one-sided widths.
    pub fn sigma_mean(&self) -> f64 {
        0.5 * (self.sigma_plus + self.sigma_minus)
    }
}

/// How a [`BellWignerResult`]'s uncertainties were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMethod {
    Analytic,
    MonteCarlo,
}

/// The four expectation values and the Bell-Wigner parameter assembled from
/// them. `s.value` is always recomputable from the four expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellWignerResult {
    pub e00: UncertainValue,
    pub e01: UncertainValue,
    pub e10: UncertainValue,
    pub e11: UncertainValue,
    pub s: UncertainValue,
    pub method: ErrorMethod,
}

impl BellWignerResult {
    /// Assembles a result, computing `s.value` from the expectations so the
    /// recomputability invariant holds for every constructor path.
    pub fn assemble(
        e00: UncertainValue,
        e01: UncertainValue,
        e10: UncertainValue,
        e11: UncertainValue,
        s_sigma: (f64, f64),
        method: ErrorMethod,
    ) -> Result<Self> {
        let s = s_value(e11.value, e10.value, e01.value, e00.value)?;
        Ok(BellWignerResult {
            e00,
            e01,
            e10,
            e11,
            s: UncertainValue {
                value: s,
                sigma_minus: s_sigma.0,
                sigma_plus: s_sigma.1,
            },
            method,
        })
    }
}

/// One measured outcome cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEntry {
    pub outcome_a: String,
    pub outcome_b: String,
    pub eigenvalue_a: f64,
    pub eigenvalue_b: f64,
    pub count: u64,
}

/// Coincidence counts for one setting pair, aligned with the corresponding
/// [`ProbabilityTable`] entries. `duration` is the abstract exposure weight
/// the counts were accumulated over (the expected total).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    pub setting: SettingPair,
    pub entries: Vec<CountEntry>,
    pub duration: f64,
}

impl CountsTable {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    fn lambdas(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.eigenvalue_a * e.eigenvalue_b)
            .collect()
    }

    fn counts_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.count as f64).collect()
    }

    /// Normalised counts as a probability table.
    pub fn to_probability_table(&self) -> Result<ProbabilityTable> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyCounts);
        }
        let entries = self
            .entries
            .iter()
            .map(|e| crate::circuit::OutcomeEntry {
                outcome_a: e.outcome_a.clone(),
                outcome_b: e.outcome_b.clone(),
                eigenvalue_a: e.eigenvalue_a,
                eigenvalue_b: e.eigenvalue_b,
                probability: e.count as f64 / total as f64,
            })
            .collect();
        Ok(ProbabilityTable {
            setting: self.setting,
            entries,
        })
    }
}

/// The Bell-Wigner combination `⟨A1B1⟩ + ⟨A1B0⟩ + ⟨A0B1⟩ − ⟨A0B0⟩`.
pub fn s_value(e11: f64, e10: f64, e01: f64, e00: f64) -> Result<f64> {
    for (name, v) in [("e11", e11), ("e10", e10), ("e01", e01), ("e00", e00)] {
        if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(Error::OutOfRange {
                name,
                value: v,
                range: "[-1, 1]",
            });
        }
    }
    Ok(e11 + e10 + e01 - e00)
}

/// Quadrature combination of independent per-setting uncertainties.
pub fn combined_sigma(sigmas: &[f64]) -> f64 {
    sigmas.iter().map(|s| s * s).sum::<f64>().sqrt()
}

/// Derives a stream seed from a base seed and a tag (splitmix64 finaliser).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn poisson_draw<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}

/// Draws independent Poisson counts `n_i ~ Poisson(expected_total · p_i)`
/// for every outcome of the table. Reproducible for a fixed seed.
pub fn sample_counts(
    table: &ProbabilityTable,
    expected_total: f64,
    seed: u64,
) -> Result<CountsTable> {
    if !expected_total.is_finite() || expected_total <= 0.0 {
        return Err(Error::OutOfRange {
            name: "expected_total",
            value: expected_total,
            range: "(0, inf)",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = table
        .entries
        .iter()
        .map(|e| CountEntry {
            outcome_a: e.outcome_a.clone(),
            outcome_b: e.outcome_b.clone(),
            eigenvalue_a: e.eigenvalue_a,
            eigenvalue_b: e.eigenvalue_b,
            count: poisson_draw(&mut rng, expected_total * e.probability),
        })
        .collect();
    Ok(CountsTable {
        setting: table.setting,
        entries,
        duration: expected_total,
    })
}

/// Samples all four settings with per-setting derived seeds.
pub fn sample_all_counts(
    tables: &[ProbabilityTable; 4],
    expected_total_per_setting: f64,
    seed: u64,
) -> Result<[CountsTable; 4]> {
    let mut out = Vec::with_capacity(4);
    for (i, t) in tables.iter().enumerate() {
        out.push(sample_counts(
            t,
            expected_total_per_setting,
            derive_seed(seed, i as u64),
        )?);
    }
    Ok(out.try_into().expect("four settings"))
}

/// `f(n) = Σ λ_i n_i / Σ n_i` over raw cells.
pub fn expectation_from_raw(counts: &[f64], lambdas: &[f64]) -> Result<f64> {
    if counts.len() != lambdas.len() {
        return Err(Error::DimensionMismatch {
            expected: lambdas.len(),
            actual: counts.len(),
        });
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyCounts);
    }
    Ok(counts
        .iter()
        .zip(lambdas.iter())
        .map(|(n, l)| n * l)
        .sum::<f64>()
        / total)
}

/// Eigenvalue-weighted average of normalised counts.
pub fn expectation_from_counts(counts: &CountsTable) -> Result<f64> {
    expectation_from_raw(&counts.counts_f64(), &counts.lambdas())
}

/// Propagated 1σ uncertainty of the expectation estimator under Poisson
/// cell variances `σ²_{n_i} = n_i`: `σ_f = √(Σ n_i (λ_i − f)²) / N`.
///
/// With `bayes_floor` the cell variances become `n_i + 1`, guarding against
/// the degenerate `σ = 0` of single-cell tables; off by default.
pub fn sigma_from_raw(counts: &[f64], lambdas: &[f64], bayes_floor: bool) -> Result<f64> {
    let f = expectation_from_raw(counts, lambdas)?;
    let total: f64 = counts.iter().sum();
    let var: f64 = counts
        .iter()
        .zip(lambdas.iter())
        .map(|(n, l)| {
            let cell_var = if bayes_floor { n + 1.0 } else { *n };
            cell_var * (l - f) * (l - f)
        })
        .sum();
    Ok(var.sqrt() / total)
}

/// Analytic 1σ uncertainty of one setting's expectation value.
pub fn error_propagation(counts: &CountsTable) -> Result<f64> {
    sigma_from_raw(&counts.counts_f64(), &counts.lambdas(), false)
}

/// Expectations and uncertainties from observed counts via analytic error
/// propagation; per-setting uncertainties combine in quadrature into σ_S.
pub fn analytic_result(counts: &[CountsTable; 4]) -> Result<BellWignerResult> {
    let mut es = Vec::with_capacity(4);
    let mut sigmas = Vec::with_capacity(4);
    for c in counts {
        es.push(expectation_from_counts(c)?);
        sigmas.push(error_propagation(c)?);
    }
    let s_sigma = combined_sigma(&sigmas);
    BellWignerResult::assemble(
        UncertainValue::symmetric(es[0], sigmas[0]),
        UncertainValue::symmetric(es[1], sigmas[1]),
        UncertainValue::symmetric(es[2], sigmas[2]),
        UncertainValue::symmetric(es[3], sigmas[3]),
        (s_sigma, s_sigma),
        ErrorMethod::Analytic,
    )
}

/// Linear-interpolation percentile of a sorted slice, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn interval_around(sorted: &[f64], center: f64) -> (f64, f64) {
    let lo = percentile(sorted, SIGMA_LOW_PERCENTILE);
    let hi = percentile(sorted, SIGMA_HIGH_PERCENTILE);
    ((center - lo).max(0.0), (hi - center).max(0.0))
}

fn replica_expectation<R: Rng>(rng: &mut R, counts: &[f64], lambdas: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut total = 0.0;
    for (n, l) in counts.iter().zip(lambdas.iter()) {
        let draw = poisson_draw(rng, *n) as f64;
        num += draw * l;
        total += draw;
    }
    if total == 0.0 {
        0.0
    } else {
        num / total
    }
}

/// Poisson-resamples the observed counts and rebuilds `S` per replica.
///
/// The central values are those of the observed counts; the asymmetric
/// uncertainties come from the 15.87 / 84.13 percentiles of the replica
/// distribution. Replicas are seeded by index, so the result is identical
/// for a fixed seed regardless of how many threads evaluate them.
pub fn monte_carlo_uncertainty(
    counts: &[CountsTable; 4],
    samples: usize,
    seed: u64,
) -> Result<BellWignerResult> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InsufficientSamples {
            min: MIN_MC_SAMPLES,
            actual: samples,
        });
    }
    let observed: Vec<f64> = counts
        .iter()
        .map(expectation_from_counts)
        .collect::<Result<_>>()?;
    let cells: Vec<(Vec<f64>, Vec<f64>)> = counts
        .iter()
        .map(|c| (c.counts_f64(), c.lambdas()))
        .collect();

    let replicas: Vec<[f64; 5]> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut es = [0.0f64; 4];
            for (k, (ns, ls)) in cells.iter().enumerate() {
                es[k] = replica_expectation(&mut rng, ns, ls);
            }
            let s = es[3] + es[2] + es[1] - es[0];
            [es[0], es[1], es[2], es[3], s]
        })
        .collect();

    let component = |k: usize, center: f64| -> UncertainValue {
        let mut vals: Vec<f64> = replicas.iter().map(|r| r[k]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let (minus, plus) = interval_around(&vals, center);
        UncertainValue {
            value: center,
            sigma_plus: plus,
            sigma_minus: minus,
        }
    };
    let s_obs = s_value(observed[3], observed[2], observed[1], observed[0])?;
    let e00 = component(0, observed[0]);
    let e01 = component(1, observed[1]);
    let e10 = component(2, observed[2]);
    let e11 = component(3, observed[3]);
    let s = component(4, s_obs);
    BellWignerResult::assemble(
        e00,
        e01,
        e10,
        e11,
        (s.sigma_minus, s.sigma_plus),
        ErrorMethod::MonteCarlo,
    )
}

/// One deterministic assignment of the four observables.
pub type Strategy = [i8; 4]; // (a0, a1, b0, b1), each ±1

/// `S` for every deterministic strategy, enumerated exhaustively.
pub fn lhv_strategies() -> Vec<(Strategy, f64)> {
    let mut out = Vec::with_capacity(16);
    for bits in 0..16u8 {
        let sign = |k: u8| if (bits >> k) & 1 == 1 { 1i8 } else { -1i8 };
        let (a0, a1, b0, b1) = (sign(0), sign(1), sign(2), sign(3));
        let s = (a1 * b1 + a1 * b0 + a0 * b1 - a0 * b0) as f64;
        out.push(([a0, a1, b0, b1], s));
    }
    out
}

/// The classical bound: the maximum of `S` over deterministic strategies.
pub fn lhv_bound() -> f64 {
    lhv_strategies()
        .into_iter()
        .map(|(_, s)| s)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Marginal distribution of one party's outcomes, keyed by outcome name.
fn marginal(table: &ProbabilityTable, alice: bool) -> Vec<(String, f64)> {
    let mut acc: Vec<(String, f64)> = Vec::new();
    for e in &table.entries {
        let name = if alice { &e.outcome_a } else { &e.outcome_b };
        match acc.iter_mut().find(|(n, _)| n == name) {
            Some((_, p)) => *p += e.probability,
            None => acc.push((name.clone(), e.probability)),
        }
    }
    acc
}

fn marginal_gap(m0: &[(String, f64)], m1: &[(String, f64)]) -> f64 {
    let mut gap = 0.0f64;
    for (name, p0) in m0 {
        let p1 = m1
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| *p)
            .unwrap_or(0.0);
        gap = gap.max((p0 - p1).abs());
    }
    gap
}

/// Largest dependence of each party's marginals on the other's setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoSignallingReport {
    pub alice_max_discrepancy: f64,
    pub bob_max_discrepancy: f64,
}

impl NoSignallingReport {
    pub fn max(&self) -> f64 {
        self.alice_max_discrepancy.max(self.bob_max_discrepancy)
    }
}

fn table_for(tables: &[ProbabilityTable; 4], x: u8, y: u8) -> &ProbabilityTable {
    tables
        .iter()
        .find(|t| t.setting.x == x && t.setting.y == y)
        .expect("all four settings present")
}

/// Compares Alice's outcome marginals across Bob's settings and vice versa.
pub fn no_signalling_report(tables: &[ProbabilityTable; 4]) -> NoSignallingReport {
    let mut alice = 0.0f64;
    let mut bob = 0.0f64;
    for x in 0..2u8 {
        let m0 = marginal(table_for(tables, x, 0), true);
        let m1 = marginal(table_for(tables, x, 1), true);
        alice = alice.max(marginal_gap(&m0, &m1));
    }
    for y in 0..2u8 {
        let m0 = marginal(table_for(tables, 0, y), false);
        let m1 = marginal(table_for(tables, 1, y), false);
        bob = bob.max(marginal_gap(&m0, &m1));
    }
    NoSignallingReport {
        alice_max_discrepancy: alice,
        bob_max_discrepancy: bob,
    }
}

/// Drops eigenvalue-0 outcomes and renormalises; returns the excluded mass.
pub fn coarse_grain_binary(table: &ProbabilityTable) -> Result<(ProbabilityTable, f64)> {
    let excluded = table.zero_eigenvalue_mass();
    let kept: Vec<_> = table
        .entries
        .iter()
        .filter(|e| e.eigenvalue_a != 0.0 && e.eigenvalue_b != 0.0)
        .cloned()
        .collect();
    let total: f64 = kept.iter().map(|e| e.probability).sum();
    if total <= 0.0 {
        return Err(Error::EmptyCounts);
    }
    let entries = kept
        .into_iter()
        .map(|mut e| {
            e.probability /= total;
            e
        })
        .collect();
    Ok((
        ProbabilityTable {
            setting: table.setting,
            entries,
        },
        excluded,
    ))
}

/// Fine-style membership test: the four binary tables admit a joint
/// distribution iff no-signalling holds and all eight signed Bell-Wigner
/// combinations stay below the classical bound (within `tol`).
///
/// Zero-eigenvalue outcome mass above `tol` is rejected; coarse-grain first.
pub fn fine_lhv_membership(tables: &[ProbabilityTable; 4], tol: f64) -> Result<bool> {
    for t in tables {
        let mass = t.zero_eigenvalue_mass();
        if mass > tol {
            return Err(Error::NonBinaryMass(mass));
        }
    }
    let ns = no_signalling_report(tables);
    if ns.max() > tol {
        return Ok(false);
    }
    let e = [
        crate::circuit::expectation(table_for(tables, 0, 0)),
        crate::circuit::expectation(table_for(tables, 0, 1)),
        crate::circuit::expectation(table_for(tables, 1, 0)),
        crate::circuit::expectation(table_for(tables, 1, 1)),
    ];
    for negated in 0..4 {
        let s: f64 = e
            .iter()
            .enumerate()
            .map(|(i, v)| if i == negated { -v } else { *v })
            .sum();
        if s.abs() > 2.0 + tol {
            return Ok(false);
        }
    }
    Ok(true)
}
