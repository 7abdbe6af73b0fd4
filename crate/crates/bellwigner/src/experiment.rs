//! Experiment configuration, run orchestration and persistence.
//!
//! A run is described by an [`ExperimentConfig`] (JSON on disk, flags can
//! override individual fields) and produces a [`RunReport`] serialised as
//! JSON next to CSV tables. Identical configurations and seeds produce
//! byte-identical outputs.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{self, ideal_tables, ProbabilityTable, SettingPair, Variant};
use crate::error::{Error, Result};
use crate::loopholes::{
    alt_polarizer_protocol, apply_noise, efficiency_curve, polarizer_monte_carlo, EfficiencyCurve,
    NoiseModel,
};
use crate::stats::{
    analytic_result, derive_seed, monte_carlo_uncertainty, no_signalling_report, sample_all_counts,
    BellWignerResult, CountEntry, CountsTable, NoSignallingReport, UncertainValue,
};

pub const DEFAULT_TOTAL_EVENTS: u64 = 1794;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub total_events: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    pub mc_samples: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variant: Variant::Main,
            total_events: DEFAULT_TOTAL_EVENTS,
            seed: 1,
            noise: NoiseModel::default(),
            mc_samples: DEFAULT_MC_SAMPLES,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_events < 16 {
            return Err(Error::Config(format!(
                "total_events must be at least 16, got {}",
                self.total_events
            )));
        }
        if self.mc_samples < 1000 {
            return Err(Error::Config(format!(
                "mc_samples must be at least 1000, got {}",
                self.mc_samples
            )));
        }
        self.noise
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let cfg: ExperimentConfig = serde_json::from_reader(BufReader::new(file))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn events_per_setting(&self) -> f64 {
        self.total_events as f64 / 4.0
    }
}

/// Everything one run produces. `counts` and the Monte-Carlo result are
/// absent for ideal (sampling-free) runs, as is the σ-distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub tables: Vec<ProbabilityTable>,
    pub counts: Option<Vec<CountsTable>>,
    pub result_analytic: BellWignerResult,
    pub result_monte_carlo: Option<BellWignerResult>,
    pub no_signalling: NoSignallingReport,
    pub poisson_fluctuation_scale: Option<f64>,
    pub sigma_distance: Option<f64>,
}

fn exact_result(tables: &[ProbabilityTable; 4]) -> Result<BellWignerResult> {
    let mut e = [0.0f64; 4];
    for t in tables {
        e[t.setting.index()] = circuit::expectation(t);
    }
    crate::stats::BellWignerResult::assemble(
        UncertainValue::exact(e[0]),
        UncertainValue::exact(e[1]),
        UncertainValue::exact(e[2]),
        UncertainValue::exact(e[3]),
        (0.0, 0.0),
        crate::stats::ErrorMethod::Analytic,
    )
}

fn degraded_tables(cfg: &ExperimentConfig) -> Result<[ProbabilityTable; 4]> {
    let base = ideal_tables(cfg.variant)?;
    apply_noise(&cfg.noise, &base)
}

/// Exact probabilities and expectations under the configured noise; no
/// sampling takes place.
pub fn run_ideal(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let tables = degraded_tables(cfg)?;
    let result_analytic = match cfg.variant {
        Variant::AltPolarizerProtocol => {
            let run = alt_polarizer_protocol(
                &tables,
                cfg.noise.polarizer_loss,
                cfg.events_per_setting(),
                None,
            )?;
            // Expected-count mode: report the exact expectations, no spread.
            BellWignerResult::assemble(
                UncertainValue::exact(run.result.e00.value),
                UncertainValue::exact(run.result.e01.value),
                UncertainValue::exact(run.result.e10.value),
                UncertainValue::exact(run.result.e11.value),
                (0.0, 0.0),
                crate::stats::ErrorMethod::Analytic,
            )?
        }
        _ => exact_result(&tables)?,
    };
    let no_signalling = no_signalling_report(&tables);
    Ok(RunReport {
        config: cfg.clone(),
        tables: tables.to_vec(),
        counts: None,
        result_analytic,
        result_monte_carlo: None,
        no_signalling,
        poisson_fluctuation_scale: None,
        sigma_distance: None,
    })
}

/// Full finite-statistics pipeline: Poisson-sampled counts, both error
/// methods, no-signalling diagnostics and the violation σ-distance
/// `(S − 2)/σ₋`.
pub fn run_sample(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let tables = degraded_tables(cfg)?;
    let per_setting = cfg.events_per_setting();

    let (counts, result_analytic, result_mc) = match cfg.variant {
        Variant::AltPolarizerProtocol => {
            let run = alt_polarizer_protocol(
                &tables,
                cfg.noise.polarizer_loss,
                per_setting,
                Some(derive_seed(cfg.seed, 0x706f6c)),
            )?;
            let mc = polarizer_monte_carlo(&run, cfg.mc_samples, derive_seed(cfg.seed, 0x6d63))?;
            let counts = run
                .counts_tables()
                .expect("sampled polarizer weights are integral");
            (counts, run.result.clone(), mc)
        }
        _ => {
            let counts = sample_all_counts(&tables, per_setting, cfg.seed)?;
            let analytic = analytic_result(&counts)?;
            let mc = monte_carlo_uncertainty(&counts, cfg.mc_samples, derive_seed(cfg.seed, 0x6d63))?;
            (counts.to_vec(), analytic, mc)
        }
    };

    // Marginal consistency of the sampled statistics, judged against the
    // Poisson fluctuation scale 3/√N of the smallest setting total.
    let (no_signalling, fluctuation_scale) = match cfg.variant {
        Variant::AltPolarizerProtocol => (no_signalling_report(&tables), None),
        _ => {
            let sampled: Vec<ProbabilityTable> = counts
                .iter()
                .map(|c| c.to_probability_table())
                .collect::<Result<_>>()?;
            let sampled: [ProbabilityTable; 4] =
                sampled.try_into().expect("four sampled settings");
            let min_total = counts.iter().map(|c| c.total()).min().unwrap_or(0);
            let scale = if min_total > 0 {
                Some(3.0 / (min_total as f64).sqrt())
            } else {
                None
            };
            (no_signalling_report(&sampled), scale)
        }
    };

    let sigma_distance = if result_mc.s.sigma_minus > 0.0 {
        Some((result_mc.s.value - 2.0) / result_mc.s.sigma_minus)
    } else {
        None
    };

    Ok(RunReport {
        config: cfg.clone(),
        tables: tables.to_vec(),
        counts: Some(counts),
        result_analytic,
        result_monte_carlo: Some(result_mc),
        no_signalling,
        poisson_fluctuation_scale: fluctuation_scale,
        sigma_distance,
    })
}

/// Grid of detection efficiencies, parsed from `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for EtaGrid {
    fn default() -> Self {
        EtaGrid {
            start: 0.5,
            stop: 1.0,
            step: 0.005,
        }
    }
}

impl EtaGrid {
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let eta = self.start + self.step * k as f64;
            if eta > self.stop + 1e-9 {
                break;
            }
            out.push(eta.min(1.0));
            k += 1;
        }
        out
    }
}

impl FromStr for EtaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "eta grid must be start:stop:step, got `{s}`"
            )));
        }
        let parse = |p: &str| -> Result<f64> {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid number `{p}`")))
        };
        let grid = EtaGrid {
            start: parse(parts[0])?,
            stop: parse(parts[1])?,
            step: parse(parts[2])?,
        };
        if !(0.0..=1.0).contains(&grid.start)
            || !(0.0..=1.0).contains(&grid.stop)
            || grid.start > grid.stop
            || !grid.step.is_finite()
            || grid.step <= 0.0
        {
            return Err(Error::Config(format!("invalid eta grid `{s}`")));
        }
        Ok(grid)
    }
}

/// Efficiency sweep for the configured grid.
pub fn run_loophole(grid: &EtaGrid) -> Result<EfficiencyCurve> {
    efficiency_curve(&grid.values())
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

pub fn write_report_json(path: &Path, report: &RunReport) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<RunReport> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

const COUNTS_HEADER: [&str; 7] = [
    "setting_x",
    "setting_y",
    "outcome_a",
    "outcome_b",
    "eigenvalue_a",
    "eigenvalue_b",
    "count",
];

pub fn write_counts_csv(path: &Path, tables: &[CountsTable]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COUNTS_HEADER)?;
    for t in tables {
        for e in &t.entries {
            w.write_record(&[
                t.setting.x.to_string(),
                t.setting.y.to_string(),
                e.outcome_a.clone(),
                e.outcome_b.clone(),
                e.eigenvalue_a.to_string(),
                e.eigenvalue_b.to_string(),
                e.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads counts grouped back into per-setting tables (in file order).
/// The exposure weight is reconstructed as the per-setting total.
pub fn read_counts_csv(path: &Path, variant: Variant) -> Result<Vec<CountsTable>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut tables: Vec<CountsTable> = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != 7 {
            return Err(Error::Config(format!(
                "counts row needs 7 columns, got {}",
                record.len()
            )));
        }
        let parse_u8 = |i: usize| -> Result<u8> {
            record[i]
                .parse()
                .map_err(|_| Error::Config(format!("bad integer `{}`", &record[i])))
        };
        let parse_f64 = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::Config(format!("bad number `{}`", &record[i])))
        };
        let setting = SettingPair::new(parse_u8(0)?, parse_u8(1)?, variant)?;
        let entry = CountEntry {
            outcome_a: record[2].to_string(),
            outcome_b: record[3].to_string(),
            eigenvalue_a: parse_f64(4)?,
            eigenvalue_b: parse_f64(5)?,
            count: record[6]
                .parse()
                .map_err(|_| Error::Config(format!("bad count `{}`", &record[6])))?,
        };
        match tables
            .iter_mut()
            .find(|t| t.setting.x == setting.x && t.setting.y == setting.y)
        {
            Some(t) => t.entries.push(entry),
            None => tables.push(CountsTable {
                setting,
                entries: vec![entry],
                duration: 0.0,
            }),
        }
    }
    for t in &mut tables {
        t.duration = t.total() as f64;
    }
    Ok(tables)
}

pub fn write_probability_csv(path: &Path, tables: &[ProbabilityTable]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "setting_x",
        "setting_y",
        "outcome_a",
        "outcome_b",
        "eigenvalue_a",
        "eigenvalue_b",
        "probability",
    ])?;
    for t in tables {
        for e in &t.entries {
            w.write_record(&[
                t.setting.x.to_string(),
                t.setting.y.to_string(),
                e.outcome_a.clone(),
                e.outcome_b.clone(),
                e.eigenvalue_a.to_string(),
                e.eigenvalue_b.to_string(),
                e.probability.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_efficiency_csv(path: &Path, curve: &EfficiencyCurve) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let file = File::create(path)?;
    curve.write_csv(BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use tempfile::tempdir;

    const S_MAX: f64 = 2.8284271247461903;

    #[test]
    fn default_config_is_valid() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.total_events, 1794);
        assert_eq!(cfg.mc_samples, 100_000);
    }

    #[test]
    fn config_rejects_tiny_runs_and_bad_noise() {
        let cfg = ExperimentConfig {
            total_events: 8,
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            mc_samples: 10,
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            noise: NoiseModel {
                detection_efficiency: 1.5,
                ..NoiseModel::default()
            },
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn ideal_run_reaches_the_quantum_maximum() {
        let report = run_ideal(&ExperimentConfig::default()).unwrap();
        assert_abs_diff_eq!(report.result_analytic.s.value, S_MAX, epsilon = 1e-12);
        assert!(report.counts.is_none());
        assert!(report.no_signalling.max() < 1e-12);
        assert_eq!(report.tables.len(), 4);
        assert_eq!(report.tables[0].entries.len(), 16);
    }

    #[test]
    fn ideal_alt_observables_match_main() {
        let cfg = ExperimentConfig {
            variant: Variant::AltObservables,
            ..ExperimentConfig::default()
        };
        let report = run_ideal(&cfg).unwrap();
        assert_abs_diff_eq!(report.result_analytic.s.value, S_MAX, epsilon = 1e-12);
    }

    #[test]
    fn ideal_polarizer_run_uses_expected_counts() {
        let cfg = ExperimentConfig {
            variant: Variant::AltPolarizerProtocol,
            noise: NoiseModel {
                polarizer_loss: 0.0483,
                ..NoiseModel::default()
            },
            ..ExperimentConfig::default()
        };
        let report = run_ideal(&cfg).unwrap();
        let scale2 = (1.0 - 0.0483f64).powi(2);
        assert_abs_diff_eq!(
            report.result_analytic.e00.value,
            -std::f64::consts::FRAC_1_SQRT_2 * scale2,
            epsilon = 1e-12
        );
        assert!(report.result_analytic.s.value < S_MAX);
    }

    #[test]
    fn sampled_run_is_deterministic_and_consistent() {
        let cfg = ExperimentConfig {
            seed: 42,
            mc_samples: 2_000,
            ..ExperimentConfig::default()
        };
        let a = run_sample(&cfg).unwrap();
        let b = run_sample(&cfg).unwrap();
        assert_eq!(a, b);
        let counts = a.counts.as_ref().unwrap();
        assert_eq!(counts.len(), 4);
        // Noise-free sampling scatters around the quantum maximum.
        let s = &a.result_analytic.s;
        assert!(
            (s.value - S_MAX).abs() < 3.0 * s.sigma_mean(),
            "s = {} ± {}",
            s.value,
            s.sigma_mean()
        );
        assert!(a.sigma_distance.unwrap() > 0.0);
        let mc = a.result_monte_carlo.as_ref().unwrap();
        assert!(mc.s.sigma_minus > 0.0 && mc.s.sigma_plus > 0.0);
    }

    #[test]
    fn sampled_polarizer_pipeline_runs() {
        let cfg = ExperimentConfig {
            variant: Variant::AltPolarizerProtocol,
            seed: 3,
            mc_samples: 2_000,
            total_events: 4000,
            noise: NoiseModel {
                polarizer_loss: 0.0483,
                ..NoiseModel::default()
            },
            ..ExperimentConfig::default()
        };
        let report = run_sample(&cfg).unwrap();
        let counts = report.counts.as_ref().unwrap();
        assert_eq!(counts[3].entries.len(), 16);
        assert_eq!(counts[0].entries.len(), 4);
        assert!(report.result_monte_carlo.is_some());
    }

    #[test]
    fn report_json_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let cfg = ExperimentConfig {
            seed: 9,
            mc_samples: 1_500,
            ..ExperimentConfig::default()
        };
        let report = run_sample(&cfg).unwrap();
        let path = dir.path().join("report.json");
        write_report_json(&path, &report).unwrap();
        let back = read_report_json(&path).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn counts_csv_round_trips() {
        let dir = tempdir().unwrap();
        let cfg = ExperimentConfig {
            seed: 4,
            mc_samples: 1_000,
            ..ExperimentConfig::default()
        };
        let report = run_sample(&cfg).unwrap();
        let counts = report.counts.unwrap();
        let path = dir.path().join("counts.csv");
        write_counts_csv(&path, &counts).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "setting_x,setting_y,outcome_a,outcome_b,eigenvalue_a,eigenvalue_b,count\n"
        ));
        let back = read_counts_csv(&path, Variant::Main).unwrap();
        assert_eq!(back.len(), 4);
        for (orig, read) in counts.iter().zip(back.iter()) {
            assert_eq!(orig.setting.x, read.setting.x);
            assert_eq!(orig.setting.y, read.setting.y);
            assert_eq!(orig.entries, read.entries);
        }
    }

    #[test]
    fn byte_identical_outputs_for_equal_seeds() {
        let dir = tempdir().unwrap();
        let cfg = ExperimentConfig {
            seed: 77,
            mc_samples: 1_200,
            ..ExperimentConfig::default()
        };
        let paths = |tag: &str| {
            (
                dir.path().join(format!("{tag}-report.json")),
                dir.path().join(format!("{tag}-counts.csv")),
            )
        };
        for tag in ["one", "two"] {
            let report = run_sample(&cfg).unwrap();
            let (rp, cp) = paths(tag);
            write_report_json(&rp, &report).unwrap();
            write_counts_csv(&cp, report.counts.as_ref().unwrap()).unwrap();
        }
        let (r1, c1) = paths("one");
        let (r2, c2) = paths("two");
        assert_eq!(fs::read(r1).unwrap(), fs::read(r2).unwrap());
        assert_eq!(fs::read(c1).unwrap(), fs::read(c2).unwrap());
    }

    #[test]
    fn eta_grid_parses_and_enumerates() {
        let grid: EtaGrid = "0.8:0.9:0.05".parse().unwrap();
        let values = grid.values();
        assert_eq!(values.len(), 3);
        assert_abs_diff_eq!(values[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(values[2], 0.9, epsilon = 1e-9);
        assert!("0.9:0.8:0.05".parse::<EtaGrid>().is_err());
        assert!("0.8:0.9".parse::<EtaGrid>().is_err());
        assert!("a:b:c".parse::<EtaGrid>().is_err());
    }

    #[test]
    fn loophole_run_covers_threshold() {
        let curve = run_loophole(&EtaGrid::default()).unwrap();
        assert_abs_diff_eq!(curve.samples.last().unwrap().1, S_MAX, epsilon = 1e-9);
        assert_abs_diff_eq!(
            (curve.threshold * 1000.0).round() / 1000.0,
            0.875,
            epsilon = 1e-12
        );
    }
}
