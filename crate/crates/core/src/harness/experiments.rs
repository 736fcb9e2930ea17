//! Experiment grids over profiles, operators, layer counts, heights and noise.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{discretize, job_seed, preset_heights, stable_hash, synthesize_with, TestProfile, PROFILE_DEPTH};
use crate::error::{Error, Result};
use crate::forward::{InstrumentSetup, LayeredEarthModel, Orientations, SoundingKernel};
use crate::regularize::{OperatorKind, SvdFactors, DEFAULT_KAPPA};
use crate::solver::{solve, ChoiceRule, InversionResult, LayerGrid, SolverConfig, StepSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Oracle error over profile × operator × layers × heights.
    Table1,
    /// Both orientations against a single one.
    Table2,
    /// Broyden-updated Jacobian.
    Table3,
    /// Singular values of Jacobians at random profiles.
    Fig2,
    /// Step-profile error as a function of the step width.
    Fig56,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Table1, Preset::Table2, Preset::Table3, Preset::Fig2, Preset::Fig56];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Fig2 => "fig2",
            Preset::Fig56 => "fig56",
        }
    }

    /// Cells of a table preset; empty for the spectrum preset.
    pub fn cells(self, o: &Overrides) -> Vec<Cell> {
        let ns = o.n_values.clone().unwrap_or_else(|| vec![20, 40]);
        let ms = o.m_values.clone().unwrap_or_else(|| vec![5, 10, 20]);
        let taus = o.noise_levels.clone().unwrap_or_else(|| vec![DEFAULT_NOISE_LEVEL]);
        let pairs = [
            (TestProfile::F1, OperatorKind::SecondDifference),
            (TestProfile::F2, OperatorKind::FirstDifference),
            (TestProfile::F3 { xi: TestProfile::DEFAULT_XI }, OperatorKind::FirstDifference),
        ];
        let all_ops = [OperatorKind::Identity, OperatorKind::FirstDifference, OperatorKind::SecondDifference];
        let mut cells = Vec::new();
        let mut push = |profile, regularizer, orientations, n, m, noise_level, step_source| {
            let step_source = o.step_source.unwrap_or(step_source);
            cells.push(Cell { profile, regularizer, orientations, n, m, noise_level, step_source });
        };
        match self {
            Preset::Table1 => {
                for (profile, _) in pairs {
                    for &m in &ms {
                        for op in o.regularizers.clone().unwrap_or(all_ops.to_vec()) {
                            for &n in &ns {
                                for &tau in &taus {
                                    push(profile, op, Orientations::Both, n, m, tau, StepSource::Analytic);
                                }
                            }
                        }
                    }
                }
            }
            Preset::Table2 => {
                for orientations in [Orientations::Both, Orientations::Vertical, Orientations::Horizontal] {
                    for &m in &ms {
                        for (profile, op) in pairs {
                            for &n in &ns {
                                for &tau in &taus {
                                    push(profile, op, orientations, n, m, tau, StepSource::Analytic);
                                }
                            }
                        }
                    }
                }
            }
            Preset::Table3 => {
                for &m in &ms {
                    for (profile, op) in pairs {
                        for &n in &ns {
                            for &tau in &taus {
                                let source = StepSource::Broyden { refresh: DEFAULT_BROYDEN_REFRESH };
                                push(profile, op, Orientations::Both, n, m, tau, source);
                            }
                        }
                    }
                }
            }
            Preset::Fig56 => {
                let ns = o.n_values.clone().unwrap_or_else(|| vec![FIG56_LAYERS]);
                let ms = o.m_values.clone().unwrap_or_else(|| vec![FIG56_HEIGHTS]);
                let taus = o.noise_levels.clone().unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]);
                let xis = o.xi_values.clone().unwrap_or_else(default_xi_grid);
                for &xi in &xis {
                    for op in o.regularizers.clone().unwrap_or(all_ops.to_vec()) {
                        for &tau in &taus {
                            for &n in &ns {
                                for &m in &ms {
                                    let profile = TestProfile::F3 { xi };
                                    push(profile, op, Orientations::Both, n, m, tau, StepSource::Analytic);
                                }
                            }
                        }
                    }
                }
            }
            Preset::Fig2 => {}
        }
        cells
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown preset {s:?}")))
    }
}

/// Noise level of the table presets.
pub const DEFAULT_NOISE_LEVEL: f64 = 1e-3;
pub const DEFAULT_REALIZATIONS: usize = 20;
pub const DEFAULT_BROYDEN_REFRESH: usize = 10;
pub const DEFAULT_SEED: u64 = 20_140_101;
pub const FIG56_LAYERS: usize = 20;
pub const FIG56_HEIGHTS: usize = 10;
pub const FIG2_SAMPLES: usize = 1000;
pub const FIG2_LAYERS: usize = 20;
pub const FIG2_HEIGHTS: usize = 10;
/// Upper end of the uniform conductivity draws of the spectrum preset.
pub const FIG2_SIGMA_MAX: f64 = 100.0;

fn default_xi_grid() -> Vec<f64> {
    (1..=9).map(|k| 0.2 * k as f64).collect()
}

/// Changes to a preset's default grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: u64,
    pub realizations: usize,
    pub noise_levels: Option<Vec<f64>>,
    pub n_values: Option<Vec<usize>>,
    pub m_values: Option<Vec<usize>>,
    pub xi_values: Option<Vec<f64>>,
    pub regularizers: Option<Vec<OperatorKind>>,
    pub step_source: Option<StepSource>,
    /// Random profiles drawn by the spectrum preset.
    pub samples: usize,
}

impl Default for Overrides {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            realizations: DEFAULT_REALIZATIONS,
            noise_levels: None,
            n_values: None,
            m_values: None,
            xi_values: None,
            regularizers: None,
            step_source: None,
            samples: FIG2_SAMPLES,
        }
    }
}

/// One experimental setting, repeated over noise realizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub profile: TestProfile,
    pub regularizer: OperatorKind,
    pub orientations: Orientations,
    pub n: usize,
    pub m: usize,
    pub noise_level: f64,
    pub step_source: StepSource,
}

impl Cell {
    /// Identifies the noisy data independently of how they are inverted, so
    /// that cells differing only in operator or Jacobian share noise draws.
    pub fn data_key(&self) -> u64 {
        stable_hash(&format!(
            "{}|{:?}|n={}|m={}|tau={:e}",
            self.profile.label(),
            self.orientations,
            self.n,
            self.m,
            self.noise_level
        ))
    }

    pub fn setup(&self) -> Result<InstrumentSetup> {
        InstrumentSetup::new(preset_heights(self.m)?, self.orientations)
    }

    pub fn config(&self, truth: &[f64], noise_norm: f64) -> SolverConfig {
        SolverConfig {
            grid: LayerGrid::Equispaced { n: self.n, depth: PROFILE_DEPTH },
            regularizer: self.regularizer,
            step_source: self.step_source,
            choice_rule: ChoiceRule::Oracle { sigma_true: truth.to_vec() },
            extra_rules: vec![
                ChoiceRule::Corner,
                ChoiceRule::Resreg,
                ChoiceRule::Discrepancy { kappa: DEFAULT_KAPPA, noise_norm },
            ],
            ..Default::default()
        }
    }

    fn step_label(&self) -> String {
        match self.step_source {
            StepSource::Analytic => "analytic".into(),
            StepSource::FiniteDifference { delta } => format!("fd({delta:e})"),
            StepSource::Broyden { refresh } => format!("broyden({refresh})"),
        }
    }
}

/// Outcome of one noise realization of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub cell: usize,
    pub realization: usize,
    pub seed: u64,
    pub noise_norm: f64,
    pub ell_opt: Option<usize>,
    pub e_opt: Option<f64>,
    pub e_corner: Option<f64>,
    pub e_resreg: Option<f64>,
    pub e_discrepancy: Option<f64>,
    /// Layer (0-based) holding the largest conductivity of the oracle solution.
    pub argmax_layer: Option<usize>,
    pub failed_runs: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub completed: usize,
    pub failed: usize,
    pub mean_e_opt: f64,
    /// Sample standard deviation; 0 for a single realization.
    pub std_e_opt: f64,
    pub mean_e_corner: f64,
    pub mean_e_resreg: f64,
    pub mean_e_discrepancy: f64,
}

/// Flat CSV row of a cell summary.
#[derive(Serialize)]
struct CellRow<'a> {
    profile: String,
    regularizer: &'a str,
    orientation: String,
    n: usize,
    m: usize,
    noise_level: f64,
    jacobian: String,
    completed: usize,
    failed: usize,
    mean_e_opt: f64,
    std_e_opt: f64,
    mean_e_corner: f64,
    mean_e_resreg: f64,
    mean_e_discrepancy: f64,
}

/// Singular values of Jacobians at random profiles, in decreasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub min_condition: f64,
    pub mean_condition: f64,
    #[serde(skip)]
    pub spectra: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub preset: Preset,
    pub overrides: Overrides,
    pub cells: Vec<CellSummary>,
    pub records: Vec<RealizationRecord>,
    pub spectra: Vec<SpectrumSummary>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mu = mean(v);
    (v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        if best.is_none_or(|b| *x > v[b]) {
            best = Some(i);
        }
    }
    best
}

fn run_job(cell: &Cell, index: usize, realization: usize, seed: u64) -> RealizationRecord {
    let mut record = RealizationRecord {
        cell: index,
        realization,
        seed,
        noise_norm: f64::NAN,
        ell_opt: None,
        e_opt: None,
        e_corner: None,
        e_resreg: None,
        e_discrepancy: None,
        argmax_layer: None,
        failed_runs: 0,
        error: None,
    };
    let outcome = (|| -> Result<InversionResult> {
        let setup = cell.setup()?;
        let kernel = SoundingKernel::new(&setup)?;
        let synth = synthesize_with(&kernel, &cell.profile, cell.n, cell.noise_level, seed)?;
        record.noise_norm = synth.noise_norm;
        let noise_bound = synth.data.noise_estimate.unwrap_or(0.0);
        let config = cell.config(synth.model.sigma(), noise_bound);
        solve(&config, &setup, &synth.data)
    })();
    match outcome {
        Ok(result) => {
            let error_of = |rule: &str| {
                result.choice(rule).and_then(|c| c.ell).and_then(|ell| result.run(ell)).and_then(|r| r.relative_error)
            };
            record.ell_opt = result.chosen_ell();
            record.e_opt = error_of("oracle");
            record.e_corner = error_of("corner");
            record.e_resreg = error_of("resreg");
            record.e_discrepancy = error_of("discrepancy");
            record.argmax_layer = result.chosen().and_then(|r| argmax(&r.sigma));
            record.failed_runs = result.runs.iter().filter(|r| !r.is_usable()).count();
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every cell for `realizations` noise draws, in parallel.
pub fn run_cells(cells: &[Cell], realizations: usize, seed: u64) -> (Vec<CellSummary>, Vec<RealizationRecord>) {
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..realizations).map(move |r| (c, r))).collect();
    let records: Vec<RealizationRecord> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cell = &cells[c];
            run_job(cell, c, r, job_seed(seed, cell.data_key(), r as u64))
        })
        .collect();
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let recs: Vec<&RealizationRecord> = records.iter().filter(|r| r.cell == c).collect();
            let collect = |f: fn(&RealizationRecord) -> Option<f64>| -> Vec<f64> {
                recs.iter().filter_map(|r| f(r)).collect()
            };
            let e_opt = collect(|r| r.e_opt);
            CellSummary {
                cell: *cell,
                completed: e_opt.len(),
                failed: recs.len() - e_opt.len(),
                mean_e_opt: mean(&e_opt),
                std_e_opt: sample_std(&e_opt),
                mean_e_corner: mean(&collect(|r| r.e_corner)),
                mean_e_resreg: mean(&collect(|r| r.e_resreg)),
                mean_e_discrepancy: mean(&collect(|r| r.e_discrepancy)),
            }
        })
        .collect();
    (summaries, records)
}

/// Spectra of `J(σ)` for `samples` profiles uniform in `[0, σ_max]ⁿ`,
/// `m` heights in both orientations.
pub fn fig2_singular_values(n: usize, m: usize, samples: usize, seed: u64) -> Result<SpectrumSummary> {
    if samples < 1 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    let setup = InstrumentSetup::new(preset_heights(m)?, Orientations::Both)?;
    let kernel = SoundingKernel::new(&setup)?;
    let key = stable_hash(&format!("spectrum|n={n}|m={m}"));
    let spectra: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(job_seed(seed, key, s as u64));
            let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..FIG2_SIGMA_MAX)).collect();
            let model = LayeredEarthModel::equispaced(sigma, PROFILE_DEPTH)?;
            let jac = kernel.predict_with_jacobian(&model)?.1;
            Ok(SvdFactors::new(jac.entries())?.singular_values().to_vec())
        })
        .collect::<Result<_>>()?;
    let k = spectra[0].len();
    let column = |i: usize| spectra.iter().map(move |s| s[i]);
    let conditions: Vec<f64> = spectra.iter().map(|s| s[0] / s[k - 1]).collect();
    Ok(SpectrumSummary {
        n,
        m,
        samples,
        mean: (0..k).map(|i| column(i).sum::<f64>() / samples as f64).collect(),
        min: (0..k).map(|i| column(i).fold(f64::INFINITY, f64::min)).collect(),
        max: (0..k).map(|i| column(i).fold(0.0, f64::max)).collect(),
        min_condition: conditions.iter().copied().fold(f64::INFINITY, f64::min),
        mean_condition: mean(&conditions),
        spectra,
    })
}

/// Executes a preset. Failed realizations are kept as records with an error
/// and excluded from the cell means.
pub fn run_table(preset: Preset, overrides: &Overrides) -> Result<Report> {
    if overrides.realizations < 1 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    if let Some(levels) = &overrides.noise_levels {
        if levels.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidInput("noise levels must be ≥ 0".into()));
        }
    }
    if let Some(xis) = &overrides.xi_values {
        if xis.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidInput("step widths must be positive".into()));
        }
    }
    let mut report = Report {
        preset,
        overrides: overrides.clone(),
        cells: Vec::new(),
        records: Vec::new(),
        spectra: Vec::new(),
    };
    if preset == Preset::Fig2 {
        // the fixed-size sample, then square Jacobians (n = 2m) over a range
        // of sizes unless explicit height counts are given
        let mut shapes = vec![(FIG2_LAYERS, FIG2_HEIGHTS)];
        let ns = overrides.n_values.clone().unwrap_or_else(|| vec![10, 20, 30, 40]);
        for &n in &ns {
            match &overrides.m_values {
                Some(ms) => shapes.extend(ms.iter().map(|&m| (n, m))),
                None => shapes.push((n, (n / 2).max(1))),
            }
        }
        let mut seen = std::collections::HashSet::new();
        shapes.retain(|s| seen.insert(*s));
        for (n, m) in shapes {
            report.spectra.push(fig2_singular_values(n, m, overrides.samples, overrides.seed)?);
        }
        return Ok(report);
    }
    let cells = preset.cells(overrides);
    let (summaries, records) = run_cells(&cells, overrides.realizations, overrides.seed);
    report.cells = summaries;
    report.records = records;
    Ok(report)
}

impl Report {
    /// One row per cell, or per shape for the spectrum preset.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if self.preset == Preset::Fig2 {
            wtr.write_record(["n", "m", "samples", "mean_first", "mean_last", "min_condition", "mean_condition"])?;
            for s in &self.spectra {
                wtr.write_record([
                    s.n.to_string(),
                    s.m.to_string(),
                    s.samples.to_string(),
                    format!("{:e}", s.mean.first().copied().unwrap_or(f64::NAN)),
                    format!("{:e}", s.mean.last().copied().unwrap_or(f64::NAN)),
                    format!("{:e}", s.min_condition),
                    format!("{:e}", s.mean_condition),
                ])?;
            }
        }
        for s in &self.cells {
            let c = &s.cell;
            wtr.serialize(CellRow {
                profile: c.profile.label(),
                regularizer: c.regularizer.label(),
                orientation: format!("{:?}", c.orientations).to_lowercase(),
                n: c.n,
                m: c.m,
                noise_level: c.noise_level,
                jacobian: c.step_label(),
                completed: s.completed,
                failed: s.failed,
                mean_e_opt: s.mean_e_opt,
                std_e_opt: s.std_e_opt,
                mean_e_corner: s.mean_e_corner,
                mean_e_resreg: s.mean_e_resreg,
                mean_e_discrepancy: s.mean_e_discrepancy,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One JSON object per realization.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut writer, r)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Plot-ready columns: singular values by index for the spectrum preset,
    /// error by step width otherwise.
    pub fn write_xy<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if self.preset == Preset::Fig2 {
            wtr.write_record(["n", "m", "index", "mean", "min", "max"])?;
            for s in &self.spectra {
                for i in 0..s.mean.len() {
                    wtr.write_record([
                        s.n.to_string(),
                        s.m.to_string(),
                        (i + 1).to_string(),
                        format!("{:e}", s.mean[i]),
                        format!("{:e}", s.min[i]),
                        format!("{:e}", s.max[i]),
                    ])?;
                }
            }
        } else {
            wtr.write_record(["xi", "regularizer", "noise_level", "n", "m", "mean_e_opt", "std_e_opt"])?;
            for s in &self.cells {
                let xi = match s.cell.profile {
                    TestProfile::F3 { xi } => xi.to_string(),
                    _ => String::new(),
                };
                wtr.write_record([
                    xi,
                    s.cell.regularizer.label().to_string(),
                    format!("{:e}", s.cell.noise_level),
                    s.cell.n.to_string(),
                    s.cell.m.to_string(),
                    format!("{:e}", s.mean_e_opt),
                    format!("{:e}", s.std_e_opt),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Conductivity of the discretized truth for a cell, S/m.
pub fn cell_truth(cell: &Cell) -> Result<Vec<f64>> {
    Ok(discretize(&cell.profile, cell.n)?.sigma().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_grids_have_the_expected_shape() {
        let o = Overrides::default();
        assert_eq!(Preset::Table1.cells(&o).len(), 3 * 3 * 3 * 2);
        assert_eq!(Preset::Table2.cells(&o).len(), 3 * 3 * 3 * 2);
        assert_eq!(Preset::Table3.cells(&o).len(), 3 * 3 * 2);
        assert!(Preset::Table3.cells(&o).iter().all(|c| c.step_source == StepSource::Broyden { refresh: 10 }));
        assert_eq!(Preset::Fig56.cells(&o).len(), 9 * 3 * 3);
        assert!(Preset::Fig2.cells(&o).is_empty());
        assert_eq!("TABLE2".parse::<Preset>().unwrap(), Preset::Table2);
        assert!("table9".parse::<Preset>().is_err());
    }

    #[test]
    fn operator_and_jacobian_do_not_change_the_noise() {
        let o = Overrides::default();
        let t1 = Preset::Table1.cells(&o);
        let t3 = Preset::Table3.cells(&o);
        let a = t1.iter().find(|c| c.profile == TestProfile::F2 && c.n == 20 && c.m == 10).unwrap();
        let b = t3.iter().find(|c| c.profile == TestProfile::F2 && c.n == 20 && c.m == 10).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.data_key(), b.data_key());
    }

    #[test]
    fn small_grid_is_reproducible_and_written() {
        let o = Overrides {
            realizations: 2,
            n_values: Some(vec![10]),
            m_values: Some(vec![5]),
            regularizers: Some(vec![OperatorKind::FirstDifference]),
            ..Default::default()
        };
        let a = run_table(Preset::Table1, &o).unwrap();
        let b = run_table(Preset::Table1, &o).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert_eq!(a.cells.len(), 3);
        assert_eq!(a.records.len(), 6);
        for s in &a.cells {
            assert_eq!(s.completed, 2, "{s:?}");
            assert!(s.mean_e_opt > 0.0 && s.mean_e_opt < 1.0);
        }
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("profile,regularizer,orientation,n,m,"));
        let mut jsonl = Vec::new();
        a.write_jsonl(&mut jsonl).unwrap();
        assert_eq!(String::from_utf8(jsonl).unwrap().lines().count(), 6);
    }

    #[test]
    fn spectrum_preset() {
        let s = fig2_singular_values(10, 5, 4, 1).unwrap();
        assert_eq!(s.mean.len(), 10);
        assert!(s.min.iter().zip(&s.mean).zip(&s.max).all(|((lo, mu), hi)| lo <= mu && mu <= hi));
        assert!(s.min_condition > 1e8);
        let o = Overrides { samples: 2, n_values: Some(vec![10]), ..Default::default() };
        let r = run_table(Preset::Fig2, &o).unwrap();
        assert_eq!(r.spectra.len(), 2);
        let mut xy = Vec::new();
        r.write_xy(&mut xy).unwrap();
        assert_eq!(String::from_utf8(xy).unwrap().lines().count(), 1 + 20 + 10);
    }

    #[test]
    fn statistics() {
        assert_eq!(sample_std(&[1.0]), 0.0);
        assert!((sample_std(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(argmax(&[0.1, 0.5, 0.5, 0.2]), Some(1));
        assert_eq!(argmax(&[]), None);
    }
}
