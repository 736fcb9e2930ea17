use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use emsound::forward::{forward_map, InstrumentSetup, LayeredEarthModel, Orientations, SoundingData, Units};
use emsound::harness::{
    preset_heights, run_table, synthesize, Overrides, Preset, TestProfile, DEFAULT_BROYDEN_REFRESH,
    DEFAULT_NOISE_LEVEL, DEFAULT_REALIZATIONS, DEFAULT_SEED, FIG2_SAMPLES,
};
use emsound::jacobian::{analytic_jacobian, fd_jacobian, DEFAULT_FD_STEP};
use emsound::regularize::{OperatorKind, DEFAULT_KAPPA};
use emsound::solver::{solve, ChoiceRule, InversionResult, LayerGrid, SolverConfig, StepSource};

#[derive(Debug, Parser)]
#[command(name = "emsound", version, about = "Nonlinear inversion of multi-height EM soundings")]
pub struct Cli {
    /// Raise log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict apparent conductivities for a layered model.
    Forward(ForwardArgs),
    /// Invert a sounding for a layered conductivity profile.
    Invert(InvertArgs),
    /// Generate a synthetic sounding from a test profile.
    Synth(SynthArgs),
    /// Run an experiment preset (table1, table2, table3, fig2, fig56).
    Bench(BenchArgs),
    /// Dump the Jacobian of the residual at a model as CSV.
    Jacobian(JacobianArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    #[value(name = "S/m")]
    SiemensPerMeter,
    #[value(name = "mS/m")]
    MilliSiemensPerMeter,
}

impl From<UnitArg> for Units {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::SiemensPerMeter => Units::SiemensPerMeter,
            UnitArg::MilliSiemensPerMeter => Units::MilliSiemensPerMeter,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OperatorArg {
    #[value(name = "I")]
    I,
    #[value(name = "D1")]
    D1,
    #[value(name = "D2")]
    D2,
}

impl From<OperatorArg> for OperatorKind {
    fn from(op: OperatorArg) -> Self {
        match op {
            OperatorArg::I => OperatorKind::Identity,
            OperatorArg::D1 => OperatorKind::FirstDifference,
            OperatorArg::D2 => OperatorKind::SecondDifference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Discrepancy,
    Corner,
    Resreg,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum JacobianArg {
    Analytic,
    Fd,
    Broyden,
}

impl From<JacobianArg> for StepSource {
    fn from(j: JacobianArg) -> Self {
        match j {
            JacobianArg::Analytic => StepSource::Analytic,
            JacobianArg::Fd => StepSource::FiniteDifference { delta: DEFAULT_FD_STEP },
            JacobianArg::Broyden => StepSource::Broyden { refresh: DEFAULT_BROYDEN_REFRESH },
        }
    }
}

/// Measurement heights and coil orientations.
#[derive(Debug, Args)]
pub struct SetupArgs {
    /// Comma-separated heights above ground, m.
    #[arg(long, value_delimiter = ',', conflicts_with = "m")]
    heights: Option<Vec<f64>>,
    /// Number of equally spaced heights from 0 to 1.9 m.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// both, v or h.
    #[arg(long, default_value = "both")]
    orientations: String,
}

impl SetupArgs {
    fn setup(&self) -> Result<InstrumentSetup> {
        let heights = match &self.heights {
            Some(h) => h.clone(),
            None => preset_heights(self.m)?,
        };
        let orientations: Orientations = self.orientations.parse()?;
        Ok(InstrumentSetup::new(heights, orientations)?)
    }
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Model JSON: {"sigma": [...], "d": [...], "mu": optional}.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    setup: SetupArgs,
    /// Unit of conductivities in the model and the output.
    #[arg(long, value_enum, default_value = "S/m")]
    units: UnitArg,
    /// Data CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// Data CSV: height_m, orientation, apparent_conductivity_S_per_m.
    #[arg(long)]
    data: PathBuf,
    /// Solver configuration JSON; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference model. Sets the layer grid when no config is given and
    /// enables the oracle rule and relative errors.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Regularization operator.
    #[arg(long = "L", value_enum, ignore_case = true)]
    operator: Option<OperatorArg>,
    /// Primary rule for choosing the truncation index.
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    /// Jacobian source for the Gauss-Newton steps.
    #[arg(long, value_enum)]
    jacobian: Option<JacobianArg>,
    /// Relative noise level; the discrepancy rule uses τ‖b‖ as noise norm.
    #[arg(long)]
    tau: Option<f64>,
    /// Unit of conductivities in the data, model and --sigma-out files.
    #[arg(long, value_enum, default_value = "S/m")]
    units: UnitArg,
    /// Result JSON destination (always S/m); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Chosen profile as model JSON.
    #[arg(long)]
    sigma_out: Option<PathBuf>,
    /// Per-ℓ residual norm, seminorm and error as CSV, for L-curve plots.
    #[arg(long)]
    lcurve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// f1, f2, f3 or f3:<xi>.
    #[arg(long, default_value = "f1")]
    profile: String,
    /// Number of layers.
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[command(flatten)]
    setup: SetupArgs,
    /// Relative noise level.
    #[arg(long, default_value_t = DEFAULT_NOISE_LEVEL)]
    tau: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "S/m")]
    units: UnitArg,
    /// Directory for data.csv, exact.csv and model.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// table1, table2, table3, fig2 or fig56.
    preset: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    realizations: usize,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// Comma-separated layer counts.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Comma-separated height counts.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Comma-separated step widths for the f3 sweep.
    #[arg(long, value_delimiter = ',')]
    xi: Option<Vec<f64>>,
    /// Comma-separated operators.
    #[arg(long = "L", value_enum, ignore_case = true, value_delimiter = ',')]
    operators: Option<Vec<OperatorArg>>,
    #[arg(long, value_enum)]
    jacobian: Option<JacobianArg>,
    /// Random profiles for the spectrum preset.
    #[arg(long, default_value_t = FIG2_SAMPLES)]
    samples: usize,
    /// Directory for table.csv, records.jsonl, xy.csv and report.json;
    /// table CSV on stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JacobianArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    setup: SetupArgs,
    /// analytic or fd.
    #[arg(long, value_enum, default_value = "analytic")]
    jacobian: JacobianArg,
    #[arg(long, value_enum, default_value = "S/m")]
    units: UnitArg,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward(args) => forward(args),
        Command::Invert(args) => invert(args),
        Command::Synth(args) => synth(args),
        Command::Bench(args) => bench(args),
        Command::Jacobian(args) => jacobian(args),
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Loads a model whose conductivities are given in `units`.
fn read_model(path: &Path, units: Units) -> Result<LayeredEarthModel> {
    let model = LayeredEarthModel::from_json_str(&read_text(path)?)
        .with_context(|| format!("invalid model file {}", path.display()))?;
    let sigma: Vec<f64> = model.sigma().iter().map(|s| s * units.to_si()).collect();
    Ok(model.with_sigma(&sigma)?)
}

fn model_json(model: &LayeredEarthModel, units: Units) -> Result<String> {
    let sigma: Vec<f64> = model.sigma().iter().map(|s| s / units.to_si()).collect();
    Ok(model.with_sigma(&sigma)?.to_json_string())
}

fn forward(args: ForwardArgs) -> Result<()> {
    let units = args.units.into();
    let model = read_model(&args.model, units)?;
    let setup = args.setup.setup()?;
    let data = SoundingData::new(forward_map(&model, &setup)?, &setup)?;
    let mut out = sink(args.out.as_deref())?;
    data.write_csv(&setup, &mut out, units)?;
    out.flush()?;
    Ok(())
}

fn invert(args: InvertArgs) -> Result<()> {
    let units = args.units.into();
    let file = File::open(&args.data).with_context(|| format!("cannot read {}", args.data.display()))?;
    let (setup, data) = SoundingData::read_csv(file, units)
        .with_context(|| format!("invalid data file {}", args.data.display()))?;
    let truth = args.model.as_deref().map(|p| read_model(p, units)).transpose()?;

    let mut config = match &args.config {
        Some(p) => SolverConfig::from_json_str(&read_text(p)?)
            .with_context(|| format!("invalid config file {}", p.display()))?,
        None => {
            let mut c = SolverConfig::default();
            if let Some(t) = &truth {
                c.grid = LayerGrid::Explicit { thickness: t.thickness().to_vec() };
            }
            c
        }
    };
    if let Some(op) = args.operator {
        config.regularizer = op.into();
    }
    if let Some(j) = args.jacobian {
        config.step_source = j.into();
    }
    let discrepancy = args
        .tau
        .map(|tau| {
            if !(tau.is_finite() && tau >= 0.0) {
                bail!(emsound::Error::InvalidInput(format!("--tau must be ≥ 0, got {tau}")));
            }
            Ok(ChoiceRule::Discrepancy { kappa: DEFAULT_KAPPA, noise_norm: tau * data.norm() })
        })
        .transpose()?;
    if let Some(rule) = args.rule {
        config.choice_rule = match rule {
            RuleArg::Corner => ChoiceRule::Corner,
            RuleArg::Resreg => ChoiceRule::Resreg,
            RuleArg::Discrepancy => match &discrepancy {
                Some(d) => d.clone(),
                None => bail!(emsound::Error::InvalidInput("--rule discrepancy needs --tau".into())),
            },
            RuleArg::Oracle => match &truth {
                Some(t) => ChoiceRule::Oracle { sigma_true: t.sigma().to_vec() },
                None => bail!(emsound::Error::InvalidInput("--rule oracle needs --model".into())),
            },
        };
    }
    if let Some(d) = discrepancy {
        if config.choice_rule.name() != "discrepancy" {
            config.extra_rules.push(d);
        }
    }
    if let Some(t) = &truth {
        if !config.rules().any(|r| r.name() == "oracle") {
            config.extra_rules.push(ChoiceRule::Oracle { sigma_true: t.sigma().to_vec() });
        }
    }
    config.validate()?;

    let result = solve(&config, &setup, &data)?;
    for choice in &result.choices {
        log::info!("rule {}: ℓ = {:?}, flag {:?}", choice.rule, choice.ell, choice.flag);
    }
    if let Some(p) = &args.lcurve {
        write_lcurve(&result, p)?;
    }
    if let Some(p) = &args.sigma_out {
        let Some(run) = result.chosen() else {
            bail!("the primary rule made no choice; no profile to write");
        };
        let model = config.grid.model(run.sigma.clone())?;
        fs::write(p, model_json(&model, units)?).with_context(|| format!("cannot write {}", p.display()))?;
    }
    let mut out = sink(args.out.as_deref())?;
    writeln!(out, "{}", result.to_json_string())?;
    out.flush()?;
    Ok(())
}

fn write_lcurve(result: &InversionResult, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(sink(Some(path))?);
    wtr.write_record(["ell", "residual_norm", "seminorm", "relative_error", "termination", "iterations"])?;
    for run in &result.runs {
        let error = run.relative_error.map(|e| e.to_string()).unwrap_or_default();
        wtr.write_record([
            run.ell.to_string(),
            run.residual_norm.to_string(),
            run.seminorm.to_string(),
            error,
            format!("{:?}", run.termination).to_lowercase(),
            run.iterations.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let units = args.units.into();
    let profile: TestProfile = args.profile.parse()?;
    let setup = args.setup.setup()?;
    let syn = synthesize(&profile, args.n, &setup, args.tau, args.seed)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let data_path = args.out.join("data.csv");
    syn.data.write_csv(&setup, sink(Some(&data_path))?, units)?;
    let exact = SoundingData::new(syn.exact.clone(), &setup)?;
    exact.write_csv(&setup, sink(Some(&args.out.join("exact.csv")))?, units)?;
    fs::write(args.out.join("model.json"), model_json(&syn.model, units)?)?;
    log::info!("{} with τ = {}: noise norm {:e} S/m", profile.label(), args.tau, syn.noise_norm);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let preset: Preset = args.preset.parse()?;
    let overrides = Overrides {
        seed: args.seed,
        realizations: args.realizations,
        noise_levels: args.tau,
        n_values: args.n,
        m_values: args.m,
        xi_values: args.xi,
        regularizers: args.operators.map(|ops| ops.into_iter().map(Into::into).collect()),
        step_source: args.jacobian.map(Into::into),
        samples: args.samples,
    };
    let report = run_table(preset, &overrides)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            report.write_csv(sink(Some(&dir.join("table.csv")))?)?;
            report.write_jsonl(sink(Some(&dir.join("records.jsonl")))?)?;
            report.write_xy(sink(Some(&dir.join("xy.csv")))?)?;
            fs::write(dir.join("report.json"), report.to_json_string())?;
        }
        None => report.write_csv(sink(None)?)?,
    }
    Ok(())
}

fn jacobian(args: JacobianArgs) -> Result<()> {
    let model = read_model(&args.model, args.units.into())?;
    let setup = args.setup.setup()?;
    let jac = match args.jacobian {
        JacobianArg::Analytic => analytic_jacobian(&model, &setup)?,
        JacobianArg::Fd => {
            let zero = SoundingData::new(vec![0.0; setup.n_data()], &setup)?;
            fd_jacobian(&model, &setup, &zero, DEFAULT_FD_STEP)?
        }
        JacobianArg::Broyden => {
            bail!(emsound::Error::InvalidInput("a Broyden Jacobian exists only inside an inversion".into()))
        }
    };
    let mut out = sink(args.out.as_deref())?;
    jac.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}
