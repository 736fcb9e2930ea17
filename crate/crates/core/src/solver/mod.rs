//! Damped Gauss-Newton inversion with truncated (generalized) SVD steps.
//!
//! For a fixed truncation index `ℓ` every iteration linearizes the residual
//! `r(σ) = b − m(σ)` with Jacobian `J`, takes the regularized step
//! `s = −J_ℓ^† r` and moves to `σ + αs` with the largest admissible step
//! length from [`armijo_step`]. A run stops when `‖σ_k − σ_{k−1}‖ < τ‖σ_k‖`,
//! after `max_iter` iterations, or when no step length above `alpha_min`
//! qualifies. Runs for different `ℓ` are independent and execute in parallel;
//! a choice rule then picks one `ℓ` from the sweep.

mod armijo;
mod config;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{InstrumentSetup, LayeredEarthModel, SoundingData, SoundingKernel};
use crate::jacobian::{broyden_update, fd_jacobian_with, JacobianMatrix, JacobianProvenance};
use crate::regularize::{
    discrepancy_pick, lcurve_corner, resreg_pick, GsvdFactors, OperatorKind, PickFlag,
    RegularizationOperator, SvdFactors,
};

pub use armijo::{armijo_step, LineSearch};
pub use config::{
    ChoiceRule, LayerGrid, SolverConfig, StepSource, DEFAULT_ALPHA_MIN, DEFAULT_MAX_ITER,
    DEFAULT_STOP_TOL, INITIAL_SIGMA_RANGE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative change of the iterate fell below the tolerance, or the step vanished.
    Converged,
    MaxIter,
    /// No step length above the floor decreased the residual enough.
    AlphaFloor,
    /// Factorization or evaluation broke down; see `failure`.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Accepted step length; 0 when the step was rejected.
    pub alpha: f64,
    /// `‖r‖` after the iteration.
    pub residual_norm: f64,
    /// `‖s‖` of the proposed step.
    pub step_norm: f64,
    /// The step used a freshly evaluated (not updated) Jacobian.
    pub exact_jacobian: bool,
}

/// Outcome of the iteration for one truncation index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllRun {
    pub ell: usize,
    /// Final iterate, S/m, strictly positive.
    pub sigma: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub residual_norm: f64,
    /// `‖Lσ‖`.
    pub seminorm: f64,
    /// `‖σ_true − σ‖ / ‖σ_true‖` when an oracle profile is configured.
    pub relative_error: Option<f64>,
    pub jacobian_evaluations: usize,
    pub failure: Option<String>,
    pub diagnostics: Vec<IterationRecord>,
}

impl EllRun {
    pub fn is_usable(&self) -> bool {
        self.termination != Termination::Failed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleChoice {
    pub rule: String,
    pub ell: Option<usize>,
    pub flag: Option<PickFlag>,
    /// Why no index could be chosen.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub config: SolverConfig,
    pub initial_sigma: Vec<f64>,
    pub initial_residual_norm: f64,
    /// Runs in increasing `ℓ`.
    pub runs: Vec<EllRun>,
    /// Primary rule first, then the extra rules in configured order.
    pub choices: Vec<RuleChoice>,
}

impl InversionResult {
    /// Index chosen by the primary rule.
    pub fn chosen_ell(&self) -> Option<usize> {
        self.choices.first().and_then(|c| c.ell)
    }

    pub fn run(&self, ell: usize) -> Option<&EllRun> {
        self.runs.iter().find(|r| r.ell == ell)
    }

    pub fn chosen(&self) -> Option<&EllRun> {
        self.chosen_ell().and_then(|ell| self.run(ell))
    }

    pub fn choice(&self, rule: &str) -> Option<&RuleChoice> {
        self.choices.iter().find(|c| c.rule == rule)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialization is infallible")
    }
}

/// `‖σ_true − σ‖ / ‖σ_true‖`.
pub fn relative_error(sigma_true: &[f64], sigma: &[f64]) -> Result<f64> {
    if sigma_true.len() != sigma.len() {
        return Err(Error::Shape(format!("{} vs {} entries", sigma_true.len(), sigma.len())));
    }
    let den = sigma_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::InvalidInput("reference profile is zero".into()));
    }
    let num = sigma_true.iter().zip(sigma).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Truncation indices swept when none are configured: `1..=min(rows, n)`
/// for the identity, `0..=p̄` otherwise.
pub fn admissible_ells(kind: OperatorKind, rows: usize, n: usize) -> Vec<usize> {
    if kind == OperatorKind::Identity {
        return (1..=rows.min(n)).collect();
    }
    let t = n - kind.null_dim();
    let p = rows.min(n);
    // p̄ = p − (n − t) = p − null_dim; a pair without room for it has no GSVD
    (0..=(p + t).saturating_sub(n)).collect()
}

enum Factors {
    Svd(SvdFactors),
    Gsvd(GsvdFactors),
}

impl Factors {
    fn new(jac: &DMatrix<f64>, op: &RegularizationOperator) -> Result<Self> {
        if op.is_identity() {
            Ok(Factors::Svd(SvdFactors::new(jac)?))
        } else {
            Ok(Factors::Gsvd(GsvdFactors::new(jac, op.matrix())?))
        }
    }

    fn step(&self, r: &DVector<f64>, ell: usize) -> Result<DVector<f64>> {
        match self {
            // a rank drop along the iteration caps ℓ at the current rank
            Factors::Svd(f) => f.tsvd_step(r, ell.min(f.rank())),
            Factors::Gsvd(g) => g.tgsvd_step(r, ell),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Shared, read-only state of one inversion.
struct Problem<'a> {
    config: &'a SolverConfig,
    kernel: SoundingKernel,
    data: &'a SoundingData,
    template: LayeredEarthModel,
    operator: RegularizationOperator,
    sigma0: Vec<f64>,
    r0: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(config: &'a SolverConfig, setup: &InstrumentSetup, data: &'a SoundingData) -> Result<Self> {
        config.validate()?;
        data.check_against(setup)?;
        let kernel = SoundingKernel::new(setup)?;
        let sigma0 = config.initial_sigma_for(&data.b);
        let template = config.grid.model(sigma0.clone())?;
        let operator = RegularizationOperator::build(config.regularizer, config.n_layers())?;
        let r0 = kernel.residual(&template, data)?;
        Ok(Self { config, kernel, data, template, operator, sigma0, r0 })
    }

    fn residual(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        self.kernel.residual(&self.template.with_sigma(sigma)?, self.data)
    }

    fn exact_jacobian(&self, sigma: &[f64]) -> Result<JacobianMatrix> {
        match self.config.step_source {
            StepSource::FiniteDifference { delta } => fd_jacobian_with(|s| self.residual(s), sigma, delta),
            StepSource::Analytic | StepSource::Broyden { .. } => {
                Ok(self.kernel.predict_with_jacobian(&self.template.with_sigma(sigma)?)?.1)
            }
        }
    }

    fn ells(&self) -> Vec<usize> {
        match &self.config.ell {
            Some(list) => {
                let mut list = list.clone();
                list.sort_unstable();
                list.dedup();
                list
            }
            None => admissible_ells(self.config.regularizer, self.r0.len(), self.config.n_layers()),
        }
    }

    fn oracle(&self) -> Option<&[f64]> {
        self.config.rules().find_map(|rule| match rule {
            ChoiceRule::Oracle { sigma_true } => Some(sigma_true.as_slice()),
            _ => None,
        })
    }

    fn run(&self, ell: usize) -> EllRun {
        let mut state = RunState {
            sigma: self.sigma0.clone(),
            residual: self.r0.clone(),
            iterations: 0,
            jacobian_evaluations: 0,
            diagnostics: Vec::new(),
        };
        let (termination, failure) = match self.iterate(ell, &mut state) {
            Ok(t) => (t, None),
            Err(e) => (Termination::Failed, Some(e.to_string())),
        };
        let relative_error = self.oracle().and_then(|truth| relative_error(truth, &state.sigma).ok());
        EllRun {
            ell,
            seminorm: self.operator.seminorm(&state.sigma),
            residual_norm: norm(&state.residual),
            sigma: state.sigma,
            iterations: state.iterations,
            termination,
            relative_error,
            jacobian_evaluations: state.jacobian_evaluations,
            failure,
            diagnostics: state.diagnostics,
        }
    }

    fn iterate(&self, ell: usize, st: &mut RunState) -> Result<Termination> {
        let config = self.config;
        let refresh = match config.step_source {
            StepSource::Broyden { refresh } => refresh,
            _ => 1,
        };
        let mut jac: Option<JacobianMatrix> = None;
        // consecutive accepted steps with α < 1 on an updated Jacobian
        let mut short_steps = 0;
        for _ in 0..config.max_iter {
            if jac.is_none() {
                jac = Some(self.exact_jacobian(&st.sigma)?);
                st.jacobian_evaluations += 1;
            }
            let r = DVector::from_column_slice(&st.residual);
            let mut retried = false;
            let outcome = loop {
                let j = jac.as_ref().expect("set above");
                let exact = !matches!(j.provenance(), JacobianProvenance::Broyden { .. });
                let step = Factors::new(j.entries(), &self.operator)?.step(&r, ell)?;
                let step_norm = step.norm();
                if !step_norm.is_finite() {
                    return Err(Error::Factorization(format!("non-finite step at ℓ = {ell}")));
                }
                if step_norm == 0.0 {
                    break None;
                }
                let search = armijo_step(
                    &st.sigma,
                    step.as_slice(),
                    j.entries(),
                    &st.residual,
                    |s| self.residual(s),
                    config.alpha_min,
                )?;
                // an updated Jacobian may point uphill; one exact retry before giving up
                if matches!(search, LineSearch::Floor { .. }) && !exact && !retried {
                    jac = Some(self.exact_jacobian(&st.sigma)?);
                    st.jacobian_evaluations += 1;
                    retried = true;
                    continue;
                }
                break Some((search, step_norm, exact));
            };
            let Some((search, step_norm, exact)) = outcome else {
                return Ok(Termination::Converged);
            };
            st.iterations += 1;
            match search {
                LineSearch::Accepted { alpha, sigma, residual } => {
                    let change = alpha * step_norm;
                    let s: Vec<f64> = sigma.iter().zip(&st.sigma).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = residual.iter().zip(&st.residual).map(|(a, b)| a - b).collect();
                    st.sigma = sigma;
                    st.residual = residual;
                    st.diagnostics.push(IterationRecord {
                        alpha,
                        residual_norm: norm(&st.residual),
                        step_norm,
                        exact_jacobian: exact,
                    });
                    if !config.fixed_iterations && change < config.stop_tol * norm(&st.sigma) {
                        return Ok(Termination::Converged);
                    }
                    let j = jac.as_mut().expect("set above");
                    let age = match j.provenance() {
                        JacobianProvenance::Broyden { age } => age,
                        _ => 0,
                    };
                    short_steps = if alpha < 1.0 && !exact { short_steps + 1 } else { 0 };
                    // exact every `refresh` iterations or after two short steps in
                    // a row; an update the refresh would discard is skipped
                    if age + 1 < refresh && short_steps < 2 && s.iter().any(|&v| v != 0.0) {
                        broyden_update(j, &s, &y)?;
                    } else {
                        jac = None;
                        short_steps = 0;
                    }
                }
                LineSearch::Floor { .. } => {
                    st.diagnostics.push(IterationRecord {
                        alpha: 0.0,
                        residual_norm: norm(&st.residual),
                        step_norm,
                        exact_jacobian: exact,
                    });
                    // σ is unchanged, so the current Jacobian stays valid
                    if !config.fixed_iterations {
                        return Ok(Termination::AlphaFloor);
                    }
                }
            }
        }
        Ok(Termination::MaxIter)
    }
}

struct RunState {
    sigma: Vec<f64>,
    residual: Vec<f64>,
    iterations: usize,
    jacobian_evaluations: usize,
    diagnostics: Vec<IterationRecord>,
}

/// Iterates for a single truncation index.
pub fn solve_one_ell(
    config: &SolverConfig,
    setup: &InstrumentSetup,
    data: &SoundingData,
    ell: usize,
) -> Result<EllRun> {
    let problem = Problem::new(config, setup, data)?;
    Ok(problem.run(ell))
}

/// Sweeps the configured truncation indices and applies every choice rule.
pub fn solve(config: &SolverConfig, setup: &InstrumentSetup, data: &SoundingData) -> Result<InversionResult> {
    let problem = Problem::new(config, setup, data)?;
    let ells = problem.ells();
    let runs: Vec<EllRun> = ells.par_iter().map(|&ell| problem.run(ell)).collect();
    for run in &runs {
        if let Some(msg) = &run.failure {
            log::warn!("ℓ = {} aborted: {msg}", run.ell);
        }
    }
    if !runs.iter().any(EllRun::is_usable) {
        return Err(Error::AllRunsFailed);
    }
    let choices = config.rules().map(|rule| choose(rule, &runs)).collect();
    Ok(InversionResult {
        config: config.clone(),
        initial_sigma: problem.sigma0.clone(),
        initial_residual_norm: norm(&problem.r0),
        runs,
        choices,
    })
}

fn choose(rule: &ChoiceRule, runs: &[EllRun]) -> RuleChoice {
    let usable: Vec<&EllRun> = runs.iter().filter(|r| r.is_usable()).collect();
    // ℓ = 0 keeps only the null space of L; its zero seminorm would dominate
    let curve: Vec<&EllRun> = usable.iter().copied().filter(|r| r.ell > 0).collect();
    let picked = match rule {
        ChoiceRule::Discrepancy { kappa, noise_norm } => {
            let norms: Vec<f64> = usable.iter().map(|r| r.residual_norm).collect();
            discrepancy_pick(&norms, *noise_norm, *kappa).map(|p| (usable[p.position].ell, p.flag))
        }
        ChoiceRule::Corner => {
            let points: Vec<(f64, f64)> = curve.iter().map(|r| (r.residual_norm.ln(), r.seminorm.ln())).collect();
            lcurve_corner(&points).map(|p| (curve[p.position].ell, p.flag))
        }
        ChoiceRule::Resreg => {
            let rho: Vec<f64> = curve.iter().map(|r| r.residual_norm).collect();
            let eta: Vec<f64> = curve.iter().map(|r| r.seminorm).collect();
            resreg_pick(&rho, &eta).map(|p| (curve[p.position].ell, p.flag))
        }
        ChoiceRule::Oracle { .. } => {
            let mut best: Option<(f64, usize)> = None;
            for r in &usable {
                if let Some(e) = r.relative_error {
                    if best.is_none_or(|(b, _)| e < b) {
                        best = Some((e, r.ell));
                    }
                }
            }
            best.map(|(_, ell)| (ell, None))
                .ok_or_else(|| Error::InvalidInput("no run has a relative error".into()))
        }
    };
    match picked {
        Ok((ell, flag)) => RuleChoice { rule: rule.name().into(), ell: Some(ell), flag, note: None },
        Err(e) => RuleChoice { rule: rule.name().into(), ell: None, flag: None, note: Some(e.to_string()) },
    }
}
