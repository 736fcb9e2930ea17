//! Digital-filter quadrature for the Hankel transforms
//!
//! ```text
//! H_nu[f](r) = ∫_0^∞ f(λ) J_nu(rλ) λ dλ,   nu ∈ {0, 1}
//! ```
//!
//! A digital linear filter is a table of abscissas `b_i` and weights `w_i`
//! such that `∫_0^∞ g(λ) J_nu(rλ) dλ ≈ Σ_i g(b_i / r) w_i / r`. With the
//! extra factor λ in the transform above, the quadrature becomes
//! `Σ_i f(λ_i) λ_i w_i / r` with nodes `λ_i = b_i / r`.
//!
//! The built-in table is Key's 201-point J0/J1 filter; other published
//! tables can be loaded from plain text and must pass [`HankelFilter::validate`].

mod key201;

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Source identifier of the built-in filter pair.
pub const BUILTIN_SOURCE_ID: &str = "key_201_2012";

/// Maximum relative error tolerated on the closed-form validation suite.
pub const VALIDATION_TOLERANCE: f64 = 1e-6;

/// Decay rates and coil separations of the closed-form validation grid.
pub const VALIDATION_DECAY: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];
pub const VALIDATION_SEPARATION: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HankelOrder {
    Zero,
    One,
}

impl fmt::Display for HankelOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HankelOrder::Zero => write!(f, "J0"),
            HankelOrder::One => write!(f, "J1"),
        }
    }
}

/// A digital linear filter for one Bessel order.
#[derive(Clone, Debug, PartialEq)]
pub struct HankelFilter {
    order: HankelOrder,
    abscissas: Vec<f64>,
    weights: Vec<f64>,
    source_id: String,
}

impl HankelFilter {
    /// Builds a filter from raw tables. Abscissas must be positive, finite
    /// and strictly increasing; weights finite. Does not run the
    /// closed-form suite, see [`HankelFilter::validate`].
    pub fn new(
        order: HankelOrder,
        abscissas: Vec<f64>,
        weights: Vec<f64>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if abscissas.is_empty() {
            return Err(Error::InvalidInput("filter table is empty".into()));
        }
        if abscissas.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} abscissas but {} weights",
                abscissas.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidInput(format!("weight {i} is not finite")));
        }
        if let Some(i) = abscissas.iter().position(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "abscissa {i} must be positive and finite"
            )));
        }
        if let Some(i) = abscissas.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "abscissas not strictly increasing at {}",
                i + 1
            )));
        }
        Ok(Self {
            order,
            abscissas,
            weights,
            source_id: source_id.into(),
        })
    }

    /// The built-in filter for `order`.
    pub fn builtin(order: HankelOrder) -> &'static HankelFilter {
        static J0: OnceLock<HankelFilter> = OnceLock::new();
        static J1: OnceLock<HankelFilter> = OnceLock::new();
        let (cell, weights) = match order {
            HankelOrder::Zero => (&J0, &key201::J0),
            HankelOrder::One => (&J1, &key201::J1),
        };
        cell.get_or_init(|| HankelFilter {
            order,
            abscissas: key201::BASE.to_vec(),
            weights: weights.to_vec(),
            source_id: BUILTIN_SOURCE_ID.to_string(),
        })
    }

    /// Parses a table with one `abscissa weight` pair per line. Blank lines
    /// and anything after `#` are ignored. The parsed filter is validated
    /// against the closed-form suite before it is returned.
    pub fn parse_table(text: &str, order: HankelOrder, source_id: &str) -> Result<Self> {
        let mut abscissas = Vec::new();
        let mut weights = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(|c: char| c.is_whitespace() || c == ',');
            let mut next = || fields.by_ref().find(|s| !s.is_empty());
            let (Some(b), Some(w), None) = (next(), next(), next()) else {
                return Err(Error::Parse(format!(
                    "line {}: expected `abscissa weight`",
                    lineno + 1
                )));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}: {s:?}", lineno + 1)))
            };
            abscissas.push(parse(b)?);
            weights.push(parse(w)?);
        }
        let filter = Self::new(order, abscissas, weights, source_id)?;
        filter.validate()?;
        Ok(filter)
    }

    pub fn from_table_file(path: impl AsRef<Path>, order: HankelOrder) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("user")
            .to_string();
        Self::parse_table(&text, order, &id)
    }

    pub fn order(&self) -> HankelOrder {
        self.order
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Number of quadrature nodes.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn abscissas(&self) -> &[f64] {
        &self.abscissas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Log-domain step of the abscissas (mean spacing for tables that are
    /// not exactly log-uniform).
    pub fn abscissa_spacing(&self) -> f64 {
        let n = self.abscissas.len();
        if n < 2 {
            return 0.0;
        }
        (self.abscissas[n - 1] / self.abscissas[0]).ln() / (n - 1) as f64
    }

    pub fn abscissa_offset(&self) -> f64 {
        self.abscissas[0].ln()
    }

    /// Quadrature nodes `λ_i = b_i / r`.
    pub fn nodes(&self, r: f64) -> Result<Vec<f64>> {
        check_separation(r)?;
        Ok(self.abscissas.iter().map(|b| b / r).collect())
    }

    /// Per-node weights `λ_i w_i / r`, so that the transform is the dot
    /// product of these with the kernel sampled at [`HankelFilter::nodes`].
    pub fn quadrature_weights(&self, r: f64) -> Result<Vec<f64>> {
        check_separation(r)?;
        Ok(self
            .abscissas
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| (b / r) * w / r)
            .collect())
    }

    /// Approximates `∫_0^∞ f(λ) J_nu(rλ) λ dλ`.
    pub fn transform<F>(&self, mut f: F, r: f64) -> Result<Complex64>
    where
        F: FnMut(f64) -> Complex64,
    {
        check_separation(r)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (index, (b, w)) in self.abscissas.iter().zip(&self.weights).enumerate() {
            let lambda = b / r;
            let value = f(lambda);
            if !(value.re.is_finite() && value.im.is_finite()) {
                return Err(Error::NonFiniteKernel { index, lambda });
            }
            acc += value * (lambda * w);
        }
        Ok(acc / r)
    }

    /// Real-valued variant of [`HankelFilter::transform`].
    pub fn transform_real<F>(&self, mut f: F, r: f64) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        check_separation(r)?;
        let mut acc = 0.0;
        for (index, (b, w)) in self.abscissas.iter().zip(&self.weights).enumerate() {
            let lambda = b / r;
            let value = f(lambda);
            if !value.is_finite() {
                return Err(Error::NonFiniteKernel { index, lambda });
            }
            acc += value * lambda * w;
        }
        Ok(acc / r)
    }

    /// Worst relative error over the closed-form Lipschitz-Hankel pairs
    ///
    /// ```text
    /// ∫ e^{-aλ} J0(rλ) λ dλ = a / (a² + r²)^{3/2}
    /// ∫ e^{-aλ} J1(rλ) λ dλ = r / (a² + r²)^{3/2}
    /// ```
    ///
    /// on the [`VALIDATION_DECAY`] × [`VALIDATION_SEPARATION`] grid.
    pub fn closed_form_error(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for &a in &VALIDATION_DECAY {
            for &r in &VALIDATION_SEPARATION {
                let got = self.transform_real(|l| (-a * l).exp(), r)?;
                let exact = lipschitz_hankel(self.order, a, r);
                worst = worst.max(((got - exact) / exact).abs());
            }
        }
        Ok(worst)
    }

    /// Fails unless [`HankelFilter::closed_form_error`] is below
    /// [`VALIDATION_TOLERANCE`].
    pub fn validate(&self) -> Result<()> {
        let err = self.closed_form_error()?;
        if err < VALIDATION_TOLERANCE {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{} filter `{}` fails closed-form validation (relative error {err:e})",
                self.order, self.source_id
            )))
        }
    }
}

/// Closed form of `∫_0^∞ e^{-aλ} J_nu(rλ) λ dλ`.
pub fn lipschitz_hankel(order: HankelOrder, a: f64, r: f64) -> f64 {
    let denom = (a * a + r * r).powf(1.5);
    match order {
        HankelOrder::Zero => a / denom,
        HankelOrder::One => r / denom,
    }
}

fn check_separation(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "transform argument must be positive, got {r}"
        )))
    }
}
