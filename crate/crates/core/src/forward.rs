//! Layered-earth response of a two-coil ground conductivity meter.
//!
//! Each layer `k` has conductivity `σ_k`, permeability `μ_k` and (except the
//! bottom half-space) thickness `d_k`. For a Hankel variable `λ` the layer has
//! propagation constant `u_k = sqrt(λ² + iσ_kμ_kω)` and characteristic
//! admittance `N_k = u_k / (iμ_kω)`. The surface admittance `Y_1` follows from
//! the upward recursion
//!
//! ```text
//! Y_n = N_n,    Y_k = N_k (Y_{k+1} + N_k tanh(d_k u_k)) / (N_k + Y_{k+1} tanh(d_k u_k))
//! ```
//!
//! and the reflection factor is `R_0 = (N_0 - Y_1) / (N_0 + Y_1)` with `N_0`
//! the admittance of air. The predicted apparent conductivities at height `h`
//! are
//!
//! ```text
//! m^V(h) = 4r/(μ0ω) H0[-λ e^{-2hλ} Im R_0(λ)](r)
//! m^H(h) = 4 /(μ0ω) H1[   -e^{-2hλ} Im R_0(λ)](r)
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::{HankelFilter, HankelOrder};

/// Permeability of free space, H/m.
pub const MU0: f64 = 4.0e-7 * PI;
/// Inter-coil distance of the reference instrument, m.
pub const DEFAULT_COIL_SEPARATION: f64 = 1.0;
/// Operating frequency of the reference instrument, Hz.
pub const DEFAULT_FREQUENCY: f64 = 14_600.0;
/// Above this value of `Re(d_k u_k)` the hyperbolic tangent is taken as 1
/// (and `1/cosh²` as 0) to avoid overflow.
pub const TANH_SATURATION: f64 = 300.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Piecewise-constant earth: `n` layers, the last one a half-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct LayeredEarthModel {
    sigma: Vec<f64>,
    thickness: Vec<f64>,
    mu: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    sigma: Vec<f64>,
    d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<Vec<f64>>,
}

impl TryFrom<ModelFile> for LayeredEarthModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        match file.mu {
            Some(mu) => Self::with_permeability(file.sigma, file.d, mu),
            None => Self::new(file.sigma, file.d),
        }
    }
}

impl From<LayeredEarthModel> for ModelFile {
    fn from(model: LayeredEarthModel) -> Self {
        let uniform = model.mu.iter().all(|&m| m == MU0);
        ModelFile {
            sigma: model.sigma,
            d: model.thickness,
            mu: (!uniform).then_some(model.mu),
        }
    }
}

impl LayeredEarthModel {
    /// Model with all permeabilities equal to `μ0`.
    pub fn new(sigma: Vec<f64>, thickness: Vec<f64>) -> Result<Self> {
        let n = sigma.len();
        Self::with_permeability(sigma, thickness, vec![MU0; n])
    }

    pub fn with_permeability(sigma: Vec<f64>, thickness: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let n = sigma.len();
        if n == 0 {
            return Err(Error::InvalidInput("model needs at least one layer".into()));
        }
        if thickness.len() + 1 != n {
            return Err(Error::Shape(format!(
                "{n} layers need {} thicknesses, got {}",
                n - 1,
                thickness.len()
            )));
        }
        if mu.len() != n {
            return Err(Error::Shape(format!(
                "{n} layers need {n} permeabilities, got {}",
                mu.len()
            )));
        }
        check_conductivities(&sigma)?;
        if let Some(k) = thickness.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "thickness of layer {} must be positive",
                k + 1
            )));
        }
        if let Some(k) = mu.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "permeability of layer {} must be positive",
                k + 1
            )));
        }
        Ok(Self {
            sigma,
            thickness,
            mu,
        })
    }

    /// `sigma.len()` layers of equal thickness `depth / (n - 1)` above a
    /// half-space, so that the top of the last layer sits at `depth`.
    pub fn equispaced(sigma: Vec<f64>, depth: f64) -> Result<Self> {
        let n = sigma.len();
        if n < 2 {
            return Err(Error::InvalidInput(
                "equispaced discretization needs at least two layers".into(),
            ));
        }
        let d = depth / (n - 1) as f64;
        Self::new(sigma, vec![d; n - 1])
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn n_layers(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn thickness(&self) -> &[f64] {
        &self.thickness
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Same geometry with new conductivities.
    pub fn with_sigma(&self, sigma: &[f64]) -> Result<Self> {
        if sigma.len() != self.sigma.len() {
            return Err(Error::Shape(format!(
                "expected {} conductivities, got {}",
                self.sigma.len(),
                sigma.len()
            )));
        }
        check_conductivities(sigma)?;
        Ok(Self {
            sigma: sigma.to_vec(),
            thickness: self.thickness.clone(),
            mu: self.mu.clone(),
        })
    }

    /// Depth of the top of each layer, starting at 0.
    pub fn layer_tops(&self) -> Vec<f64> {
        let mut tops = Vec::with_capacity(self.sigma.len());
        let mut z = 0.0;
        tops.push(z);
        for d in &self.thickness {
            z += d;
            tops.push(z);
        }
        tops
    }

    pub fn is_uniform_permeability(&self) -> bool {
        self.mu.iter().all(|&m| m == MU0)
    }
}

fn check_conductivities(sigma: &[f64]) -> Result<()> {
    match sigma.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
        Some(k) => Err(Error::InvalidInput(format!(
            "conductivity of layer {} must be finite and non-negative, got {}",
            k + 1,
            sigma[k]
        ))),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "V")]
    Vertical,
    #[serde(rename = "H")]
    Horizontal,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v" | "vertical" => Ok(Orientation::Vertical),
            "h" | "horizontal" => Ok(Orientation::Horizontal),
            other => Err(Error::Parse(format!("unknown orientation {other:?}"))),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Vertical => "V",
            Orientation::Horizontal => "H",
        })
    }
}

/// Which data blocks are recorded. Blocks are always stacked vertical first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientations {
    #[default]
    Both,
    Vertical,
    Horizontal,
}

impl Orientations {
    pub fn blocks(self) -> &'static [Orientation] {
        match self {
            Orientations::Both => &[Orientation::Vertical, Orientation::Horizontal],
            Orientations::Vertical => &[Orientation::Vertical],
            Orientations::Horizontal => &[Orientation::Horizontal],
        }
    }
}

impl FromStr for Orientations {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "both" | "vh" => Ok(Orientations::Both),
            "v" | "vertical" => Ok(Orientations::Vertical),
            "h" | "horizontal" => Ok(Orientations::Horizontal),
            other => Err(Error::Parse(format!("unknown orientation set {other:?}"))),
        }
    }
}

/// Instrument geometry and the heights at which it is operated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSetup {
    coil_separation: f64,
    frequency: f64,
    heights: Vec<f64>,
    orientations: Orientations,
}

impl InstrumentSetup {
    /// Reference instrument (r = 1 m, f = 14.6 kHz) at `heights`.
    pub fn new(heights: Vec<f64>, orientations: Orientations) -> Result<Self> {
        Self::with_geometry(
            DEFAULT_COIL_SEPARATION,
            DEFAULT_FREQUENCY,
            heights,
            orientations,
        )
    }

    pub fn with_geometry(
        coil_separation: f64,
        frequency: f64,
        heights: Vec<f64>,
        orientations: Orientations,
    ) -> Result<Self> {
        if !(coil_separation.is_finite() && coil_separation > 0.0) {
            return Err(Error::InvalidInput("coil separation must be positive".into()));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::InvalidInput("frequency must be positive".into()));
        }
        if heights.is_empty() {
            return Err(Error::InvalidInput("at least one height is required".into()));
        }
        if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::InvalidInput("heights must be non-negative".into()));
        }
        if heights.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "heights must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            coil_separation,
            frequency,
            heights,
            orientations,
        })
    }

    pub fn coil_separation(&self) -> f64 {
        self.coil_separation
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn orientations(&self) -> Orientations {
        self.orientations
    }

    /// Length of the stacked data vector.
    pub fn n_data(&self) -> usize {
        self.heights.len() * self.orientations.blocks().len()
    }

    /// (orientation, height) of each row of the stacked data vector.
    pub fn rows(&self) -> impl Iterator<Item = (Orientation, f64)> + '_ {
        self.orientations
            .blocks()
            .iter()
            .flat_map(move |&o| self.heights.iter().map(move |&h| (o, h)))
    }

    /// Skin depth `sqrt(2 / (μ0 ω σ))` of a homogeneous earth. Diagnostic only.
    pub fn skin_depth(&self, sigma: f64) -> f64 {
        (2.0 / (MU0 * self.omega() * sigma)).sqrt()
    }

    /// Induction number `r / δ`. Diagnostic only; the forward map does not
    /// depend on it.
    pub fn induction_number(&self, sigma: f64) -> f64 {
        self.coil_separation * (MU0 * self.omega() * sigma / 2.0).sqrt()
    }
}

/// Unit of conductivities at the I/O boundary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Units {
    #[default]
    SiemensPerMeter,
    MilliSiemensPerMeter,
}

impl Units {
    /// Multiplier taking a value in these units to S/m.
    pub fn to_si(self) -> f64 {
        match self {
            Units::SiemensPerMeter => 1.0,
            Units::MilliSiemensPerMeter => 1e-3,
        }
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S/m" | "s/m" | "S" => Ok(Units::SiemensPerMeter),
            "mS/m" | "ms/m" | "mS" => Ok(Units::MilliSiemensPerMeter),
            other => Err(Error::Parse(format!("unknown unit {other:?}"))),
        }
    }
}

/// Stacked apparent-conductivity readings, S/m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundingData {
    pub b: Vec<f64>,
    /// Bound on the norm of the noise in `b`, S/m.
    pub noise_estimate: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    height_m: f64,
    orientation: String,
    #[serde(rename = "apparent_conductivity_S_per_m")]
    apparent_conductivity: f64,
}

impl SoundingData {
    pub fn new(b: Vec<f64>, setup: &InstrumentSetup) -> Result<Self> {
        let data = Self {
            b,
            noise_estimate: None,
        };
        data.check_against(setup)?;
        Ok(data)
    }

    pub fn check_against(&self, setup: &InstrumentSetup) -> Result<()> {
        if self.b.len() != setup.n_data() {
            return Err(Error::Shape(format!(
                "{} readings but the setup defines {} ({} heights x {} orientations)",
                self.b.len(),
                setup.n_data(),
                setup.heights().len(),
                setup.orientations().blocks().len()
            )));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("readings must be finite".into()));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Reads `height_m,orientation,apparent_conductivity_S_per_m` rows in any
    /// order. Returns the setup implied by the rows (reference coil geometry)
    /// together with the stacked data. When both orientations are present
    /// they must cover the same heights.
    pub fn read_csv<R: Read>(reader: R, units: Units) -> Result<(InstrumentSetup, SoundingData)> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut vertical = Vec::new();
        let mut horizontal = Vec::new();
        for row in rdr.deserialize::<CsvRow>() {
            let row = row?;
            let value = row.apparent_conductivity * units.to_si();
            if !row.height_m.is_finite() || !value.is_finite() {
                return Err(Error::InvalidInput("non-finite value in data file".into()));
            }
            match row.orientation.parse::<Orientation>()? {
                Orientation::Vertical => vertical.push((row.height_m, value)),
                Orientation::Horizontal => horizontal.push((row.height_m, value)),
            }
        }
        for block in [&mut vertical, &mut horizontal] {
            block.sort_by(|a, b| a.0.total_cmp(&b.0));
            if block.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidInput("duplicate reading height".into()));
            }
        }
        let orientations = match (vertical.is_empty(), horizontal.is_empty()) {
            (false, false) => Orientations::Both,
            (false, true) => Orientations::Vertical,
            (true, false) => Orientations::Horizontal,
            (true, true) => return Err(Error::InvalidInput("data file has no readings".into())),
        };
        if orientations == Orientations::Both
            && (vertical.len() != horizontal.len()
                || vertical.iter().zip(&horizontal).any(|(v, h)| v.0 != h.0))
        {
            return Err(Error::InvalidInput(
                "vertical and horizontal readings must share the same heights".into(),
            ));
        }
        let primary = if vertical.is_empty() { &horizontal } else { &vertical };
        let heights = primary.iter().map(|r| r.0).collect();
        let setup = InstrumentSetup::new(heights, orientations)?;
        let b = vertical.iter().chain(&horizontal).map(|r| r.1).collect();
        let data = SoundingData::new(b, &setup)?;
        Ok((setup, data))
    }

    pub fn write_csv<W: Write>(&self, setup: &InstrumentSetup, writer: W, units: Units) -> Result<()> {
        self.check_against(setup)?;
        let mut wtr = csv::Writer::from_writer(writer);
        for ((orientation, height), value) in setup.rows().zip(&self.b) {
            wtr.serialize(CsvRow {
                height_m: height,
                orientation: orientation.to_string(),
                apparent_conductivity: value / units.to_si(),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `u = sqrt(λ² + iσμω)` on the principal branch (`Re u > 0`).
pub fn propagation_constant(lambda: f64, sigma: f64, mu: f64, omega: f64) -> Complex64 {
    Complex64::new(lambda * lambda, sigma * mu * omega).sqrt()
}

/// `N_k = u_k / (iμ_kω)` for layer `k` (0-based).
pub fn characteristic_admittance(lambda: f64, model: &LayeredEarthModel, k: usize, omega: f64) -> Complex64 {
    let mu = model.mu[k];
    propagation_constant(lambda, model.sigma[k], mu, omega) / (I * mu * omega)
}

/// Admittance of the air above the ground.
pub fn air_admittance(lambda: f64, omega: f64) -> Complex64 {
    Complex64::new(lambda, 0.0) / (I * MU0 * omega)
}

/// `tanh(z)`, saturated to 1 once `Re z` exceeds [`TANH_SATURATION`].
pub(crate) fn saturating_tanh(z: Complex64) -> Complex64 {
    if z.re > TANH_SATURATION {
        Complex64::new(1.0, 0.0)
    } else {
        z.tanh()
    }
}

/// Surface admittance `Y_1(λ)` of the layered model.
pub fn surface_admittance(lambda: f64, model: &LayeredEarthModel, omega: f64) -> Result<Complex64> {
    let n = model.n_layers();
    let mut y = characteristic_admittance(lambda, model, n - 1, omega);
    for k in (0..n - 1).rev() {
        let mu = model.mu[k];
        let u = propagation_constant(lambda, model.sigma[k], mu, omega);
        let nk = u / (I * mu * omega);
        let t = saturating_tanh(u * model.thickness[k]);
        y = nk * (y + nk * t) / (nk + y * t);
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(Error::NonFiniteLayer { layer: k + 1, lambda });
        }
    }
    Ok(y)
}

/// Reflection factor `R_0 = (N_0 - Y_1) / (N_0 + Y_1)`.
pub fn reflection_factor(lambda: f64, model: &LayeredEarthModel, omega: f64) -> Result<Complex64> {
    let n0 = air_admittance(lambda, omega);
    let y1 = surface_admittance(lambda, model, omega)?;
    let den = n0 + y1;
    if den.norm() == 0.0 {
        return Err(Error::SingularReflection { lambda });
    }
    Ok((n0 - y1) / den)
}

/// Quadrature form of the forward map for a fixed instrument setup.
///
/// Both the predicted data and the Jacobian are linear functionals of a
/// quantity sampled at the filter nodes (`Im R_0` and `Im ∂R_0/∂σ_j`), so the
/// Hankel transforms for all heights are folded into one dense matrix `K`
/// with `m(σ) = K · Im R_0(λ)`.
#[derive(Clone, Debug)]
pub struct SoundingKernel {
    setup: InstrumentSetup,
    nodes: Vec<f64>,
    weights: DMatrix<f64>,
    filter_ids: (String, String),
}

impl SoundingKernel {
    /// Kernel using the built-in filters.
    pub fn new(setup: &InstrumentSetup) -> Result<Self> {
        Self::with_filters(
            setup,
            HankelFilter::builtin(HankelOrder::Zero),
            HankelFilter::builtin(HankelOrder::One),
        )
    }

    pub fn with_filters(setup: &InstrumentSetup, j0: &HankelFilter, j1: &HankelFilter) -> Result<Self> {
        if j0.order() != HankelOrder::Zero || j1.order() != HankelOrder::One {
            return Err(Error::InvalidInput("filters must be of order 0 and 1".into()));
        }
        let r = setup.coil_separation();
        let scale = 4.0 / (MU0 * setup.omega());
        let shared = j0.abscissas() == j1.abscissas();
        let (v_nodes, v_quad) = (j0.nodes(r)?, j0.quadrature_weights(r)?);
        let (h_nodes, h_quad) = (j1.nodes(r)?, j1.quadrature_weights(r)?);
        let mut nodes = v_nodes.clone();
        let h_offset = if shared {
            0
        } else {
            nodes.extend_from_slice(&h_nodes);
            v_nodes.len()
        };

        let mut weights = DMatrix::zeros(setup.n_data(), nodes.len());
        for (row, (orientation, h)) in setup.rows().enumerate() {
            match orientation {
                Orientation::Vertical => {
                    for (i, (&l, &q)) in v_nodes.iter().zip(&v_quad).enumerate() {
                        weights[(row, i)] = -scale * r * l * (-2.0 * h * l).exp() * q;
                    }
                }
                Orientation::Horizontal => {
                    for (i, (&l, &q)) in h_nodes.iter().zip(&h_quad).enumerate() {
                        weights[(row, h_offset + i)] = -scale * (-2.0 * h * l).exp() * q;
                    }
                }
            }
        }
        Ok(Self {
            setup: setup.clone(),
            nodes,
            weights,
            filter_ids: (j0.source_id().to_string(), j1.source_id().to_string()),
        })
    }

    pub fn setup(&self) -> &InstrumentSetup {
        &self.setup
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Row `i` maps node samples to datum `i`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn filter_ids(&self) -> (&str, &str) {
        (&self.filter_ids.0, &self.filter_ids.1)
    }

    /// `Im R_0` at every node.
    pub fn reflection_samples(&self, model: &LayeredEarthModel) -> Result<DVector<f64>> {
        let omega = self.setup.omega();
        let mut samples = DVector::zeros(self.nodes.len());
        for (i, &lambda) in self.nodes.iter().enumerate() {
            let r0 = reflection_factor(lambda, model, omega)?;
            if !r0.im.is_finite() {
                return Err(Error::NonFiniteKernel { index: i, lambda });
            }
            samples[i] = r0.im;
        }
        Ok(samples)
    }

    /// Predicted stacked data `m(σ)`, S/m.
    pub fn predict(&self, model: &LayeredEarthModel) -> Result<Vec<f64>> {
        let samples = self.reflection_samples(model)?;
        Ok((&self.weights * samples).as_slice().to_vec())
    }

    /// `r(σ) = b - m(σ)`.
    pub fn residual(&self, model: &LayeredEarthModel, data: &SoundingData) -> Result<Vec<f64>> {
        data.check_against(&self.setup)?;
        let m = self.predict(model)?;
        Ok(data.b.iter().zip(&m).map(|(b, m)| b - m).collect())
    }
}

/// Predicted data of `model` with the built-in filters.
pub fn forward_map(model: &LayeredEarthModel, setup: &InstrumentSetup) -> Result<Vec<f64>> {
    SoundingKernel::new(setup)?.predict(model)
}

/// Residual `b - m(σ)` with the built-in filters.
pub fn residual(model: &LayeredEarthModel, setup: &InstrumentSetup, data: &SoundingData) -> Result<Vec<f64>> {
    SoundingKernel::new(setup)?.residual(model, data)
}

/// Cumulative response `∫_z^∞ φ^V(s) ds = (4z² + 1)^{-1/2}` of the linear model.
pub fn linear_vertical_tail(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    1.0 / (4.0 * z * z + 1.0).sqrt()
}

/// Cumulative response `∫_z^∞ φ^H(s) ds = sqrt(4z² + 1) - 2z`.
pub fn linear_horizontal_tail(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    // rationalized form, free of cancellation for large z
    1.0 / ((4.0 * z * z + 1.0).sqrt() + 2.0 * z)
}

/// Linear (low induction number) response of a layered model:
/// `m^V(h) = ∫ φ^V(h + z) σ(z) dz`, `m^H(h) = ∫ φ^H(h + z) σ(z) dz`, with
/// depth and height measured in units of the coil separation. Piecewise
/// constant layers integrate exactly through the cumulative responses.
pub fn linear_forward(model: &LayeredEarthModel, setup: &InstrumentSetup) -> Vec<f64> {
    let r = setup.coil_separation();
    let tops = model.layer_tops();
    setup
        .rows()
        .map(|(orientation, h)| {
            let tail = match orientation {
                Orientation::Vertical => linear_vertical_tail,
                Orientation::Horizontal => linear_horizontal_tail,
            };
            model
                .sigma()
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let top = (h + tops[k]) / r;
                    let bottom = tops.get(k + 1).map_or(f64::INFINITY, |z| (h + z) / r);
                    s * (tail(top) - tail(bottom))
                })
                .sum()
        })
        .collect()
}
