//! Benchmark target densities and the two ODE / regression posteriors.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::gaussian::SpdMatrix;

/// Unnormalized log-density over `ℝ^d`.
///
/// Implementations return `f64::NEG_INFINITY` off their support and never
/// NaN. Evaluation must be reentrant: parallel chains share one target.
pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn in_support(&self, x: &[f64]) -> bool {
        self.log_density(x) > f64::NEG_INFINITY
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Restricts a target to the box `[-half_width, half_width]^d`.
#[derive(Clone, Debug)]
pub struct Truncated<T> {
    pub inner: T,
    pub half_width: f64,
}

/// Default box half-width for otherwise unbounded benchmarks.
pub const DEFAULT_TRUNCATION: f64 = 1e6;

impl<T> Truncated<T> {
    pub fn new(inner: T, half_width: f64) -> Self {
        Self { inner, half_width }
    }
}

impl<T: TargetDensity> TargetDensity for Truncated<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !(v.abs() <= self.half_width)) {
            return f64::NEG_INFINITY;
        }
        sanitize(self.inner.log_density(x))
    }
}

/// Piecewise-constant density on `R = [-18, 18] × [-3, 3]`: value 1 on the
/// inner strip `S = [-0.5, 0.5] × [-3, 3]` and 36 on `R \ S`.
///
/// The inner strip is the low-density region.
#[derive(Clone, Copy, Debug, Default)]
pub struct StripDensity;

impl StripDensity {
    const HALF_LONG: f64 = 18.0;
    const HALF_INNER: f64 = 0.5;
    const HALF_SHORT: f64 = 3.0;
    const OUTER_VALUE: f64 = 36.0;

    /// Normalizing constant: 1·6 + 36·210.
    pub const TOTAL_MASS: f64 = 6.0 + 36.0 * 210.0;

    pub fn in_outer(&self, x: &[f64]) -> bool {
        x[0].abs() <= Self::HALF_LONG && x[1].abs() <= Self::HALF_SHORT
    }

    pub fn in_inner(&self, x: &[f64]) -> bool {
        x[0].abs() <= Self::HALF_INNER && x[1].abs() <= Self::HALF_SHORT
    }

    /// Unnormalized density value.
    pub fn density(&self, x: &[f64]) -> f64 {
        if self.in_inner(x) {
            1.0
        } else if self.in_outer(x) {
            Self::OUTER_VALUE
        } else {
            0.0
        }
    }

    /// Normalized marginal density of the first coordinate.
    pub fn marginal_density(&self, x1: f64) -> f64 {
        let height = 2.0 * Self::HALF_SHORT;
        let v = if x1.abs() <= Self::HALF_INNER {
            1.0
        } else if x1.abs() <= Self::HALF_LONG {
            Self::OUTER_VALUE
        } else {
            0.0
        };
        v * height / Self::TOTAL_MASS
    }

    /// Probability of `x1 ∈ [a, b]` under the normalized density.
    pub fn marginal_mass(&self, a: f64, b: f64) -> f64 {
        let antiderivative = |x: f64| {
            let x = x.clamp(-Self::HALF_LONG, Self::HALF_LONG);
            let inner = x.clamp(-Self::HALF_INNER, Self::HALF_INNER);
            let outer = x - inner;
            (inner + Self::OUTER_VALUE * outer) * 2.0 * Self::HALF_SHORT / Self::TOTAL_MASS
        };
        antiderivative(b) - antiderivative(a)
    }

    /// Exact draw from the normalized density.
    pub fn sample_direct<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let x2 = rng.random_range(-Self::HALF_SHORT..Self::HALF_SHORT);
        let inner_mass = 1.0 * 2.0 * Self::HALF_INNER;
        let outer_mass = Self::OUTER_VALUE * 2.0 * (Self::HALF_LONG - Self::HALF_INNER);
        let x1 = if rng.random::<f64>() < inner_mass / (inner_mass + outer_mass) {
            rng.random_range(-Self::HALF_INNER..Self::HALF_INNER)
        } else {
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            side * rng.random_range(Self::HALF_INNER..Self::HALF_LONG)
        };
        [x1, x2]
    }
}

impl TargetDensity for StripDensity {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let v = self.density(x);
        if v > 0.0 {
            v.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Zero-mean Gaussian target `N(0, Σ)`.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    cov: SpdMatrix,
    log_norm: f64,
}

impl GaussianTarget {
    pub fn new(cov: SpdMatrix) -> Self {
        let d = cov.dim() as f64;
        let log_norm = -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + cov.ln_determinant());
        Self { cov, log_norm }
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        Ok(Self::new(SpdMatrix::from_diagonal(variances)?))
    }

    /// `N(0, M Mᵀ)` for a given factor `M`.
    pub fn from_factor(m: &DMatrix<f64>) -> Result<Self> {
        Ok(Self::new(SpdMatrix::new(m * m.transpose())?))
    }

    /// `N(0, M Mᵀ)` with the entries of `M` drawn from the unit Gaussian.
    pub fn random_mmt<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        // A singular draw has probability zero; retry a few times anyway.
        let mut last = Error::NotPositiveDefinite("M Mᵀ");
        for _ in 0..8 {
            let m = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
            match Self::from_factor(&m) {
                Ok(t) => return Ok(t),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.cov
    }
}

impl TargetDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.cov.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        sanitize(self.log_norm - 0.5 * self.cov.inverse_quadratic_form(&x))
    }
}

/// Banana-shaped density
/// `−x₁²/200 − ½(x₂ + B x₁² − 100B)² − ½ Σ_{i≥3} x_i²`.
#[derive(Clone, Copy, Debug)]
pub struct Banana {
    pub dim: usize,
    pub bananicity: f64,
}

impl Banana {
    pub fn new(dim: usize, bananicity: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("d", "banana needs at least two dimensions"));
        }
        if !(bananicity >= 0.0) {
            return Err(Error::invalid("bananicity", "must be non-negative"));
        }
        Ok(Self { dim, bananicity })
    }
}

pub fn banana_log_density(x: &[f64], bananicity: f64) -> f64 {
    let b = bananicity;
    let ridge = x[1] + b * x[0] * x[0] - 100.0 * b;
    let rest: f64 = x[2..].iter().map(|v| v * v).sum();
    sanitize(-x[0] * x[0] / 200.0 - 0.5 * ridge * ridge - 0.5 * rest)
}

impl TargetDensity for Banana {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        banana_log_density(x, self.bananicity)
    }
}

/// Autonomous or time-dependent ODE `ẋ = f(t, x; params)`.
pub trait OdeSystem: Send + Sync {
    fn state_dim(&self) -> usize;

    fn rhs(&self, t: f64, state: &[f64], params: &[f64], out: &mut [f64]);
}

/// Substep of `fraction ×` the smallest spacing of `t0, times…`.
pub fn default_substep(t0: f64, times: &[f64], fraction: f64) -> f64 {
    let mut prev = t0;
    let mut min = f64::INFINITY;
    for &t in times {
        if t > prev {
            min = min.min(t - prev);
        }
        prev = t;
    }
    fraction * min
}

/// Classical fourth-order Runge–Kutta from `(t0, y0)`, reporting the state at
/// every entry of `times`. Each interval is split into equal substeps no
/// longer than `max_step`.
pub fn rk4_integrate<S: OdeSystem + ?Sized>(
    system: &S,
    params: &[f64],
    y0: &[f64],
    t0: f64,
    times: &[f64],
    max_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = system.state_dim();
    Error::check_dim("initial state", n, y0.len())?;
    if !(max_step > 0.0) {
        return Err(Error::invalid("max_step", "must be positive"));
    }
    let mut prev = t0;
    for &t in times {
        if !(t >= prev) || (t == prev && t != t0) {
            return Err(Error::invalid("times", "must be strictly increasing from t0"));
        }
        prev = t;
    }

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let steps = (span / max_step).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            system.rhs(t, &y, params, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            system.rhs(t + 0.5 * h, &tmp, params, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            system.rhs(t + 0.5 * h, &tmp, params, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            system.rhs(t + h, &tmp, params, &mut k4);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("ODE trajectory"));
            }
        }
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}

/// Three consecutive second-order reactions `A+B→C`, `A+C→D`, `A+D→E`
/// (each also releasing an unmodeled species F). State `(A, B, C, D, E)`,
/// parameters `(k₁, k₂, k₃)`.
#[derive(Clone, Copy, Debug)]
pub struct ChemicalKinetics {
    pub a0: f64,
}

impl ChemicalKinetics {
    /// Initial concentration of A in mol/l.
    pub const A0: f64 = 0.02090;
    /// Rate constants reported for the experimental data.
    pub const REPORTED_RATES: [f64; 3] = [14.7, 1.53, 0.294];

    pub fn initial_state(&self) -> [f64; 5] {
        [self.a0, self.a0 / 3.0, 0.0, 0.0, 0.0]
    }

    /// Concentration of A at each of `times` (integrated from `t = 0`).
    pub fn species_a(&self, rates: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        let h = default_substep(0.0, times, 0.05);
        if !h.is_finite() {
            return Err(Error::Empty("observation times"));
        }
        let traj = rk4_integrate(self, rates, &self.initial_state(), 0.0, times, h)?;
        Ok(traj.into_iter().map(|s| s[0]).collect())
    }
}

impl Default for ChemicalKinetics {
    fn default() -> Self {
        Self { a0: Self::A0 }
    }
}

impl OdeSystem for ChemicalKinetics {
    fn state_dim(&self) -> usize {
        5
    }

    fn rhs(&self, _t: f64, s: &[f64], k: &[f64], out: &mut [f64]) {
        let (a, b, c, d) = (s[0], s[1], s[2], s[3]);
        let r1 = k[0] * a * b;
        let r2 = k[1] * a * c;
        let r3 = k[2] * a * d;
        out[0] = -r1 - r2 - r3;
        out[1] = -r1;
        out[2] = r1 - r2;
        out[3] = r2 - r3;
        out[4] = r3;
    }
}

/// Monod growth curve `θ₁ x / (θ₂ + x)`.
pub fn monod_prediction(theta: &[f64], x: f64) -> f64 {
    theta[0] * x / (theta[1] + x)
}

/// Parameters reported for the Monod data.
pub const MONOD_REPORTED: [f64; 2] = [0.153, 55.4];

/// Observations `y` at inputs `x` (concentrations or times) with known
/// Gaussian noise level.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub observations: Vec<f64>,
    pub noise_std: f64,
    /// Generating parameters, when the data were synthesized.
    pub true_params: Option<Vec<f64>>,
}

/// Which forward model a dataset belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataModel {
    Chemical,
    Monod,
}

impl DataModel {
    /// CSV header column names.
    pub fn columns(self) -> (&'static str, &'static str) {
        match self {
            DataModel::Chemical => ("t", "A"),
            DataModel::Monod => ("x", "y"),
        }
    }

    /// Ten times on `(0, 50]` minutes, or seven concentrations on `[20, 400]`.
    pub fn default_design(self) -> Vec<f64> {
        match self {
            DataModel::Chemical => (1..=10).map(|i| 5.0 * i as f64).collect(),
            DataModel::Monod => vec![20.0, 35.0, 55.0, 80.0, 120.0, 200.0, 400.0],
        }
    }

    pub fn default_noise_std(self) -> f64 {
        match self {
            DataModel::Chemical => 5e-4,
            DataModel::Monod => 0.008,
        }
    }

    pub fn reported_params(self) -> Vec<f64> {
        match self {
            DataModel::Chemical => ChemicalKinetics::REPORTED_RATES.to_vec(),
            DataModel::Monod => MONOD_REPORTED.to_vec(),
        }
    }

    pub fn forward(self, params: &[f64], inputs: &[f64]) -> Result<Vec<f64>> {
        match self {
            DataModel::Chemical => ChemicalKinetics::default().species_a(params, inputs),
            DataModel::Monod => Ok(inputs.iter().map(|&x| monod_prediction(params, x)).collect()),
        }
    }
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, observations: Vec<f64>, noise_std: f64) -> Result<Self> {
        Error::check_dim("observations", inputs.len(), observations.len())?;
        if inputs.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if !(noise_std > 0.0) {
            return Err(Error::invalid("noise_std", "must be positive"));
        }
        Ok(Self {
            inputs,
            observations,
            noise_std,
            true_params: None,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Reads a two-column CSV with the header of `model`.
    pub fn read_csv<R: Read>(reader: R, model: DataModel, noise_std: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let (cx, cy) = model.columns();
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != cx || &headers[1] != cy {
            return Err(Error::invalid(
                "dataset header",
                format!("expected `{cx},{cy}`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut inputs = Vec::new();
        let mut observations = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid("dataset value", format!("`{s}` is not a number")))
            };
            inputs.push(parse(&record[0])?);
            observations.push(parse(&record[1])?);
        }
        Self::new(inputs, observations, noise_std)
    }

    pub fn load_csv(path: &Path, model: DataModel, noise_std: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, model, noise_std)
    }

    pub fn write_csv<W: Write>(&self, writer: W, model: DataModel) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let (cx, cy) = model.columns();
        w.write_record([cx, cy])?;
        for (x, y) in self.inputs.iter().zip(&self.observations) {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Forward-simulates `model` at `design` and adds i.i.d. `N(0, noise_std²)`
/// noise.
pub fn synthesize_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    model: DataModel,
    true_params: &[f64],
    noise_std: f64,
    design: &[f64],
) -> Result<Dataset> {
    if !(noise_std > 0.0) {
        return Err(Error::invalid("noise_std", "must be positive"));
    }
    let clean = model.forward(true_params, design)?;
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::invalid("noise_std", e.to_string()))?;
    let observations = clean.iter().map(|y| y + noise.sample(rng)).collect();
    let mut data = Dataset::new(design.to_vec(), observations, noise_std)?;
    data.true_params = Some(true_params.to_vec());
    Ok(data)
}

fn gaussian_log_likelihood(data: &Dataset, predictions: &[f64]) -> f64 {
    let inv_var = 1.0 / (data.noise_std * data.noise_std);
    -0.5 * inv_var
        * data
            .observations
            .iter()
            .zip(predictions)
            .map(|(y, p)| (y - p) * (y - p))
            .sum::<f64>()
}

/// Posterior over the rate constants `(k₁, k₂, k₃)`: Gaussian likelihood of
/// the observed A-concentrations, flat prior on `(0, upper_i]`.
#[derive(Clone, Debug)]
pub struct ChemicalPosterior {
    pub data: Dataset,
    pub upper: [f64; 3],
    pub kinetics: ChemicalKinetics,
}

impl ChemicalPosterior {
    pub const DEFAULT_UPPER: [f64; 3] = [100.0, 20.0, 5.0];
}

pub fn chemical_posterior(data: Dataset, upper: [f64; 3]) -> Result<ChemicalPosterior> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if upper.iter().any(|u| !(*u > 0.0)) {
        return Err(Error::invalid("prior_bounds", "upper bounds must be positive"));
    }
    Ok(ChemicalPosterior {
        data,
        upper,
        kinetics: ChemicalKinetics::default(),
    })
}

impl TargetDensity for ChemicalPosterior {
    fn dim(&self) -> usize {
        3
    }

    fn log_density(&self, k: &[f64]) -> f64 {
        if k.iter().zip(&self.upper).any(|(v, u)| !(*v > 0.0 && v <= u)) {
            return f64::NEG_INFINITY;
        }
        match self.kinetics.species_a(k, &self.data.inputs) {
            Ok(pred) => sanitize(gaussian_log_likelihood(&self.data, &pred)),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Posterior over `(θ₁, θ₂)` of the Monod model, flat prior on
/// `(0, 1] × (0, 1000]`.
#[derive(Clone, Debug)]
pub struct MonodPosterior {
    pub data: Dataset,
}

pub fn monod_posterior(data: Dataset) -> Result<MonodPosterior> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(MonodPosterior { data })
}

impl TargetDensity for MonodPosterior {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        if !(theta[0] > 0.0 && theta[0] <= 1.0 && theta[1] > 0.0 && theta[1] <= 1e3) {
            return f64::NEG_INFINITY;
        }
        let pred: Vec<f64> = self.data.inputs.iter().map(|&x| monod_prediction(theta, x)).collect();
        sanitize(gaussian_log_likelihood(&self.data, &pred))
    }
}

/// A uniform draw inside a box, used to test support handling.
pub fn uniform_in_box<R: Rng + ?Sized>(rng: &mut R, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| Uniform::new_inclusive(a, b).map(|u| u.sample(rng)).unwrap_or(a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Decay;
    impl OdeSystem for Decay {
        fn state_dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, s: &[f64], _p: &[f64], out: &mut [f64]) {
            out[0] = -s[0];
        }
    }

    struct Still;
    impl OdeSystem for Still {
        fn state_dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, _s: &[f64], _p: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    #[test]
    fn strip_density_values() {
        let s = StripDensity;
        assert_eq!(s.density(&[0.0, 0.0]), 1.0);
        assert_eq!(s.density(&[10.0, 0.0]), 36.0);
        assert_eq!(s.density(&[20.0, 0.0]), 0.0);
        assert_eq!(s.log_density(&[20.0, 0.0]), f64::NEG_INFINITY);
        assert_eq!(s.log_density(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn strip_marginal_is_normalized() {
        let s = StripDensity;
        assert!((s.marginal_mass(-18.0, 18.0) - 1.0).abs() < 1e-15);
        assert!((s.marginal_mass(-0.5, 0.5) - 6.0 / 7566.0).abs() < 1e-15);
        // Riemann sum of the marginal density agrees with the closed form.
        let n = 720_000;
        let w = 36.0 / n as f64;
        let sum: f64 = (0..n).map(|i| s.marginal_density(-18.0 + (i as f64 + 0.5) * w) * w).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = GaussianTarget::random_mmt(&mut rng, 4).unwrap();
        let x = [0.3, -1.0, 2.0, 0.5];
        let q = t.covariance().inverse_quadratic_form(&DVector::from_column_slice(&x));
        let diff = t.log_density(&[0.0; 4]) - t.log_density(&x);
        assert!((diff - 0.5 * q).abs() < 1e-10);

        let std2 = GaussianTarget::from_factor(&DMatrix::identity(2, 2)).unwrap();
        let x = [0.7, -0.2];
        let expected = -(2.0 * std::f64::consts::PI).ln() - 0.5 * (0.49 + 0.04);
        assert!((std2.log_density(&x) - expected).abs() < 1e-14);
    }

    #[test]
    fn banana_examples() {
        let mut x = vec![0.0; 20];
        x[1] = 10.0;
        assert_eq!(banana_log_density(&x, 0.1), 0.0);
        let mut x = vec![0.0; 20];
        x[0] = 10.0;
        assert!((banana_log_density(&x, 0.1) + 0.5).abs() < 1e-12);
        assert!(Banana::new(1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn banana_without_bend_is_axis_aligned_gaussian(
            x in proptest::collection::vec(-20.0..20.0f64, 5),
        ) {
            let g = GaussianTarget::diagonal(&[100.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
            let g0 = g.log_density(&[0.0; 5]);
            let b = banana_log_density(&x, 0.0);
            prop_assert!((b - (g.log_density(&x) - g0)).abs() < 1e-9);
        }

        #[test]
        fn targets_never_return_nan(x in proptest::collection::vec(-1e7..1e7f64, 3)) {
            let data = Dataset::new(vec![5.0, 10.0], vec![0.01, 0.008], 5e-4).unwrap();
            let chem = chemical_posterior(data, ChemicalPosterior::DEFAULT_UPPER).unwrap();
            prop_assert!(!chem.log_density(&x).is_nan());
            let banana = Truncated::new(Banana::new(3, 0.1).unwrap(), DEFAULT_TRUNCATION);
            prop_assert!(!banana.log_density(&x).is_nan());
            prop_assert!(!StripDensity.log_density(&x[..2]).is_nan());
            let monod = monod_posterior(Dataset::new(vec![20.0], vec![0.04], 0.008).unwrap()).unwrap();
            prop_assert!(!monod.log_density(&x[..2]).is_nan());
        }
    }

    #[test]
    fn nan_input_maps_to_negative_infinity() {
        let t = Truncated::new(Banana::new(2, 0.1).unwrap(), DEFAULT_TRUNCATION);
        assert_eq!(t.log_density(&[f64::NAN, 0.0]), f64::NEG_INFINITY);
        assert_eq!(t.log_density(&[2e6, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn rk4_zero_rhs_is_constant() {
        let traj = rk4_integrate(&Still, &[], &[1.0, -2.0], 0.0, &[1.0, 2.0, 3.0], 0.1).unwrap();
        assert!(traj.iter().all(|s| s == &vec![1.0, -2.0]));
    }

    #[test]
    fn rk4_exponential_decay() {
        let traj = rk4_integrate(&Decay, &[], &[1.0], 0.0, &[1.0], 0.01).unwrap();
        assert!((traj[0][0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn rk4_rejects_unordered_times() {
        assert!(rk4_integrate(&Decay, &[], &[1.0], 0.0, &[1.0, 0.5], 0.01).is_err());
    }

    #[test]
    fn chemical_initial_rate() {
        let chem = ChemicalKinetics::default();
        let mut out = [0.0; 5];
        chem.rhs(0.0, &chem.initial_state(), &ChemicalKinetics::REPORTED_RATES, &mut out);
        let expected = -14.7 * 0.02090 * (0.02090 / 3.0);
        assert!((out[0] - expected).abs() < 1e-15);
        assert!((out[0] + 2.1404e-3).abs() < 1e-7);
    }

    #[test]
    fn chemical_conservation_and_monotone_a() {
        let chem = ChemicalKinetics::default();
        let times: Vec<f64> = (1..=200).map(|i| i as f64 * 0.5).collect();
        let traj = rk4_integrate(&chem, &[14.7, 1.53, 0.294], &chem.initial_state(), 0.0, &times, 0.025).unwrap();
        let b0 = chem.a0 / 3.0;
        let mut prev_a = chem.a0;
        for s in &traj {
            let sum = s[1] + s[2] + s[3] + s[4];
            assert!(((sum - b0) / b0).abs() < 1e-9);
            assert!(s[0] <= prev_a);
            prev_a = s[0];
        }
    }

    #[test]
    fn chemical_step_halving_converges() {
        let chem = ChemicalKinetics::default();
        let times = DataModel::Chemical.default_design();
        let h = default_substep(0.0, &times, 0.05);
        let coarse = rk4_integrate(&chem, &[14.7, 1.53, 0.294], &chem.initial_state(), 0.0, &times, h).unwrap();
        let fine = rk4_integrate(&chem, &[14.7, 1.53, 0.294], &chem.initial_state(), 0.0, &times, h / 2.0).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c[0] - f[0]).abs() < 1e-6 * chem.a0);
        }
    }

    #[test]
    fn monod_half_saturation_and_asymptote() {
        assert!((monod_prediction(&MONOD_REPORTED, 55.4) - 0.0765).abs() < 1e-12);
        assert!((monod_prediction(&MONOD_REPORTED, 1e12) - 0.153).abs() < 1e-9);
    }

    #[test]
    fn posterior_support() {
        let data = Dataset::new(vec![5.0, 10.0], vec![0.01, 0.008], 5e-4).unwrap();
        let chem = chemical_posterior(data, ChemicalPosterior::DEFAULT_UPPER).unwrap();
        assert_eq!(chem.log_density(&[-1.0, 1.53, 0.294]), f64::NEG_INFINITY);
        assert!(chem.log_density(&[14.7, 1.53, 0.294]).is_finite());
        let monod = monod_posterior(Dataset::new(vec![20.0], vec![0.04], 0.008).unwrap()).unwrap();
        assert_eq!(monod.log_density(&[1.5, 50.0]), f64::NEG_INFINITY);
        assert_eq!(monod.log_density(&[0.1, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn tiny_noise_reproduces_forward_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for model in [DataModel::Chemical, DataModel::Monod] {
            let params = model.reported_params();
            let design = model.default_design();
            let data = synthesize_dataset(&mut rng, model, &params, 1e-14, &design).unwrap();
            let clean = model.forward(&params, &design).unwrap();
            for (y, c) in data.observations.iter().zip(&clean) {
                assert!((y - c).abs() < 1e-12);
            }
            assert_eq!(data.true_params.as_deref(), Some(params.as_slice()));
        }
        assert_eq!(DataModel::Chemical.default_design().len(), 10);
        let monod = DataModel::Monod.default_design();
        assert_eq!(monod.len(), 7);
        assert!(monod[0] == 20.0 && monod[6] == 400.0);
    }

    #[test]
    fn csv_round_trip_and_header_check() {
        let data = Dataset::new(vec![20.0, 55.4], vec![0.04, 0.0765], 0.008).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf, DataModel::Monod).unwrap();
        assert!(buf.starts_with(b"x,y\n"));
        let back = Dataset::read_csv(buf.as_slice(), DataModel::Monod, 0.008).unwrap();
        assert_eq!(back, data);
        assert!(Dataset::read_csv(buf.as_slice(), DataModel::Chemical, 5e-4).is_err());
        let chem = b"t,A\n5,0.019\n10,0.018\n";
        let d = Dataset::read_csv(&chem[..], DataModel::Chemical, 5e-4).unwrap();
        assert_eq!(d.inputs, vec![5.0, 10.0]);
    }
}
