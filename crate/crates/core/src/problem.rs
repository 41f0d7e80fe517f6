//! Costs, regularizers and data streams.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// A cost `f(x; y)` that is `mu`-strongly convex and `lip`-smooth in `x` for every `y`.
pub trait SmoothCost: Send + Sync + fmt::Debug {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn mu(&self) -> f64;
    fn lip(&self) -> f64;
    fn value(&self, x: &Vector, y: &Vector) -> f64;
    fn grad(&self, x: &Vector, y: &Vector) -> Vector;
    fn hess(&self, x: &Vector, y: &Vector) -> Matrix;

    /// Bound `C₀ ≥ ‖∇_yx f‖` for costs whose gradient is affine in `y`.
    fn coupling_bound(&self) -> Option<f64> {
        None
    }
}

/// `f(x; y) = ½ xᵀHx − xᵀ(b + B y)` with `H` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct QuadraticCost {
    h: Matrix,
    b: Vector,
    coupling: Matrix,
    mu: f64,
    lip: f64,
}

impl QuadraticCost {
    /// `coupling` is `dim_x × dim_y`; pass a `n × 0` matrix for a cost without data.
    pub fn new(h: Matrix, b: Vector, coupling: Matrix) -> Result<Self> {
        let n = h.nrows();
        if !h.is_square() {
            return Err(Error::dim(n, h.ncols()));
        }
        if b.len() != n {
            return Err(Error::dim(n, b.len()));
        }
        if coupling.nrows() != n {
            return Err(Error::dim(n, coupling.nrows()));
        }
        if !linalg::is_symmetric(&h) {
            return Err(Error::NotSymmetric);
        }
        let h = linalg::symmetrize(&h);
        let mu = linalg::sym_eig_min(&h)?;
        let lip = linalg::sym_eig_max(&h)?;
        if mu <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "Hessian is not positive definite (λ_min = {mu})"
            )));
        }
        Ok(Self {
            h,
            b,
            coupling,
            mu,
            lip,
        })
    }

    /// `½ (x − m)ᵀ H (x − m)` up to a constant.
    pub fn centered(h: Matrix, m: Vector) -> Result<Self> {
        let b = &h * &m;
        let n = m.len();
        Self::new(h, b, Matrix::zeros(n, 0))
    }

    /// `½ ‖x − A y‖²` up to a constant.
    pub fn tracking(a: Matrix) -> Result<Self> {
        let n = a.nrows();
        Self::new(Matrix::identity(n, n), Vector::zeros(n), a)
    }

    pub fn hessian(&self) -> &Matrix {
        &self.h
    }

    /// Unique minimizer `H⁻¹(b + B y)`.
    pub fn minimizer(&self, y: &Vector) -> Result<Vector> {
        linalg::solve_linear(&self.h, &self.linear_term(y))
    }

    fn linear_term(&self, y: &Vector) -> Vector {
        if self.coupling.ncols() == 0 {
            self.b.clone()
        } else {
            &self.b + &self.coupling * y
        }
    }
}

impl SmoothCost for QuadraticCost {
    fn dim_x(&self) -> usize {
        self.h.nrows()
    }
    fn dim_y(&self) -> usize {
        self.coupling.ncols()
    }
    fn mu(&self) -> f64 {
        self.mu
    }
    fn lip(&self) -> f64 {
        self.lip
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        0.5 * x.dot(&(&self.h * x)) - x.dot(&self.linear_term(y))
    }
    fn grad(&self, x: &Vector, y: &Vector) -> Vector {
        &self.h * x - self.linear_term(y)
    }
    fn hess(&self, _x: &Vector, _y: &Vector) -> Matrix {
        self.h.clone()
    }
    fn coupling_bound(&self) -> Option<f64> {
        Some(linalg::spectral_norm(&self.coupling))
    }
}

/// `f(x; y) = f′(x) + yᵀ A x`, so that `∇ₓf = ∇f′(x) + Aᵀy`.
///
/// `A` has shape `dim_y × dim_x`. The base cost is evaluated with an empty `y`.
#[derive(Clone, Debug)]
pub struct LinearParamCost {
    base: Arc<dyn SmoothCost>,
    a: Matrix,
    c0: f64,
    empty: Vector,
}

impl LinearParamCost {
    pub fn new(base: Arc<dyn SmoothCost>, a: Matrix) -> Result<Self> {
        if a.ncols() != base.dim_x() {
            return Err(Error::dim(base.dim_x(), a.ncols()));
        }
        let c0 = linalg::spectral_norm(&a);
        Ok(Self {
            base,
            a,
            c0,
            empty: Vector::zeros(0),
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    /// Largest singular value of `A`.
    pub fn c0(&self) -> f64 {
        self.c0
    }
}

impl SmoothCost for LinearParamCost {
    fn dim_x(&self) -> usize {
        self.base.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.a.nrows()
    }
    fn mu(&self) -> f64 {
        self.base.mu()
    }
    fn lip(&self) -> f64 {
        self.base.lip()
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.base.value(x, &self.empty) + y.dot(&(&self.a * x))
    }
    fn grad(&self, x: &Vector, y: &Vector) -> Vector {
        self.base.grad(x, &self.empty) + self.a.tr_mul(y)
    }
    fn hess(&self, x: &Vector, _y: &Vector) -> Matrix {
        self.base.hess(x, &self.empty)
    }
    fn coupling_bound(&self) -> Option<f64> {
        Some(self.c0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RideHailParams {
    pub n_companies: usize,
    /// Per-company demand multipliers; empty means all ones.
    pub c: Vec<f64>,
    pub kappa: f64,
    pub sigma_couple: f64,
    pub box_bounds: [f64; 2],
}

impl Default for RideHailParams {
    fn default() -> Self {
        Self {
            n_companies: 5,
            c: Vec::new(),
            kappa: 0.02,
            sigma_couple: 0.1,
            box_bounds: [100.0, 1000.0],
        }
    }
}

impl RideHailParams {
    pub fn multipliers(&self) -> Vec<f64> {
        if self.c.is_empty() {
            vec![1.0; self.n_companies]
        } else {
            self.c.clone()
        }
    }

    pub fn regularizer(&self) -> Regularizer {
        Regularizer::Box {
            lower: self.box_bounds[0],
            upper: self.box_bounds[1],
        }
    }
}

/// Fleet-size cost for `n` competing ride-hailing companies.
///
/// Per company: a quadratic fit to scaled demand, a logistic
/// `ln(1 + κ eˣ)` running-cost term, and a pairwise coupling `ς Σ_{i<j} (x_i − x_j)²`.
#[derive(Clone, Debug)]
pub struct RideHailCost {
    c: Vec<f64>,
    ln_kappa: f64,
    sigma: f64,
    lip: f64,
}

pub fn ride_hail_cost(params: &RideHailParams) -> Result<RideHailCost> {
    let c = params.multipliers();
    if params.n_companies == 0 || c.len() != params.n_companies {
        return Err(Error::InvalidParams(format!(
            "expected {} demand multipliers, got {}",
            params.n_companies,
            c.len()
        )));
    }
    if !(params.kappa > 0.0) {
        return Err(Error::InvalidParams(format!("kappa must be positive, got {}", params.kappa)));
    }
    if c.iter().any(|&ci| !(ci > 0.0)) {
        return Err(Error::InvalidParams("demand multipliers must be positive".into()));
    }
    if !(params.sigma_couple >= 0.0) {
        return Err(Error::InvalidParams("coupling weight must be nonnegative".into()));
    }
    let n = params.n_companies as f64;
    Ok(RideHailCost {
        c,
        ln_kappa: params.kappa.ln(),
        sigma: params.sigma_couple,
        lip: 1.0 + 0.25 + 4.0 * params.sigma_couple * n,
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl SmoothCost for RideHailCost {
    fn dim_x(&self) -> usize {
        self.c.len()
    }
    fn dim_y(&self) -> usize {
        self.c.len()
    }
    fn mu(&self) -> f64 {
        1.0
    }
    fn lip(&self) -> f64 {
        self.lip
    }
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        let n = self.c.len();
        let mut v = 0.0;
        for i in 0..n {
            let r = x[i] - self.c[i] * y[i];
            v += 0.5 * r * r + softplus(x[i] + self.ln_kappa);
            for j in (i + 1)..n {
                let d = x[i] - x[j];
                v += self.sigma * d * d;
            }
        }
        v
    }
    fn grad(&self, x: &Vector, y: &Vector) -> Vector {
        let n = self.c.len();
        let total: f64 = x.sum();
        Vector::from_fn(n, |i, _| {
            (x[i] - self.c[i] * y[i])
                + sigmoid(x[i] + self.ln_kappa)
                + 2.0 * self.sigma * (n as f64 * x[i] - total)
        })
    }
    fn hess(&self, x: &Vector, _y: &Vector) -> Matrix {
        let n = self.c.len();
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                let s = sigmoid(x[i] + self.ln_kappa);
                1.0 + s * (1.0 - s) + 2.0 * self.sigma * (n as f64 - 1.0)
            } else {
                -2.0 * self.sigma
            }
        })
    }
    fn coupling_bound(&self) -> Option<f64> {
        Some(self.c.iter().copied().fold(0.0, f64::max))
    }
}

/// Proximable convex regularizer `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    Zero,
    Box { lower: f64, upper: f64 },
    L1 { weight: f64 },
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::Zero => Ok(()),
            Regularizer::Box { lower, upper } if lower < upper => Ok(()),
            Regularizer::Box { lower, upper } => Err(Error::InvalidParams(format!(
                "box needs lower < upper, got [{lower}, {upper}]"
            ))),
            Regularizer::L1 { weight } if weight >= 0.0 => Ok(()),
            Regularizer::L1 { weight } => {
                Err(Error::InvalidParams(format!("l1 weight must be nonnegative, got {weight}")))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    /// `prox_{step·g}(u)`.
    pub fn prox(&self, u: &Vector, step: f64) -> Vector {
        match *self {
            Regularizer::Zero => u.clone(),
            Regularizer::Box { lower, upper } => u.map(|v| v.clamp(lower, upper)),
            Regularizer::L1 { weight } => {
                let t = step * weight;
                u.map(|v| v.signum() * (v.abs() - t).max(0.0))
            }
        }
    }

    /// `g(x)`, with `+inf` outside the box.
    pub fn value(&self, x: &Vector) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::Box { lower, upper } => {
                if x.iter().all(|&v| (lower..=upper).contains(&v)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }
}

/// One component of a sinusoidal demand profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidTerm {
    pub amplitude: Vec<f64>,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Noise-free data trajectory `ȳ(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nominal {
    /// `offset + Σ amplitude · sin(omega t + phase)`.
    SinusoidMixture {
        offset: Vec<f64>,
        terms: Vec<SinusoidTerm>,
    },
    /// Piecewise-linear interpolation of samples, held constant outside their range.
    Replay { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Nominal {
    /// Replay of samples after a centered moving average of `window` points.
    pub fn replay_smoothed(times: Vec<f64>, values: &[Vector], window: usize) -> Self {
        let smoothed = moving_average(values, window);
        Nominal::Replay {
            times,
            values: smoothed.iter().map(|v| v.as_slice().to_vec()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Nominal::SinusoidMixture { offset, .. } => offset.len(),
            Nominal::Replay { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        match self {
            Nominal::SinusoidMixture { terms, .. } => {
                for term in terms {
                    if term.amplitude.len() != d {
                        return Err(Error::dim(d, term.amplitude.len()));
                    }
                }
            }
            Nominal::Replay { times, values } => {
                if times.is_empty() {
                    return Err(Error::EmptyInput);
                }
                if times.len() != values.len() {
                    return Err(Error::dim(times.len(), values.len()));
                }
                if let Some(v) = values.iter().find(|v| v.len() != d) {
                    return Err(Error::dim(d, v.len()));
                }
                if times.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidParams("replay times must be nondecreasing".into()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Vector {
        match self {
            Nominal::SinusoidMixture { offset, terms } => {
                let mut y = Vector::from_column_slice(offset);
                for term in terms {
                    let s = (term.omega * t + term.phase).sin();
                    for (yi, a) in y.iter_mut().zip(&term.amplitude) {
                        *yi += a * s;
                    }
                }
                y
            }
            Nominal::Replay { times, values } => {
                let i = times.partition_point(|&s| s <= t);
                if i == 0 {
                    return Vector::from_column_slice(&values[0]);
                }
                if i == times.len() {
                    return Vector::from_column_slice(&values[i - 1]);
                }
                let (t0, t1) = (times[i - 1], times[i]);
                let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
                let a = Vector::from_column_slice(&values[i - 1]);
                let b = Vector::from_column_slice(&values[i]);
                a * (1.0 - w) + b * w
            }
        }
    }

    /// Bound `C` on `‖∇_t ȳ‖`, `‖∇_tt ȳ‖` and `‖∇_ttt ȳ‖`.
    ///
    /// Exact for sinusoid mixtures; divided differences of the samples for replays.
    pub fn derivative_bound(&self) -> f64 {
        match self {
            Nominal::SinusoidMixture { offset, terms } => (1..=3)
                .map(|m| {
                    let per_component = Vector::from_fn(offset.len(), |i, _| {
                        terms
                            .iter()
                            .map(|t| t.amplitude[i].abs() * t.omega.abs().powi(m))
                            .sum::<f64>()
                    });
                    per_component.norm()
                })
                .fold(0.0, f64::max),
            Nominal::Replay { times, values } => {
                if times.len() < 2 {
                    return 0.0;
                }
                let mut spacing: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
                spacing.sort_by(f64::total_cmp);
                let dt = spacing[spacing.len() / 2].max(f64::MIN_POSITIVE);
                let mut pts: Vec<Vector> =
                    values.iter().map(|v| Vector::from_column_slice(v)).collect();
                let mut bound: f64 = 0.0;
                for _ in 0..3 {
                    pts = pts.windows(2).map(|w| (&w[1] - &w[0]) / dt).collect();
                    bound = pts.iter().fold(bound, |b, d| b.max(d.norm()));
                }
                bound
            }
        }
    }
}

/// Centered moving average, with the window truncated at the ends.
pub fn moving_average(values: &[Vector], window: usize) -> Vec<Vector> {
    let half = window.max(1) / 2;
    (0..values.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(values.len() - 1);
            let mut acc = values[lo].clone();
            for v in &values[lo + 1..=hi] {
                acc += v;
            }
            acc / (hi - lo + 1) as f64
        })
        .collect()
}

/// Zero-mean Gaussian measurement noise `e_k ~ N(0, Σ_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Isotropic { variance: f64 },
    Diagonal { variances: Vec<f64> },
    Full { cov: Vec<Vec<f64>> },
    /// `variance · (1 + depth · sin(2πk / period)) · I`, with `0 ≤ depth ≤ 1`.
    Modulated { variance: f64, depth: f64, period: f64 },
}

impl NoiseModel {
    pub fn cov(&self, k: usize, dim: usize) -> Matrix {
        match self {
            NoiseModel::None => Matrix::zeros(dim, dim),
            NoiseModel::Isotropic { variance } => Matrix::identity(dim, dim) * *variance,
            NoiseModel::Diagonal { variances } => {
                Matrix::from_diagonal(&Vector::from_column_slice(variances))
            }
            NoiseModel::Full { cov } => {
                Matrix::from_fn(cov.len(), cov.len(), |i, j| cov[i].get(j).copied().unwrap_or(f64::NAN))
            }
            NoiseModel::Modulated {
                variance,
                depth,
                period,
            } => {
                let phase = 2.0 * std::f64::consts::PI * k as f64 / period;
                Matrix::identity(dim, dim) * (variance * (1.0 + depth * phase.sin()))
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, NoiseModel::Modulated { .. })
    }

    /// `Σ ≥ sup_k √tr Σ_k`.
    pub fn bound_sigma(&self, dim: usize) -> f64 {
        match self {
            NoiseModel::Modulated {
                variance, depth, ..
            } => (variance * (1.0 + depth.abs()) * dim as f64).max(0.0).sqrt(),
            other => other.cov(0, dim).trace().max(0.0).sqrt(),
        }
    }
}

/// Factor `S` with `S Sᵀ = Σ`: Cholesky, or an eigen factor for singular PSD `Σ`.
pub fn gaussian_factor(cov: &Matrix) -> Option<Matrix> {
    if !cov.is_square() || !linalg::is_symmetric(cov) {
        return None;
    }
    if let Some(ch) = cov.clone().cholesky() {
        return Some(ch.l());
    }
    let eig = nalgebra::SymmetricEigen::new(linalg::symmetrize(cov));
    let scale = 1.0 + eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return None;
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Some(eig.eigenvectors * Matrix::from_diagonal(&sqrt))
}

/// Seeded generator used for all sampling in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut impl Rng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Sampled data stream `y_k = ȳ(k h) + e_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub h: f64,
    pub horizon: usize,
    pub nominal: Nominal,
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
}

impl StreamSpec {
    pub fn dim(&self) -> usize {
        self.nominal.dim()
    }

    pub fn bound_c(&self) -> f64 {
        self.nominal.derivative_bound()
    }

    pub fn bound_sigma(&self) -> f64 {
        self.noise.bound_sigma(self.dim())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidParams(format!("sampling period must be positive, got {}", self.h)));
        }
        self.nominal.validate()
    }
}

/// Measured samples together with the nominal values they were drawn around.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub h: f64,
    pub times: Vec<f64>,
    pub measured: Vec<Vector>,
    pub nominal: Vec<Vector>,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn generate_stream(spec: &StreamSpec) -> Result<Stream> {
    spec.validate()?;
    let d = spec.dim();
    let mut rng = rng_from_seed(spec.seed);
    let constant = if spec.noise.is_constant() {
        Some(noise_factor(&spec.noise, 0, d)?)
    } else {
        None
    };
    let mut times = Vec::with_capacity(spec.horizon);
    let mut measured = Vec::with_capacity(spec.horizon);
    let mut nominal = Vec::with_capacity(spec.horizon);
    for k in 0..spec.horizon {
        let t = k as f64 * spec.h;
        let ybar = spec.nominal.eval(t);
        let factor = match &constant {
            Some(f) => f.clone(),
            None => noise_factor(&spec.noise, k, d)?,
        };
        let y = match factor {
            Some(s) => &ybar + s * standard_normal(&mut rng, d),
            None => ybar.clone(),
        };
        times.push(t);
        measured.push(y);
        nominal.push(ybar);
    }
    Ok(Stream {
        h: spec.h,
        times,
        measured,
        nominal,
    })
}

fn noise_factor(noise: &NoiseModel, k: usize, d: usize) -> Result<Option<Matrix>> {
    if matches!(noise, NoiseModel::None) {
        return Ok(None);
    }
    let cov = noise.cov(k, d);
    if cov.nrows() != d {
        return Err(Error::dim(d, cov.nrows()));
    }
    if cov.iter().all(|&v| v == 0.0) {
        return Ok(None);
    }
    gaussian_factor(&cov).map(Some).ok_or(Error::CovNotPsd(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn ride_hail_quadratic_term_vanishes_at_demand() {
        let p = RideHailParams {
            n_companies: 1,
            kappa: 1e-12,
            sigma_couple: 0.0,
            ..Default::default()
        };
        let cost = ride_hail_cost(&p).unwrap();
        let g = cost.grad(&v(&[5.0]), &v(&[5.0]));
        let k = 1e-12 * 5f64.exp();
        assert!((g[0] - k / (1.0 + k)).abs() < 1e-20);
    }

    #[test]
    fn ride_hail_coupling_gradient() {
        let p = RideHailParams {
            n_companies: 2,
            kappa: 1e-300,
            ..Default::default()
        };
        let cost = ride_hail_cost(&p).unwrap();
        let x = v(&[1.0, 0.0]);
        let g = cost.grad(&x, &v(&[1.0, 0.0]));
        assert!((g[0] - 0.2).abs() < 1e-12);
        assert!((g[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn ride_hail_rejects_bad_params() {
        let bad_kappa = RideHailParams {
            kappa: 0.0,
            ..Default::default()
        };
        assert!(matches!(ride_hail_cost(&bad_kappa), Err(Error::InvalidParams(_))));
        let bad_c = RideHailParams {
            c: vec![1.0, 1.0, -1.0, 1.0, 1.0],
            ..Default::default()
        };
        assert!(matches!(ride_hail_cost(&bad_c), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn ride_hail_stable_for_large_x() {
        let cost = ride_hail_cost(&RideHailParams::default()).unwrap();
        let x = Vector::from_element(5, 1000.0);
        let y = Vector::from_element(5, 900.0);
        assert!(cost.value(&x, &y).is_finite());
        assert!(cost.grad(&x, &y).iter().all(|g| g.is_finite()));
        assert!(cost.hess(&x, &y).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn prox_examples() {
        assert_eq!(Regularizer::Zero.prox(&v(&[3.0, -1.0]), 0.7), v(&[3.0, -1.0]));
        let b = Regularizer::Box {
            lower: 100.0,
            upper: 1000.0,
        };
        assert_eq!(b.prox(&v(&[50.0, 500.0, 2000.0]), 1.0), v(&[100.0, 500.0, 1000.0]));
        let l1 = Regularizer::L1 { weight: 1.0 };
        assert_eq!(l1.prox(&v(&[2.0, -0.5]), 1.0), v(&[1.0, 0.0]));
    }

    #[test]
    fn box_validation() {
        assert!(Regularizer::Box { lower: 1.0, upper: 1.0 }.validate().is_err());
        assert!(Regularizer::L1 { weight: -1.0 }.validate().is_err());
    }

    fn spec(noise: NoiseModel, seed: u64) -> StreamSpec {
        StreamSpec {
            h: 0.1,
            horizon: 50,
            nominal: Nominal::SinusoidMixture {
                offset: vec![1.0, 2.0],
                terms: vec![SinusoidTerm {
                    amplitude: vec![0.5, 0.25],
                    omega: 2.0,
                    phase: 0.1,
                }],
            },
            noise,
            seed,
        }
    }

    #[test]
    fn zero_noise_stream_is_nominal() {
        let s = generate_stream(&spec(NoiseModel::Isotropic { variance: 0.0 }, 1)).unwrap();
        assert_eq!(s.measured, s.nominal);
        for (k, y) in s.nominal.iter().enumerate() {
            let t = k as f64 * 0.1;
            assert_eq!(y[0], 1.0 + 0.5 * (2.0 * t + 0.1).sin());
        }
    }

    #[test]
    fn stream_is_deterministic() {
        let a = generate_stream(&spec(NoiseModel::Isotropic { variance: 2.0 }, 9)).unwrap();
        let b = generate_stream(&spec(NoiseModel::Isotropic { variance: 2.0 }, 9)).unwrap();
        let c = generate_stream(&spec(NoiseModel::Isotropic { variance: 2.0 }, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.measured, c.measured);
    }

    #[test]
    fn indefinite_noise_rejected() {
        let bad = NoiseModel::Full {
            cov: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
        };
        assert!(matches!(generate_stream(&spec(bad, 0)), Err(Error::CovNotPsd(0))));
    }

    #[test]
    fn singular_psd_noise_accepted() {
        let rank_one = NoiseModel::Full {
            cov: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        };
        let s = generate_stream(&spec(rank_one, 3)).unwrap();
        for (y, ybar) in s.measured.iter().zip(&s.nominal) {
            let e = y - ybar;
            assert!((e[0] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_derivative_bound() {
        let n = spec(NoiseModel::None, 0).nominal;
        let expected = (0.5f64.powi(2) + 0.25f64.powi(2)).sqrt() * 8.0;
        assert!((n.derivative_bound() - expected).abs() < 1e-12);
    }

    #[test]
    fn replay_interpolates() {
        let n = Nominal::Replay {
            times: vec![0.0, 2.0],
            values: vec![vec![0.0], vec![4.0]],
        };
        assert_eq!(n.eval(1.0)[0], 2.0);
        assert_eq!(n.eval(-1.0)[0], 0.0);
        assert_eq!(n.eval(5.0)[0], 4.0);
    }

    #[test]
    fn moving_average_window() {
        let vals: Vec<Vector> = (0..5).map(|k| v(&[k as f64])).collect();
        let s = moving_average(&vals, 5);
        assert_eq!(s[2][0], 2.0);
        assert_eq!(s[0][0], 1.0);
        assert_eq!(s[4][0], 3.0);
    }

    #[test]
    fn quadratic_minimizer() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let m = v(&[1.0, -2.0]);
        let q = QuadraticCost::centered(h, m.clone()).unwrap();
        let x = q.minimizer(&Vector::zeros(0)).unwrap();
        assert!((x - m).norm() < 1e-12);
    }
}
