//! Distribution fits to handover-count samples and the power-law surfaces
//! that map (GBS density, travelled distance) to the fitted parameters.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::montecarlo::EmpiricalPmf;
use crate::registry::Registry;

/// A probability mass function on the non-negative integers.
pub trait DiscretePmf: std::fmt::Debug + Send + Sync {
    fn pmf(&self, h: u32) -> f64;

    /// Named parameters, for reporting.
    fn params(&self) -> Vec<(&'static str, f64)>;
}

/// Gaussian density sampled at the non-negative integers, without
/// renormalisation over that support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPmfParams {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianPmfParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) || !mu.is_finite() {
            return Err(Error::Domain(format!(
                "Gaussian needs finite mu and sigma2 > 0, got ({mu}, {sigma2})"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn eval(&self, h: f64) -> f64 {
        let z = h - self.mu;
        (-z * z / (2.0 * self.sigma2)).exp() / (2.0 * PI * self.sigma2).sqrt()
    }

    /// Largest count that series over this PMF need to visit: `ceil(mu + 10 sigma)`.
    pub fn series_upper(&self) -> f64 {
        (self.mu + 10.0 * self.sigma()).ceil().max(0.0)
    }
}

pub fn gaussian_pmf_eval(h: u32, params: &GaussianPmfParams) -> f64 {
    params.eval(f64::from(h))
}

impl DiscretePmf for GaussianPmfParams {
    fn pmf(&self, h: u32) -> f64 {
        gaussian_pmf_eval(h, self)
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("mu", self.mu), ("sigma2", self.sigma2)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonPmf {
    pub rate: f64,
}

impl DiscretePmf for PoissonPmf {
    fn pmf(&self, h: u32) -> f64 {
        if self.rate == 0.0 {
            return if h == 0 { 1.0 } else { 0.0 };
        }
        let ln_fact: f64 = (2..=h).map(|k| f64::from(k).ln()).sum();
        (f64::from(h) * self.rate.ln() - self.rate - ln_fact).exp()
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("rate", self.rate)]
    }
}

/// Sample mean and unbiased (n - 1) sample variance.
pub fn moment_estimates(samples: &[u32]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&h| f64::from(h)).sum::<f64>() / n;
    let ss: f64 = samples
        .iter()
        .map(|&h| (f64::from(h) - mean).powi(2))
        .sum();
    Ok((mean, ss / (n - 1.0)))
}

/// Mean squared difference over `h = 0..=h_max` of the empirical support.
fn support_mse(empirical: &EmpiricalPmf, model: &GaussianPmfParams) -> f64 {
    let probs = empirical.probabilities();
    probs
        .iter()
        .enumerate()
        .map(|(h, &p)| (p - model.eval(h as f64)).powi(2))
        .sum::<f64>()
        / probs.len() as f64
}

/// Moment initialisation followed by coordinate descent on the PMF mean
/// squared error, restricted to a neighbourhood of the moment estimates.
pub fn fit_gaussian_pmf(samples: &[u32]) -> Result<GaussianPmfParams> {
    let (mu0, var0) = moment_estimates(samples)?;
    if var0 == 0.0 {
        return Err(Error::ZeroVariance(samples.len()));
    }
    let empirical = EmpiricalPmf::from_samples(samples)?;
    let sd0 = var0.sqrt();
    let mu_range = (mu0 - 2.0 * sd0, mu0 + 2.0 * sd0);
    let var_range = (var0 / 10.0, var0 * 10.0);

    let mut best = GaussianPmfParams::new(mu0, var0)?;
    let mut best_mse = support_mse(&empirical, &best);
    let mut step_mu = 0.25 * sd0;
    let mut step_var = 0.25 * var0;

    for _ in 0..200 {
        let before = best_mse;
        let mut moved = false;
        for (dmu, dvar) in [
            (step_mu, 0.0),
            (-step_mu, 0.0),
            (0.0, step_var),
            (0.0, -step_var),
        ] {
            let mu = best.mu + dmu;
            let sigma2 = best.sigma2 + dvar;
            if mu < mu_range.0 || mu > mu_range.1 || sigma2 < var_range.0 || sigma2 > var_range.1 {
                continue;
            }
            let cand = GaussianPmfParams { mu, sigma2 };
            let mse = support_mse(&empirical, &cand);
            if mse < best_mse {
                best = cand;
                best_mse = mse;
                moved = true;
            }
        }
        if moved {
            if before - best_mse < 1e-12 {
                break;
            }
        } else {
            step_mu /= 2.0;
            step_var /= 2.0;
            if step_mu < 1e-9 * sd0 && step_var < 1e-9 * var0 {
                break;
            }
        }
    }
    Ok(best)
}

/// Maximum-likelihood Poisson rate (the sample mean).
pub fn fit_poisson_pmf(samples: &[u32]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    Ok(samples.iter().map(|&h| f64::from(h)).sum::<f64>() / samples.len() as f64)
}

/// A parametric PMF family selectable by name.
pub trait PmfModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, samples: &[u32]) -> Result<Box<dyn DiscretePmf>>;
}

struct GaussianModel;

impl PmfModel for GaussianModel {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn fit(&self, samples: &[u32]) -> Result<Box<dyn DiscretePmf>> {
        Ok(Box::new(fit_gaussian_pmf(samples)?))
    }
}

struct PoissonModel;

impl PmfModel for PoissonModel {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn fit(&self, samples: &[u32]) -> Result<Box<dyn DiscretePmf>> {
        Ok(Box::new(PoissonPmf {
            rate: fit_poisson_pmf(samples)?,
        }))
    }
}

type PmfCtor = fn() -> Box<dyn PmfModel>;

pub fn pmf_models() -> &'static Registry<PmfCtor> {
    static REGISTRY: OnceLock<Registry<PmfCtor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        Registry::<PmfCtor>::new("PMF model")
            .with("gaussian", || Box::new(GaussianModel))
            .with("poisson", || Box::new(PoissonModel))
    })
}

pub fn pmf_model(name: &str) -> Result<Box<dyn PmfModel>> {
    Ok((pmf_models().get(name)?)())
}

/// `y = a * lambda^b * d^c` with `d` in km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PowerLawCoeffs {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn eval(&self, lambda: f64, d_km: f64) -> f64 {
        self.a * lambda.powf(self.b) * d_km.powf(self.c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.b.is_finite() || !self.c.is_finite() {
            return Err(crate::error::invalid(format!(
                "power-law coefficients need a > 0 and finite exponents, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub lambda: f64,
    pub d_km: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SurfaceFitOptions {
    /// Follow the log-space solution with one Gauss-Newton step on the
    /// linear-space residuals.
    pub refine: bool,
}

/// Least-squares fit of `log y = log a + b log lambda + c log d`.
///
/// An axis along which every point shares the same value cannot be
/// identified; its exponent is reported as 0 and its constant folds into `a`.
pub fn fit_power_surface(points: &[SurfacePoint], opts: SurfaceFitOptions) -> Result<PowerLawCoeffs> {
    for p in points {
        if !(p.y > 0.0) {
            return Err(Error::Domain(format!(
                "power-law fit needs y > 0, got {} at (lambda={}, d={})",
                p.y, p.lambda, p.d_km
            )));
        }
        if !(p.lambda > 0.0 && p.d_km > 0.0) {
            return Err(Error::Domain(format!(
                "power-law fit needs lambda > 0 and d > 0, got ({}, {})",
                p.lambda, p.d_km
            )));
        }
    }
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for p in points {
        if !distinct.contains(&(p.lambda, p.d_km)) {
            distinct.push((p.lambda, p.d_km));
        }
    }
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 distinct (lambda, d) points, got {}",
            distinct.len()
        )));
    }
    let lambda_varies = points.iter().any(|p| p.lambda != points[0].lambda);
    let d_varies = points.iter().any(|p| p.d_km != points[0].d_km);
    if !lambda_varies && !d_varies {
        return Err(Error::InsufficientData(
            "rank-deficient design: all points share lambda and d".into(),
        ));
    }

    let cols = 1 + usize::from(lambda_varies) + usize::from(d_varies);
    let design = DMatrix::from_fn(points.len(), cols, |i, j| {
        let p = &points[i];
        match (j, lambda_varies) {
            (0, _) => 1.0,
            (1, true) => p.lambda.ln(),
            _ => p.d_km.ln(),
        }
    });
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.y.ln()));
    let sol = solve_least_squares(design, rhs)?;
    let mut k = 1;
    let mut next = || {
        let v = sol[k];
        k += 1;
        v
    };
    let b = if lambda_varies { next() } else { 0.0 };
    let c = if d_varies { next() } else { 0.0 };
    let mut coeffs = PowerLawCoeffs::new(sol[0].exp(), b, c);

    if opts.refine {
        coeffs = gauss_newton_step(points, coeffs, lambda_varies, d_varies)?;
    }
    Ok(coeffs)
}

fn solve_least_squares(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Internal(format!("least squares: {e}")))
}

fn gauss_newton_step(
    points: &[SurfacePoint],
    start: PowerLawCoeffs,
    lambda_varies: bool,
    d_varies: bool,
) -> Result<PowerLawCoeffs> {
    let cols = 1 + usize::from(lambda_varies) + usize::from(d_varies);
    let mut jac = DMatrix::zeros(points.len(), cols);
    let mut resid = DVector::zeros(points.len());
    for (i, p) in points.iter().enumerate() {
        let base = p.lambda.powf(start.b) * p.d_km.powf(start.c);
        let model = start.a * base;
        resid[i] = p.y - model;
        jac[(i, 0)] = base;
        let mut j = 1;
        if lambda_varies {
            jac[(i, j)] = model * p.lambda.ln();
            j += 1;
        }
        if d_varies {
            jac[(i, j)] = model * p.d_km.ln();
        }
    }
    let delta = solve_least_squares(jac, resid)?;
    let mut k = 1;
    let mut refined = PowerLawCoeffs::new(start.a + delta[0], start.b, start.c);
    if lambda_varies {
        refined.b += delta[k];
        k += 1;
    }
    if d_varies {
        refined.c += delta[k];
    }
    if !(refined.a > 0.0) {
        return Ok(start);
    }
    Ok(refined)
}

/// One row of a fitted-coefficient table: the mean and variance surfaces for
/// a given measurement gap, time-to-trigger, UAV height and array size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientRow {
    pub t_mg_ms: f64,
    pub t_ttt_ms: f64,
    pub h_uav_m: f64,
    pub n_t: u32,
    pub mean: PowerLawCoeffs,
    pub var: PowerLawCoeffs,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientTable {
    pub rows: Vec<CoefficientRow>,
}

pub const COEFFICIENT_HEADER: [&str; 10] = [
    "t_mg_ms", "t_ttt_ms", "h_uav_m", "n_t", "a1", "b1", "c1", "a2", "b2", "c2",
];

const BUNDLED_COEFFICIENTS: &str = include_str!("../data/coefficients.csv");

impl CoefficientTable {
    /// The published surfaces for the reference deployment.
    pub fn bundled() -> &'static CoefficientTable {
        static TABLE: OnceLock<CoefficientTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            CoefficientTable::from_csv(BUNDLED_COEFFICIENTS.as_bytes())
                .expect("bundled coefficient table parses")
        })
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers != COEFFICIENT_HEADER {
            return Err(Error::Parse(format!(
                "coefficient table header {:?} != {:?}",
                headers, COEFFICIENT_HEADER
            )));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Parse(format!("row {}: bad {}", line + 2, COEFFICIENT_HEADER[i]))
                    })
            };
            let n_t = rec
                .get(3)
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad n_t", line + 2)))?;
            rows.push(CoefficientRow {
                t_mg_ms: num(0)?,
                t_ttt_ms: num(1)?,
                h_uav_m: num(2)?,
                n_t,
                mean: PowerLawCoeffs::new(num(4)?, num(5)?, num(6)?),
                var: PowerLawCoeffs::new(num(7)?, num(8)?, num(9)?),
            });
        }
        Ok(Self { rows })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(COEFFICIENT_HEADER)?;
        for r in &self.rows {
            w.write_record([
                fmt_f64(r.t_mg_ms),
                fmt_f64(r.t_ttt_ms),
                fmt_f64(r.h_uav_m),
                r.n_t.to_string(),
                fmt_f64(r.mean.a),
                fmt_f64(r.mean.b),
                fmt_f64(r.mean.c),
                fmt_f64(r.var.a),
                fmt_f64(r.var.b),
                fmt_f64(r.var.c),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn lookup(&self, t_mg_ms: f64, t_ttt_ms: f64, h_uav_m: f64, n_t: u32) -> Result<&CoefficientRow> {
        self.rows
            .iter()
            .find(|r| {
                r.t_mg_ms == t_mg_ms && r.t_ttt_ms == t_ttt_ms && r.h_uav_m == h_uav_m && r.n_t == n_t
            })
            .ok_or_else(|| {
                crate::error::invalid(format!(
                    "no coefficient row for t_mg={t_mg_ms} ms, t_ttt={t_ttt_ms} ms, h_uav={h_uav_m} m, n_t={n_t}"
                ))
            })
    }
}
