//! Speed estimation from a handover count and its information bound.
//!
//! Power laws take the distance in km; speeds are km/h and windows seconds,
//! so `d = v * T / 3600`.

use crate::error::{invalid, Error, Result};
use crate::fitting::{CoefficientRow, GaussianPmfParams, PowerLawCoeffs};

/// Largest series the semi-analytic moments will sum.
const MAX_SERIES_TERMS: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub mean_coeffs: PowerLawCoeffs,
    pub var_coeffs: PowerLawCoeffs,
    /// GBS/km²
    pub lambda_gbs: f64,
    /// s
    pub t_window: f64,
}

impl EstimatorConfig {
    pub fn new(
        mean_coeffs: PowerLawCoeffs,
        var_coeffs: PowerLawCoeffs,
        lambda_gbs: f64,
        t_window: f64,
    ) -> Result<Self> {
        let cfg = Self {
            mean_coeffs,
            var_coeffs,
            lambda_gbs,
            t_window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_row(row: &CoefficientRow, lambda_gbs: f64, t_window: f64) -> Result<Self> {
        Self::new(row.mean, row.var, lambda_gbs, t_window)
    }

    pub fn validate(&self) -> Result<()> {
        self.mean_coeffs.validate()?;
        self.var_coeffs.validate()?;
        if !(self.lambda_gbs > 0.0 && self.lambda_gbs.is_finite()) {
            return Err(invalid(format!(
                "GBS density must be positive, got {}",
                self.lambda_gbs
            )));
        }
        if !(self.t_window > 0.0 && self.t_window.is_finite()) {
            return Err(invalid(format!(
                "window must be positive, got {}",
                self.t_window
            )));
        }
        if self.mean_coeffs.c == 0.0 {
            return Err(invalid("mean exponent c1 must be non-zero"));
        }
        Ok(())
    }

    /// Window length in hours, the time unit that keeps `d` in km.
    pub fn t_hours(&self) -> f64 {
        self.t_window / 3600.0
    }

    pub fn distance_km(&self, v_kmh: f64) -> f64 {
        v_kmh * self.t_hours()
    }

    /// `K1 = (a1 * lambda^b1 * T_h^c1)^(1/c1)`, so that `v_hat = h^(1/c1) / K1`.
    pub fn k1(&self) -> f64 {
        let m = &self.mean_coeffs;
        (m.a * self.lambda_gbs.powf(m.b) * self.t_hours().powf(m.c)).powf(1.0 / m.c)
    }

    /// `K2 = a1 * lambda^b1 * T_h`; equals `K1` when `c1 = 1`.
    pub fn k2(&self) -> f64 {
        let m = &self.mean_coeffs;
        m.a * self.lambda_gbs.powf(m.b) * self.t_hours()
    }
}

fn check_speed(v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("speed must be non-negative, got {v}")))
    }
}

fn check_positive_speed(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "speed must be positive for the information bound, got {v}"
        )))
    }
}

pub fn model_mu(v: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_speed(v)?;
    Ok(cfg.mean_coeffs.eval(cfg.lambda_gbs, cfg.distance_km(v)))
}

pub fn model_sigma2(v: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_speed(v)?;
    Ok(cfg.var_coeffs.eval(cfg.lambda_gbs, cfg.distance_km(v)))
}

fn gaussian_at(v: f64, cfg: &EstimatorConfig) -> Result<GaussianPmfParams> {
    GaussianPmfParams::new(model_mu(v, cfg)?, model_sigma2(v, cfg)?)
}

/// Fisher information about `v` carried by one Gaussian handover count.
pub fn fisher_information(v: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_positive_speed(v)?;
    let mu = model_mu(v, cfg)?;
    let s2 = model_sigma2(v, cfg)?;
    let c1 = cfg.mean_coeffs.c;
    let c2 = cfg.var_coeffs.c;
    Ok(((c1 * mu).powi(2) / s2 + c2 * c2 / 2.0) / (v * v))
}

pub fn crlb_speed_variance(v: f64, cfg: &EstimatorConfig) -> Result<f64> {
    Ok(1.0 / fisher_information(v, cfg)?)
}

pub fn crlb_rmse(v: f64, cfg: &EstimatorConfig) -> Result<f64> {
    Ok(crlb_speed_variance(v, cfg)?.sqrt())
}

/// Inverts the mean power law at an observed count.
pub fn estimate_speed(h: u32, cfg: &EstimatorConfig) -> f64 {
    f64::from(h).powf(1.0 / cfg.mean_coeffs.c) / cfg.k1()
}

/// `(sum h^(1/c1) f(h), sum h^(2/c1) f(h))` over `h = 0..=ceil(mu + 10 sigma)`.
fn estimator_series(v: f64, cfg: &EstimatorConfig) -> Result<(f64, f64)> {
    let g = gaussian_at(v, cfg)?;
    let upper = g.series_upper();
    if upper > MAX_SERIES_TERMS {
        return Err(Error::SeriesTruncation(format!(
            "series would need {upper} terms (mu={}, sigma2={})",
            g.mu, g.sigma2
        )));
    }
    let inv_c1 = 1.0 / cfg.mean_coeffs.c;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for h in 0..=upper as u32 {
        let f = g.eval(f64::from(h));
        let x = f64::from(h).powf(inv_c1);
        s1 += x * f;
        s2 += x * x * f;
    }
    Ok((s1, s2))
}

/// `E[v_hat]` under the non-renormalised Gaussian count model.
pub fn estimator_mean(v: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_positive_speed(v)?;
    let (s1, _) = estimator_series(v, cfg)?;
    Ok(s1 / cfg.k1())
}

/// `Var[v_hat]`: `(v sigma / mu)^2` when `c1 = 1`, otherwise by series.
pub fn estimator_variance(v: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_positive_speed(v)?;
    if cfg.mean_coeffs.c == 1.0 {
        let mu = model_mu(v, cfg)?;
        let s2 = model_sigma2(v, cfg)?;
        return Ok(v * v * s2 / (mu * mu));
    }
    let (s1, s2) = estimator_series(v, cfg)?;
    let k1 = cfg.k1();
    Ok((s2 - s1 * s1) / (k1 * k1))
}
