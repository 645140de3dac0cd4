//! Vertical radiation pattern of a down-tilted uniform linear array.
//!
//! Elevation angles are measured from the horizon, positive upward. A
//! down-tilt of `downtilt_deg > 0` steers the main beam to `-downtilt_deg`.
//! The pattern is omnidirectional in azimuth.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaConfig {
    /// Number of vertically stacked elements.
    pub n_t: u32,
    /// Electrical down-tilt below the horizon (deg).
    pub downtilt_deg: f64,
    /// Element 3 dB beamwidth (deg).
    pub theta_3db: f64,
    /// Element boresight gain (dBi).
    pub g_e_max: f64,
    /// Side-lobe attenuation limit (dB).
    pub g_m: f64,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            n_t: 8,
            downtilt_deg: 6.0,
            theta_3db: 65.0,
            g_e_max: 8.0,
            g_m: 30.0,
            spacing: 0.5,
        }
    }
}

impl AntennaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < 1 {
            return Err(invalid("antenna needs at least one element"));
        }
        if !(self.theta_3db > 0.0) {
            return Err(invalid(format!(
                "3 dB beamwidth must be positive, got {}",
                self.theta_3db
            )));
        }
        if !(self.g_m > 0.0) {
            return Err(invalid(format!(
                "side-lobe limit must be positive, got {}",
                self.g_m
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(invalid("element spacing must be positive"));
        }
        if !(-90.0..=90.0).contains(&self.downtilt_deg) {
            return Err(invalid("down-tilt must lie in [-90, 90] degrees"));
        }
        Ok(())
    }

    /// Steering angle of the main beam (deg).
    pub fn steering_deg(&self) -> f64 {
        -self.downtilt_deg
    }
}

fn check_elevation(theta: f64) -> Result<()> {
    if (-90.0..=90.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "elevation {theta} deg outside [-90, 90]"
        )))
    }
}

pub fn element_gain_db(theta: f64, cfg: &AntennaConfig) -> Result<f64> {
    check_elevation(theta)?;
    Ok(element_gain_db_unchecked(theta, cfg))
}

fn element_gain_db_unchecked(theta: f64, cfg: &AntennaConfig) -> f64 {
    let ratio = theta / cfg.theta_3db;
    cfg.g_e_max - (12.0 * ratio * ratio).min(cfg.g_m)
}

/// Signed array factor amplitude, normalised so the peak is `sqrt(n_t)`.
pub fn array_factor(theta: f64, cfg: &AntennaConfig) -> Result<f64> {
    check_elevation(theta)?;
    Ok(array_factor_unchecked(theta, cfg))
}

fn array_factor_unchecked(theta: f64, cfg: &AntennaConfig) -> f64 {
    let n = f64::from(cfg.n_t);
    let x = theta.to_radians().sin() - cfg.steering_deg().to_radians().sin();
    let u = PI * cfg.spacing * x;
    let den = u.sin();
    let ratio = if den.abs() < 1e-12 {
        // sin(n u) / sin(u) at a zero of sin(u)
        n * (n * u).cos() / u.cos()
    } else {
        (n * u).sin() / den
    };
    ratio / n.sqrt()
}

pub fn array_factor_gain_db(theta: f64, cfg: &AntennaConfig) -> Result<f64> {
    check_elevation(theta)?;
    Ok(array_gain_db_unchecked(theta, cfg))
}

fn array_gain_db_unchecked(theta: f64, cfg: &AntennaConfig) -> f64 {
    let af = array_factor_unchecked(theta, cfg);
    // Exact nulls would give -inf; clamp to the smallest normal power.
    10.0 * (af * af).max(f64::MIN_POSITIVE).log10()
}

pub fn total_gain_db(theta: f64, cfg: &AntennaConfig) -> Result<f64> {
    check_elevation(theta)?;
    Ok(total_gain_db_unchecked(theta, cfg))
}

pub(crate) fn total_gain_db_unchecked(theta: f64, cfg: &AntennaConfig) -> f64 {
    element_gain_db_unchecked(theta, cfg) + array_gain_db_unchecked(theta, cfg)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// Magnitude of the explicit phased sum over the elements.
    fn phased_sum(theta: f64, cfg: &AntennaConfig) -> f64 {
        let x = theta.to_radians().sin() - cfg.steering_deg().to_radians().sin();
        let n = cfg.n_t as usize;
        let sum: Complex64 = (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * cfg.spacing * k as f64 * x))
            .sum();
        sum.norm() / (n as f64).sqrt()
    }

    #[test]
    fn element_gain_values() {
        let cfg = AntennaConfig::default();
        assert_eq!(element_gain_db(0.0, &cfg).unwrap(), 8.0);
        assert_relative_eq!(element_gain_db(65.0, &cfg).unwrap(), -4.0, epsilon = 1e-12);
        let expected = 8.0 - 12.0 * (90.0f64 / 65.0).powi(2);
        assert_relative_eq!(element_gain_db(90.0, &cfg).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(expected, -15.005917, epsilon = 1e-6);
        assert!(element_gain_db(90.5, &cfg).is_err());
        assert!(element_gain_db(-91.0, &cfg).is_err());
    }

    #[test]
    fn element_gain_saturates_at_side_lobe_limit() {
        let cfg = AntennaConfig {
            theta_3db: 20.0,
            ..Default::default()
        };
        assert_eq!(element_gain_db(90.0, &cfg).unwrap(), 8.0 - 30.0);
    }

    #[test]
    fn steering_direction_peak() {
        let cfg = AntennaConfig::default();
        let g = array_factor_gain_db(-6.0, &cfg).unwrap();
        assert_relative_eq!(g, 10.0 * 8f64.log10(), epsilon = 1e-12);
        assert_relative_eq!(g, 9.0309, epsilon = 1e-4);
    }

    #[test]
    fn single_element_has_flat_array_gain() {
        let cfg = AntennaConfig {
            n_t: 1,
            ..Default::default()
        };
        for th in [-90.0, -30.0, 0.0, 6.0, 45.0, 90.0] {
            assert!(array_factor_gain_db(th, &cfg).unwrap().abs() < 1e-12);
        }
        assert_eq!(total_gain_db(0.0, &cfg).unwrap(), 8.0);
    }

    #[test]
    fn off_steering_matches_phased_sum() {
        let cfg = AntennaConfig::default();
        let closed = array_factor(6.0, &cfg).unwrap().abs();
        assert_relative_eq!(closed, phased_sum(6.0, &cfg), max_relative = 1e-9);
    }

    #[test]
    fn total_gain_at_main_beam() {
        let cfg = AntennaConfig::default();
        let g = total_gain_db(-6.0, &cfg).unwrap();
        assert_relative_eq!(g, 8.0 - 12.0 * (6.0f64 / 65.0).powi(2) + 10.0 * 8f64.log10(), epsilon = 1e-12);
        assert!((g - 16.93).abs() < 0.005, "{g}");
    }

    #[test]
    fn gain_is_continuous_across_the_singularity() {
        let cfg = AntennaConfig::default();
        let at = total_gain_db(-6.0, &cfg).unwrap();
        let near = total_gain_db(-6.0 + 1e-7, &cfg).unwrap();
        assert!((at - near).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn element_gain_is_even(theta in -90.0f64..=90.0) {
            let cfg = AntennaConfig::default();
            prop_assert_eq!(element_gain_db(theta, &cfg).unwrap(), element_gain_db(-theta, &cfg).unwrap());
        }

        #[test]
        fn array_gain_never_exceeds_peak(theta in -90.0f64..=90.0, tilt in 0.0f64..20.0, n in 1u32..=32) {
            let cfg = AntennaConfig { n_t: n, downtilt_deg: tilt, ..Default::default() };
            let g = array_factor_gain_db(theta, &cfg).unwrap();
            prop_assert!(g <= 10.0 * f64::from(n).log10() + 1e-9);
        }
    }
}
