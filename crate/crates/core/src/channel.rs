//! Received power models and shadow-fading generators.
//!
//! Two propagation models are registered by name:
//!
//! * `ground-reflection`: coherent sum of the direct ray and one specular
//!   ground reflection, raised to a height-dependent exponent. Deterministic.
//! * `rma-av`: 3GPP rural-macro aerial-vehicle line-of-sight path loss plus
//!   the GBS antenna gain, with optional log-normal shadowing.
//!
//! Reflection coefficients use the Fresnel equations for a lossless
//! dielectric half-space; the relative permittivity is configurable.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::antenna::{db_to_linear, total_gain_db_unchecked, AntennaConfig};
use crate::error::{invalid, Error, Result};
use crate::geometry::{LinkGeometry, NetworkRealization};
use crate::registry::Registry;

/// Threshold height of the reflected-gain model's last branch (m).
pub const H_TC: f64 = 500.0;
pub const SIGMA_NLOS_DB: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShadowingMode {
    #[default]
    None,
    Uncorrelated,
    Correlated,
}

impl std::str::FromStr for ShadowingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "uncorrelated" => Ok(Self::Uncorrelated),
            "correlated" => Ok(Self::Correlated),
            other => Err(Error::UnknownStrategy {
                kind: "shadowing mode",
                name: other.to_string(),
                expected: "correlated, none, uncorrelated".into(),
            }),
        }
    }
}

impl ShadowingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Uncorrelated => "uncorrelated",
            Self::Correlated => "correlated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowingConfig {
    pub mode: ShadowingMode,
    /// Correlation coefficient at one decorrelation distance.
    pub rho: f64,
    /// Decorrelation distance (m).
    pub x_c: f64,
    /// Line-of-sight standard deviation (dB); `None` uses the height law.
    pub sigma_los: Option<f64>,
    pub sigma_nlos: f64,
}

impl Default for ShadowingConfig {
    fn default() -> Self {
        Self {
            mode: ShadowingMode::None,
            rho: 0.82,
            x_c: 100.0,
            sigma_los: None,
            sigma_nlos: SIGMA_NLOS_DB,
        }
    }
}

impl ShadowingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.x_c > 0.0) {
            return Err(invalid(format!(
                "decorrelation distance must be positive, got {}",
                self.x_c
            )));
        }
        if self.sigma_los.is_some_and(|s| !(s >= 0.0)) || !(self.sigma_nlos >= 0.0) {
            return Err(invalid("shadowing standard deviations must be non-negative"));
        }
        Ok(())
    }

    pub fn los_sigma_db(&self, h_uav: f64) -> f64 {
        self.sigma_los.unwrap_or_else(|| shadow_sigma_los(h_uav))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Registered propagation model name.
    pub model: String,
    /// Carrier frequency (GHz).
    pub f_c_ghz: f64,
    /// Maximum attenuation exponent.
    pub alpha_0: f64,
    /// Ground relative permittivity.
    pub eps_r: f64,
    pub shadowing: ShadowingConfig,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: GROUND_REFLECTION.to_string(),
            f_c_ghz: 1.5,
            alpha_0: 3.5,
            eps_r: 15.0,
            shadowing: ShadowingConfig::default(),
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_c_ghz > 0.0) {
            return Err(invalid(format!(
                "carrier frequency must be positive, got {}",
                self.f_c_ghz
            )));
        }
        if !(self.alpha_0 >= 2.0) {
            return Err(invalid(format!("alpha_0 must be >= 2, got {}", self.alpha_0)));
        }
        if !(self.eps_r > 1.0) {
            return Err(invalid(format!(
                "relative permittivity must exceed 1, got {}",
                self.eps_r
            )));
        }
        self.shadowing.validate()?;
        propagation_models().get(&self.model)?;
        if self.model == GROUND_REFLECTION && self.shadowing.mode != ShadowingMode::None {
            return Err(invalid(
                "shadowing applies to the rma-av model only; set shadowing=none for ground-reflection",
            ));
        }
        Ok(())
    }

    /// Carrier wavelength (m).
    pub fn wavelength(&self) -> f64 {
        0.3 / self.f_c_ghz
    }
}

/// Height-dependent path-loss exponent.
///
/// Discontinuous at `h_uav = 2 h_gbs` (it drops to `4 - alpha_0` just below
/// and jumps back to 2 at the boundary).
pub fn prop_coefficient(h_uav: f64, h_gbs: f64, alpha_0: f64) -> f64 {
    if h_uav < 2.0 * h_gbs {
        alpha_0 - h_uav * (alpha_0 - 2.0) / h_gbs
    } else {
        2.0
    }
}

/// Linear gain applied to the ground-reflected ray.
pub fn reflected_path_gain(h_uav: f64, psi: f64, h_gbs: f64, ant: &AntennaConfig) -> Result<f64> {
    if !(psi > 0.0 && psi <= 90.0) {
        return Err(Error::Domain(format!("grazing angle {psi} outside (0, 90]")));
    }
    Ok(reflected_gain_from(h_uav, h_gbs, || {
        db_to_linear(total_gain_db_unchecked(-psi, ant))
    }))
}

fn reflected_gain_from(h_uav: f64, h_gbs: f64, incident_gain: impl FnOnce() -> f64) -> f64 {
    let h_t = 2.0 * h_gbs + 2.0;
    if h_uav >= H_TC {
        0.5
    } else if h_uav < h_t {
        incident_gain()
    } else if h_uav <= 2.0 * h_t {
        incident_gain() / 2.0
    } else {
        let g = incident_gain();
        g / 2.0 - h_uav / (2.0 * H_TC) * (g - 1.0)
    }
}

/// Ground reflection coefficient for cross-polarised antennas, `(R_H - R_V) / 2`.
pub fn reflection_coefficient(psi: f64, eps_r: f64) -> Complex64 {
    let (s, c) = psi.to_radians().sin_cos();
    let root = Complex64::new(eps_r - c * c, 0.0).sqrt();
    let s = Complex64::new(s, 0.0);
    let r_h = (s - root) / (s + root);
    let r_v = (eps_r * s - root) / (eps_r * s + root);
    (r_h - r_v) / 2.0
}

/// Received power (dBm) of the two-ray ground-reflection model.
///
/// Antenna gains enter the field sum as amplitudes, i.e. square roots of the
/// linear power gains; the UAV antenna is omnidirectional (0 dBi).
pub fn ground_reflection_rx_power(
    link: &LinkGeometry,
    h_uav: f64,
    net: &NetworkRealization,
    ant: &AntennaConfig,
    ch: &ChannelConfig,
) -> Result<f64> {
    let direct_gain = db_to_linear(total_gain_db_unchecked(link.theta, ant));
    let reflected_gain = reflected_path_gain(h_uav, link.psi, net.h_gbs, ant)?;
    two_ray_power_dbm(
        link,
        net.p_gbs_dbm,
        ch.wavelength(),
        prop_coefficient(h_uav, net.h_gbs, ch.alpha_0),
        direct_gain,
        reflection_coefficient(link.psi, ch.eps_r),
        reflected_gain,
    )
}

/// Core of the two-ray model with every gain supplied explicitly.
pub fn two_ray_power_dbm(
    link: &LinkGeometry,
    p_tx_dbm: f64,
    wavelength: f64,
    alpha: f64,
    direct_gain: f64,
    reflection: Complex64,
    reflected_gain: f64,
) -> Result<f64> {
    if !(link.l > 0.0) {
        return Err(Error::DegenerateGeometry(
            "direct path length is zero".into(),
        ));
    }
    let unfolded = link.r1 + link.r2;
    let phase = 2.0 * PI / wavelength * (unfolded - link.l);
    let field = Complex64::new(direct_gain.sqrt() / link.l, 0.0)
        + reflection * reflected_gain.sqrt() * Complex64::from_polar(1.0, phase) / unfolded;
    let mag2 = field.norm_sqr().max(f64::MIN_POSITIVE);
    Ok(p_tx_dbm + 20.0 * (wavelength / (4.0 * PI)).log10() + alpha / 2.0 * 10.0 * mag2.log10())
}

fn check_rma_height(h_uav: f64, lo: f64) -> Result<()> {
    if (lo..=300.0).contains(&h_uav) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "RMa-AV model needs {lo} <= h_uav <= 300 m, got {h_uav}"
        )))
    }
}

/// 3GPP RMa-AV path loss (dB).
pub fn rma_av_pathloss(h_uav: f64, d3d: f64, f_c_ghz: f64, los: bool) -> Result<f64> {
    check_rma_height(h_uav, 10.0)?;
    if !(d3d > 0.0) {
        return Err(Error::Domain(format!("3D distance must be positive, got {d3d}")));
    }
    let freq_term = 20.0 * (40.0 * PI * f_c_ghz / 3.0).log10();
    let pl_los = (23.9 - 1.8 * h_uav.log10()).max(20.0) * d3d.log10() + freq_term;
    if los {
        Ok(pl_los)
    } else {
        let pl_nlos = -12.0 + (35.0 - 5.3 * h_uav.log10()) * d3d.log10() + freq_term;
        Ok(pl_los.max(pl_nlos))
    }
}

/// Line-of-sight shadowing standard deviation (dB).
pub fn shadow_sigma_los(h_uav: f64) -> f64 {
    4.2 * (-0.0046 * h_uav).exp()
}

pub fn shadow_sigma_nlos(_h_uav: f64) -> f64 {
    SIGMA_NLOS_DB
}

/// Produces zero-mean Gaussian shadowing sequences along a track sampled every
/// `step_m` metres. In correlated mode the samples follow an exponential
/// autocorrelation `rho^(|i-j| step / x_c)`, obtained by multiplying white
/// noise with the lower Cholesky factor of the correlation matrix.
#[derive(Debug, Clone)]
pub struct ShadowingGenerator {
    mode: ShadowingMode,
    n: usize,
    factor: Option<DMatrix<f64>>,
}

impl ShadowingGenerator {
    pub fn new(cfg: &ShadowingConfig, n: usize, step_m: f64) -> Result<Self> {
        cfg.validate()?;
        if n == 0 {
            return Err(invalid("shadowing sequence length must be at least 1"));
        }
        if !(step_m >= 0.0) {
            return Err(invalid("shadowing step must be non-negative"));
        }
        let factor = match cfg.mode {
            ShadowingMode::Correlated if step_m > 0.0 => {
                let gamma = correlation_matrix(n, cfg.rho, step_m, cfg.x_c);
                let chol = gamma.cholesky().ok_or_else(|| {
                    Error::Internal("shadowing correlation matrix is not positive definite".into())
                })?;
                Some(chol.unpack())
            }
            _ => None,
        };
        Ok(Self {
            mode: cfg.mode,
            n,
            factor,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, sigma_db: f64, rng: &mut R) -> Vec<f64> {
        match self.mode {
            ShadowingMode::None => vec![0.0; self.n],
            ShadowingMode::Uncorrelated => (0..self.n)
                .map(|_| sigma_db * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            ShadowingMode::Correlated => match &self.factor {
                Some(c) => {
                    let x = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
                    (c * x).iter().map(|y| sigma_db * y).collect()
                }
                // Zero step: every sample sits at the same point.
                None => vec![sigma_db * rng.sample::<f64, _>(StandardNormal); self.n],
            },
        }
    }
}

pub fn correlation_matrix(n: usize, rho: f64, step_m: f64, x_c: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let lag = i.abs_diff(j) as f64;
        rho.powf(lag * step_m / x_c)
    })
}

pub fn shadowing_sequence(
    cfg: &ShadowingConfig,
    n: usize,
    step_m: f64,
    sigma_db: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let generator = ShadowingGenerator::new(cfg, n, step_m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(generator.sample(sigma_db, &mut rng))
}

/// A received-power model selectable by name.
pub trait PropagationModel: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Rejects UAV heights the model is not defined for.
    fn check_height(&self, _h_uav: f64) -> Result<()> {
        Ok(())
    }

    /// Deterministic received power for one link (dBm).
    fn rx_power_dbm(
        &self,
        link: &LinkGeometry,
        h_uav: f64,
        net: &NetworkRealization,
        ant: &AntennaConfig,
    ) -> Result<f64>;

    /// Standard deviation of the shadowing added on top, if any.
    fn shadowing_sigma_db(&self, _h_uav: f64) -> Option<f64> {
        None
    }

    fn shadowing(&self) -> Option<&ShadowingConfig> {
        None
    }
}

pub const GROUND_REFLECTION: &str = "ground-reflection";
pub const RMA_AV: &str = "rma-av";

#[derive(Debug, Clone)]
pub struct GroundReflection {
    cfg: ChannelConfig,
}

impl PropagationModel for GroundReflection {
    fn name(&self) -> &'static str {
        GROUND_REFLECTION
    }

    fn rx_power_dbm(
        &self,
        link: &LinkGeometry,
        h_uav: f64,
        net: &NetworkRealization,
        ant: &AntennaConfig,
    ) -> Result<f64> {
        ground_reflection_rx_power(link, h_uav, net, ant, &self.cfg)
    }
}

/// RMa-AV line-of-sight model. Restricted to 40-300 m where the
/// line-of-sight probability is one.
#[derive(Debug, Clone)]
pub struct RmaAv {
    cfg: ChannelConfig,
}

impl PropagationModel for RmaAv {
    fn name(&self) -> &'static str {
        RMA_AV
    }

    fn check_height(&self, h_uav: f64) -> Result<()> {
        check_rma_height(h_uav, 40.0)
    }

    fn rx_power_dbm(
        &self,
        link: &LinkGeometry,
        h_uav: f64,
        net: &NetworkRealization,
        ant: &AntennaConfig,
    ) -> Result<f64> {
        let pl = rma_av_pathloss(h_uav, link.l, self.cfg.f_c_ghz, true)?;
        Ok(net.p_gbs_dbm + total_gain_db_unchecked(link.theta, ant) - pl)
    }

    fn shadowing_sigma_db(&self, h_uav: f64) -> Option<f64> {
        match self.cfg.shadowing.mode {
            ShadowingMode::None => None,
            _ => Some(self.cfg.shadowing.los_sigma_db(h_uav)),
        }
    }

    fn shadowing(&self) -> Option<&ShadowingConfig> {
        Some(&self.cfg.shadowing)
    }
}

type ModelCtor = fn(&ChannelConfig) -> Box<dyn PropagationModel>;

pub fn propagation_models() -> &'static Registry<ModelCtor> {
    static REGISTRY: OnceLock<Registry<ModelCtor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        Registry::<ModelCtor>::new("propagation model")
            .with(GROUND_REFLECTION, |cfg| {
                Box::new(GroundReflection { cfg: cfg.clone() })
            })
            .with(RMA_AV, |cfg| Box::new(RmaAv { cfg: cfg.clone() }))
    })
}

/// Validates `cfg` and instantiates the model it names.
pub fn build_model(cfg: &ChannelConfig) -> Result<Box<dyn PropagationModel>> {
    cfg.validate()?;
    Ok((propagation_models().get(&cfg.model)?)(cfg))
}
