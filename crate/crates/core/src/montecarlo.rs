//! Monte Carlo campaigns over random deployments and flight tracks.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::antenna::AntennaConfig;
use crate::channel::{build_model, ChannelConfig, PropagationModel};
use crate::error::{invalid, Error, Result};
use crate::fitting::DiscretePmf;
use crate::format::fmt_f64;
use crate::geometry::{
    generate_network_with, DeploymentConfig, Point2, Region, SpeedProfile, Trajectory,
};
use crate::handover::{fly_positions, HandoverConfig};

/// Everything that determines the distribution of one handover count.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub deployment: DeploymentConfig,
    pub antenna: AntennaConfig,
    pub channel: ChannelConfig,
    pub handover: HandoverConfig,
    /// km/h
    pub speed_kmh: f64,
    /// m
    pub h_uav: f64,
    /// Counting window (s).
    pub window_s: f64,
    /// Margin of deployed GBSs around the flown track (km).
    pub padding_km: f64,
    /// Side of the square that start points are drawn from (km).
    pub core_km: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            deployment: DeploymentConfig::default(),
            antenna: AntennaConfig::default(),
            channel: ChannelConfig::default(),
            handover: HandoverConfig::default(),
            speed_kmh: 60.0,
            h_uav: 100.0,
            window_s: 12.0,
            padding_km: 3.0,
            core_km: 1.0,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.deployment.validate()?;
        self.antenna.validate()?;
        self.channel.validate()?;
        self.handover.validate()?;
        if !(self.speed_kmh >= 0.0 && self.speed_kmh.is_finite()) {
            return Err(invalid(format!("speed must be non-negative, got {}", self.speed_kmh)));
        }
        if !(self.h_uav > 0.0) {
            return Err(invalid(format!("UAV height must be positive, got {}", self.h_uav)));
        }
        if !(self.window_s > 0.0) {
            return Err(invalid(format!("window must be positive, got {}", self.window_s)));
        }
        if !(self.padding_km >= 0.0) {
            return Err(invalid("padding must be non-negative"));
        }
        if !(self.core_km > 0.0) {
            return Err(invalid("start-point core must have positive size"));
        }
        Ok(())
    }

    /// Canonical `key=value` listing of every parameter, one per line.
    pub fn fingerprint(&self) -> String {
        let d = &self.deployment;
        let a = &self.antenna;
        let c = &self.channel;
        let s = &c.shadowing;
        let h = &self.handover;
        let fields: Vec<(&str, String)> = vec![
            ("density", format!("{:?}", d.density)),
            ("h_gbs", format!("{:?}", d.h_gbs)),
            ("p_gbs_dbm", format!("{:?}", d.p_gbs_dbm)),
            ("n_t", a.n_t.to_string()),
            ("downtilt_deg", format!("{:?}", a.downtilt_deg)),
            ("theta_3db", format!("{:?}", a.theta_3db)),
            ("g_e_max", format!("{:?}", a.g_e_max)),
            ("g_m", format!("{:?}", a.g_m)),
            ("spacing", format!("{:?}", a.spacing)),
            ("channel_model", c.model.clone()),
            ("f_c_ghz", format!("{:?}", c.f_c_ghz)),
            ("alpha_0", format!("{:?}", c.alpha_0)),
            ("eps_r", format!("{:?}", c.eps_r)),
            ("shadowing", s.mode.as_str().to_string()),
            ("shadow_rho", format!("{:?}", s.rho)),
            ("shadow_x_c", format!("{:?}", s.x_c)),
            ("shadow_sigma_los", format!("{:?}", s.sigma_los)),
            ("shadow_sigma_nlos", format!("{:?}", s.sigma_nlos)),
            ("m_hyst", format!("{:?}", h.m_hyst)),
            ("t_ttt", format!("{:?}", h.t_ttt)),
            ("t_mg", format!("{:?}", h.t_mg)),
            ("ttt_binding", h.binding.as_str().to_string()),
            ("speed_kmh", format!("{:?}", self.speed_kmh)),
            ("h_uav", format!("{:?}", self.h_uav)),
            ("window_s", format!("{:?}", self.window_s)),
            ("padding_km", format!("{:?}", self.padding_km)),
            ("core_km", format!("{:?}", self.core_km)),
        ];
        fields
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Along-track distance covered in one window (km).
    pub fn distance_km(&self) -> f64 {
        self.speed_kmh * self.window_s / 3600.0
    }
}

/// `hash(base_seed, fingerprint, run)` truncated to 64 bits.
pub fn derive_seed(base_seed: u64, fingerprint: &str, run: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update((fingerprint.len() as u64).to_le_bytes());
    hasher.update(fingerprint.as_bytes());
    hasher.update(run.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Random start in the core square, uniform heading, and a deployment
/// covering the padded bounding box of the track.
fn draw_track_and_network<R: Rng + ?Sized>(
    scenario: &Scenario,
    track_km: f64,
    rng: &mut R,
) -> Result<(Point2, f64, crate::geometry::NetworkRealization)> {
    let start = Point2::new(
        rng.random::<f64>() * scenario.core_km,
        rng.random::<f64>() * scenario.core_km,
    );
    let heading = rng.random::<f64>() * TAU;
    let end = start.offset(track_km * heading.cos(), track_km * heading.sin());
    let mut region = Region::bounding(&[start, end], scenario.padding_km)?;
    if !(region.area() > 0.0) {
        // Zero padding on a stationary track leaves a degenerate box.
        region = Region::new(
            start.offset(-0.5, -0.5),
            start.offset(0.5, 0.5),
        )?;
    }
    let net = generate_network_with(&scenario.deployment, region, rng)?;
    Ok((start, heading, net))
}

/// One handover count for `scenario` from a single seeded run.
pub fn simulate_run(scenario: &Scenario, model: &dyn PropagationModel, seed: u64) -> Result<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (start, heading, net) = draw_track_and_network(scenario, scenario.distance_km(), &mut rng)?;
    let trajectory = Trajectory {
        start,
        heading,
        speed_kmh: scenario.speed_kmh,
        h_uav: scenario.h_uav,
        duration_s: scenario.window_s,
        sample_period_ms: scenario.handover.t_mg,
    };
    let positions = trajectory.positions();
    Ok(fly_positions(
        &positions,
        scenario.h_uav,
        &net,
        &scenario.antenna,
        model,
        &scenario.handover,
        Some(&mut rng),
    )?
    .hoc)
}

/// Handover counts from repeated independent runs of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct HocSamples {
    pub fingerprint: String,
    pub samples: Vec<u32>,
}

impl HocSamples {
    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|&h| f64::from(h)).sum::<f64>() / self.samples.len() as f64
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples
            .iter()
            .map(|&h| (f64::from(h) - m).powi(2))
            .sum::<f64>()
            / (n - 1) as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["run", "hoc"])?;
        for (i, h) in self.samples.iter().enumerate() {
            w.write_record([i.to_string(), h.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: std::io::Read>(fingerprint: String, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let col = headers
            .iter()
            .position(|h| h == "hoc")
            .ok_or_else(|| Error::Parse(format!("no 'hoc' column in {headers:?}")))?;
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let h = rec
                .get(col)
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad hoc value", line + 2)))?;
            samples.push(h);
        }
        Ok(Self { fingerprint, samples })
    }
}

/// Runs every scenario `runs_per_config` times. Results come back in the
/// order of `scenarios` and do not depend on the thread count.
pub fn run_hoc_campaign(
    scenarios: &[Scenario],
    runs_per_config: usize,
    base_seed: u64,
) -> Result<Vec<HocSamples>> {
    if runs_per_config < 1 {
        return Err(invalid("runs per configuration must be at least 1"));
    }
    let mut models = Vec::with_capacity(scenarios.len());
    let mut fingerprints = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        s.validate()?;
        let model = build_model(&s.channel)?;
        model.check_height(s.h_uav)?;
        models.push(model);
        fingerprints.push(s.fingerprint());
    }

    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|c| (0..runs_per_config).map(move |r| (c, r)))
        .collect();
    let counts: Vec<u32> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let seed = derive_seed(base_seed, &fingerprints[c], r as u64);
            simulate_run(&scenarios[c], models[c].as_ref(), seed)
        })
        .collect::<Result<_>>()?;

    Ok(counts
        .chunks(runs_per_config)
        .zip(fingerprints)
        .map(|(chunk, fingerprint)| HocSamples {
            fingerprint,
            samples: chunk.to_vec(),
        })
        .collect())
}

/// Normalised histogram over `h = 0..=max(samples)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPmf {
    probabilities: Vec<f64>,
    count: usize,
}

impl EmpiricalPmf {
    pub fn from_samples(samples: &[u32]) -> Result<Self> {
        let max = *samples
            .iter()
            .max()
            .ok_or_else(|| Error::InsufficientData("empty sample set".into()))?;
        let mut counts = vec![0usize; max as usize + 1];
        for &h in samples {
            counts[h as usize] += 1;
        }
        let n = samples.len() as f64;
        Ok(Self {
            probabilities: counts.into_iter().map(|c| c as f64 / n).collect(),
            count: samples.len(),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn h_max(&self) -> u32 {
        (self.probabilities.len() - 1) as u32
    }

    /// Zero outside the observed support.
    pub fn probability(&self, h: u32) -> f64 {
        self.probabilities.get(h as usize).copied().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["h", "probability"])?;
        for (h, p) in self.probabilities.iter().enumerate() {
            w.write_record([h.to_string(), fmt_f64(*p)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn empirical_pmf(samples: &HocSamples) -> Result<EmpiricalPmf> {
    EmpiricalPmf::from_samples(&samples.samples)
}

/// `(1/L) * sum_{l=1..L} (empirical(l) - model(l))^2`.
pub fn pmf_mse(empirical: &EmpiricalPmf, model: &dyn DiscretePmf, l: u32) -> Result<f64> {
    if l < 1 {
        return Err(Error::Domain("MSE needs at least one point".into()));
    }
    let sum: f64 = (1..=l)
        .map(|h| (empirical.probability(h) - model.pmf(h)).powi(2))
        .sum();
    Ok(sum / f64::from(l))
}

/// Handover instants (s) of one flight following a piecewise-constant speed
/// profile through a fresh random deployment.
pub fn simulate_profile_flight(
    scenario: &Scenario,
    profile: &SpeedProfile,
    seed: u64,
) -> Result<Vec<f64>> {
    scenario.validate()?;
    let model = build_model(&scenario.channel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let track_km = profile.distance_at(profile.total_s());
    let (start, heading, net) = draw_track_and_network(scenario, track_km, &mut rng)?;
    let t_mg = scenario.handover.t_mg;
    let positions = profile.positions(start, heading, t_mg);
    let outcome = fly_positions(
        &positions,
        scenario.h_uav,
        &net,
        &scenario.antenna,
        model.as_ref(),
        &scenario.handover,
        Some(&mut rng),
    )?;
    Ok(outcome
        .handover_samples
        .iter()
        .map(|&i| i as f64 * t_mg / 1000.0)
        .collect())
}
