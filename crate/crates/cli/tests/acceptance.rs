//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured values; the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hoc_cli::run_args;
use hoc_core::antenna::{array_factor, array_factor_gain_db, AntennaConfig};
use hoc_core::channel::{
    prop_coefficient, reflection_coefficient, two_ray_power_dbm, ShadowingConfig, ShadowingGenerator,
    ShadowingMode,
};
use hoc_core::estimation::{
    crlb_speed_variance, estimate_speed, estimator_variance, fisher_information, model_mu, model_sigma2,
    EstimatorConfig,
};
use hoc_core::fitting::{fit_power_surface, CoefficientTable, PowerLawCoeffs, SurfaceFitOptions, SurfacePoint};
use hoc_core::geometry::{link_geometry, Point2};
use hoc_core::montecarlo::{run_hoc_campaign, simulate_profile_flight, HocSamples, Scenario};
use hoc_core::msd::{
    detection_probability, first_detection, hoc_thresholds, read_speed_trace, window_scheme,
    windowed_estimation, MobilityConfig, MobilityState,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const MC_RUNS: usize = 2000;
const MC_SEED: u64 = 20_240_601;
/// One-sided 95% normal quantile.
const Z95: f64 = 1.6448536269514722;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("uavhoc-accept-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn table_est(t_ttt: f64, lambda: f64, t: f64) -> EstimatorConfig {
    let row = CoefficientTable::bundled().lookup(40.0, t_ttt, 100.0, 8).unwrap();
    EstimatorConfig::from_row(row, lambda, t).unwrap()
}

fn crlb_numbers() -> Outcome {
    let dir = scratch("crlb");
    let cases = [(68.0, 1.0, 24.0, 26.0), (68.0, 3.0, 24.0, 21.0), (120.0, 1.0, 12.0, 47.0), (120.0, 3.0, 12.0, 38.0)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, &(v, lambda, t, want)) in cases.iter().enumerate() {
        let cfg = dir.join(format!("c{i}.cfg"));
        fs::write(&cfg, format!("t_mg=40\nt_ttt=0\nspeed_kmh={v}\ndensity={lambda}\nwindow_s={t}\n")).unwrap();
        let out = dir.join(format!("o{i}"));
        let code = run_args(["uavhoc", "crlb", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        if code != 0 {
            return outcome(false, format!("crlb exited with {code}"));
        }
        let mut rdr = csv::Reader::from_path(out.join("crlb.csv")).unwrap();
        let col = rdr.headers().unwrap().iter().position(|h| h == "crlb_rmse").unwrap();
        let got: f64 = rdr.records().next().unwrap().unwrap()[col].parse().unwrap();
        pass &= (got - want).abs() <= 0.5;
        parts.push(format!("v={v} lambda={lambda} T={t}: {got:.3} (want {want}±0.5)"));
    }
    outcome(pass, parts.join("; "))
}

fn thresholds() -> Outcome {
    let th = hoc_thresholds(&MobilityConfig::new(40.0, 80.0).unwrap(), &table_est(0.0, 1.0, 12.0)).unwrap();
    outcome((th.h_l, th.h_u) == (7, 15), format!("(h_l, h_u) = ({}, {}), want (7, 15)", th.h_l, th.h_u))
}

fn scenario(v: f64, lambda: f64, t_ttt: f64, h: f64) -> Scenario {
    let mut s = Scenario { speed_kmh: v, h_uav: h, window_s: 12.0, ..Default::default() };
    s.deployment.density = lambda;
    s.handover.t_ttt = t_ttt;
    s
}

/// Every configuration the Monte Carlo and surface-fit criteria draw on.
struct Campaign {
    grid: Vec<(f64, f64, HocSamples)>,
    ttt160: HocSamples,
    h80: HocSamples,
    h120: HocSamples,
}

impl Campaign {
    fn run() -> Campaign {
        let lambdas = [0.5, 1.0, 2.0];
        let speeds = [30.0, 60.0, 90.0];
        let mut scen = Vec::new();
        for &l in &lambdas {
            for &v in &speeds {
                scen.push(scenario(v, l, 0.0, 100.0));
            }
        }
        scen.push(scenario(60.0, 1.0, 160.0, 100.0));
        scen.push(scenario(60.0, 1.0, 0.0, 80.0));
        scen.push(scenario(60.0, 1.0, 0.0, 120.0));
        let mut out = run_hoc_campaign(&scen, MC_RUNS, MC_SEED).unwrap();
        let h120 = out.pop().unwrap();
        let h80 = out.pop().unwrap();
        let ttt160 = out.pop().unwrap();
        let grid = scen.iter().zip(out).map(|(s, o)| (s.deployment.density, s.speed_kmh, o)).collect();
        Campaign { grid, ttt160, h80, h120 }
    }

    fn at(&self, lambda: f64, v: f64) -> &HocSamples {
        &self.grid.iter().find(|(l, s, _)| *l == lambda && *s == v).unwrap().2
    }
}

/// Welch z-statistic for `mean(hi) > mean(lo)`.
fn greater(hi: &HocSamples, lo: &HocSamples) -> f64 {
    let se = (hi.variance() / hi.samples.len() as f64 + lo.variance() / lo.samples.len() as f64).sqrt();
    (hi.mean() - lo.mean()) / se
}

fn mc_mean_and_trends(c: &Campaign) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for v in [30.0, 60.0, 90.0] {
        let m = c.at(1.0, v).mean();
        let model = 58.6 * v * 12.0 / 3600.0;
        let e = (m - model) / model;
        pass &= e.abs() <= 0.2;
        parts.push(format!("v={v}: mean {m:.3} vs {model:.3} ({:+.1}%)", 100.0 * e));
    }
    let trends = [
        ("v 30<60", greater(c.at(1.0, 60.0), c.at(1.0, 30.0))),
        ("v 60<90", greater(c.at(1.0, 90.0), c.at(1.0, 60.0))),
        ("lambda 0.5<1", greater(c.at(1.0, 60.0), c.at(0.5, 60.0))),
        ("lambda 1<2", greater(c.at(2.0, 60.0), c.at(1.0, 60.0))),
        ("t_ttt 0>160", greater(c.at(1.0, 60.0), &c.ttt160)),
        ("h 80>100", greater(&c.h80, c.at(1.0, 60.0))),
        ("h 100>120", greater(c.at(1.0, 60.0), &c.h120)),
    ];
    for (name, z) in trends {
        pass &= z > Z95;
        parts.push(format!("{name}: z={z:.2}"));
    }
    parts.push(format!(
        "means h80/100/120 = {:.3}/{:.3}/{:.3}, t_ttt160 = {:.3}",
        c.h80.mean(),
        c.at(1.0, 60.0).mean(),
        c.h120.mean(),
        c.ttt160.mean()
    ));
    outcome(pass, parts.join("; "))
}

fn fit_recovery(c: &Campaign) -> Outcome {
    let truths = [
        PowerLawCoeffs { a: 58.6, b: 0.3048, c: 1.0 },
        PowerLawCoeffs { a: 425.2, b: 0.167, c: 1.55 },
        PowerLawCoeffs { a: 2.7, b: -0.23, c: 0.6913 },
    ];
    let mut worst: f64 = 0.0;
    for truth in truths {
        let mut pts = Vec::new();
        for l in [0.25, 0.5, 1.0, 2.0, 4.0] {
            for d in [0.05, 0.1, 0.2, 0.4, 0.8] {
                pts.push(SurfacePoint { lambda: l, d_km: d, y: truth.eval(l, d) });
            }
        }
        let got = fit_power_surface(&pts, SurfaceFitOptions::default()).unwrap();
        worst = worst
            .max(rel_err(got.a, truth.a))
            .max(rel_err(got.b, truth.b))
            .max(rel_err(got.c, truth.c));
    }
    let mut pass = worst <= 1e-9;
    let pts: Vec<SurfacePoint> = c
        .grid
        .iter()
        .map(|(l, v, s)| SurfacePoint { lambda: *l, d_km: v * 12.0 / 3600.0, y: s.mean() })
        .collect();
    let fit = fit_power_surface(&pts, SurfaceFitOptions::default()).unwrap();
    let errs = [rel_err(fit.a, 58.6), rel_err(fit.b, 0.3048), rel_err(fit.c, 1.0)];
    pass &= errs.iter().all(|e| *e <= 0.15);
    outcome(
        pass,
        format!(
            "noiseless worst rel err {worst:.2e}; campaign fit a={:.3} b={:.4} c={:.4} (rel err {:.1}%/{:.1}%/{:.1}%, limit 15%)",
            fit.a,
            fit.b,
            fit.c,
            100.0 * errs[0],
            100.0 * errs[1],
            100.0 * errs[2]
        ),
    )
}

fn estimator_properties() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_bias: f64 = 0.0;
    for (lambda, t, v) in [(3.0, 24.0, 120.0), (8.0, 12.0, 60.0), (4.0, 30.0, 100.0), (3.0, 60.0, 40.0)] {
        let est = table_est(0.0, lambda, t);
        let mu = model_mu(v, &est).unwrap();
        let sigma = model_sigma2(v, &est).unwrap().sqrt();
        assert!(mu > 3.0 * sigma);
        let normal = Normal::new(mu, sigma).unwrap();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let h = normal.sample(&mut rng).round().max(0.0) as u32;
            acc += estimate_speed(h, &est);
        }
        worst_bias = worst_bias.max(rel_err(acc / f64::from(n), v));
    }
    pass &= worst_bias <= 0.01;
    parts.push(format!("worst mean bias {:.3}% (limit 1%)", 100.0 * worst_bias));

    let mut below = 0;
    let mut tested = 0;
    for row in &CoefficientTable::bundled().rows {
        for lambda in [0.5, 1.0, 2.0, 4.0, 8.0] {
            for t in [6.0, 12.0, 24.0] {
                let est = EstimatorConfig::from_row(row, lambda, t).unwrap();
                for k in 1..=16 {
                    let v = 10.0 * f64::from(k);
                    tested += 1;
                    if estimator_variance(v, &est).unwrap() < crlb_speed_variance(v, &est).unwrap() {
                        below += 1;
                    }
                }
            }
        }
    }
    pass &= below == 0;
    parts.push(format!("variance below bound at {below}/{tested} points"));

    let mut monotone = true;
    for (v, t) in [(30.0, 12.0), (60.0, 12.0), (120.0, 12.0), (68.0, 24.0)] {
        let ratios: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&l| {
                let est = table_est(0.0, l, t);
                estimator_variance(v, &est).unwrap() / crlb_speed_variance(v, &est).unwrap()
            })
            .collect();
        monotone &= ratios.windows(2).all(|w| w[1] < w[0]);
        if v == 60.0 {
            parts.push(format!("ratio over lambda at v=60: {ratios:.4?}"));
        }
    }
    pass &= monotone;
    parts.push(format!("ratio decreasing in lambda: {monotone}"));
    outcome(pass, parts.join("; "))
}

/// Fisher information of a Gaussian whose mean and variance both depend on
/// `v`, from central differences of the two model curves.
fn fisher_by_differences(v: f64, est: &EstimatorConfig) -> f64 {
    let h = 1e-4 * v;
    let dmu = (model_mu(v + h, est).unwrap() - model_mu(v - h, est).unwrap()) / (2.0 * h);
    let ds2 = (model_sigma2(v + h, est).unwrap() - model_sigma2(v - h, est).unwrap()) / (2.0 * h);
    let s2 = model_sigma2(v, est).unwrap();
    dmu * dmu / s2 + ds2 * ds2 / (2.0 * s2 * s2)
}

fn fisher_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let rows = &CoefficientTable::bundled().rows;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let row = &rows[i % rows.len()];
        let lambda = rng.random_range(0.2..10.0);
        let t = rng.random_range(2.0..60.0);
        let v = rng.random_range(5.0..200.0);
        let est = EstimatorConfig::from_row(row, lambda, t).unwrap();
        worst = worst.max(rel_err(fisher_information(v, &est).unwrap(), fisher_by_differences(v, &est)));
    }
    outcome(worst <= 1e-6, format!("worst rel err {worst:.2e} over 100 points (limit 1e-6)"))
}

fn antenna_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    let mut worst_peak: f64 = 0.0;
    for n_t in 1..=32u32 {
        let cfg = AntennaConfig { n_t, ..Default::default() };
        let steer = cfg.steering_deg().to_radians().sin();
        for _ in 0..1000 {
            let theta: f64 = rng.random_range(-90.0..=90.0);
            let step = 2.0 * PI * cfg.spacing * (theta.to_radians().sin() - steer);
            let sum: Complex64 = (0..n_t).map(|k| Complex64::from_polar(1.0, f64::from(k) * step)).sum();
            let brute = sum.norm() / f64::from(n_t).sqrt();
            let closed = array_factor(theta, &cfg).unwrap().abs();
            // Near a null both sides are rounding noise; scale by 1e-3 there.
            worst = worst.max((closed - brute).abs() / brute.max(1e-3));
        }
        let peak = array_factor_gain_db(cfg.steering_deg(), &cfg).unwrap();
        worst_peak = worst_peak.max((peak - 10.0 * f64::from(n_t).log10()).abs());
    }
    outcome(
        worst <= 1e-9 && worst_peak <= 1e-9,
        format!("worst rel err {worst:.2e} (limit 1e-9); worst peak gain error {worst_peak:.2e} dB"),
    )
}

fn channel_invariants() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    let mut worst_friis: f64 = 0.0;
    let wavelength = 0.2;
    for (d_km, h_gbs, h_uav) in [(0.05, 30.0, 100.0), (0.5, 25.0, 60.0), (2.0, 30.0, 300.0), (7.5, 10.0, 20.0)] {
        let link = link_geometry(Point2 { x: 0.0, y: 0.0 }, Point2 { x: d_km, y: 0.0 }, h_gbs, h_uav).unwrap();
        let got = two_ray_power_dbm(&link, 46.0, wavelength, 2.0, 1.0, Complex64::new(0.0, 0.0), 1.0).unwrap();
        let friis_mw = 10f64.powf(4.6) * (wavelength / (4.0 * PI * link.l)).powi(2);
        worst_friis = worst_friis.max(rel_err(10f64.powf(got / 10.0), friis_mw));
    }
    pass &= worst_friis <= 1e-12;
    parts.push(format!("Friis worst rel err {worst_friis:.2e}"));

    let mut alpha_ok = true;
    for h_gbs in [10.0, 25.0, 30.0, 50.0] {
        for k in 0..=400 {
            let h = 2.0 * h_gbs + f64::from(k) * 2.5;
            for alpha_0 in [2.0, 3.5, 4.0] {
                alpha_ok &= prop_coefficient(h, h_gbs, alpha_0) == 2.0;
            }
        }
    }
    pass &= alpha_ok;
    parts.push(format!("alpha=2 above 2h_gbs: {alpha_ok}"));

    let mut max_r: f64 = 0.0;
    for eps_r in [1.01, 2.0, 4.0, 15.0, 30.0, 81.0] {
        for k in 1..=9000 {
            max_r = max_r.max(reflection_coefficient(f64::from(k) * 0.01, eps_r).norm());
        }
    }
    pass &= max_r <= 1.0;
    parts.push(format!("max |R| {max_r:.6}"));

    let cfg = ShadowingConfig { mode: ShadowingMode::Correlated, rho: 0.82, x_c: 100.0, ..Default::default() };
    let n = 8;
    let step = 30.0;
    let generator = ShadowingGenerator::new(&cfg, n, step).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let sequences = 100_000;
    let mut sums = vec![0.0; n];
    let mut sq = vec![0.0; n];
    let mut cross = vec![0.0; n];
    for _ in 0..sequences {
        let s = generator.sample(1.0, &mut rng);
        for i in 0..n {
            sums[i] += s[i];
            sq[i] += s[i] * s[i];
            cross[i] += s[0] * s[i];
        }
    }
    let m = sequences as f64;
    let mut worst_corr: f64 = 0.0;
    for k in 1..n {
        let cov = cross[k] / m - sums[0] / m * sums[k] / m;
        let var0 = sq[0] / m - (sums[0] / m).powi(2);
        let vark = sq[k] / m - (sums[k] / m).powi(2);
        let r = cov / (var0 * vark).sqrt();
        let want = cfg.rho.powf(k as f64 * step / cfg.x_c);
        worst_corr = worst_corr.max((r - want).abs());
    }
    pass &= worst_corr <= 0.02;
    parts.push(format!("worst lag-correlation error {worst_corr:.4} (limit 0.02)"));

    outcome(pass, parts.join("; "))
}

fn fsm_corpus() -> Outcome {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/fsm_corpus");
    let mut dirs: Vec<PathBuf> = fs::read_dir(&corpus).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    let out_root = scratch("fsm");
    let mut failed = Vec::new();
    let mut ttts = std::collections::BTreeSet::new();
    for dir in &dirs {
        let params = fs::read_to_string(dir.join("params.txt")).unwrap();
        if let Some(t) = params.lines().find_map(|l| l.strip_prefix("t_ttt=")) {
            ttts.insert(t.parse::<f64>().unwrap() as u32);
        }
        let out = out_root.join(dir.file_name().unwrap());
        let code = run_args([
            "uavhoc",
            "trace-replay",
            "--config",
            dir.join("params.txt").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        let same = code == 0 && fs::read(out.join("events.csv")).ok() == fs::read(dir.join("expected.csv")).ok();
        if !same {
            failed.push(dir.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let covered = [0, 40, 160].iter().all(|t| ttts.contains(t));
    outcome(
        dirs.len() >= 20 && failed.is_empty() && covered,
        format!("{} traces, {} mismatches {failed:?}, t_ttt values {ttts:?}", dirs.len(), failed.len()),
    )
}

fn msd_behavior() -> Outcome {
    let est = table_est(0.0, 1.0, 12.0);
    let mob = MobilityConfig::new(40.0, 80.0).unwrap();
    let pd: Vec<(f64, f64)> = (1..=160)
        .map(|k| {
            let v = f64::from(k);
            (v, detection_probability(v, &est, &mob).unwrap())
        })
        .collect();
    let minima: Vec<f64> = pd.windows(3).filter(|w| w[1].1 < w[0].1 && w[1].1 < w[2].1).map(|w| w[1].0).collect();
    let near = |target: f64| minima.iter().any(|m| (m - target).abs() <= 2.0);
    let mut pass = near(40.0) && near(80.0);
    let mut parts = vec![format!("P_D local minima at {minima:?} km/h")];

    let profile = read_speed_trace(fs::File::open(fixtures().join("speed_step.csv")).unwrap()).unwrap();
    let scen = Scenario::default();
    let discrete = window_scheme("discrete", 1.0).unwrap();
    let sliding = window_scheme("sliding", 1.0).unwrap();
    let mut ok = 0;
    let mut detected = 0;
    let flights = 20;
    for seed in 0..flights {
        let times = simulate_profile_flight(&scen, &profile, 500 + seed).unwrap();
        let first = |scheme: &dyn hoc_core::msd::WindowScheme| {
            let series = windowed_estimation(&times, profile.total_s(), 12.0, scheme, &est, &mob).unwrap();
            first_detection(&series, MobilityState::High, 60.0)
        };
        let (d, s) = (first(discrete.as_ref()), first(sliding.as_ref()));
        if s.is_some() {
            detected += 1;
        }
        if match (s, d) {
            (Some(s), Some(d)) => s <= d,
            (Some(_), None) => true,
            (None, d) => d.is_none(),
        } {
            ok += 1;
        }
    }
    pass &= ok == flights && detected > 0;
    parts.push(format!("sliding no later than discrete in {ok}/{flights} flights ({detected} detected HIGH)"));
    outcome(pass, parts.join("; "))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let timed = |name: &'static str, f: &dyn Fn() -> Outcome, results: &mut Vec<(&str, Outcome)>| {
        let start = Instant::now();
        let mut o = f();
        o.detail = format!("{} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    timed("crlb-numbers", &crlb_numbers, &mut results);
    timed("thresholds", &thresholds, &mut results);
    let start = Instant::now();
    let campaign = Campaign::run();
    println!("(campaign of {} configs x {MC_RUNS} runs took {:.1}s)", campaign.grid.len() + 3, start.elapsed().as_secs_f64());
    timed("monte-carlo-mean-and-trends", &|| mc_mean_and_trends(&campaign), &mut results);
    timed("fit-recovery", &|| fit_recovery(&campaign), &mut results);
    timed("estimator-properties", &estimator_properties, &mut results);
    timed("fisher-oracle", &fisher_oracle, &mut results);
    timed("antenna-oracle", &antenna_oracle, &mut results);
    timed("channel-invariants", &channel_invariants, &mut results);
    timed("fsm-conformance", &fsm_corpus, &mut results);
    timed("msd-behavior", &msd_behavior, &mut results);
    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
