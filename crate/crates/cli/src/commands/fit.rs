use std::collections::BTreeMap;

use hoc_core::fitting::{
    fit_power_surface, pmf_model, CoefficientRow, CoefficientTable, SurfaceFitOptions, SurfacePoint,
};
use hoc_core::format::fmt_f64;
use hoc_core::montecarlo::{empirical_pmf, pmf_mse, HocSamples};

use super::{create, open_input, required_path, RunOptions};
use crate::error::{config, CliResult};
use crate::manifest::write_manifest;

const KEYS: &[&str] = &["samples_dir", "surface_input", "refine", "mse_points"];

struct SummaryRow {
    density: f64,
    d_km: f64,
    t_mg: f64,
    t_ttt: f64,
    h_uav: f64,
    n_t: u32,
    samples_file: String,
}

fn read_summary(dir: &std::path::Path) -> CliResult<Vec<SummaryRow>> {
    let path = dir.join("summary.csv");
    let mut rdr = csv::Reader::from_reader(open_input(&path)?);
    let headers = rdr.headers().map_err(hoc_core::Error::from)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| config(format!("{}: missing column '{name}'", path.display())))
    };
    let cols = [
        col("density")?,
        col("d_km")?,
        col("t_mg_ms")?,
        col("t_ttt_ms")?,
        col("h_uav_m")?,
        col("n_t")?,
        col("samples_file")?,
    ];
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(hoc_core::Error::from)?;
        let bad = || config(format!("{}: malformed row {}", path.display(), line + 2));
        let num = |i: usize| rec.get(cols[i]).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        rows.push(SummaryRow {
            density: num(0)?,
            d_km: num(1)?,
            t_mg: num(2)?,
            t_ttt: num(3)?,
            h_uav: num(4)?,
            n_t: rec.get(cols[5]).and_then(|s| s.parse().ok()).ok_or_else(bad)?,
            samples_file: rec.get(cols[6]).ok_or_else(bad)?.to_string(),
        });
    }
    if rows.is_empty() {
        return Err(config(format!("{} lists no configurations", path.display())));
    }
    Ok(rows)
}

/// Fits Gaussian and Poisson PMFs to every configuration of a `simulate`
/// output directory, then the mean and variance power-law surfaces per
/// (t_mg, t_ttt, h_uav, n_t) group.
pub fn cmd_fit(opts: &RunOptions) -> CliResult<()> {
    let cfg = &opts.config;
    cfg.check_keys(&[KEYS])?;
    let dir = required_path(cfg, "samples_dir")?;
    let input: String = cfg.get("surface_input", "gaussian-fit".to_string())?;
    if input != "gaussian-fit" && input != "moments" {
        return Err(config(format!(
            "surface_input must be gaussian-fit or moments, got '{input}'"
        )));
    }
    let surface_opts = SurfaceFitOptions {
        refine: cfg.get("refine", false)?,
    };
    let mse_points: Option<u32> = cfg.get_opt("mse_points")?;
    let rows = read_summary(&dir)?;
    let gaussian = pmf_model("gaussian")?;
    let poisson = pmf_model("poisson")?;

    let out = opts.out_dir()?;
    let mut fits = csv::Writer::from_writer(create(out, "pmf_fits.csv")?);
    fits.write_record([
        "index", "density", "d_km", "samples", "mean", "variance", "gauss_mu", "gauss_sigma2",
        "gauss_mse", "poisson_rate", "poisson_mse", "mse_points",
    ])
    .map_err(hoc_core::Error::from)?;

    type Group = (u64, u64, u64, u32);
    let mut groups: BTreeMap<Group, (usize, Vec<SurfacePoint>, Vec<SurfacePoint>)> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let path = dir.join(&row.samples_file);
        let samples = HocSamples::from_csv(row.samples_file.clone(), open_input(&path)?)
            .map_err(|e| config(format!("{}: {e}", path.display())))?;
        let emp = empirical_pmf(&samples)?;
        let g = gaussian.fit(&samples.samples)?;
        let p = poisson.fit(&samples.samples)?;
        let l = mse_points.unwrap_or_else(|| emp.h_max().max(1));
        let gp = g.params();
        let (mu, sigma2) = (gp[0].1, gp[1].1);
        fits.write_record([
            i.to_string(),
            fmt_f64(row.density),
            fmt_f64(row.d_km),
            samples.samples.len().to_string(),
            fmt_f64(samples.mean()),
            fmt_f64(samples.variance()),
            fmt_f64(mu),
            fmt_f64(sigma2),
            fmt_f64(pmf_mse(&emp, g.as_ref(), l)?),
            fmt_f64(p.params()[0].1),
            fmt_f64(pmf_mse(&emp, p.as_ref(), l)?),
            l.to_string(),
        ])
        .map_err(hoc_core::Error::from)?;

        let (y_mu, y_var) = if input == "moments" {
            (samples.mean(), samples.variance())
        } else {
            (mu, sigma2)
        };
        let key = (row.t_mg.to_bits(), row.t_ttt.to_bits(), row.h_uav.to_bits(), row.n_t);
        let order = groups.len();
        let entry = groups.entry(key).or_insert((order, Vec::new(), Vec::new()));
        entry.1.push(SurfacePoint { lambda: row.density, d_km: row.d_km, y: y_mu });
        entry.2.push(SurfacePoint { lambda: row.density, d_km: row.d_km, y: y_var });
    }
    fits.flush().map_err(hoc_core::Error::from)?;

    let mut ordered: Vec<_> = groups.into_iter().collect();
    ordered.sort_by_key(|(_, (order, _, _))| *order);
    let mut table = CoefficientTable::default();
    for ((t_mg, t_ttt, h_uav, n_t), (_, mu_pts, var_pts)) in ordered {
        table.rows.push(CoefficientRow {
            t_mg_ms: f64::from_bits(t_mg),
            t_ttt_ms: f64::from_bits(t_ttt),
            h_uav_m: f64::from_bits(h_uav),
            n_t,
            mean: fit_power_surface(&mu_pts, surface_opts)?,
            var: fit_power_surface(&var_pts, surface_opts)?,
        });
    }
    table.write_csv(create(out, "coefficients.csv")?)?;
    write_manifest(
        out,
        "fit",
        cfg,
        &vec![("configurations".to_string(), rows.len().to_string())],
    )
}
