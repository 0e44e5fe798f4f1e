//! Accuracy and precision of reconstructed surfaces against ground truth.

use std::fmt::Write as _;

use crate::array::AntennaArray;
use crate::error::{Error, Result};
use crate::fsk::{run_2fsk, run_3fsk, run_broadband, run_narrowband_sota, FskConfig, Method, SurfacePointCloud};
use crate::grid::{DepthMap, ImageGrid, VolumeSpec};
use crate::plan::FrequencyPlan;
use crate::scene::Scene;
use crate::sim::{add_noise, simulate, AmplitudeModel, DataCube};

/// Depth error statistics over the cells where both estimate and truth exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mae_mm: f64,
    pub max_ae_mm: f64,
    /// `100 · (1 - mean(AE / z_true))`.
    pub relative_accuracy: f64,
    pub n_compared: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionReport {
    pub std_z_strongest_mm: f64,
    pub relative_precision: f64,
    pub n_runs: usize,
}

/// Compares every estimated point with the truth cell nearest to it laterally.
pub fn accuracy(estimate: &SurfacePointCloud, truth: &DepthMap) -> Result<MetricsReport> {
    let mut n = 0usize;
    let mut sum_ae = 0.0;
    let mut sum_rel = 0.0;
    let mut max_ae = 0.0f64;
    for p in estimate.points() {
        let Some(z_true) = truth.sample(p.x, p.y) else {
            continue;
        };
        let ae = (p.z - z_true).abs();
        n += 1;
        sum_ae += ae;
        sum_rel += ae / z_true;
        max_ae = max_ae.max(ae);
    }
    if n == 0 {
        return Err(Error::NoOverlap);
    }
    let relative_accuracy = (100.0 * (1.0 - sum_rel / n as f64)).clamp(0.0, 100.0);
    Ok(MetricsReport {
        mae_mm: 1e3 * sum_ae / n as f64,
        max_ae_mm: 1e3 * max_ae,
        relative_accuracy,
        n_compared: n,
    })
}

pub fn accuracy_of_map(estimate: &DepthMap, truth: &DepthMap) -> Result<MetricsReport> {
    accuracy(&SurfacePointCloud::from_depth_map(estimate, Method::Broadband)?, truth)
}

/// Spread of the strongest scatterer's depth over repeated measurements of a
/// static scene, as a sample (n - 1) standard deviation.
pub fn precision(clouds: &[SurfacePointCloud]) -> Result<PrecisionReport> {
    if clouds.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "precision needs at least 2 runs, got {}",
            clouds.len()
        )));
    }
    let z: Vec<f64> = clouds
        .iter()
        .map(|c| {
            c.strongest()
                .map(|(p, _)| p.z)
                .ok_or_else(|| Error::InsufficientData("empty point cloud".into()))
        })
        .collect::<Result<_>>()?;
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    Ok(PrecisionReport {
        std_z_strongest_mm: 1e3 * std,
        relative_precision: 100.0 * (1.0 - std / mean),
        n_runs: z.len(),
    })
}

/// Everything needed to run all methods on one scene.
#[derive(Debug, Clone)]
pub struct ComparisonSetup {
    pub array: AntennaArray,
    pub fsk_plan: FrequencyPlan,
    /// Required only when [`Method::Broadband`] is compared.
    pub broadband_plan: Option<FrequencyPlan>,
    pub grid: ImageGrid,
    pub volume: VolumeSpec,
    pub fsk: FskConfig,
    pub sota_threshold_db: f64,
    pub amplitude_model: AmplitudeModel,
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    /// `None` for the noiseless run.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub metrics: MetricsReport,
}

fn noisy(clean: &DataCube, snr_db: Option<f64>, seed: u64) -> Result<DataCube> {
    match snr_db {
        Some(snr) => add_noise(clean, snr, seed),
        None => Ok(clean.clone()),
    }
}

/// Runs every selected method on the same noisy cubes, per SNR and seed.
///
/// FSK2, FSK3 and the narrowband baseline share one FSK3 cube per
/// `(snr, seed)`; the broadband baseline gets its own cube with the same seed.
/// A noiseless entry (`None`) is run once with seed 0.
pub fn compare_methods(
    scene: &Scene,
    setup: &ComparisonSetup,
    snrs: &[Option<f64>],
    seeds: &[u64],
) -> Result<Vec<ComparisonRow>> {
    let truth = scene
        .ground_truth()
        .ok_or_else(|| Error::invalid("scene has no ground truth"))?;
    let fsk_clean = simulate(scene, &setup.array, &setup.fsk_plan, setup.amplitude_model)?;
    let broadband_clean = if setup.methods.contains(&Method::Broadband) {
        let plan = setup
            .broadband_plan
            .as_ref()
            .ok_or_else(|| Error::invalid("broadband comparison needs a broadband plan"))?;
        Some(simulate(scene, &setup.array, plan, setup.amplitude_model)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for &snr in snrs {
        let run_seeds: &[u64] = if snr.is_none() { &[0] } else { seeds };
        for &seed in run_seeds {
            let cube = noisy(&fsk_clean, snr, seed)?;
            for &method in &setup.methods {
                let out = match method {
                    Method::Fsk2 => run_2fsk(&cube, &setup.grid, &setup.fsk)?,
                    Method::Fsk3 => run_3fsk(&cube, &setup.grid, &setup.fsk)?,
                    Method::NarrowbandSota => run_narrowband_sota(&cube, &setup.volume, setup.sota_threshold_db)?,
                    Method::Broadband => {
                        let clean = broadband_clean.as_ref().expect("simulated above");
                        run_broadband(&noisy(clean, snr, seed)?, &setup.volume, setup.sota_threshold_db)?
                    }
                };
                rows.push(ComparisonRow {
                    method,
                    snr_db: snr,
                    seed,
                    metrics: accuracy(&out.cloud, truth)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Mean metrics per `(method, snr)` in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub snr_db: Option<f64>,
    pub runs: usize,
    pub mae_mm: f64,
    pub max_ae_mm: f64,
    pub relative_accuracy: f64,
}

pub fn summarize(rows: &[ComparisonRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    for r in rows {
        let key_eq = |s: &SummaryRow| s.method == r.method && s.snr_db.map(f64::to_bits) == r.snr_db.map(f64::to_bits);
        match out.iter_mut().find(|s| key_eq(s)) {
            Some(s) => {
                s.runs += 1;
                s.mae_mm += r.metrics.mae_mm;
                s.max_ae_mm += r.metrics.max_ae_mm;
                s.relative_accuracy += r.metrics.relative_accuracy;
            }
            None => out.push(SummaryRow {
                method: r.method,
                snr_db: r.snr_db,
                runs: 1,
                mae_mm: r.metrics.mae_mm,
                max_ae_mm: r.metrics.max_ae_mm,
                relative_accuracy: r.metrics.relative_accuracy,
            }),
        }
    }
    for s in &mut out {
        let n = s.runs as f64;
        s.mae_mm /= n;
        s.max_ae_mm /= n;
        s.relative_accuracy /= n;
    }
    out
}

fn snr_label(snr: Option<f64>) -> String {
    snr.map_or_else(|| "inf".to_string(), |s| format!("{s}"))
}

/// Machine-readable table, full precision.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("method,snr_db,seed,mae_mm,max_ae_mm,relative_accuracy_pct,n_compared\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            snr_label(r.snr_db),
            r.seed,
            m.mae_mm,
            m.max_ae_mm,
            m.relative_accuracy,
            m.n_compared
        );
    }
    out
}

/// Aligned plain-text summary rounded to 0.1 mm.
pub fn summary_text(summary: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<16} {:>7} {:>5} {:>9} {:>13} {:>10}\n",
        "method", "snr_db", "runs", "MAE(mm)", "MAX of AE(mm)", "acc(%)"
    );
    for s in summary {
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>5} {:>9.1} {:>13.1} {:>10.2}",
            s.method.name(),
            snr_label(s.snr_db),
            s.runs,
            s.mae_mm,
            s.max_ae_mm,
            s.relative_accuracy
        );
    }
    out
}

impl MetricsReport {
    pub fn to_key_value(&self) -> String {
        format!(
            "mae_mm={}\nmax_ae_mm={}\nrelative_accuracy_pct={}\nn_compared={}\n",
            self.mae_mm, self.max_ae_mm, self.relative_accuracy, self.n_compared
        )
    }
}

impl PrecisionReport {
    pub fn to_key_value(&self) -> String {
        format!(
            "std_z_strongest_mm={}\nrelative_precision_pct={}\nn_runs={}\n",
            self.std_z_strongest_mm, self.relative_precision, self.n_runs
        )
    }
}
