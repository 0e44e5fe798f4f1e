//! Forward model: complex baseband samples for every Tx/Rx pair and tone.
//!
//! A scatterer at round-trip path length `d_tx + d_rx` contributes
//! `reflectivity * a * exp(-i 2π f (d_tx + d_rx) / c)`. The propagation phase
//! is negative; backprojection applies the conjugate kernel.

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::array::AntennaArray;
use crate::error::{Error, Result};
use crate::plan::FrequencyPlan;
use crate::scene::Scene;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeModel {
    #[default]
    Unit,
    /// `1 / (d_tx * d_rx)` spreading loss.
    InverseDistance,
}

/// Measurement samples indexed `[tx][rx][freq]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCube {
    array: AntennaArray,
    plan: FrequencyPlan,
    samples: Vec<Complex32>,
}

impl DataCube {
    pub fn new(array: AntennaArray, plan: FrequencyPlan, samples: Vec<Complex32>) -> Result<Self> {
        let expected = array.tx().len() * array.rx().len() * plan.len();
        if samples.len() != expected {
            return Err(Error::invalid(format!(
                "cube holds {} samples, dimensions require {expected}",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::invalid("cube holds a non-finite sample"));
        }
        Ok(DataCube {
            array,
            plan,
            samples,
        })
    }

    pub fn zeros(array: AntennaArray, plan: FrequencyPlan) -> Self {
        let n = array.tx().len() * array.rx().len() * plan.len();
        DataCube {
            array,
            plan,
            samples: vec![Complex32::new(0.0, 0.0); n],
        }
    }

    pub fn array(&self) -> &AntennaArray {
        &self.array
    }

    pub fn plan(&self) -> &FrequencyPlan {
        &self.plan
    }

    pub fn samples(&self) -> &[Complex32] {
        &self.samples
    }

    /// `(|Tx|, |Rx|, |F|)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.array.tx().len(), self.array.rx().len(), self.plan.len())
    }

    pub fn index(&self, tx: usize, rx: usize, freq: usize) -> usize {
        let (_, n_rx, n_f) = self.dims();
        (tx * n_rx + rx) * n_f + freq
    }

    pub fn get(&self, tx: usize, rx: usize, freq: usize) -> Complex32 {
        self.samples[self.index(tx, rx, freq)]
    }

    /// All channel samples of one tone as a `[tx][rx]` double-precision matrix.
    pub fn frequency_slice(&self, freq: usize) -> Vec<Complex64> {
        let n_f = self.plan.len();
        self.samples
            .iter()
            .skip(freq)
            .step_by(n_f)
            .map(|s| Complex64::new(s.re as f64, s.im as f64))
            .collect()
    }

    pub fn mean_power(&self) -> f64 {
        let sum: f64 = self
            .samples
            .iter()
            .map(|s| (s.re as f64).powi(2) + (s.im as f64).powi(2))
            .sum();
        sum / self.samples.len() as f64
    }

    pub fn is_all_zero(&self) -> bool {
        self.samples.iter().all(|s| s.re == 0.0 && s.im == 0.0)
    }
}

/// Element phasors `a(d) * exp(sign * i k d)` from every element to `point`.
fn element_phasors(
    elements: &[crate::geometry::Point3],
    point: &crate::geometry::Point3,
    wavenumber: f64,
    inverse_distance: bool,
    out: &mut [Complex64],
) -> Result<()> {
    for (o, e) in out.iter_mut().zip(elements) {
        let d = e.distance(point);
        let amp = if inverse_distance {
            if d == 0.0 {
                return Err(Error::SingularGeometry(format!(
                    "scatterer {point:?} coincides with an antenna element"
                )));
            }
            1.0 / d
        } else {
            1.0
        };
        let (s, c) = (-wavenumber * d).sin_cos();
        *o = Complex64::new(amp * c, amp * s);
    }
    Ok(())
}

/// Noiseless forward simulation of `scene` as seen by `array` at every tone of
/// `plan`.
pub fn simulate(
    scene: &Scene,
    array: &AntennaArray,
    plan: &FrequencyPlan,
    amplitude_model: AmplitudeModel,
) -> Result<DataCube> {
    let scatterers = scene.scatterers();
    if scatterers.is_empty() {
        return Err(Error::invalid("scene has no scatterers"));
    }
    if let Some(s) = scatterers.iter().find(|s| s.position.z <= 0.0) {
        return Err(Error::invalid(format!(
            "scatterer at {:?} is not in front of the array",
            s.position
        )));
    }
    let inverse = amplitude_model == AmplitudeModel::InverseDistance;
    let (n_tx, n_rx, n_f) = (array.tx().len(), array.rx().len(), plan.len());
    let n_s = scatterers.len();
    let mut samples = vec![Complex32::new(0.0, 0.0); n_tx * n_rx * n_f];

    let mut tx_table = vec![Complex64::new(0.0, 0.0); n_s * n_tx];
    let mut rx_table = vec![Complex64::new(0.0, 0.0); n_s * n_rx];
    for (fi, &freq) in plan.frequencies().iter().enumerate() {
        let k = 2.0 * PI * freq / SPEED_OF_LIGHT;
        tx_table
            .par_chunks_mut(n_tx)
            .zip(scatterers.par_iter())
            .try_for_each(|(row, s)| element_phasors(array.tx(), &s.position, k, inverse, row))?;
        rx_table
            .par_chunks_mut(n_rx)
            .zip(scatterers.par_iter())
            .try_for_each(|(row, s)| element_phasors(array.rx(), &s.position, k, inverse, row))?;

        // One Tx per task; each (tx, rx) sum runs over scatterers in scene order.
        let rows: Vec<Vec<Complex64>> = (0..n_tx)
            .into_par_iter()
            .map(|t| {
                let mut acc = vec![Complex64::new(0.0, 0.0); n_rx];
                for (si, s) in scatterers.iter().enumerate() {
                    if s.reflectivity == 0.0 {
                        continue;
                    }
                    let w = tx_table[si * n_tx + t] * s.reflectivity;
                    let rx_row = &rx_table[si * n_rx..(si + 1) * n_rx];
                    for (a, r) in acc.iter_mut().zip(rx_row) {
                        *a += w * r;
                    }
                }
                acc
            })
            .collect();
        for (t, row) in rows.iter().enumerate() {
            for (r, v) in row.iter().enumerate() {
                samples[(t * n_rx + r) * n_f + fi] = Complex32::new(v.re as f32, v.im as f32);
            }
        }
    }
    DataCube::new(array.clone(), plan.clone(), samples)
}

/// Adds circularly-symmetric complex Gaussian noise so that mean signal power
/// over noise variance equals `10^(snr_db / 10)`. Samples are drawn in cube
/// order from a ChaCha8 stream seeded with `seed`.
pub fn add_noise(cube: &DataCube, snr_db: f64, seed: u64) -> Result<DataCube> {
    let power = cube.mean_power();
    if power == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    let variance = power / 10f64.powf(snr_db / 10.0);
    let sigma = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = cube
        .samples
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex32::new(
                (s.re as f64 + sigma * re) as f32,
                (s.im as f64 + sigma * im) as f32,
            )
        })
        .collect();
    DataCube::new(cube.array.clone(), cube.plan.clone(), samples)
}
