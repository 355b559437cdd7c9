use std::f64::consts::{FRAC_PI_2, TAU};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{ActuationError, ActuationSignal, Harmonic, Recording, MAX_HARMONICS, MAX_TOTAL_AMPLITUDE};
use crate::lattice::Lattice;

// Amplitudes below this are treated as numerical noise and dropped.
const AMPLITUDE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalFit {
    pub signal: ActuationSignal,
    /// RMS of series minus reconstruction.
    pub residual: f64,
}

/// Fits up to `harmonics` sinusoids to a uniformly sampled series by
/// picking the largest non-DC DFT bins below Nyquist. The phase is
/// relative to the first sample at `t = 0`.
pub fn fit_signal(
    series: &[f64],
    sample_rate: f64,
    harmonics: usize,
) -> Result<SignalFit, ActuationError> {
    if harmonics == 0 || harmonics > MAX_HARMONICS {
        return Err(ActuationError::InvalidHarmonicCount(harmonics));
    }
    let n = series.len();
    let needed = 2 * harmonics + 1;
    if n < needed {
        return Err(ActuationError::TooFewSamples { needed, got: n });
    }

    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    // bins strictly between DC and Nyquist
    let top = (n - 1) / 2;
    let mut bins: Vec<usize> = (1..=top).collect();
    bins.sort_by(|&a, &b| buf[b].norm().total_cmp(&buf[a].norm()).then(a.cmp(&b)));

    let scale = 2.0 / n as f64;
    let mut picked: Vec<Harmonic> = bins
        .into_iter()
        .take(harmonics)
        .map(|k| {
            let x = buf[k];
            Harmonic {
                a: x.norm() * scale,
                f: k as f64 * sample_rate / n as f64,
                // X_k = (a N / 2) e^{i(phi - pi/2)} for a sin(2 pi k n / N + phi)
                phi: (x.arg() + FRAC_PI_2).rem_euclid(TAU),
            }
        })
        .filter(|h| h.a > AMPLITUDE_FLOOR)
        .collect();
    picked.sort_by(|a, b| a.f.total_cmp(&b.f));

    let mut signal = ActuationSignal { harmonics: picked };
    if signal.total_amplitude() > MAX_TOTAL_AMPLITUDE {
        warn!(
            total = signal.total_amplitude(),
            "fitted amplitudes exceed the signal bound; scaling down"
        );
        signal.project();
    }

    let dt = 1.0 / sample_rate;
    let sq: f64 = series
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - signal.value(i as f64 * dt)).powi(2))
        .sum();
    Ok(SignalFit {
        signal,
        residual: (sq / n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFit {
    pub id: usize,
    pub name: String,
    pub signal: ActuationSignal,
    /// `None` when the region had no constraints to fit.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub regions: Vec<RegionFit>,
    /// RMS over fitted regions of their residuals.
    pub residual: f64,
    pub samples_used: usize,
}

impl FitReport {
    pub fn signals(&self) -> Vec<ActuationSignal> {
        self.regions.iter().map(|r| r.signal.clone()).collect()
    }

    /// Replaces every region's actuation with its fitted signal.
    pub fn apply(&self, lattice: &mut Lattice) {
        for (region, fit) in lattice.regions.iter_mut().zip(&self.regions) {
            region.actuation = fit.signal.clone();
        }
    }
}

/// Fits one signal per region to the mean relative length change
/// `l / L0 - 1` of the region's constraints. Phases are shifted so the
/// signals are expressed in simulation time.
pub fn fit_regions(
    recording: &Recording,
    lattice: &Lattice,
    harmonics: usize,
) -> Result<FitReport, ActuationError> {
    if recording.lengths.len() != lattice.constraints.len() {
        return Err(ActuationError::InvalidCoupling(format!(
            "recording has {} constraints, lattice has {}",
            recording.lengths.len(),
            lattice.constraints.len()
        )));
    }
    let samples = recording.samples();
    let groups = lattice.constraints_by_region();
    let mut regions = Vec::with_capacity(groups.len());
    let mut residuals = Vec::new();

    for (region, members) in lattice.regions.iter().zip(&groups) {
        if members.is_empty() {
            warn!(region = %region.name, "region has no constraints; skipped");
            regions.push(RegionFit {
                id: region.id,
                name: region.name.clone(),
                signal: ActuationSignal::default(),
                residual: None,
            });
            continue;
        }
        let inv = 1.0 / members.len() as f64;
        let series: Vec<f64> = (0..samples)
            .map(|s| {
                members
                    .iter()
                    .map(|&k| recording.lengths[k][s] / lattice.constraints[k].rest_length0 - 1.0)
                    .sum::<f64>()
                    * inv
            })
            .collect();
        let mut fit = fit_signal(&series, recording.sample_rate(), harmonics)?;
        for h in &mut fit.signal.harmonics {
            h.phi = (h.phi - TAU * h.f * recording.start_time).rem_euclid(TAU);
        }
        residuals.push(fit.residual);
        regions.push(RegionFit {
            id: region.id,
            name: region.name.clone(),
            signal: fit.signal,
            residual: Some(fit.residual),
        });
    }
    let residual = if residuals.is_empty() {
        0.0
    } else {
        (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
    };
    Ok(FitReport {
        regions,
        residual,
        samples_used: samples,
    })
}
