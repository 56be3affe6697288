//! Weight-initialization samplers — the standard Glorot family and the
//! Gershgorin family with guaranteed-stable spectra — plus eigenvalue
//! statistics aggregated over many seeded realizations.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, Mat, Spectrum};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// i.i.d. Gaussian entries, variance 1/n (fan_in = fan_out = n).
    GlorotNormal,
    /// i.i.d. uniform entries on ±√(3/n) (same variance as GlorotNormal).
    GlorotUniform,
    /// Zero diagonal, off-diagonal uniform on ±1/(n-1): Gershgorin disks
    /// centered at 0 with radius < 1, so the spectrum stays inside the unit
    /// circle.
    GershgorinDiscrete,
    /// GershgorinDiscrete, then each row rescaled so its absolute
    /// off-diagonal sum is exactly 1 (sharp unit-circle bound).
    GershgorinDiscreteRownorm,
    /// Off-diagonal as GershgorinDiscrete, diagonal entry i set to minus the
    /// absolute off-diagonal sum of row i: every disk is [-2Rᵢ, 0], so all
    /// eigenvalues have non-positive real part.
    GershgorinContinuous,
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::GlorotNormal => "glorot_normal",
            InitKind::GlorotUniform => "glorot_uniform",
            InitKind::GershgorinDiscrete => "gershgorin_discrete",
            InitKind::GershgorinDiscreteRownorm => "gershgorin_discrete_rownorm",
            InitKind::GershgorinContinuous => "gershgorin_continuous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    pub n: usize,
}

/// Draws one initialization matrix for the scheme.
pub fn sample_init(scheme: &InitScheme, seed: u64) -> Result<Mat> {
    let n = scheme.n;
    match scheme.kind {
        InitKind::GlorotNormal => {
            check_dim(n, 1)?;
            Ok(rng::gaussian_mat(n, n, (1.0 / n as f64).sqrt(), seed))
        }
        InitKind::GlorotUniform => {
            check_dim(n, 1)?;
            let bound = (3.0 / n as f64).sqrt();
            Ok(rng::uniform_mat(n, n, -bound, bound, seed))
        }
        InitKind::GershgorinDiscrete => {
            check_dim(n, 2)?;
            Ok(gershgorin_offdiag(n, seed))
        }
        InitKind::GershgorinDiscreteRownorm => {
            check_dim(n, 2)?;
            let mut m = gershgorin_offdiag(n, seed);
            for i in 0..n {
                let row_sum: f64 = (0..n).filter(|j| *j != i).map(|j| m[(i, j)].abs()).sum();
                if row_sum > 0.0 {
                    for j in 0..n {
                        if j != i {
                            m[(i, j)] /= row_sum;
                        }
                    }
                }
            }
            Ok(m)
        }
        InitKind::GershgorinContinuous => {
            check_dim(n, 2)?;
            let mut m = gershgorin_offdiag(n, seed);
            for i in 0..n {
                let row_sum: f64 = (0..n).filter(|j| *j != i).map(|j| m[(i, j)].abs()).sum();
                m[(i, i)] = -row_sum;
            }
            Ok(m)
        }
    }
}

fn check_dim(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::Config(format!(
            "initializer dimension must be at least {min}, got {n}"
        )))
    } else {
        Ok(())
    }
}

fn gershgorin_offdiag(n: usize, seed: u64) -> Mat {
    let radius = 1.0 / (n as f64 - 1.0);
    let mut m = rng::uniform_mat(n, n, -radius, radius, seed);
    for i in 0..n {
        m[(i, i)] = 0.0;
    }
    m
}

/// Rectangular binning window over the complex plane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_bins: usize,
    pub im_bins: usize,
}

impl Default for GridSpec {
    /// Window [-1.5, 1.5]² with 151×151 bins: covers the unit disk plus
    /// finite-n spillover.
    fn default() -> Self {
        GridSpec {
            re_min: -1.5,
            re_max: 1.5,
            im_min: -1.5,
            im_max: 1.5,
            re_bins: 151,
            im_bins: 151,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.re_bins == 0 || self.im_bins == 0 || self.re_max <= self.re_min
            || self.im_max <= self.im_min
        {
            return Err(Error::Config("invalid histogram grid".into()));
        }
        Ok(())
    }

    /// Bin index for one eigenvalue; out-of-window values are clamped into
    /// the edge bins so every eigenvalue is counted.
    fn bin_of(&self, l: Complex64) -> (usize, usize) {
        let clamp = |x: f64, lo: f64, hi: f64, bins: usize| {
            let t = (x - lo) / (hi - lo) * bins as f64;
            (t.floor() as isize).clamp(0, bins as isize - 1) as usize
        };
        (
            clamp(l.re, self.re_min, self.re_max, self.re_bins),
            clamp(l.im, self.im_min, self.im_max, self.im_bins),
        )
    }

    pub fn re_center(&self, i: usize) -> f64 {
        let w = (self.re_max - self.re_min) / self.re_bins as f64;
        self.re_min + (i as f64 + 0.5) * w
    }

    pub fn im_center(&self, j: usize) -> f64 {
        let w = (self.im_max - self.im_min) / self.im_bins as f64;
        self.im_min + (j as f64 + 0.5) * w
    }
}

/// 2-D eigenvalue histogram over a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct Histogram2d {
    pub grid: GridSpec,
    /// Row-major counts, index = re_bin * im_bins + im_bin.
    pub counts: Vec<u64>,
}

impl Histogram2d {
    fn new(grid: GridSpec) -> Self {
        let counts = vec![0; grid.re_bins * grid.im_bins];
        Histogram2d { grid, counts }
    }

    fn add(&mut self, l: Complex64) {
        let (i, j) = self.grid.bin_of(l);
        self.counts[i * self.grid.im_bins + j] += 1;
    }

    pub fn count(&self, re_bin: usize, im_bin: usize) -> u64 {
        self.counts[re_bin * self.grid.im_bins + im_bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Aggregate eigenvalue statistics over many initializer realizations.
#[derive(Debug, Clone)]
pub struct SpectrumStats {
    /// All eigenvalues from all trials, in trial order.
    pub eigenvalues: Spectrum,
    /// Fraction of eigenvalues with |λ| > 1.
    pub phi: f64,
    /// Fraction of eigenvalues with Re λ > 0.
    pub frac_positive_real: f64,
    pub histogram: Histogram2d,
    pub trials: usize,
    pub n: usize,
    pub base_seed: u64,
}

/// Samples `trials` realizations seeded `base_seed..base_seed+trials` and
/// aggregates their spectra. Trials run in parallel; aggregation merges in
/// trial order, so the result is deterministic.
pub fn spectrum_stats(
    scheme: &InitScheme,
    trials: usize,
    base_seed: u64,
    grid: &GridSpec,
) -> Result<SpectrumStats> {
    if trials == 0 {
        return Err(Error::Config("spectrum_stats needs at least one trial".into()));
    }
    grid.validate()?;

    let spectra: Vec<Result<Spectrum>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let m = sample_init(scheme, base_seed.wrapping_add(t as u64))?;
            matcore::eig(&m)
        })
        .collect();

    let mut all = Vec::with_capacity(trials * scheme.n);
    for spectrum in spectra {
        all.extend(spectrum?);
    }
    Ok(aggregate(all, *grid, trials, scheme.n, base_seed))
}

/// Aggregates the spectra of explicitly supplied matrices. This is the same
/// accumulation path [`spectrum_stats`] uses after sampling.
pub fn spectrum_stats_from_matrices(matrices: &[Mat], grid: &GridSpec) -> Result<SpectrumStats> {
    if matrices.is_empty() {
        return Err(Error::Config("need at least one matrix".into()));
    }
    grid.validate()?;
    let n = matrices[0].nrows();
    let mut all = Vec::with_capacity(matrices.len() * n);
    for m in matrices {
        all.extend(matcore::eig(m)?);
    }
    Ok(aggregate(all, *grid, matrices.len(), n, 0))
}

fn aggregate(
    eigenvalues: Spectrum,
    grid: GridSpec,
    trials: usize,
    n: usize,
    base_seed: u64,
) -> SpectrumStats {
    let total = eigenvalues.len() as f64;
    let mut histogram = Histogram2d::new(grid);
    let mut outside = 0usize;
    let mut positive_real = 0usize;
    for l in &eigenvalues {
        if l.norm() > 1.0 {
            outside += 1;
        }
        if l.re > 0.0 {
            positive_real += 1;
        }
        histogram.add(*l);
    }
    SpectrumStats {
        eigenvalues,
        phi: outside as f64 / total,
        frac_positive_real: positive_real as f64 / total,
        histogram,
        trials,
        n,
        base_seed,
    }
}
