//! The experiment runners behind the CLI subcommands. Each runner resolves
//! defaults from the config, computes its results deterministically, and
//! writes CSV files plus a metadata JSON (and optional SVGs). Reruns with an
//! identical config produce byte-identical CSV output.

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{default_n, default_r, ExperimentConfig, ExperimentKind, MetadataWriter};
use super::csvio::{fmt_real, CsvFile};
use super::rollout::{rollout, RolloutMode};
use super::{svg, RunArtifacts};
use crate::error::{Error, Result};
use crate::flowlab::{
    flow_closed_continuous_noisy, flow_closed_discrete, flow_closed_discrete_noisy,
    predict_bias_continuous, predict_bias_discrete, BiasPrediction, Tau,
};
use crate::initgen::{sample_init, spectrum_stats, GridSpec, InitKind, InitScheme, SpectrumStats};
use crate::matcore::{self, Mat};
use crate::rng;
use crate::sysgen::{
    self, BasisPair, BlockSpec, ComplementSpec, NoiseStructure, SnapshotData,
};

/// Dispatches a validated config to its runner.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Spectrum => run_spectrum(config),
        ExperimentKind::Convergence => run_convergence(config),
        ExperimentKind::NoiseBias => run_noise_bias(config),
        ExperimentKind::Remedies => run_remedies(config),
        ExperimentKind::Rollout => run_rollout(config),
    }
}

// ── Spectrum ─────────────────────────────────────────────────────────

fn default_schemes() -> Vec<InitScheme> {
    vec![
        InitScheme { kind: InitKind::GlorotNormal, n: 8 },
        InitScheme { kind: InitKind::GlorotNormal, n: 64 },
        InitScheme { kind: InitKind::GlorotNormal, n: 256 },
        InitScheme { kind: InitKind::GershgorinDiscrete, n: 16 },
        InitScheme { kind: InitKind::GershgorinDiscreteRownorm, n: 16 },
        InitScheme { kind: InitKind::GershgorinContinuous, n: 16 },
    ]
}

/// Eigenvalue histograms and summary statistics per initializer scheme.
/// The default trial count is ceil(1e5 / n) realizations per scheme.
pub fn run_spectrum(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let dir = config.output_dir();
    let metadata = MetadataWriter::begin(config, &dir)?;
    let schemes = config.schemes.clone().unwrap_or_else(default_schemes);
    let base_seed = config.base_seed();
    let grid = GridSpec::default();

    let mut csv_paths = Vec::new();
    let mut summary = CsvFile::create(
        &dir.join("spectrum_summary.csv"),
        "scheme,n,trials,phi,frac_positive_real",
    )?;
    for scheme in &schemes {
        let trials = config
            .trials
            .unwrap_or_else(|| (100_000usize).div_ceil(scheme.n));
        let stats = spectrum_stats(scheme, trials, base_seed, &grid)?;
        summary.row(&[
            scheme.kind.name().to_string(),
            scheme.n.to_string(),
            trials.to_string(),
            fmt_real(stats.phi),
            fmt_real(stats.frac_positive_real),
        ])?;

        let hist_name = format!("spectrum_hist_{}_n{}.csv", scheme.kind.name(), scheme.n);
        let mut hist = CsvFile::create(&dir.join(&hist_name), "bin_re,bin_im,count")?;
        for i in 0..grid.re_bins {
            for j in 0..grid.im_bins {
                hist.row(&[
                    fmt_real(grid.re_center(i)),
                    fmt_real(grid.im_center(j)),
                    stats.histogram.count(i, j).to_string(),
                ])?;
            }
        }
        csv_paths.push(hist.finish()?);

        if config.emit_svg {
            let title = format!("{} n={} phi={:.4}", scheme.kind.name(), scheme.n, stats.phi);
            let svg_name = format!("spectrum_hist_{}_n{}.svg", scheme.kind.name(), scheme.n);
            svg::write_histogram_svg(&stats.histogram, &title, &dir.join(svg_name))?;
        }
    }
    csv_paths.insert(0, summary.finish()?);
    Ok(RunArtifacts {
        csv_paths,
        metadata_path: metadata.finish(config)?,
    })
}

/// Summary view of one spectrum run, for programmatic callers.
pub fn spectrum_summary(scheme: &InitScheme, trials: usize, base_seed: u64) -> Result<SpectrumStats> {
    spectrum_stats(scheme, trials, base_seed, &GridSpec::default())
}

// ── Convergence (three-dimensional demo) ────────────────────────────

/// The demo system behind the convergence experiment: a high-energy and a
/// low-energy learnable direction plus one zero-energy direction whose
/// initialization is deliberately unstable.
struct ConvergenceSetup {
    a: Mat,
    a_hat0: Mat,
    basis: BasisPair,
    a_tilde: Mat,
    data: SnapshotData,
}

fn convergence_setup(n: usize, r: usize, m: usize, dt: Option<f64>, seed: u64) -> Result<ConvergenceSetup> {
    let u = rng::random_orthogonal(n, rng::derive_seed(seed, 0));
    let basis = BasisPair::new(u, r)?;

    // True dynamics, diagonal on the learnable block so each tracked
    // diagonal entry is that direction's eigenvalue.
    let mut a_tilde = Mat::zeros(n, n);
    let learnable: Vec<f64> = if dt.is_some() {
        (0..r).map(|i| -0.3 - 0.5 * i as f64).collect()
    } else {
        (0..r).map(|i| 0.9 - 0.4 * i as f64).collect()
    };
    for (i, v) in learnable.iter().enumerate() {
        a_tilde[(i, i)] = *v;
    }
    let coupling = rng::gaussian_mat(r, n - r, 0.3, rng::derive_seed(seed, 1));
    a_tilde.view_mut((0, r), (r, n - r)).copy_from(&coupling);
    for i in r..n {
        a_tilde[(i, i)] = if dt.is_some() { -0.5 } else { 0.3 };
    }
    let a = &basis.u * &a_tilde * basis.u.transpose();

    // Initialization: Glorot-sized noise with the zero-energy diagonal
    // forced to an unstable value.
    let mut init_tilde = rng::gaussian_mat(n, n, (1.0 / n as f64).sqrt(), rng::derive_seed(seed, 2));
    for i in r..n {
        init_tilde[(i, i)] = if dt.is_some() { 0.5 } else { 1.2 };
    }
    let a_hat0 = &basis.u * &init_tilde * basis.u.transpose();

    // Energies: decay rates 0.5 (high) down to 0.05 (low) in units where
    // the discrete flow rate is sigma²/(mn).
    let mn = (m * n) as f64;
    let sigmas: Vec<f64> = (0..r)
        .map(|i| {
            let rate = 0.5 / 10f64.powi(i as i32);
            (rate * mn).sqrt()
        })
        .collect();
    let data = sysgen::snapshots_with_energy(&a, &basis, &sigmas, m, dt, rng::derive_seed(seed, 3))?;
    Ok(ConvergenceSetup {
        a,
        a_hat0,
        basis,
        a_tilde,
        data,
    })
}

fn default_tau_grid(dt: Option<f64>) -> Vec<f64> {
    // Geometric grid covering both the fast learnable decay and the slow
    // noise-driven erasure; the continuous flow runs dt²-slower.
    let scale = dt.map_or(1.0, |dt| 1.0 / (dt * dt));
    let (lo, hi) = (0.5 * scale, 5.0e4 * scale);
    let points = 50;
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// Per-direction convergence curves for a clean and a noisy run: the
/// tracked diagonal entry of the operator in the data basis (`diag_real`)
/// and the column error (`column_error`, against the true column for
/// learnable directions and against the initialization beyond the rank).
pub fn run_convergence(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let dir = config.output_dir();
    let metadata = MetadataWriter::begin(config, &dir)?;
    let n = config.n.unwrap_or(default_n(ExperimentKind::Convergence));
    let r = config.r.unwrap_or(default_r(ExperimentKind::Convergence));
    let m = config.m.unwrap_or(64);
    let sigma = config.sigma.unwrap_or(0.05);
    let trials = config.trials.unwrap_or(100);
    let dt = config.dt;
    let base_seed = config.base_seed();
    let tau_grid = config.tau_grid.clone().unwrap_or_else(|| default_tau_grid(dt));

    let setup = convergence_setup(n, r, m, dt, rng::derive_seed(base_seed, 100))?;
    let init_tilde = sysgen::to_svd_basis(&setup.a_hat0, &setup.basis)?;

    let clean_at = |tau: f64| -> Result<Mat> {
        // The clean continuous flow is the discrete flow with τ scaled by dt².
        let tau_eff = dt.map_or(tau, |dt| tau * dt * dt);
        let out = flow_closed_discrete(&setup.a_hat0, &setup.a, &setup.data.x, tau_eff)?;
        sysgen::to_svd_basis(&out, &setup.basis)
    };
    let noisy_mean_at = |tau: f64| -> Result<Mat> {
        let draws: Vec<Result<Mat>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let noisy = sysgen::inject_noise(
                    &setup.data,
                    sigma,
                    rng::derive_seed(base_seed.wrapping_add(t as u64), 7),
                    NoiseStructure::Iid,
                    None,
                )?;
                let rec = noisy.noise.as_ref().expect("sigma > 0");
                let out = match dt {
                    None => flow_closed_discrete_noisy(
                        &setup.a_hat0,
                        &setup.a,
                        &setup.data.x,
                        &rec.x_noise,
                        &rec.x_next_noise,
                        Tau::Finite(tau),
                    )?,
                    Some(dt) => flow_closed_continuous_noisy(
                        &setup.a_hat0,
                        &setup.a,
                        &setup.data.x,
                        &rec.x_noise,
                        &rec.x_next_noise,
                        dt,
                        Tau::Finite(tau),
                    )?,
                };
                sysgen::to_svd_basis(&out, &setup.basis)
            })
            .collect();
        let mut mean = Mat::zeros(n, n);
        for d in draws {
            mean += d?;
        }
        Ok(mean / trials as f64)
    };

    let mut csv = CsvFile::create(
        &dir.join("convergence.csv"),
        "run,tau,direction_id,measure,value",
    )?;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for run in ["clean", "noisy"] {
        let mut diag_curves = vec![Vec::new(); n];
        for &tau in &tau_grid {
            if sigma == 0.0 && run == "noisy" {
                continue;
            }
            let tilde = if run == "clean" {
                clean_at(tau)?
            } else {
                noisy_mean_at(tau)?
            };
            for i in 0..n {
                let column_error = if i < r {
                    (tilde.column(i) - setup.a_tilde.column(i)).norm()
                } else {
                    (tilde.column(i) - init_tilde.column(i)).norm()
                };
                csv.row(&[
                    run.to_string(),
                    fmt_real(tau),
                    (i + 1).to_string(),
                    "diag_real".to_string(),
                    fmt_real(tilde[(i, i)]),
                ])?;
                csv.row(&[
                    run.to_string(),
                    fmt_real(tau),
                    (i + 1).to_string(),
                    "column_error".to_string(),
                    fmt_real(column_error),
                ])?;
                diag_curves[i].push((tau.log10(), tilde[(i, i)]));
            }
        }
        for (i, curve) in diag_curves.into_iter().enumerate() {
            if !curve.is_empty() {
                series.push((format!("{run} dir {}", i + 1), curve));
            }
        }
    }
    let csv_paths = vec![csv.finish()?];
    if config.emit_svg {
        svg::write_lines_svg(
            &series,
            "tracked diagonal vs log10(tau)",
            &dir.join("convergence.svg"),
        )?;
    }
    Ok(RunArtifacts {
        csv_paths,
        metadata_path: metadata.finish(config)?,
    })
}

// ── Noise bias ───────────────────────────────────────────────────────

struct BiasSystem {
    a: Mat,
    data: SnapshotData,
    data_basis: BasisPair,
    a_tilde: Mat,
    singular_values: Vec<f64>,
    m: usize,
}

fn bias_system(n: usize, r: usize, m: usize, sigma: f64, dt: Option<f64>, seed: u64) -> Result<BiasSystem> {
    let learnable: Vec<Complex64> = if dt.is_some() {
        (0..r).map(|i| Complex64::new(-0.3 - 0.3 * i as f64, 0.0)).collect()
    } else {
        (0..r).map(|i| Complex64::new(0.9 - 0.3 * i as f64, 0.0)).collect()
    };
    let spec = BlockSpec {
        n,
        r,
        learnable_eigenvalues: learnable,
        coupling_scale: 0.5,
        complement: ComplementSpec::Random,
    };
    let (a, basis) = sysgen::build_block_system(&spec, rng::derive_seed(seed, 10))?;

    // Energies chosen so the per-direction SNR at the base sigma spans
    // roughly {10, 1, 0.1}.
    let snr_targets = [10.0, 1.0, 0.1];
    let sigmas: Vec<f64> = (0..r)
        .map(|i| {
            let target = snr_targets[i.min(snr_targets.len() - 1)];
            sigma * (m as f64 * target).sqrt()
        })
        .collect();
    let data = sysgen::snapshots_with_energy(&a, &basis, &sigmas, m, dt, rng::derive_seed(seed, 11))?;

    // One basis for both the prediction and the empirical mean: the left
    // singular vectors of the clean data.
    let f = matcore::svd(&data.x, 0.0)?;
    let data_basis = BasisPair::new(f.u.clone(), f.rank)?;
    let a_tilde = sysgen::to_svd_basis(&a, &data_basis)?;
    Ok(BiasSystem {
        a,
        data,
        data_basis,
        a_tilde,
        singular_values: f.singular_values,
        m,
    })
}

/// Learned operator at τ = ∞ for one noise draw (σ = 0 falls back to the
/// least-squares solution, whose learnable columns are exact and whose
/// zero-energy columns vanish, matching the σ → 0 prediction).
fn bias_draw(system: &BiasSystem, sigma: f64, dt: Option<f64>, seed: u64) -> Result<Mat> {
    if sigma == 0.0 {
        let learned = &system.data.x_next * matcore::pinv(&system.data.x, 0.0)?;
        let tilde = sysgen::to_svd_basis(&learned, &system.data_basis)?;
        return match dt {
            None => Ok(tilde),
            // The least-squares operator approximates (I + Â·dt); convert.
            Some(dt) => {
                let n = tilde.nrows();
                Ok((tilde - Mat::identity(n, n)) / dt)
            }
        };
    }
    let noisy = sysgen::inject_noise(&system.data, sigma, seed, NoiseStructure::Iid, None)?;
    let rec = noisy.noise.as_ref().expect("sigma > 0");
    let learned = match dt {
        None => flow_closed_discrete_noisy(
            &Mat::zeros(system.a.nrows(), system.a.nrows()),
            &system.a,
            &system.data.x,
            &rec.x_noise,
            &rec.x_next_noise,
            Tau::Infinity,
        )?,
        Some(dt) => flow_closed_continuous_noisy(
            &Mat::zeros(system.a.nrows(), system.a.nrows()),
            &system.a,
            &system.data.x,
            &rec.x_noise,
            &rec.x_next_noise,
            dt,
            Tau::Infinity,
        )?,
    };
    sysgen::to_svd_basis(&learned, &system.data_basis)
}

/// Decomposes one column of a learned operator (in the data basis) into a
/// multiplicative factor on the true column plus an additive diagonal term:
/// least squares over col ≈ f·ã_i + d·e_i.
fn column_factor_additive(tilde: &Mat, a_tilde: &Mat, direction: usize) -> (f64, f64) {
    let col = tilde.column(direction);
    let truth = a_tilde.column(direction);
    let tt = truth.dot(&truth);
    let te = truth[direction];
    let tc = truth.dot(&col);
    let ec = col[direction];
    let det = tt - te * te;
    if det.abs() < 1e-12 * tt.max(1.0) {
        // True column is (numerically) a multiple of e_i; report the plain
        // ratio and no additive part.
        if tt > 0.0 {
            (tc / tt, 0.0)
        } else {
            (0.0, ec)
        }
    } else {
        let f = (tc - te * ec) / det;
        let d = (tt * ec - te * tc) / det;
        (f, d)
    }
}

/// One row of the noise-bias sweep.
#[derive(Debug, Clone)]
pub struct BiasRow {
    pub sigma: f64,
    pub direction: usize,
    pub empirical_mean_factor: f64,
    pub predicted_factor: f64,
    pub empirical_additive: f64,
    pub predicted_additive: f64,
    pub stderr: f64,
}

fn noise_bias_rows(
    system: &BiasSystem,
    sigma_grid: &[f64],
    trials: usize,
    dt: Option<f64>,
    base_seed: u64,
) -> Result<Vec<BiasRow>> {
    let n = system.a.nrows();
    let mut rows = Vec::new();
    for &sigma in sigma_grid {
        let draws = if sigma == 0.0 { 1 } else { trials };
        let tildes: Vec<Result<Mat>> = (0..draws)
            .into_par_iter()
            .map(|t| bias_draw(system, sigma, dt, base_seed.wrapping_add(t as u64)))
            .collect();
        let mut factors = vec![Vec::with_capacity(draws); n];
        let mut additives = vec![Vec::with_capacity(draws); n];
        for tilde in tildes {
            let tilde = tilde?;
            for i in 0..n {
                let (f, d) = column_factor_additive(&tilde, &system.a_tilde, i);
                factors[i].push(f);
                additives[i].push(d);
            }
        }

        let prediction: BiasPrediction = match dt {
            None => predict_bias_discrete(
                &system.a_tilde,
                &system.singular_values,
                system.m,
                sigma * sigma,
            )?,
            Some(dt) => predict_bias_continuous(
                &system.a_tilde,
                &system.singular_values,
                system.m,
                sigma * sigma,
                dt,
            )?,
        };
        for i in 0..n {
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            let f_mean = mean(&factors[i]);
            let d_mean = mean(&additives[i]);
            let stderr = if factors[i].len() > 1 {
                let var = factors[i].iter().map(|x| (x - f_mean).powi(2)).sum::<f64>()
                    / (factors[i].len() - 1) as f64;
                (var / factors[i].len() as f64).sqrt()
            } else {
                0.0
            };
            rows.push(BiasRow {
                sigma,
                direction: i + 1,
                empirical_mean_factor: f_mean,
                predicted_factor: prediction.multiplicative_factors[i],
                empirical_additive: d_mean,
                predicted_additive: prediction.additive_diagonal[i],
                stderr,
            });
        }
    }
    Ok(rows)
}

/// Monte Carlo check of the noise-bias formulas: sweeps sigma over
/// {0, σ/2, σ, 2σ, 4σ} and compares the empirical mean of the τ=∞ learned
/// operator against the predicted multiplicative factors and additive terms.
pub fn run_noise_bias(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let dir = config.output_dir();
    let metadata = MetadataWriter::begin(config, &dir)?;
    let n = config.n.unwrap_or(default_n(ExperimentKind::NoiseBias));
    let r = config.r.unwrap_or(default_r(ExperimentKind::NoiseBias));
    let m = config.m.unwrap_or(200);
    let sigma = config.sigma.unwrap_or(0.05);
    let trials = config.trials.unwrap_or(2000);
    let dt = config.dt;
    let base_seed = config.base_seed();

    let system = bias_system(n, r, m, sigma, dt, base_seed)?;
    let sigma_grid: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|k| k * sigma).collect();
    let rows = noise_bias_rows(&system, &sigma_grid, trials, dt, base_seed)?;

    let mut csv = CsvFile::create(
        &dir.join("noise_bias.csv"),
        "sigma,direction,empirical_mean_factor,predicted_factor,empirical_additive,predicted_additive,stderr",
    )?;
    for row in &rows {
        csv.row(&[
            fmt_real(row.sigma),
            row.direction.to_string(),
            fmt_real(row.empirical_mean_factor),
            fmt_real(row.predicted_factor),
            fmt_real(row.empirical_additive),
            fmt_real(row.predicted_additive),
            fmt_real(row.stderr),
        ])?;
    }
    let csv_paths = vec![csv.finish()?];
    if config.emit_svg {
        let mut series = Vec::new();
        for i in 1..=n {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|row| row.direction == i)
                .map(|row| (row.sigma, row.empirical_mean_factor))
                .collect();
            series.push((format!("dir {i} empirical"), pts));
        }
        svg::write_lines_svg(&series, "bias factor vs sigma", &dir.join("noise_bias.svg"))?;
    }
    Ok(RunArtifacts {
        csv_paths,
        metadata_path: metadata.finish(config)?,
    })
}

// ── Remedies ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemedyArm {
    /// Glorot initialization, plain training on rank-deficient data.
    GlorotBaseline,
    /// Gershgorin initialization, plain training.
    GershgorinInit,
    /// Training restricted to the data subspace.
    Projection,
    /// Training on whitened data.
    Whitening,
    /// Noise injected only in the zero-energy directions.
    SelectiveNoise,
}

impl RemedyArm {
    pub const ALL: [RemedyArm; 5] = [
        RemedyArm::GlorotBaseline,
        RemedyArm::GershgorinInit,
        RemedyArm::Projection,
        RemedyArm::Whitening,
        RemedyArm::SelectiveNoise,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RemedyArm::GlorotBaseline => "glorot_baseline",
            RemedyArm::GershgorinInit => "gershgorin_init",
            RemedyArm::Projection => "projection",
            RemedyArm::Whitening => "whitening",
            RemedyArm::SelectiveNoise => "selective_noise",
        }
    }
}

/// Outcome of one (arm, seed) cell of the remedies comparison.
#[derive(Debug, Clone)]
pub struct RemedyOutcome {
    pub arm: RemedyArm,
    pub seed: u64,
    pub spectral_radius: f64,
    pub rollout_diverged: bool,
    /// Arm-specific learnable-part error: operator-block error for the
    /// training arms, eigenvalue mismatch for the projection arm, and
    /// max |factor − 1| for the selective-noise arm.
    pub learnable_error: f64,
    /// Spectral radius of the zero-energy block of the learned operator
    /// (absent for the projection arm, which has no such block).
    pub unlearnable_block_radius: Option<f64>,
}

struct RemedySetup {
    a: Mat,
    basis: BasisPair,
    a_tilde_11: Mat,
    data: SnapshotData,
    n: usize,
    r: usize,
    sigma: f64,
    dt: Option<f64>,
    rollout_steps: usize,
}

fn remedy_setup(config: &ExperimentConfig) -> Result<RemedySetup> {
    let n = config.n.unwrap_or(default_n(ExperimentKind::Remedies));
    let r = config.r.unwrap_or(default_r(ExperimentKind::Remedies));
    let m = config.m.unwrap_or(128);
    let sigma = config.sigma.unwrap_or(0.05);
    let dt = config.dt;
    let base_seed = config.base_seed();

    let learnable: Vec<Complex64> = if dt.is_some() {
        (0..r).map(|i| Complex64::new(-0.2 - 0.3 * i as f64, 0.0)).collect()
    } else {
        (0..r).map(|i| Complex64::new(0.9 - 0.25 * i as f64, 0.0)).collect()
    };
    let spec = BlockSpec {
        n,
        r,
        learnable_eigenvalues: learnable,
        coupling_scale: 0.4,
        complement: ComplementSpec::Random,
    };
    let (a, basis) = sysgen::build_block_system(&spec, rng::derive_seed(base_seed, 20))?;
    let a_tilde = sysgen::to_svd_basis(&a, &basis)?;
    let a_tilde_11 = a_tilde.view((0, 0), (r, r)).into_owned();

    let mn = (m * n) as f64;
    let sigmas: Vec<f64> = (0..r).map(|i| (0.2 / 4f64.powi(i as i32) * mn).sqrt()).collect();
    let data = sysgen::snapshots_with_energy(&a, &basis, &sigmas, m, dt, rng::derive_seed(base_seed, 21))?;
    Ok(RemedySetup {
        a,
        basis,
        a_tilde_11,
        data,
        n,
        r,
        sigma,
        dt,
        rollout_steps: 200,
    })
}

/// τ→∞ limit of the clean gradient flow: runs the closed form out to 50
/// e-folds of the slowest nonzero data direction. Zero-energy columns stay
/// frozen; the limit is the same for discrete and continuous training.
fn clean_flow_limit(a_hat0: &Mat, a: &Mat, x: &Mat) -> Result<Mat> {
    let f = matcore::svd(x, 0.0)?;
    let smallest = f.singular_values[..f.rank]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mn = (x.nrows() * x.ncols()) as f64;
    let tau = 50.0 * mn / (smallest * smallest);
    flow_closed_discrete(a_hat0, a, x, tau)
}

fn remedy_cell(setup: &RemedySetup, arm: RemedyArm, seed: u64) -> Result<RemedyOutcome> {
    let (n, r) = (setup.n, setup.r);
    let x0 = rng::unit_vector(n, rng::derive_seed(seed, 1));
    let mode = if setup.dt.is_some() {
        RolloutMode::ContinuousEuler
    } else {
        RolloutMode::Discrete
    };

    let block_error = |learned: &Mat| -> Result<f64> {
        let tilde = sysgen::to_svd_basis(learned, &setup.basis)?;
        Ok((tilde.view((0, 0), (r, r)) - &setup.a_tilde_11).norm())
    };
    let unlearnable_radius = |learned: &Mat| -> Result<f64> {
        let tilde = sysgen::to_svd_basis(learned, &setup.basis)?;
        matcore::spectral_radius(&tilde.view((r, r), (n - r, n - r)).into_owned())
    };

    match arm {
        RemedyArm::GlorotBaseline | RemedyArm::GershgorinInit => {
            let kind = match (arm, setup.dt.is_some()) {
                (RemedyArm::GlorotBaseline, _) => InitKind::GlorotNormal,
                (_, false) => InitKind::GershgorinDiscrete,
                (_, true) => InitKind::GershgorinContinuous,
            };
            let a_hat0 = sample_init(&InitScheme { kind, n }, seed)?;
            let learned = clean_flow_limit(&a_hat0, &setup.a, &setup.data.x)?;
            let (_, diverged) = rollout(&learned, &x0, setup.rollout_steps, mode, setup.dt, 1e3)?;
            Ok(RemedyOutcome {
                arm,
                seed,
                spectral_radius: matcore::spectral_radius(&learned)?,
                rollout_diverged: diverged,
                learnable_error: block_error(&learned)?,
                unlearnable_block_radius: Some(unlearnable_radius(&learned)?),
            })
        }
        RemedyArm::Projection => {
            let (reduced, _) = sysgen::project_to_data_subspace(&setup.data, 0.0)?;
            // The reduced data are full rank, so the flow converges to the
            // reduced truth regardless of initialization.
            let a_hat0 = sample_init(&InitScheme { kind: InitKind::GlorotNormal, n: r }, seed)?;
            let reduced_truth = &reduced.x_next * matcore::pinv(&reduced.x, 0.0)?;
            let learned = clean_flow_limit(&a_hat0, &reduced_truth, &reduced.x)?;
            let x0_r = rng::unit_vector(r, rng::derive_seed(seed, 1));
            let (_, diverged) = rollout(&learned, &x0_r, setup.rollout_steps, mode, setup.dt, 1e3)?;
            // For continuous data the reduced least-squares operator is the
            // Euler map; compare generators.
            let learned_generator = match setup.dt {
                None => learned.clone(),
                Some(dt) => (&learned - Mat::identity(r, r)) / dt,
            };
            let mut got = matcore::eig(&learned_generator)?;
            let mut want = matcore::eig(&setup.a_tilde_11)?;
            sort_complex(&mut got);
            sort_complex(&mut want);
            let eig_error = got
                .iter()
                .zip(want.iter())
                .map(|(g, w)| (g - w).norm())
                .fold(0.0, f64::max);
            Ok(RemedyOutcome {
                arm,
                seed,
                spectral_radius: matcore::spectral_radius(&learned)?,
                rollout_diverged: diverged,
                learnable_error: eig_error,
                unlearnable_block_radius: None,
            })
        }
        RemedyArm::Whitening => {
            let (white, w) = sysgen::whiten(&setup.data, 0.0)?;
            let w_inv = w.clone().try_inverse().ok_or_else(|| {
                Error::DegenerateData("whitening operator is singular".into())
            })?;
            let a_white = &w * &setup.a * &w_inv;
            let a_hat0 = sample_init(&InitScheme { kind: InitKind::GlorotNormal, n }, seed)?;
            let learned_white = clean_flow_limit(&a_hat0, &a_white, &white.x)?;
            let learned = &w_inv * learned_white * &w;
            let (_, diverged) = rollout(&learned, &x0, setup.rollout_steps, mode, setup.dt, 1e3)?;
            Ok(RemedyOutcome {
                arm,
                seed,
                spectral_radius: matcore::spectral_radius(&learned)?,
                rollout_diverged: diverged,
                learnable_error: block_error(&learned)?,
                unlearnable_block_radius: Some(unlearnable_radius(&learned)?),
            })
        }
        RemedyArm::SelectiveNoise => {
            let noisy = sysgen::inject_noise(
                &setup.data,
                setup.sigma,
                rng::derive_seed(seed, 2),
                NoiseStructure::Iid,
                Some(&setup.basis),
            )?;
            let rec = noisy.noise.as_ref().expect("sigma > 0");
            let a_hat0 = sample_init(&InitScheme { kind: InitKind::GlorotNormal, n }, seed)?;
            let learned = match setup.dt {
                None => flow_closed_discrete_noisy(
                    &a_hat0,
                    &setup.a,
                    &setup.data.x,
                    &rec.x_noise,
                    &rec.x_next_noise,
                    Tau::Infinity,
                )?,
                Some(dt) => flow_closed_continuous_noisy(
                    &a_hat0,
                    &setup.a,
                    &setup.data.x,
                    &rec.x_noise,
                    &rec.x_next_noise,
                    dt,
                    Tau::Infinity,
                )?,
            };
            let (_, diverged) = rollout(&learned, &x0, setup.rollout_steps, mode, setup.dt, 1e3)?;
            // Per-direction multiplicative factor on the learnable columns;
            // selective noise must leave them unbiased.
            let tilde = sysgen::to_svd_basis(&learned, &setup.basis)?;
            let a_tilde = sysgen::to_svd_basis(&setup.a, &setup.basis)?;
            let mut factor_error = 0.0f64;
            for i in 0..r {
                let truth = a_tilde.column(i);
                let factor = truth.dot(&tilde.column(i)) / truth.dot(&truth);
                factor_error = factor_error.max((factor - 1.0).abs());
            }
            Ok(RemedyOutcome {
                arm,
                seed,
                spectral_radius: matcore::spectral_radius(&learned)?,
                rollout_diverged: diverged,
                learnable_error: factor_error,
                unlearnable_block_radius: Some(unlearnable_radius(&learned)?),
            })
        }
    }
}

fn sort_complex(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
}

/// Computes the full remedies comparison table without touching the
/// filesystem. The runner and the acceptance suite share this path.
pub fn remedies_outcomes(config: &ExperimentConfig) -> Result<Vec<RemedyOutcome>> {
    let setup = remedy_setup(config)?;
    let trials = config.trials.unwrap_or(200);
    let base_seed = config.base_seed();
    let cells: Vec<Result<Vec<RemedyOutcome>>> = (0..trials)
        .into_par_iter()
        .map(|s| {
            let seed = base_seed.wrapping_add(s as u64);
            RemedyArm::ALL
                .iter()
                .map(|arm| remedy_cell(&setup, *arm, seed))
                .collect()
        })
        .collect();
    let mut outcomes = Vec::with_capacity(trials * RemedyArm::ALL.len());
    for cell in cells {
        outcomes.extend(cell?);
    }
    Ok(outcomes)
}

/// Five-arm comparison of the stability remedies on rank-deficient data.
pub fn run_remedies(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let dir = config.output_dir();
    let metadata = MetadataWriter::begin(config, &dir)?;
    let outcomes = remedies_outcomes(config)?;

    let mut csv = CsvFile::create(
        &dir.join("remedies.csv"),
        "arm,seed,spectral_radius_learned,rollout_diverged,learnable_error",
    )?;
    for out in &outcomes {
        csv.row(&[
            out.arm.name().to_string(),
            out.seed.to_string(),
            fmt_real(out.spectral_radius),
            out.rollout_diverged.to_string(),
            fmt_real(out.learnable_error),
        ])?;
    }
    Ok(RunArtifacts {
        csv_paths: vec![csv.finish()?],
        metadata_path: metadata.finish(config)?,
    })
}

// ── Rollout ──────────────────────────────────────────────────────────

/// Long-horizon rollouts of sampled initializers: writes one trajectory CSV
/// per scheme plus a divergence summary.
pub fn run_rollout(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let dir = config.output_dir();
    let metadata = MetadataWriter::begin(config, &dir)?;
    let n = config.n.unwrap_or(8);
    let steps = config.m.unwrap_or(200);
    let seeds = config.trials.unwrap_or(10);
    let base_seed = config.base_seed();
    let dt = config.dt;
    let mode = if dt.is_some() {
        RolloutMode::ContinuousEuler
    } else {
        RolloutMode::Discrete
    };
    let schemes = config.schemes.clone().unwrap_or_else(|| {
        if dt.is_some() {
            vec![
                InitScheme { kind: InitKind::GlorotNormal, n },
                InitScheme { kind: InitKind::GershgorinContinuous, n },
            ]
        } else {
            vec![
                InitScheme { kind: InitKind::GlorotNormal, n },
                InitScheme { kind: InitKind::GershgorinDiscrete, n },
            ]
        }
    });

    let mut csv_paths = Vec::new();
    let mut summary = CsvFile::create(
        &dir.join("rollout_summary.csv"),
        "scheme,n,seed,diverged,steps_taken,final_norm",
    )?;
    for scheme in &schemes {
        let traj_name = format!("rollout_traj_{}_n{}.csv", scheme.kind.name(), scheme.n);
        let mut traj = CsvFile::create(&dir.join(&traj_name), "seed,step,norm")?;
        let mut series = Vec::new();
        for s in 0..seeds {
            let seed = base_seed.wrapping_add(s as u64);
            let a_hat = sample_init(scheme, seed)?;
            let x0 = rng::unit_vector(scheme.n, rng::derive_seed(seed, 1));
            let (trajectory, diverged) = rollout(&a_hat, &x0, steps, mode, dt, 1e3)?;
            for step in &trajectory {
                traj.row(&[seed.to_string(), step.step.to_string(), fmt_real(step.norm)])?;
            }
            let last = trajectory.last().expect("nonempty trajectory");
            summary.row(&[
                scheme.kind.name().to_string(),
                scheme.n.to_string(),
                seed.to_string(),
                diverged.to_string(),
                last.step.to_string(),
                fmt_real(last.norm),
            ])?;
            series.push((
                format!("seed {seed}"),
                trajectory
                    .iter()
                    .map(|p| (p.step as f64, (p.norm.max(1e-300)).log10()))
                    .collect(),
            ));
        }
        csv_paths.push(traj.finish()?);
        if config.emit_svg {
            let svg_name = format!("rollout_{}_n{}.svg", scheme.kind.name(), scheme.n);
            let title = format!("log10 state norm, {} n={}", scheme.kind.name(), scheme.n);
            svg::write_lines_svg(&series, &title, &dir.join(svg_name))?;
        }
    }
    csv_paths.insert(0, summary.finish()?);
    Ok(RunArtifacts {
        csv_paths,
        metadata_path: metadata.finish(config)?,
    })
}

// Shared test-facing helpers live on the module so the acceptance suite can
// reuse the exact computation paths.
pub use self::noise_bias_support::noise_bias_table;

mod noise_bias_support {
    use super::*;

    /// Runs the noise-bias Monte Carlo at explicit settings and returns the
    /// rows (no files written).
    #[allow(clippy::too_many_arguments)]
    pub fn noise_bias_table(
        n: usize,
        r: usize,
        m: usize,
        base_sigma: f64,
        sigma_grid: &[f64],
        trials: usize,
        dt: Option<f64>,
        base_seed: u64,
    ) -> Result<(Vec<BiasRow>, Mat)> {
        let system = bias_system(n, r, m, base_sigma, dt, base_seed)?;
        let rows = noise_bias_rows(&system, sigma_grid, trials, dt, base_seed)?;
        Ok((rows, system.a_tilde))
    }
}
