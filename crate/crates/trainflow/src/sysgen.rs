//! Construction of linear systems and snapshot datasets: invariant-subspace
//! block systems, discrete and continuous trajectory data, structured noise
//! injection, and the data-side remedies (whitening, projection onto the
//! data subspace).
//!
//! All constructors are pure and seed-parameterized; identical inputs give
//! bitwise-identical outputs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcore::{self, Mat};
use crate::rng;

/// Orthogonal basis whose first `rank` columns span a distinguished
/// subspace (the data/invariant subspace).
#[derive(Debug, Clone)]
pub struct BasisPair {
    /// Orthogonal n×n matrix.
    pub u: Mat,
    /// Number of leading columns spanning the distinguished subspace.
    pub rank: usize,
}

impl BasisPair {
    pub fn new(u: Mat, rank: usize) -> Result<Self> {
        let n = u.nrows();
        if u.ncols() != n {
            return Err(Error::NonSquare {
                context: "BasisPair",
                rows: u.nrows(),
                cols: u.ncols(),
            });
        }
        if rank > n {
            return Err(Error::Config(format!(
                "BasisPair rank {rank} exceeds dimension {n}"
            )));
        }
        let defect = (u.transpose() * &u - Mat::identity(n, n)).abs().max();
        if defect > 1e-10 {
            return Err(Error::Config(format!(
                "BasisPair matrix is not orthogonal (defect {defect:.3e})"
            )));
        }
        Ok(Self { u, rank })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// First `rank` columns (the distinguished subspace).
    pub fn leading(&self) -> Mat {
        self.u.columns(0, self.rank).into_owned()
    }

    /// Remaining columns (the orthogonal complement).
    pub fn complement(&self) -> Mat {
        self.u.columns(self.rank, self.dim() - self.rank).into_owned()
    }
}

/// How noise columns are correlated across the snapshot pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStructure {
    /// All entries of both noise matrices independent.
    Iid,
    /// Within each trajectory, the noise column added to the successor at
    /// step i equals the noise column added to the state at step i+1,
    /// mimicking noise on a single long measured trajectory.
    TrajectoryShifted,
}

/// Record of the noise that was added to a dataset.
#[derive(Debug, Clone)]
pub struct NoiseRecord {
    /// Noise added to the state matrix.
    pub x_noise: Mat,
    /// Noise added to the successor matrix.
    pub x_next_noise: Mat,
    pub sigma: f64,
    pub structure: NoiseStructure,
    pub seed: u64,
}

/// Paired snapshot matrices: columns of `x` are states, columns of
/// `x_next` the corresponding successors (one step for discrete systems,
/// time `dt` apart for continuous ones).
#[derive(Debug, Clone)]
pub struct SnapshotData {
    pub x: Mat,
    pub x_next: Mat,
    /// Present iff the data come from a continuous-time system.
    pub dt: Option<f64>,
    /// Snapshot pairs per trajectory; columns are grouped trajectory-major.
    pub steps_per_trajectory: usize,
    /// Noise added on top of the clean snapshots, if any.
    pub noise: Option<NoiseRecord>,
}

impl SnapshotData {
    /// Wraps explicit snapshot matrices as a single-step-per-column dataset.
    pub fn from_pairs(x: Mat, x_next: Mat, dt: Option<f64>) -> Result<Self> {
        if x.shape() != x_next.shape() {
            return Err(Error::DimensionMismatch {
                context: "SnapshotData",
                details: format!("x is {:?}, x_next is {:?}", x.shape(), x_next.shape()),
            });
        }
        if x.ncols() == 0 {
            return Err(Error::Config("snapshot data needs at least one pair".into()));
        }
        if let Some(dt) = dt {
            if dt <= 0.0 {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(Self {
            x,
            x_next,
            dt,
            steps_per_trajectory: 1,
            noise: None,
        })
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.x.nrows()
    }

    /// Number of snapshot pairs m.
    pub fn num_pairs(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_continuous(&self) -> bool {
        self.dt.is_some()
    }

    /// Noise standard deviation (0 for clean data).
    pub fn noise_sigma(&self) -> f64 {
        self.noise.as_ref().map_or(0.0, |n| n.sigma)
    }

    pub fn noise_structure(&self) -> Option<NoiseStructure> {
        self.noise.as_ref().map(|n| n.structure)
    }
}

/// Eigenvalues prescribed for the complement block of a
/// [`BlockSpec`], or a random (Glorot-normal) block.
#[derive(Debug, Clone)]
pub enum ComplementSpec {
    Eigenvalues(Vec<Complex64>),
    Random,
}

/// Specification of an n-dimensional system with an r-dimensional invariant
/// subspace: in a random orthogonal basis the system matrix is block upper
/// triangular, with the leading r×r block carrying the prescribed learnable
/// eigenvalues.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub n: usize,
    pub r: usize,
    /// Spectrum of the invariant-subspace block; must be closed under
    /// conjugation.
    pub learnable_eigenvalues: Vec<Complex64>,
    /// Magnitude of the coupling block entries.
    pub coupling_scale: f64,
    pub complement: ComplementSpec,
}

/// Real matrix with the given spectrum: real canonical blocks conjugated by
/// a seeded random orthogonal similarity. The eigenvalue list must be
/// closed under conjugation.
pub fn real_matrix_with_spectrum(eigenvalues: &[Complex64], seed: u64) -> Result<Mat> {
    let blocks = pair_conjugates(eigenvalues)?;
    let k = eigenvalues.len();
    let mut d = Mat::zeros(k, k);
    let mut i = 0;
    for block in blocks {
        match block {
            SpectrumBlock::Real(a) => {
                d[(i, i)] = a;
                i += 1;
            }
            SpectrumBlock::Pair(a, b) => {
                d[(i, i)] = a;
                d[(i, i + 1)] = b;
                d[(i + 1, i)] = -b;
                d[(i + 1, i + 1)] = a;
                i += 2;
            }
        }
    }
    if k <= 1 {
        return Ok(d);
    }
    let q = rng::random_orthogonal(k, seed);
    Ok(&q * d * q.transpose())
}

enum SpectrumBlock {
    Real(f64),
    Pair(f64, f64),
}

fn pair_conjugates(eigenvalues: &[Complex64]) -> Result<Vec<SpectrumBlock>> {
    const TOL: f64 = 1e-12;
    let mut blocks = Vec::new();
    let mut pending: Vec<Complex64> = eigenvalues.to_vec();
    pending.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    while let Some(l) = pending.pop() {
        if l.im.abs() <= TOL {
            blocks.push(SpectrumBlock::Real(l.re));
            continue;
        }
        let conj = pending
            .iter()
            .position(|c| (c.re - l.re).abs() <= TOL && (c.im + l.im).abs() <= TOL);
        match conj {
            Some(pos) => {
                pending.swap_remove(pos);
                blocks.push(SpectrumBlock::Pair(l.re, l.im.abs()));
            }
            None => {
                return Err(Error::Config(format!(
                    "eigenvalue list not closed under conjugation: {l} has no partner"
                )))
            }
        }
    }
    Ok(blocks)
}

/// Builds a system matrix with an invariant subspace per `spec`, together
/// with the orthogonal basis in which it is block upper triangular.
pub fn build_block_system(spec: &BlockSpec, seed: u64) -> Result<(Mat, BasisPair)> {
    let (n, r) = (spec.n, spec.r);
    if r == 0 || r > n {
        return Err(Error::Config(format!(
            "invariant-subspace dimension must satisfy 1 <= r <= n, got r={r}, n={n}"
        )));
    }
    if spec.learnable_eigenvalues.len() != r {
        return Err(Error::Config(format!(
            "expected {r} learnable eigenvalues, got {}",
            spec.learnable_eigenvalues.len()
        )));
    }

    let mut tilde = Mat::zeros(n, n);
    let a11 = real_matrix_with_spectrum(&spec.learnable_eigenvalues, rng::derive_seed(seed, 1))?;
    tilde.view_mut((0, 0), (r, r)).copy_from(&a11);

    let q = n - r;
    if q > 0 {
        let a12 = rng::gaussian_mat(r, q, spec.coupling_scale, rng::derive_seed(seed, 2));
        tilde.view_mut((0, r), (r, q)).copy_from(&a12);
        let a22 = match &spec.complement {
            ComplementSpec::Eigenvalues(eigs) => {
                if eigs.len() != q {
                    return Err(Error::Config(format!(
                        "expected {q} complement eigenvalues, got {}",
                        eigs.len()
                    )));
                }
                real_matrix_with_spectrum(eigs, rng::derive_seed(seed, 3))?
            }
            // An uninformed Glorot-normal block: variance 1/q.
            ComplementSpec::Random => {
                rng::gaussian_mat(q, q, (1.0 / q as f64).sqrt(), rng::derive_seed(seed, 3))
            }
        };
        tilde.view_mut((r, r), (q, q)).copy_from(&a22);
    }

    let u = rng::random_orthogonal(n, rng::derive_seed(seed, 0));
    let a = &u * tilde * u.transpose();
    Ok((a, BasisPair { u, rank: r }))
}

/// Generates discrete-time trajectory snapshots: each column of
/// `initial_states` seeds a trajectory of `steps` pairs with
/// `x_next = A·x` exactly.
pub fn discrete_pairs(a: &Mat, initial_states: &Mat, steps: usize) -> Result<SnapshotData> {
    propagate_pairs(a, initial_states, steps, None)
}

/// Time propagation used for continuous-time snapshot generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimePropagation {
    /// `x_next = exp(A·dt)·x` — the true flow.
    Exact,
    /// `x_next = (I + A·dt)·x` — forward Euler; makes the Euler-loss
    /// closed-form identities exact.
    Euler,
}

/// Generates continuous-time snapshot pairs separated by `dt`.
pub fn continuous_pairs(
    a: &Mat,
    dt: f64,
    initial_states: &Mat,
    steps: usize,
    method: TimePropagation,
) -> Result<SnapshotData> {
    if dt <= 0.0 {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    matcore::check_square(a, "continuous_pairs")?;
    let n = a.nrows();
    let propagator = match method {
        TimePropagation::Exact => matcore::matexp(&(a * dt))?,
        TimePropagation::Euler => Mat::identity(n, n) + a * dt,
    };
    let mut data = propagate_with(&propagator, initial_states, steps)?;
    data.dt = Some(dt);
    Ok(data)
}

fn propagate_pairs(
    a: &Mat,
    initial_states: &Mat,
    steps: usize,
    dt: Option<f64>,
) -> Result<SnapshotData> {
    matcore::check_square(a, "discrete_pairs")?;
    let mut data = propagate_with(a, initial_states, steps)?;
    data.dt = dt;
    Ok(data)
}

fn propagate_with(propagator: &Mat, initial_states: &Mat, steps: usize) -> Result<SnapshotData> {
    let n = propagator.nrows();
    if initial_states.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "snapshot generation",
            details: format!(
                "system is {n}-dimensional but initial states have {} rows",
                initial_states.nrows()
            ),
        });
    }
    let k = initial_states.ncols();
    if k == 0 || steps == 0 {
        return Err(Error::Config(
            "need at least one initial state and one step".into(),
        ));
    }

    let m = k * steps;
    let mut x = Mat::zeros(n, m);
    let mut x_next = Mat::zeros(n, m);
    for traj in 0..k {
        let mut state = initial_states.column(traj).into_owned();
        for step in 0..steps {
            let next = propagator * &state;
            let col = traj * steps + step;
            x.set_column(col, &state);
            x_next.set_column(col, &next);
            state = next;
        }
    }
    Ok(SnapshotData {
        x,
        x_next,
        dt: None,
        steps_per_trajectory: steps,
        noise: None,
    })
}

/// Builds a snapshot dataset confined to the leading subspace of `basis`,
/// with exactly the prescribed singular values. With `dt` present the
/// successors follow the forward-Euler map `(I + A·dt)`, otherwise the
/// discrete map `A`.
///
/// Gives direct control over the per-direction energy of the data, which
/// trajectory generation only provides implicitly.
pub fn snapshots_with_energy(
    a: &Mat,
    basis: &BasisPair,
    singular_values: &[f64],
    m: usize,
    dt: Option<f64>,
    seed: u64,
) -> Result<SnapshotData> {
    let k = singular_values.len();
    let n = basis.dim();
    if k == 0 || k > basis.rank {
        return Err(Error::Config(format!(
            "need 1..=rank singular values, got {k} (rank {})",
            basis.rank
        )));
    }
    if m < k {
        return Err(Error::Config(format!(
            "need at least {k} snapshot pairs for {k} prescribed singular values, got {m}"
        )));
    }
    if a.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "snapshots_with_energy",
            details: format!("system is {:?} but basis dimension is {n}", a.shape()),
        });
    }

    let directions = basis.u.columns(0, k).into_owned();
    let right = rng::random_orthonormal_columns(m, k, seed);
    let mut scaled = Mat::zeros(k, m);
    for (i, s) in singular_values.iter().enumerate() {
        if *s < 0.0 {
            return Err(Error::Config("singular values must be non-negative".into()));
        }
        scaled.set_row(i, &(right.column(i).transpose() * *s));
    }
    let x = directions * scaled;
    let x_next = match dt {
        Some(dt) if dt > 0.0 => &x + a * &x * dt,
        Some(dt) => return Err(Error::Config(format!("dt must be positive, got {dt}"))),
        None => a * &x,
    };
    Ok(SnapshotData {
        x,
        x_next,
        dt,
        steps_per_trajectory: 1,
        noise: None,
    })
}

/// Adds zero-mean Gaussian noise of variance sigma² to both snapshot
/// matrices. With a `subspace_mask`, the noise support is restricted to the
/// orthogonal complement of the mask's leading subspace.
pub fn inject_noise(
    data: &SnapshotData,
    sigma: f64,
    seed: u64,
    structure: NoiseStructure,
    subspace_mask: Option<&BasisPair>,
) -> Result<SnapshotData> {
    if sigma < 0.0 {
        return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(data.clone());
    }
    let n = data.state_dim();
    let m = data.num_pairs();
    if let Some(mask) = subspace_mask {
        if mask.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "inject_noise",
                details: format!("mask dimension {} vs data dimension {n}", mask.dim()),
            });
        }
        if mask.rank == n {
            // Empty complement: nothing to perturb.
            return Ok(data.clone());
        }
    }

    // Effective row dimension of the raw noise stream.
    let q = subspace_mask.map_or(n, |mask| n - mask.rank);
    let (raw_x, raw_next) = match structure {
        NoiseStructure::Iid => {
            let mut rng = rng::rng_from(seed);
            (
                fill_gaussian(&mut rng, q, m, sigma),
                fill_gaussian(&mut rng, q, m, sigma),
            )
        }
        NoiseStructure::TrajectoryShifted => shifted_noise(data, q, m, sigma, seed),
    };
    let (x_noise, x_next_noise) = match subspace_mask {
        Some(mask) => {
            let complement = mask.complement();
            (&complement * raw_x, &complement * raw_next)
        }
        None => (raw_x, raw_next),
    };

    Ok(SnapshotData {
        x: &data.x + &x_noise,
        x_next: &data.x_next + &x_next_noise,
        dt: data.dt,
        steps_per_trajectory: data.steps_per_trajectory,
        noise: Some(NoiseRecord {
            x_noise,
            x_next_noise,
            sigma,
            structure,
            seed,
        }),
    })
}

fn fill_gaussian(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize, sigma: f64) -> Mat {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    m
}

/// Per trajectory of length L, draws L+1 fresh noise columns w_0..w_L; the
/// state matrix receives w_0..w_{L-1} and the successor matrix w_1..w_L.
fn shifted_noise(data: &SnapshotData, q: usize, m: usize, sigma: f64, seed: u64) -> (Mat, Mat) {
    let steps = data.steps_per_trajectory.max(1);
    let trajectories = m / steps;
    debug_assert_eq!(trajectories * steps, m);
    let mut rng = rng::rng_from(seed);
    let mut x_noise = Mat::zeros(q, m);
    let mut next_noise = Mat::zeros(q, m);
    for traj in 0..trajectories {
        let stream = fill_gaussian(&mut rng, q, steps + 1, sigma);
        for step in 0..steps {
            let col = traj * steps + step;
            x_noise.set_column(col, &stream.column(step));
            next_noise.set_column(col, &stream.column(step + 1));
        }
    }
    (x_noise, next_noise)
}

/// Rescales the data so every retained direction carries unit energy: in
/// the left-singular basis of `x`, directions with singular value above the
/// tolerance are scaled to 1; zero-energy directions keep unit gain.
///
/// The transform is computed from whatever `x` it is given, noisy or clean;
/// the returned matrix is the whitening operator W that was applied.
pub fn whiten(data: &SnapshotData, tol: f64) -> Result<(SnapshotData, Mat)> {
    let f = matcore::svd(&data.x, tol)?;
    if f.rank == 0 {
        return Err(Error::DegenerateData(
            "all singular values are zero; nothing to whiten".into(),
        ));
    }
    let n = data.state_dim();
    let mut gains = Mat::identity(n, n);
    for i in 0..f.rank.min(n) {
        gains[(i, i)] = 1.0 / f.singular_values[i];
    }
    let w = &f.u * gains * f.u.transpose();

    let noise = data.noise.as_ref().map(|rec| NoiseRecord {
        x_noise: &w * &rec.x_noise,
        x_next_noise: &w * &rec.x_next_noise,
        sigma: rec.sigma,
        structure: rec.structure,
        seed: rec.seed,
    });
    Ok((
        SnapshotData {
            x: &w * &data.x,
            x_next: &w * &data.x_next,
            dt: data.dt,
            steps_per_trajectory: data.steps_per_trajectory,
            noise,
        },
        w,
    ))
}

/// Projects the data onto the span of the left singular vectors of `x`
/// with singular value above the tolerance, returning the reduced r×m
/// dataset and the basis that was used.
pub fn project_to_data_subspace(
    data: &SnapshotData,
    tol: f64,
) -> Result<(SnapshotData, BasisPair)> {
    let f = matcore::svd(&data.x, tol)?;
    let n = data.state_dim();
    let rank = f.rank.min(n);
    if rank == 0 {
        return Err(Error::DegenerateData(
            "data have rank zero; no subspace to project onto".into(),
        ));
    }
    let leading = f.u.columns(0, rank).transpose();
    let noise = data.noise.as_ref().map(|rec| NoiseRecord {
        x_noise: &leading * &rec.x_noise,
        x_next_noise: &leading * &rec.x_next_noise,
        sigma: rec.sigma,
        structure: rec.structure,
        seed: rec.seed,
    });
    Ok((
        SnapshotData {
            x: &leading * &data.x,
            x_next: &leading * &data.x_next,
            dt: data.dt,
            steps_per_trajectory: data.steps_per_trajectory,
            noise,
        },
        BasisPair { u: f.u, rank },
    ))
}

/// Expresses an operator in the given basis: `Uᵀ · A · U`.
pub fn to_svd_basis(a_hat: &Mat, basis: &BasisPair) -> Result<Mat> {
    let n = basis.dim();
    if a_hat.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "to_svd_basis",
            details: format!("operator is {:?}, basis is {n}x{n}", a_hat.shape()),
        });
    }
    Ok(basis.u.transpose() * a_hat * &basis.u)
}
