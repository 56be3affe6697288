//! Eigenvalue statistics of weight initializers. Glorot spectra fill a disk
//! whose finite-n tail spills outside the unit circle (phi > 0), while the
//! Gershgorin family is confined by construction: inside the unit circle
//! for discrete time, in the left half plane for continuous time.

use trainflow::initgen::{spectrum_stats, GridSpec, InitKind, InitScheme};

fn main() {
    let grid = GridSpec::default();
    println!(
        "{:>28} {:>5} {:>8} {:>10} {:>12} {:>10}",
        "scheme", "n", "trials", "phi", "frac Re>0", "max |λ|"
    );
    let cases = [
        (InitKind::GlorotNormal, 8, 2000),
        (InitKind::GlorotNormal, 64, 500),
        (InitKind::GlorotUniform, 64, 500),
        (InitKind::GershgorinDiscrete, 64, 500),
        (InitKind::GershgorinDiscreteRownorm, 64, 500),
        (InitKind::GershgorinContinuous, 64, 500),
    ];
    for (kind, n, trials) in cases {
        let stats = spectrum_stats(&InitScheme { kind, n }, trials, 0, &grid).unwrap();
        let max_modulus = stats.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
        println!(
            "{:>28} {:>5} {:>8} {:>10.4} {:>12.4} {:>10.4}",
            kind.name(),
            n,
            trials,
            stats.phi,
            stats.frac_positive_real,
            max_modulus
        );
    }
    println!("\nGlorot: phi > 0 (unstable initializations possible) and half the");
    println!("eigenvalues sit in the right half plane — fatal for continuous time.");
    println!("Gershgorin discrete: phi = 0 always. Gershgorin continuous: Re λ <= 0 always.");
}
