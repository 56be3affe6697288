//! Head-to-head comparison of the instability remedies on rank-deficient
//! data: Glorot baseline, Gershgorin initialization, projection onto the
//! data subspace, whitening, and selective noise in the zero-energy
//! directions.

use trainflow::bench::{remedies_outcomes, ExperimentConfig, ExperimentKind, RemedyArm};

fn main() {
    let config = ExperimentConfig {
        experiment: ExperimentKind::Remedies,
        n: Some(6),
        r: Some(3),
        m: None,
        dt: None,
        sigma: None,
        trials: Some(100),
        base_seed: Some(0),
        schemes: None,
        tau_grid: None,
        output_dir: None,
        emit_svg: false,
    };
    let outcomes = remedies_outcomes(&config).unwrap();

    println!("n = 6, data rank r = 3, 100 seeds per arm\n");
    println!(
        "{:>18} {:>10} {:>10} {:>12} {:>16}",
        "arm", "unstable", "diverged", "max rho", "max learn err"
    );
    for arm in RemedyArm::ALL {
        let rows: Vec<_> = outcomes.iter().filter(|o| o.arm == arm).collect();
        let unstable = rows.iter().filter(|o| o.spectral_radius >= 1.0).count();
        let diverged = rows.iter().filter(|o| o.rollout_diverged).count();
        let max_rho = rows.iter().map(|o| o.spectral_radius).fold(0.0f64, f64::max);
        let max_err = rows.iter().map(|o| o.learnable_error).fold(0.0f64, f64::max);
        println!(
            "{:>18} {:>10} {:>10} {:>12.4} {:>16.3e}",
            arm.name(),
            unstable,
            diverged,
            max_rho,
            max_err
        );
    }
    println!("\nThe Glorot baseline leaves whatever the initialization put in the");
    println!("zero-energy directions, and some seeds are unstable. Each remedy");
    println!("removes the instability: Gershgorin by construction, projection by");
    println!("discarding the directions, selective noise by erasing them.");
}
