//! Fixtures shared by the benchmarks in `benches/`.

use prodnet::{init_economy, EconomyState, InitSpec, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameters of the evolving economy used throughout the benchmarks.
pub fn params(m: usize) -> ModelParams {
    ModelParams {
        m,
        theta: 0.5,
        tau_p: 0.8,
        tau_w: 0.8,
        rho_chg: 0.01,
        p_new: 0.05,
        ..Default::default()
    }
}

/// A freshly initialized economy of `m` firms, advanced `warmup` periods.
pub fn warm_state(m: usize, warmup: u64, seed: u64) -> EconomyState {
    let mut s = init_economy(&params(m), &InitSpec::default(), seed).expect("valid fixture");
    for _ in 0..warmup {
        prodnet::market::step_period(&mut s).expect("step");
    }
    s
}

/// Pareto samples with ccdf exponent `alpha` above 1.
pub fn pareto_samples(n: usize, alpha: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / alpha)).collect()
}
