use rand::Rng;
use rayon::prelude::*;

use super::{estimate, DecomposeConfig, DecompositionSample, TrialBundle};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub std_errs: [f64; 6],
    pub successful: usize,
    pub dropped: usize,
    /// Entries of each successful replication, in replication order.
    pub draws: Vec<[f64; 6]>,
}

/// Resamples phase II and phase III trials (each with all its outcomes)
/// with replacement and reruns the whole estimation per replication.
/// Replication r draws from stream r of the master seed.
pub fn bootstrap(sample: &DecompositionSample<'_>, cfg: &DecomposeConfig) -> Result<BootstrapResult> {
    let reps = cfg.bootstrap_reps;
    let results: Vec<Option<[f64; 6]>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, r as u64);
            let draw = |pool: &'_ [TrialBundle<'_>], rng: &mut rng::StreamRng| -> Vec<usize> {
                (0..pool.len()).map(|_| rng.random_range(0..pool.len())).collect()
            };
            let i2 = draw(&sample.ph2, &mut rng);
            let i3 = draw(&sample.ph3, &mut rng);
            let ph2: Vec<&TrialBundle<'_>> = i2.iter().map(|&i| &sample.ph2[i]).collect();
            let ph3: Vec<&TrialBundle<'_>> = i3.iter().map(|&i| &sample.ph3[i]).collect();
            estimate(&ph2, &ph3, cfg).ok().map(|e| e.shares.entries())
        })
        .collect();
    let draws: Vec<[f64; 6]> = results.iter().flatten().copied().collect();
    let dropped = reps - draws.len();
    if dropped as f64 > cfg.max_failed_share * reps as f64 || draws.len() < 2 {
        return Err(Error::Bootstrap {
            dropped,
            total: reps,
        });
    }
    let m = draws.len() as f64;
    let mut std_errs = [0.0; 6];
    for (e, se) in std_errs.iter_mut().enumerate() {
        let mean = draws.iter().map(|d| d[e]).sum::<f64>() / m;
        *se = (draws.iter().map(|d| (d[e] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    }
    Ok(BootstrapResult {
        std_errs,
        successful: draws.len(),
        dropped,
        draws,
    })
}
