//! Runs one short chain on the benchmark fixture, for use under a profiler.

use rswitch_bench::negbin_fixture;
use rswitch_core::sampler::{run_chain, SamplerConfig};

fn main() {
    let sweeps: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let f = negbin_fixture(300, 50);
    let config = SamplerConfig { draws: sweeps, burn_in: sweeps / 2, thin: 1, n_chains: 1, ..SamplerConfig::default() };
    let start = std::time::Instant::now();
    let r = run_chain(&f.panel, &f.spec, &f.layout, &f.prior, &config, 0, None).expect("chain runs");
    println!("{} sweeps in {:?}; last log-likelihood {}", sweeps, start.elapsed(), r.loglik.last().unwrap());
}
