//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs every criterion by default. `RSWITCH_ACCEPTANCE=1,2,5` restricts the
//! run to a subset (criteria 4, 6, 8 and 9 reuse the recovery fits of 3).

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ContinuousCDF};

use rswitch_core::analysis::{
    gof_pvalue, log_marginal_likelihood, posterior_mean_point, psrf_mpsrf, resolve_labels, summarize,
};
use rswitch_core::datagen::{simulate_counts, simulate_severities, simulate_states, simulate_y, standard_normal_design, SimRecipe};
use rswitch_core::mle;
use rswitch_core::model::{log_mnl, log_negbin, log_poisson};
use rswitch_core::priors::{default_transition_prior, derive_prior_from_baselines, log_joint, log_likelihood, CoefPrior, PriorSpec};
use rswitch_core::sampler::states::{sample_state_block, LnTransitions};
use rswitch_core::sampler::tbeta::{Bound, TruncatedBeta};
use rswitch_core::sampler::{gibbs_update_transitions, run_chains, ChainResult, ParamPoint, SamplerConfig};
use rswitch_core::switching::build_weekly_layout;
use rswitch_core::{Dataset, Family, ModelSpec, Panel, StateParams, StateVector, SwitchingLayout, TransitionProbs};

const KS_ALPHA: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn covariate_names(k: usize) -> Vec<String> {
    std::iter::once("intercept".to_string()).chain((1..k).map(|i| format!("x{i}"))).collect()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Two-sided one-sample KS statistic of `sample` against `cdf`.
fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic Kolmogorov p-value with the Stephens small-sample correction.
fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// CDF of Beta(a, b) truncated to `[lo, hi]` by cumulative trapezoid
/// quadrature of the unnormalized density, interpolated linearly.
struct QuadratureCdf {
    lo: f64,
    h: f64,
    cum: Vec<f64>,
}

impl QuadratureCdf {
    fn new(a: f64, b: f64, lo: f64, hi: f64, intervals: usize) -> Self {
        let h = (hi - lo) / intervals as f64;
        let ln_f = |x: f64| (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln();
        let grid: Vec<f64> = (0..=intervals).map(|i| ln_f(lo + i as f64 * h)).collect();
        let peak = grid.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = grid.iter().map(|v| if v.is_finite() { (v - peak).exp() } else { 0.0 }).collect();
        let mut cum = vec![0.0; intervals + 1];
        for i in 1..=intervals {
            cum[i] = cum[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
        }
        let total = cum[intervals];
        cum.iter_mut().for_each(|c| *c /= total);
        QuadratureCdf { lo, h, cum }
    }

    fn cdf(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.h;
        if pos <= 0.0 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.cum.len() {
            return 1.0;
        }
        let w = pos - i as f64;
        self.cum[i] * (1.0 - w) + self.cum[i + 1] * w
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let periods = 200;
    let layout = build_weekly_layout(vec![1; periods]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let s = simulate_states(&layout, &TransitionProbs::uniform(1, 0.1, 0.3), &mut rng).unwrap();
    let (mut m00, mut m01) = (0u64, 0u64);
    for w in s.0.windows(2) {
        match (w[0], w[1]) {
            (0, 0) => m00 += 1,
            (0, 1) => m01 += 1,
            _ => {}
        }
    }
    let p10 = 0.12;
    let prior = PriorSpec { coef: CoefPrior { mu: vec![], sigma2: vec![] }, trans: default_transition_prior() };
    let mut theta = ParamPoint { free: vec![], trans: TransitionProbs::uniform(1, 0.05, p10), s };
    let draws = 100_000;
    let mut sample = Vec::with_capacity(draws);
    for _ in 0..draws {
        theta.trans.p10[0] = p10;
        gibbs_update_transitions(&mut theta, &layout, &prior, &mut rng).unwrap();
        sample.push(theta.trans.p01[0]);
    }
    let violations = sample.iter().filter(|&&p| !(0.0..=p10).contains(&p)).count();
    let oracle = QuadratureCdf::new(m01 as f64 + 1.0, m00 as f64 + 1.0, 0.0, p10, 200_000);
    let d = ks_statistic(&mut sample, |x| oracle.cdf(x));
    let p = ks_pvalue(d, draws);
    let elapsed = start.elapsed();
    outcome(
        p > KS_ALPHA && violations == 0 && elapsed < Duration::from_secs(10),
        format!("m01={m01} m00={m00} p10={p10}: KS D={d:.5} p={p:.3}, bound violations {violations}, {:.1}s", secs(elapsed)),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let periods = 10;
    let tau = 3;
    let layout = build_weekly_layout(vec![1; periods]).unwrap();
    let (p01, p10) = (0.2, 0.4);
    let trans = LnTransitions::new(&TransitionProbs::uniform(1, p01, p10));
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let ll0: Vec<f64> = (0..periods).map(|_| -10.0 + rng.random_range(-3.0..3.0)).collect();
    let ll1: Vec<f64> = ll0.iter().map(|v| v + if rng.random::<bool>() { 3.0 } else { -3.0 }).collect();

    // brute-force target over all 2^10 vectors, uniform initial state
    let step = |a: usize, b: usize| -> f64 {
        let p = [[1.0 - p01, p01], [p10, 1.0 - p10]];
        p[a][b].ln()
    };
    let mut log_target = vec![0.0; 1 << periods];
    for (code, lt) in log_target.iter_mut().enumerate() {
        let bit = |t: usize| (code >> t) & 1;
        let mut v = 0.5f64.ln();
        for t in 0..periods {
            v += if bit(t) == 1 { ll1[t] } else { ll0[t] };
            if t > 0 {
                v += step(bit(t - 1), bit(t));
            }
        }
        *lt = v;
    }
    let peak = log_target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_target.iter().map(|v| (v - peak).exp()).sum();
    let exact: Vec<f64> = log_target.iter().map(|v| (v - peak).exp() / z).collect();

    let mut s = vec![0u8; periods];
    let mut scores = Vec::new();
    let mut counts = vec![0u64; 1 << periods];
    let burn = 1000;
    let kept = 100_000;
    for sweep in 0..burn + kept {
        let mut b = 0;
        while b < periods {
            let len = tau.min(periods - b);
            sample_state_block(b, len, &mut s, &ll0, &ll1, &layout, &trans, &mut scores, &mut rng).unwrap();
            b += len;
        }
        if sweep >= burn {
            let code = s.iter().enumerate().fold(0usize, |acc, (t, &v)| acc | ((v as usize) << t));
            counts[code] += 1;
        }
    }
    let tv = 0.5 * counts.iter().zip(&exact).map(|(&c, &p)| (c as f64 / kept as f64 - p).abs()).sum::<f64>();
    let elapsed = start.elapsed();
    outcome(
        tv <= 0.02 && elapsed < Duration::from_secs(60),
        format!("total variation {tv:.4} over 1024 vectors from {kept} sweeps, {:.1}s", secs(elapsed)),
    )
}

const REPLICATIONS: usize = 10;
const RECOVERY_TRUTH: [f64; 8] = [0.0, 0.3, -0.2, -1.0, std::f64::consts::LN_2, 0.3, -0.2, -1.0];
const RECOVERY_P01: f64 = 0.1;
const RECOVERY_P10: f64 = 0.2;

struct Problem {
    spec: ModelSpec,
    layout: SwitchingLayout,
    panel: Panel,
    prior: PriorSpec,
    states: Vec<u8>,
}

struct Fit {
    problem: Problem,
    chains: Vec<ChainResult>,
    failed: usize,
    elapsed: Duration,
}

impl Fit {
    fn retained(&self, delta: f64) -> Vec<&ChainResult> {
        let traces: Vec<Vec<f64>> = self.chains.iter().map(|c| c.logjoint.clone()).collect();
        let (kept, _) = resolve_labels(&traces, delta).unwrap();
        kept.iter().map(|&i| &self.chains[i]).collect()
    }

    fn log_marginal(&self) -> f64 {
        let ll: Vec<f64> = self.retained(5.0).iter().flat_map(|c| c.loglik.iter().copied()).collect();
        log_marginal_likelihood(&ll).unwrap()
    }
}

fn count_problem(spec: ModelSpec, free: &[f64], trans: TransitionProbs, periods: usize, units: usize, seed: u64) -> Problem {
    let layout = build_weekly_layout(vec![units; periods]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = standard_normal_design(&layout, spec.covariate_count(), &mut rng);
    let recipe = SimRecipe { spec: spec.clone(), layout: layout.clone(), free: free.to_vec(), trans, covariates: design, seed: seed + 1 };
    let (data, truth) = simulate_counts(&recipe).unwrap();
    finish_problem(spec, layout, &data, truth.states)
}

fn finish_problem(spec: ModelSpec, layout: SwitchingLayout, data: &Dataset, states: Vec<u8>) -> Problem {
    let panel = layout.arrange(data).unwrap();
    let prior = PriorSpec { coef: derive_prior_from_baselines(&spec, &panel).unwrap(), trans: default_transition_prior() };
    Problem { spec, layout, panel, prior, states }
}

fn fit(problem: Problem, config: &SamplerConfig) -> Fit {
    let start = Instant::now();
    let results = run_chains(&problem.panel, &problem.spec, &problem.layout, &problem.prior, config, None).unwrap();
    let elapsed = start.elapsed();
    let failed = results.iter().filter(|r| r.is_err()).count();
    for r in results.iter().filter_map(|r| r.as_ref().err()) {
        eprintln!("  chain failed: {r}");
    }
    let chains = results.into_iter().filter_map(|r| r.ok()).collect();
    Fit { problem, chains, failed, elapsed }
}

fn recovery_config(seed: u64) -> SamplerConfig {
    SamplerConfig { draws: 50_000, burn_in: 10_000, thin: 10, n_chains: 4, seed, ..SamplerConfig::default() }
}

fn short_config(seed: u64) -> SamplerConfig {
    SamplerConfig { draws: 20_000, burn_in: 5_000, thin: 5, n_chains: 2, seed, ..SamplerConfig::default() }
}

fn recovery_fits() -> (Vec<Fit>, Duration) {
    let start = Instant::now();
    let spec = ModelSpec::switching(Family::NegBin, Family::NegBin, covariate_names(3)).unwrap();
    let fits = (0..REPLICATIONS)
        .map(|r| {
            let problem = count_problem(
                spec.clone(),
                &RECOVERY_TRUTH,
                TransitionProbs::uniform(1, RECOVERY_P01, RECOVERY_P10),
                300,
                50,
                3000 + 10 * r as u64,
            );
            let f = fit(problem, &recovery_config(4000 + r as u64));
            eprintln!("  recovery replication {r}: {:.0}s", secs(f.elapsed));
            f
        })
        .collect();
    (fits, start.elapsed())
}

fn criterion_3(fits: &[Fit], elapsed: Duration) -> Outcome {
    let mut truth = RECOVERY_TRUTH.to_vec();
    truth.extend([RECOVERY_P01, RECOVERY_P10]);
    let mut covered = vec![0usize; truth.len()];
    let mut worst_class: f64 = 1.0;
    let mut per_rep = Vec::new();
    let mut names = Vec::new();
    let mut failed_chains = 0;
    for f in fits {
        failed_chains += f.failed;
        let retained = f.retained(5.0);
        let kept = retained.len();
        let summary = summarize(&retained, &f.problem.spec, 0.05).unwrap();
        names = summary.names.clone();
        for (k, &v) in truth.iter().enumerate() {
            if summary.credible_lo[k] <= v && v <= summary.credible_hi[k] {
                covered[k] += 1;
            }
        }
        let correct = summary
            .state_prob
            .iter()
            .zip(&f.problem.states)
            .filter(|(&p, &s)| (p > 0.5) == (s == 1))
            .count();
        let share = correct as f64 / f.problem.states.len() as f64;
        per_rep.push(format!("{share:.3} ({kept}/{})", f.chains.len()));
        worst_class = worst_class.min(share);
    }
    let min_cover = covered.iter().copied().min().unwrap_or(0);
    let coverage: Vec<String> = names.iter().zip(&covered).map(|(n, c)| format!("{n} {c}/{REPLICATIONS}")).collect();
    let within_budget = elapsed < Duration::from_secs(30 * 60);
    outcome(
        min_cover * 10 >= 8 * REPLICATIONS && worst_class >= 0.9 && within_budget && failed_chains == 0,
        format!(
            "coverage [{}]; classification per replication (retained chains) [{}]; failed chains {failed_chains}; runtime {:.1} min (budget 30, {} worker threads)",
            coverage.join(", "),
            per_rep.join(", "),
            secs(elapsed) / 60.0,
            rswitch_core::sampler::worker_threads(),
        ),
    )
}

fn criterion_4(fits: &[Fit]) -> Outcome {
    let rates: Vec<f64> = fits.iter().flat_map(|f| f.chains.iter().flat_map(|c| c.accept_rates.iter().copied())).collect();
    let inside = rates.iter().filter(|r| (0.29..=0.31).contains(*r)).count();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let unfitted: usize = fits.iter().flat_map(|f| f.chains.iter().map(|c| c.unfitted_scales.len())).sum();
    outcome(
        !rates.is_empty() && inside * 10 >= 9 * rates.len(),
        format!(
            "{inside}/{} chain-coefficient rates in [0.29, 0.31]; mean {mean:.4}, range [{lo:.4}, {hi:.4}]; {unfitted} scales kept unfitted",
            rates.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let chains = vec![vec![vec![1.0], vec![2.0], vec![3.0]], vec![vec![2.0], vec![3.0], vec![4.0]]];
    let c = psrf_mpsrf(&chains).unwrap();
    let worked = c.psrf[0];
    let same = vec![vec![vec![1.0], vec![2.0], vec![3.0]]; 2];
    let floor = psrf_mpsrf(&same).unwrap().psrf[0];
    let expected_floor = (2.0f64 / 3.0).sqrt();
    outcome(
        (worked - 1.1902).abs() <= 1e-4 && floor == expected_floor,
        format!("worked example {worked:.6}; identical chains {floor} vs sqrt(2/3) = {expected_floor}"),
    )
}

fn criterion_6(fits: &[Fit]) -> Outcome {
    let nb = ModelSpec::single(Family::NegBin, covariate_names(3)).unwrap();
    let msnb = ModelSpec::switching(Family::NegBin, Family::NegBin, covariate_names(3)).unwrap();
    let mut favors = 0;
    let mut on_switching = Vec::new();
    for (r, f) in fits.iter().enumerate() {
        let problem = finish_problem_from_panel(nb.clone(), f);
        let single = fit(problem, &short_config(5000 + r as u64));
        let bf = f.log_marginal() - single.log_marginal();
        on_switching.push(bf);
        favors += (bf > 0.0) as usize;
    }
    let mut modest = 0;
    let mut on_single = Vec::new();
    let nb_truth = [0.3, 0.3, -0.2, -1.0];
    for r in 0..REPLICATIONS {
        let seed = 6000 + 10 * r as u64;
        let data_problem = count_problem(nb.clone(), &nb_truth, TransitionProbs::uniform(0, 0.0, 0.0), 300, 50, seed);
        let single = fit(data_problem, &short_config(7000 + r as u64));
        let switching_problem = finish_problem(msnb.clone(), single.problem.layout.clone(), &panel_dataset(&single.problem.panel), vec![]);
        let switching = fit(switching_problem, &short_config(8000 + r as u64));
        let bf = switching.log_marginal() - single.log_marginal();
        on_single.push(bf);
        modest += (bf <= 2.0) as usize;
        eprintln!("  evidence replication {r}: {bf:.2}");
    }
    let fmt = |v: &[f64]| v.iter().map(|b| format!("{b:.1}")).collect::<Vec<_>>().join(" ");
    outcome(
        favors * 10 >= 9 * REPLICATIONS && modest * 10 >= 8 * REPLICATIONS,
        format!(
            "switching data: log BF > 0 in {favors}/{REPLICATIONS} [{}]; single-state data: log BF <= 2 in {modest}/{REPLICATIONS} [{}]",
            fmt(&on_switching),
            fmt(&on_single)
        ),
    )
}

/// The criterion-3 dataset re-specified with another model.
fn finish_problem_from_panel(spec: ModelSpec, f: &Fit) -> Problem {
    let data = panel_dataset(&f.problem.panel);
    finish_problem(spec, f.problem.layout.clone(), &data, f.problem.states.clone())
}

fn panel_dataset(panel: &Panel) -> Dataset {
    let mut obs = Vec::with_capacity(panel.len());
    for t in 0..panel.periods() {
        for (n, row) in panel.rows(t).enumerate() {
            obs.push(rswitch_core::Observation { t: t as u32 + 1, n: n as u32 + 1, y: panel.y(row), x: panel.x(row).to_vec() });
        }
    }
    Dataset::new(covariate_names(panel.covariate_count()), obs).unwrap()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let draws = 100_000;
    let mut failures = Vec::new();
    let mut violations = 0;
    let mut min_p: f64 = 1.0;
    for i in 0..20 {
        let a = (rng.random_range(0.3f64.ln()..40f64.ln())).exp();
        let b = (rng.random_range(0.3f64.ln()..40f64.ln())).exp();
        let oracle = Beta::new(a, b).unwrap();
        // bounds leaving at least 1e-3 of the mass, so the oracle stays accurate
        let (bound, lo, hi) = loop {
            let v: f64 = rng.random_range(0.02..0.98);
            let (bound, lo, hi) = match i % 3 {
                0 => (Bound::Upper(v), 0.0, v),
                1 => (Bound::Lower(v), v, 1.0),
                _ => (Bound::None, 0.0, 1.0),
            };
            if oracle.cdf(hi) - oracle.cdf(lo) > 1e-3 {
                break (bound, lo, hi);
            }
        };
        let law = TruncatedBeta::new(a, b, bound).unwrap();
        let mut sample: Vec<f64> = (0..draws).map(|_| law.sample(&mut rng)).collect();
        violations += sample.iter().filter(|&&x| !(lo..=hi).contains(&x)).count();
        let (f_lo, f_hi) = (oracle.cdf(lo), oracle.cdf(hi));
        let d = ks_statistic(&mut sample, |x| (oracle.cdf(x) - f_lo) / (f_hi - f_lo));
        let p = ks_pvalue(d, draws);
        min_p = min_p.min(p);
        if p <= KS_ALPHA {
            failures.push(format!("Beta({a:.3}, {b:.3}) on [{lo:.3}, {hi:.3}] p={p:.4}"));
        }
    }
    outcome(
        failures.is_empty() && violations == 0,
        format!("20 triples, min KS p {min_p:.4}, bound violations {violations}; failing: [{}]", failures.join("; ")),
    )
}

fn calibration(problem: &Problem, point: &ParamPoint, seed: u64) -> (usize, Vec<f64>) {
    let params = problem.spec.assemble_params(&point.free).unwrap();
    let mut ps = Vec::new();
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + i);
        let s = simulate_states(&problem.layout, &point.trans, &mut rng).unwrap();
        let y = simulate_y(&problem.panel, &problem.spec, &params, &s, &mut rng).unwrap();
        let panel = problem.panel.with_y(y);
        ps.push(gof_pvalue(&panel, &problem.spec, &problem.layout, point, 200, seed + 100 + i).unwrap());
    }
    (ps.iter().filter(|&&p| p > 0.01 && p < 0.99).count(), ps)
}

fn severity_problem() -> Problem {
    let spec = ModelSpec::switching(Family::Mnl { outcomes: 3 }, Family::Mnl { outcomes: 3 }, covariate_names(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let counts: Vec<usize> = (0..150).map(|_| rng.random_range(5..15)).collect();
    let layout = build_weekly_layout(counts).unwrap();
    let design = standard_normal_design(&layout, 2, &mut rng);
    let free = vec![-1.0, 0.4, 0.2, -0.5, 1.0, 0.4, 0.8, -0.5];
    let recipe = SimRecipe {
        spec: spec.clone(),
        layout: layout.clone(),
        free,
        trans: TransitionProbs::uniform(1, 0.1, 0.2),
        covariates: design,
        seed: 809,
    };
    let (data, truth) = simulate_severities(&recipe).unwrap();
    finish_problem(spec, layout, &data, truth.states)
}

fn criterion_8(fits: &[Fit]) -> Outcome {
    let counts = &fits[0];
    let point = posterior_mean_point(&counts.retained(5.0)).unwrap();
    let (count_ok, count_ps) = calibration(&counts.problem, &point, 8100);

    let severity = fit(severity_problem(), &SamplerConfig { draws: 6000, burn_in: 2000, thin: 2, n_chains: 2, seed: 8200, ..SamplerConfig::default() });
    let point = posterior_mean_point(&severity.retained(5.0)).unwrap();
    let (sev_ok, sev_ps) = calibration(&severity.problem, &point, 8300);
    let fmt = |v: &[f64]| v.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ");
    outcome(
        count_ok >= 19 && sev_ok >= 19,
        format!("counts {count_ok}/20 in (0.01, 0.99) [{}]; severities {sev_ok}/20 [{}]", fmt(&count_ps), fmt(&sev_ps)),
    )
}

fn flipped(point: &ParamPoint, half: usize) -> ParamPoint {
    let mut free = point.free[half..].to_vec();
    free.extend_from_slice(&point.free[..half]);
    ParamPoint {
        free,
        trans: TransitionProbs { p01: point.trans.p10.clone(), p10: point.trans.p01.clone() },
        s: StateVector(point.s.0.iter().map(|v| 1 - v).collect()),
    }
}

fn criterion_9(fits: &[Fit]) -> Outcome {
    let mut bad = 0usize;
    let mut total = 0usize;
    for f in fits {
        for c in f.retained(5.0) {
            for d in &c.draws {
                total += 1;
                bad += d.trans.p01.iter().zip(&d.trans.p10).filter(|(a, b)| a > b).count();
            }
        }
    }
    let f = &fits[0];
    let p = &f.problem;
    let half = p.spec.free_count() / 2;
    let source = &f.chains[0];
    let mut ll_equal = true;
    let flipped_joint: Vec<f64> = source
        .draws
        .iter()
        .map(|d| {
            let g = flipped(d, half);
            let a = log_likelihood(&p.panel, d, &p.spec).unwrap();
            let b = log_likelihood(&p.panel, &g, &p.spec).unwrap();
            ll_equal &= (a - b).abs() <= 1e-8 * a.abs();
            log_joint(&p.panel, &g, &p.spec, &p.layout, &p.prior).unwrap()
        })
        .collect();
    let mut traces: Vec<Vec<f64>> = f.chains.iter().map(|c| c.logjoint.clone()).collect();
    traces.push(flipped_joint.clone());
    let injected = traces.len() - 1;
    let (_, dropped) = resolve_labels(&traces, 5.0).unwrap();
    let mean = flipped_joint.iter().sum::<f64>() / flipped_joint.len() as f64;
    outcome(
        bad == 0 && total > 0 && dropped.contains(&injected) && ll_equal,
        format!(
            "{bad} of {total} retained draws violate p01 <= p10; flipped chain (likelihood unchanged: {ll_equal}, mean log-joint {mean}) dropped: {}",
            dropped.contains(&injected)
        ),
    )
}

fn cli(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_rswitch"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env("RSWITCH_THREADS", threads)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "rswitch {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../toy");
    let config = toy.join("config.toml");
    let data = toy.join("data.csv");
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["a", "b"].iter().map(|n| tmp.path().join(n)).collect();
    for (run, threads) in runs.iter().zip(["1", "2"]) {
        cli(&["fit", "--config", config.to_str().unwrap(), "--data", data.to_str().unwrap(), "--out", run.to_str().unwrap()], threads);
    }
    let (a, b) = (dir_bytes(&runs[0]), dir_bytes(&runs[1]));
    let chains_equal = a == b;
    let mut analysis_equal = true;
    for cmd in ["diagnose", "marglik", "gof", "states"] {
        let first = cli(&[cmd, runs[0].to_str().unwrap()], "1");
        let second = cli(&[cmd, runs[1].to_str().unwrap()], "2");
        analysis_equal &= first == second && !first.is_empty();
    }
    outcome(
        chains_equal && analysis_equal,
        format!("{} run files bit-identical: {chains_equal}; diagnose/marglik/gof/states output identical: {analysis_equal}", a.len()),
    )
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();

    let mut poisson_err: f64 = 0.0;
    for &lambda in &[0.01, 0.5, 3.0, 25.0, 120.0] {
        let top = (lambda + 40.0 * f64::sqrt(lambda) + 50.0) as u32;
        let sum: f64 = (0..=top).map(|a| log_poisson(lambda, a).unwrap().exp()).sum();
        poisson_err = poisson_err.max((sum - 1.0).abs());
    }
    notes.push(format!("Poisson {poisson_err:.1e}"));

    let mut nb_err: f64 = 0.0;
    for &lambda in &[0.5, 3.0, 25.0] {
        for &alpha in &[0.01, 0.5, 2.0, 10.0] {
            let mut sum = 0.0;
            for a in 0u32.. {
                let term = log_negbin(lambda, f64::ln(alpha), a).unwrap().exp();
                sum += term;
                if a as f64 > lambda && term < 1e-17 {
                    break;
                }
            }
            nb_err = nb_err.max((sum - 1.0).abs());
        }
    }
    notes.push(format!("NB {nb_err:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut mnl_err: f64 = 0.0;
    for _ in 0..200 {
        let k = 3;
        let mut beta: Vec<f64> = (0..3 * k).map(|_| rng.random_range(-4.0..4.0)).collect();
        beta.extend(vec![0.0; k]);
        let x: Vec<f64> = std::iter::once(1.0).chain((1..k).map(|_| rng.random_range(-2.0..2.0))).collect();
        let params = StateParams { beta, ..StateParams::default() };
        let sum: f64 = (1..=4).map(|i| log_mnl(&params, &x, i).unwrap().exp()).sum();
        mnl_err = mnl_err.max((sum - 1.0).abs());
    }
    notes.push(format!("MNL {mnl_err:.1e}"));

    // the gap grows like α·a²/2, so counts stay within the bulk of each law
    let mut limit_err: f64 = 0.0;
    for &lambda in &[0.5, 3.0, 10.0] {
        for a in 0..=(lambda + 6.0 * f64::sqrt(lambda) + 5.0) as u32 {
            let d = log_negbin(lambda, f64::ln(1e-8), a).unwrap() - log_poisson(lambda, a).unwrap();
            limit_err = limit_err.max(d.abs());
        }
    }
    notes.push(format!("NB limit {limit_err:.1e}"));

    let mut grad_err: f64 = 0.0;
    let families = [Family::Poisson, Family::NegBin, Family::ZipTau, Family::ZinbGamma, Family::Mnl { outcomes: 3 }];
    for (i, &family) in families.iter().enumerate() {
        let spec = ModelSpec::single(family, covariate_names(3)).unwrap();
        let layout = build_weekly_layout(vec![4; 10]).unwrap();
        let design = standard_normal_design(&layout, 3, &mut rng);
        let free: Vec<f64> = (0..spec.free_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let recipe = SimRecipe {
            spec: spec.clone(),
            layout: layout.clone(),
            free: free.clone(),
            trans: TransitionProbs::uniform(0, 0.0, 0.0),
            covariates: design,
            seed: 1200 + i as u64,
        };
        let (data, _) = if spec.is_count() { simulate_counts(&recipe) } else { simulate_severities(&recipe) }.unwrap();
        let panel = layout.arrange(&data).unwrap();
        let at: Vec<f64> = free.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
        let g = mle::gradient(&spec, &panel, &at).unwrap();
        for k in 0..at.len() {
            let h = 1e-5 * at[k].abs().max(1.0);
            let mut up = at.clone();
            up[k] += h;
            let mut down = at.clone();
            down[k] -= h;
            let fd = (mle::loglik(&spec, &panel, &up).unwrap() - mle::loglik(&spec, &panel, &down).unwrap()) / (2.0 * h);
            grad_err = grad_err.max((g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1.0));
        }
    }
    notes.push(format!("gradient {grad_err:.1e}"));
    let elapsed = start.elapsed();
    outcome(
        poisson_err <= 1e-10 && nb_err <= 1e-8 && mnl_err <= 1e-12 && limit_err <= 1e-5 && grad_err <= 1e-6 && elapsed < Duration::from_secs(30),
        format!("{}; {:.1}s", notes.join(", "), secs(elapsed)),
    )
}

fn main() -> ExitCode {
    // ignore libtest arguments such as --nocapture or filters
    let selected: BTreeSet<usize> = match std::env::var("RSWITCH_ACCEPTANCE") {
        Ok(v) => v.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        Err(_) => (1..=11).collect(),
    };
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };
    let cheap: [(usize, fn() -> Outcome); 6] =
        [(1, criterion_1), (2, criterion_2), (5, criterion_5), (7, criterion_7), (10, criterion_10), (11, criterion_11)];
    for (n, f) in cheap {
        if selected.contains(&n) {
            report(n, f());
        }
    }
    if [3, 4, 6, 8, 9].iter().any(|n| selected.contains(n)) {
        eprintln!("fitting {REPLICATIONS} recovery replications");
        let (fits, elapsed) = recovery_fits();
        if selected.contains(&3) {
            report(3, criterion_3(&fits, elapsed));
        }
        if selected.contains(&4) {
            report(4, criterion_4(&fits));
        }
        if selected.contains(&9) {
            report(9, criterion_9(&fits));
        }
        if selected.contains(&8) {
            report(8, criterion_8(&fits));
        }
        if selected.contains(&6) {
            report(6, criterion_6(&fits));
        }
    }
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
