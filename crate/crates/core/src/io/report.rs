//! Plain-text and CSV renderings of analysis results.

use std::fmt::Write;

use crate::analysis::{DiagnosticsReport, ModelEvidence, PosteriorSummary};
use crate::error::Result;
use crate::mle::{MleFit, MleFlag};
use crate::switching::SwitchingLayout;

pub fn diagnostics_text(r: &DiagnosticsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "chains retained: {:?}", r.retained_chains);
    let _ = writeln!(out, "chains dropped (label setting): {:?}", r.dropped_chains);
    for (c, m) in r.mean_logjoint.iter().enumerate() {
        let _ = writeln!(out, "mean log-joint, chain {c}: {m:.4}");
    }
    match &r.convergence {
        Some(c) => {
            let _ = writeln!(out, "MPSRF: {:.4}", c.mpsrf);
            let _ = writeln!(out, "{:<32} {:>8} {:>8}", "parameter", "PSRF", "accept");
            for (i, name) in r.names.iter().enumerate() {
                let acc = r.accept_rates.get(i).map_or(String::from("-"), |a| format!("{a:.3}"));
                let _ = writeln!(out, "{name:<32} {:>8.4} {acc:>8}", c.psrf[i]);
            }
        }
        None => {
            let _ = writeln!(out, "PSRF/MPSRF: unavailable (fewer than two retained chains)");
            let _ = writeln!(out, "{:<32} {:>8}", "parameter", "accept");
            for (name, a) in r.names.iter().zip(&r.accept_rates) {
                let _ = writeln!(out, "{name:<32} {a:>8.3}");
            }
        }
    }
    out
}

pub fn summary_csv(s: &PosteriorSummary) -> String {
    let mut out = String::from("parameter,mean,sd,lo,hi\n");
    for i in 0..s.names.len() {
        let _ = writeln!(out, "{},{},{},{},{}", s.names[i], s.mean[i], s.sd[i], s.credible_lo[i], s.credible_hi[i]);
    }
    out
}

pub fn evidence_text(e: &ModelEvidence) -> String {
    format!(
        "log marginal likelihood: {:.2}\nbootstrap 95% interval: [{:.2}, {:.2}]\nDIC: {:.2}\nmean log-likelihood: {:.2}\nmax log-likelihood: {:.2}\n",
        e.log_marginal, e.ci_lo, e.ci_hi, e.dic, e.mean_loglik, e.max_loglik
    )
}

pub fn bayes_factor_text(log_bf: f64) -> String {
    // avoid printing "-0.00"
    let v = if log_bf.abs() < 0.005 { 0.0 } else { log_bf };
    format!("log Bayes factor (second vs first): {v:.2}\n")
}

pub fn gof_text(statistic: f64, p_value: f64, replicates: usize) -> String {
    format!("chi-square: {statistic:.4}\nMonte-Carlo p-value ({replicates} replicates): {p_value:.4}\n")
}

/// Per auxiliary period: real `(t, n)`, `P(s = 1 | Y)` and its standard
/// deviation.
pub fn states_csv(s: &PosteriorSummary, layout: &SwitchingLayout) -> Result<String> {
    let mut out = String::from("t_aux,t,n,prob,sd\n");
    for (i, (p, sd)) in s.state_prob.iter().zip(&s.state_sd).enumerate() {
        let (t, n) = layout.to_real(i + 1, 1)?;
        let _ = writeln!(out, "{},{t},{n},{p},{sd}", i + 1);
    }
    Ok(out)
}

pub fn mle_text(family: &str, fit: &MleFit, aic: f64, bic: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model: {family}");
    let _ = writeln!(out, "log-likelihood: {:.4}  converged: {}  iterations: {}", fit.loglik, fit.converged, fit.iterations);
    let _ = writeln!(out, "AIC: {aic:.2}  BIC: {bic:.2}");
    let _ = writeln!(out, "{:<32} {:>12} {:>12}", "parameter", "estimate", "std.err");
    for ((name, est), se) in fit.names.iter().zip(&fit.estimates).zip(fit.std_errors()) {
        let _ = writeln!(out, "{name:<32} {est:>12.5} {se:>12.5}");
    }
    for flag in &fit.flags {
        let _ = match flag {
            MleFlag::Boundary(m) => writeln!(out, "warning: boundary estimate: {m}"),
            MleFlag::Unbounded(m) => writeln!(out, "warning: unbounded likelihood: {m}"),
        };
    }
    out
}
