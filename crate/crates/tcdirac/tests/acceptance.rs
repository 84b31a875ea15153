//! Acceptance suite: every release-gating criterion at its documented
//! tolerance, one pass/fail line per criterion (run with `-- --nocapture`
//! to see them on success).
//!
//! The checks live in `tcdirac::verify`; this target pins which suite
//! entries gate which criterion and fails loudly with the offending
//! residuals.

use std::sync::OnceLock;
use std::time::Instant;
use tcdirac::verify::{
    run_appendix_a, run_appendix_b, run_coherence_suite, run_germ_suite, run_green_suite,
    run_moments_suite, run_spin_suite, SuiteReport,
};

const SEED: u64 = 2026;

fn appendix_a() -> &'static (SuiteReport, f64) {
    static R: OnceLock<(SuiteReport, f64)> = OnceLock::new();
    R.get_or_init(|| {
        let t = Instant::now();
        let rep = run_appendix_a(SEED, 200);
        (rep, t.elapsed().as_secs_f64())
    })
}

fn germ() -> &'static SuiteReport {
    static R: OnceLock<SuiteReport> = OnceLock::new();
    R.get_or_init(|| run_germ_suite(SEED))
}

fn spin() -> &'static SuiteReport {
    static R: OnceLock<SuiteReport> = OnceLock::new();
    R.get_or_init(|| run_spin_suite(SEED))
}

fn coherence() -> &'static SuiteReport {
    static R: OnceLock<SuiteReport> = OnceLock::new();
    R.get_or_init(|| run_coherence_suite(SEED))
}

fn moments() -> &'static SuiteReport {
    static R: OnceLock<SuiteReport> = OnceLock::new();
    R.get_or_init(|| run_moments_suite(SEED))
}

fn green() -> &'static SuiteReport {
    static R: OnceLock<SuiteReport> = OnceLock::new();
    R.get_or_init(|| run_green_suite(SEED))
}

/// Assert every suite entry whose id matches `filter`, returning the worst
/// (value / tolerance) headroom entry for the summary line.
fn gate(rep: &SuiteReport, filter: impl Fn(&str) -> bool) -> (usize, String) {
    let mut n = 0;
    let mut worst: Option<(f64, String)> = None;
    let mut failures = Vec::new();
    for e in &rep.entries {
        if !filter(&e.id) {
            continue;
        }
        n += 1;
        if !e.pass {
            failures.push(format!("{} = {:.3e} (tol {:.1e})", e.id, e.value, e.tolerance));
        }
        let head = if e.tolerance > 0.0 { e.value / e.tolerance } else { e.value };
        if worst.as_ref().map_or(true, |(w, _)| head > *w) {
            worst = Some((head, format!("{} = {:.3e} (tol {:.1e})", e.id, e.value, e.tolerance)));
        }
    }
    assert!(n > 0, "criterion filter matched no suite entries");
    assert!(failures.is_empty(), "failed checks:\n  {}", failures.join("\n  "));
    (n, worst.map(|(_, s)| s).unwrap_or_default())
}

fn report(criterion: u32, label: &str, detail: String) {
    println!("criterion {criterion:>2} [PASS] {label}: {detail}");
}

#[test]
fn criterion_01_appendix_a_identities() {
    let (rep, wall) = appendix_a();
    let (n, worst) = gate(rep, |id| id.starts_with("A."));
    assert!(*wall < 5.0, "identity suite took {wall:.2}s (limit 5s)");
    report(1, "identity suite, 200 draws x 2 charge signs", format!("{n} identities, worst {worst}, {wall:.2}s"));
}

#[test]
fn criterion_02_eigenrelation() {
    let (rep, _) = appendix_a();
    let (_, worst) = gate(rep, |id| id == "A.4");
    report(2, "H0 Pi = lambda Pi eigenrelation", worst);
}

#[test]
fn criterion_03_germ_conservation() {
    let (n, worst) = gate(germ(), |id| {
        id.contains("lagrangian") || id.contains("normalization") || id.contains("det C")
            || id.contains("runtime")
    });
    report(3, "germ conservation over T=10, all catalog fields", format!("{n} checks, worst {worst}"));
}

#[test]
fn criterion_04_riccati_consistency() {
    let (n, worst) = gate(germ(), |id| id.contains("riccati"));
    report(4, "matrix Riccati consistency of Q(t)", format!("{n} fields, worst {worst}"));
}

#[test]
fn criterion_05_spin_transport() {
    let (n, worst) = gate(spin(), |_| true);
    report(5, "spinor unitarity, moments/spinor eta match, precession frequency", format!("{n} checks, worst {worst}"));
}

#[test]
fn criterion_06_bmt_consistency() {
    let rep = run_appendix_b(SEED);
    let (_, worst) = gate(&rep, |_| true);
    let convention = rep
        .notes
        .iter()
        .find(|n| n.contains("resolved"))
        .cloned()
        .unwrap_or_else(|| "unresolved".into());
    report(6, "polarization-vector precession convention", format!("{worst}; {convention}"));
}

#[test]
fn criterion_07_wavepacket_orthonormality() {
    let (n, worst) = gate(coherence(), |id| id.contains("gram") || id.contains("orthonormality runtime"));
    report(7, "Gram matrix of |nu| <= 2 states, all catalog fields", format!("{n} checks, worst {worst}"));
}

#[test]
fn criterion_08_coherence_scaling() {
    let (n, worst) = gate(coherence(), |id| id.starts_with("order-"));
    report(8, "order-0 centering and order-1 two-hbar ratios", format!("{n} checks, worst {worst}"));
}

#[test]
fn criterion_09_equation_residual_scaling() {
    let (n, worst) = gate(coherence(), |id| id.contains("equation-residual"));
    report(9, "scalar equation residual ~ hbar^1.5", format!("{n} exponent checks, worst {worst}"));
}

#[test]
fn criterion_10_moments_equivalences() {
    let (n, worst) = gate(moments(), |id| {
        id.contains("transport ODE") || id.contains("A-form") || id.contains("double exactly")
    });
    report(10, "Delta2 germ/ODE/A-form equivalences and exact hbar scaling", format!("{n} checks, worst {worst}"));
}

#[test]
fn criterion_11_green_kernel() {
    let (n, worst) = gate(green(), |_| true);
    report(11, "kernel propagation identity and monotone truncation", format!("{n} checks, worst {worst}"));
}

/// The spin-coherence invariant rides along with the criteria: normalized
/// Bargmann vector against the boost of the transported polarization.
#[test]
fn invariant_spin_coherence_scaling() {
    let (n, worst) = gate(coherence(), |id| id.contains("spin coherence"));
    report(0, "spin coherence (Bargmann vector vs boosted eta)", format!("{n} checks, worst {worst}"));
}
