//! Acceptance suite: one line per criterion.
//!
//! Criteria whose literal target is unattainable are still evaluated as
//! written and reported as FAIL. They are listed in `KNOWN_FAILING` with the
//! reason; the process fails only when some other criterion fails, so the
//! suite guards against regressions without hiding the red lines.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use winding_core::covmodel::CovarianceModel;
use winding_core::gauss_algebra::{quadrant_expectation_mc, quadrant_expectation_three_term};
use winding_core::harness::experiments::{
    run_clt, run_expectation, run_smoothing, run_variance, simulate, KS_MIN_P, MAX_ABS_SKEWNESS,
};
use winding_core::harness::lemma::{
    builtin_models, monte_carlo_check, random_correlations, regression_check, series_check,
};
use winding_core::harness::{run, ExperimentConfig, LemmaConfig, ReportBody, RunOptions};
use winding_core::moments::{
    chaos_projection_variances, integral_i, pinned, variance_rate_general, variance_rate_independent, QuadratureSpec,
};
use winding_core::winding::count_xy;

/// Criteria left red, with the reason. See the decisions ledger.
const KNOWN_FAILING: &[(u32, &str)] = &[
    (
        2,
        "the (1/π)(π/2 + I) limit is not the variance limit; Monte Carlo gives I/(2π²)",
    ),
    (3, "same limit constant as criterion 2"),
    (4, "same limit constant as criterion 2"),
    (5, "the diagram series at Q = 80 leaves a ~3e-6 tail at |ρ34| = 0.9"),
];

/// Frozen smoothed-winding stabilization rate for the criterion 10 run.
const PINNED_STABILIZATION_RATE: f64 = 0.254;

struct Suite {
    failures: Vec<u32>,
}

impl Suite {
    fn verdict(&mut self, id: u32, passed: bool, text: String) {
        println!("criterion {id:>2} {} {text}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            self.failures.push(id);
        }
    }

    fn info(&self, id: u32, text: String) {
        println!("criterion {id:>2} info {text}");
    }
}

fn config(name: &str) -> ExperimentConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn model(cfg: &ExperimentConfig) -> CovarianceModel {
    CovarianceModel::from_spec(&cfg.model).unwrap()
}

fn expectation(s: &mut Suite) {
    let cfg = config("expectation_regression.json");
    let (r, _) = run_expectation(&model(&cfg), &cfg).unwrap();
    let h = &r.horizons[0];
    let se = h.se.unwrap();
    s.verdict(
        1,
        h.passed == Some(true),
        format!(
            "regression ρ1 = 0.3, T = {}, M = {}: mean {:.4} vs {:.4}, |z| = {:.2} (limit 3)",
            h.horizon,
            cfg.replications,
            h.mean,
            h.theory,
            (h.mean - h.theory).abs() / se
        ),
    );
}

fn variance_protocol(s: &mut Suite, id: u32, name: &str, label: &str) {
    let cfg = config(name);
    let (r, _) = run_variance(&model(&cfg), &cfg).unwrap();
    let h = r.horizons.last().unwrap();
    let display = h.v_inf_display.unwrap();
    let half = 0.5 * (h.ci_high - h.ci_low);
    s.verdict(
        id,
        h.display_covers == Some(true) && h.display_within_tolerance == Some(true),
        format!(
            "{label}, T = {}: Var/T = {:.5}, 99% CI [{:.5}, {:.5}], stated V∞ = {display:.5}, |gap| = {:.5} vs allowed {:.5}",
            h.horizon,
            h.var_over_t,
            h.ci_low,
            h.ci_high,
            (h.var_over_t - display).abs(),
            0.05 * display + half
        ),
    );
    s.info(
        id,
        format!(
            "corrected V∞ = I/(2π²) = {:.5}: covered = {}, within 5% + half-width = {}; V_T = {:.5}; trend decreasing = {:?}",
            h.v_inf,
            h.covers,
            h.within_tolerance,
            h.v_t.unwrap_or(f64::NAN),
            r.trend_decreasing
        ),
    );
}

fn independent_variance(s: &mut Suite) {
    let m = model(&config("variance_iid_bf.json"));
    let i = integral_i(&m, &QuadratureSpec::default()).unwrap();
    let rules = (i.tanh_sinh - i.graded).abs();
    s.info(
        2,
        format!(
            "I = {:.12} (pinned {:.12}), tanh-sinh vs graded Gauss-Kronrod differ by {rules:.1e}",
            i.value,
            pinned::I_IID_BF
        ),
    );
    assert!(rules < 1e-8 && (i.value - pinned::I_IID_BF).abs() < 1e-9);
    variance_protocol(s, 2, "variance_iid_bf.json", "i.i.d. Bargmann-Fock");
}

fn singular_integrand(s: &mut Suite) {
    let m = model(&config("variance_ou_bf.json"));
    let base = integral_i(&m, &QuadratureSpec::default()).unwrap();
    let fine = QuadratureSpec {
        t_max: 120.0,
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        ..QuadratureSpec::default()
    };
    let refined = integral_i(&m, &fine).unwrap();
    let shift = (base.value - refined.value).abs();
    s.info(
        3,
        format!(
            "I = {:.12} (pinned {:.12}), endpoint exponent {:.3}, refinement shift {shift:.1e} (limit 1e-6)",
            base.value,
            pinned::I_OU_BF,
            base.exponent
        ),
    );
    assert!(shift < 1e-6 && (base.value - pinned::I_OU_BF).abs() < 1e-9);
    variance_protocol(s, 3, "variance_ou_bf.json", "OU ⊗ Bargmann-Fock");
}

fn clt(s: &mut Suite) {
    let cfg = config("clt_iid_bf.json");
    let (r, _) = run_clt(&model(&cfg), &cfg).unwrap();
    let h = r.horizons.last().unwrap();
    let display = h.ks_display.unwrap();
    s.verdict(
        4,
        display.p_value > KS_MIN_P && h.shape.skewness.abs() < MAX_ABS_SKEWNESS,
        format!(
            "T = {}, M = {}: KS vs N(0, stated V∞) D = {:.4}, p = {:.3e}; skewness {:.4}",
            h.horizon, cfg.replications, display.statistic, display.p_value, h.shape.skewness
        ),
    );
    s.info(
        4,
        format!(
            "KS vs N(0, I/(2π²)): D = {:.4}, p = {:.4}; kurtosis {:.4}; T = {} reported without a verdict: {}",
            h.ks.statistic,
            h.ks.p_value,
            h.shape.kurtosis,
            r.horizons[0].horizon,
            r.horizons[0].passed.is_none()
        ),
    );
}

fn lemma(s: &mut Suite) {
    let start = Instant::now();
    let cfg = LemmaConfig {
        series_order: 80,
        mc_samples: 10_000_000,
        ..LemmaConfig::default()
    };
    let sets = random_correlations(cfg.random_sets, cfg.max_rho34, 2024);
    let q80 = series_check(&sets, &cfg).unwrap();
    let mc = monte_carlo_check(&sets, &cfg, 2024).unwrap();
    s.verdict(
        5,
        q80.passed && mc.passed,
        format!(
            "{} sets, |ρ34| <= 0.9: series Q = 80 max diff {:.2e} (limit 1e-10); MC 10^7 max {:.2} SE over {} cases (limit 4)",
            sets.len(),
            q80.max_error,
            mc.max_error,
            mc.cases
        ),
    );
    let q400 = series_check(
        &sets,
        &LemmaConfig {
            series_order: 400,
            ..cfg.clone()
        },
    )
    .unwrap();
    s.info(5, format!("series Q = 400 max diff {:.2e}", q400.max_error));
    let mut worst: f64 = 0.0;
    for (i, c) in sets.iter().take(cfg.mc_cases).enumerate() {
        let (m, se) = quadrant_expectation_mc(c, cfg.mc_samples, 2024 + i as u64).unwrap();
        worst = worst.max((m - quadrant_expectation_three_term(c).unwrap()).abs() / se);
    }
    s.info(
        5,
        format!(
            "three-term form as printed: max {worst:.1} SE from MC; {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn conditional(s: &mut Suite) {
    let r = regression_check(&LemmaConfig::default(), 2024).unwrap();
    s.verdict(
        6,
        r.passed,
        format!(
            "{} (model, lag) pairs: max entry difference {:.2e} (limit 1e-10)",
            r.cases, r.max_error
        ),
    );
}

fn winding_definition(s: &mut Suite) {
    let mut cfg = config("variance_iid_bf.json");
    cfg.grid.horizons = vec![100.0];
    cfg.replications = 1000;
    let sim = simulate(&model(&cfg), &cfg).unwrap();
    let ok = sim.counts.iter().filter(|c| c.agreement).count();
    let mut circles = true;
    for turns in -3i64..=3 {
        for start in [0.0, 0.3, PI / 2.0, PI] {
            let n = 400 * turns.unsigned_abs() as usize + 2;
            let th: Vec<f64> = (0..n)
                .map(|k| start + 2.0 * PI * turns as f64 * k as f64 / (n - 1) as f64)
                .collect();
            let x1: Vec<f64> = th.iter().map(|t| t.cos()).collect();
            let x2: Vec<f64> = th.iter().map(|t| t.sin()).collect();
            let r = count_xy(&x1, &x2).unwrap();
            circles &= r.n_w == turns && (r.delta_arg - 2.0 * PI * turns as f64).abs() < 1e-9;
        }
    }
    s.verdict(
        7,
        ok == sim.counts.len() && circles,
        format!(
            "{ok}/{} paths pass |Δ/2π - N_W| < 1 ({} rejected by the aliasing guard); circles exact: {circles}",
            sim.counts.len(),
            sim.rejected.len()
        ),
    );
}

fn chaos(s: &mut Suite) {
    let q = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    let mut positive = true;
    let mut evaluated = Vec::new();
    for (name, m) in builtin_models() {
        let Ok(c) = chaos_projection_variances(&m, &q) else {
            continue;
        };
        let Some(spec) = c.var_i2_spectral else { continue };
        worst = worst.max((c.var_i2_limit - spec).abs());
        positive &= c.var_i2_limit >= 0.0;
        if let Some(v4) = c.var_i4_limit {
            positive &= c.var_i2_limit + v4 > 0.0;
        }
        evaluated.push(format!(
            "{name} ({:.5}, {:?})",
            c.var_i2_limit,
            c.var_i4_limit.map(|v| (v * 1e5).round() / 1e5)
        ));
    }
    s.verdict(
        8,
        !evaluated.is_empty() && worst < 1e-6 && positive,
        format!(
            "time vs spectral Var(I2) max diff {worst:.2e} (limit 1e-6), positivity {positive}; {}",
            evaluated.join("; ")
        ),
    );
}

fn cross_agreement(s: &mut Suite) {
    let q = QuadratureSpec::default();
    let t = 200.0;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut n = 0;
    for (_, m) in builtin_models() {
        let Ok(ind) = variance_rate_independent(&m, &q) else {
            continue;
        };
        let gen = variance_rate_general(&m, t, &q).unwrap();
        let d = (gen.v_t.unwrap() - ind.v_inf.unwrap()).abs();
        worst = worst.max(d);
        ok &= d < gen.err + ind.err + 5.0 / t;
        n += 1;
    }
    s.verdict(
        9,
        n > 0 && ok,
        format!(
            "{n} independent built-ins: max |V_T(200) - V∞| = {worst:.2e} (limit tolerances + {:.3})",
            5.0 / t
        ),
    );
}

fn smoothing(s: &mut Suite) {
    let cfg = config("smoothing_two_alpha.json");
    let (r, _) = run_smoothing(&model(&cfg), &cfg).unwrap();
    let rows: Vec<String> = r
        .epsilons
        .iter()
        .map(|e| format!("ε = {}: {:.4} ± {:.4}", e.epsilon, e.var_over_t, e.var_over_t_se))
        .collect();
    let rate = r.stabilization_rate.unwrap();
    let pinned_ok = rate == PINNED_STABILIZATION_RATE;
    s.verdict(
        10,
        r.epsilons.iter().all(|e| e.passed) && pinned_ok,
        format!(
            "α1 = α2 = 1.2, bound {:.4}: {}; stabilization rate {rate} (pinned {PINNED_STABILIZATION_RATE})",
            r.bound,
            rows.join(", ")
        ),
    );
    let theory: Vec<String> = r.epsilons.iter().map(|e| format!("{:.4}", e.theory)).collect();
    s.info(
        10,
        format!(
            "below I/(2π²) = {:.5} + 3 SE at every ε: {}; smoothed-model theory per ε: {}",
            r.bound_variance_scale,
            r.epsilons.iter().all(|e| e.within_variance_scale),
            theory.join(", ")
        ),
    );
}

fn determinism(s: &mut Suite) {
    let cfg = config("expectation_regression.json");
    let reports: Vec<String> = [None, Some(1), Some(3), None]
        .into_iter()
        .map(|w| run(&cfg, RunOptions { workers: w }).unwrap().to_json())
        .collect();
    let identical = reports.windows(2).all(|w| w[0] == w[1]);
    let counts = |r: &str| match serde_json::from_str::<winding_core::harness::Report>(r).unwrap().result {
        ReportBody::Expectation(e) => e.per_replication.iter().map(|c| c.n_w.clone()).collect::<Vec<_>>(),
        _ => unreachable!(),
    };
    let same_counts = counts(&reports[1]) == counts(&reports[2]);
    s.verdict(
        11,
        identical && same_counts,
        format!(
            "criterion 1 run repeated with default, 1, 3 and default workers: byte-identical {identical}, per-replication N_W identical {same_counts}"
        ),
    );
}

fn main() {
    let mut suite = Suite { failures: Vec::new() };
    type Step = (&'static str, fn(&mut Suite));
    let steps: [Step; 11] = [
        ("expectation", expectation),
        ("independent variance", independent_variance),
        ("singular integrand", singular_integrand),
        ("clt", clt),
        ("lemma oracle", lemma),
        ("conditional covariance", conditional),
        ("winding definition", winding_definition),
        ("chaos", chaos),
        ("cross agreement", cross_agreement),
        ("smoothing", smoothing),
        ("determinism", determinism),
    ];
    for (name, f) in steps {
        let t = Instant::now();
        f(&mut suite);
        eprintln!("  [{name}: {:.1}s]", t.elapsed().as_secs_f64());
    }
    let unexpected: Vec<u32> = suite
        .failures
        .iter()
        .copied()
        .filter(|id| !KNOWN_FAILING.iter().any(|(k, _)| k == id))
        .collect();
    for (id, why) in KNOWN_FAILING {
        if suite.failures.contains(id) {
            println!("criterion {id:>2} known failure: {why}");
        } else {
            println!("criterion {id:>2} listed as known failure but passed");
        }
    }
    println!(
        "acceptance: {} of 11 pass; {} known failures; {} unexpected",
        11 - suite.failures.len(),
        suite.failures.len() - unexpected.len(),
        unexpected.len()
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
