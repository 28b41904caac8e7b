//! Acceptance criteria, one test per criterion. Each test writes a
//! `criterion N: PASS|FAIL ...` line to stderr before asserting.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use labelboot::bootstrap::{run_bootstrap, BootstrapPlan, CoupledPmf, FixedLabelPmf, Scheme};
use labelboot::design::{build_design, fit_dataset};
use labelboot::misclass::estimate_rates;
use labelboot::montecarlo::{run_cell, simulate_dataset, theta_z2_correlation};
use labelboot::rng::stream;
use labelboot::{
    CellResult, DMatrix, DVector, Dataset, DesignSpec, Method, MisclassRates, SimConfig,
};
use labelboot_cli::config::{DataConfig, DesignConfig, OutputConfig, RatesConfig};
use labelboot_cli::{estimate_command, simulate_command, Mode, RunConfig, Schema};
use rand::Rng;

fn report(criterion: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let line = format!("criterion {criterion}: {verdict} {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

// ---------------------------------------------------------------------------
// 1. Coupled-label branch probabilities
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_exact_pmf_suite() {
    let mut rng = stream(101, &[]);
    let mut triples = Vec::new();
    while triples.len() < 20 {
        let f_plus = rng.random::<f64>() * 0.2;
        let f_minus = rng.random::<f64>() * 0.2;
        let pi = 0.05 + 0.9 * rng.random::<f64>();
        if f_plus + f_minus / pi <= 1.0 && f_plus / (1.0 - pi) + f_minus <= 1.0 {
            triples.push((f_plus, f_minus, pi));
        }
    }
    let mut worst: f64 = 0.0;
    for &(fp, fm, pi) in &triples {
        let pmf = CoupledPmf::new(fp, fm, pi).unwrap();
        let fixed = FixedLabelPmf::new(fp, fm, pi).unwrap();
        // Branch order (θ*, θ̂*) = (1,1), (1,0), (0,1), (0,0).
        let one = [1.0 - fp - fm / pi, fm, fp, fm * (1.0 - pi) / pi];
        let zero = [fp * pi / (1.0 - pi), fm, fp, 1.0 - fp / (1.0 - pi) - fm];
        for (theta_hat, oracle, fixed_mean) in [
            (true, one, 1.0 - fixed.flip_one),
            (false, zero, fixed.flip_zero),
        ] {
            let got = pmf.probabilities(theta_hat);
            for (g, o) in got.iter().zip(&oracle) {
                worst = worst.max((g - o).abs());
            }
            worst = worst.max((got.iter().sum::<f64>() - 1.0).abs());
            worst = worst.max((got[1] - fm).abs()).max((got[2] - fp).abs());
            worst = worst.max((got[0] + got[2] - fixed_mean).abs());
        }
    }
    report(
        1,
        worst <= 1e-12,
        &format!("20 triples, max abs error {worst:.2e} (tol 1e-12)"),
    );
}

// ---------------------------------------------------------------------------
// 2. Zero rates: all schemes coincide
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_degenerate_equivalence() {
    let start = Instant::now();
    let draw = simulate_dataset(&SimConfig::smoke(2), 0).unwrap();
    let spec = DesignSpec::intercept_interaction();
    let fit = fit_dataset(&draw.dataset, &spec).unwrap();
    let rates = MisclassRates::zero(draw.external.len() as u64);
    let run = |scheme, rotate| {
        let plan = BootstrapPlan::new(scheme, 199, 17).rotated(rotate);
        run_bootstrap(&draw.dataset, &spec, &fit, &rates, &plan)
            .unwrap()
            .deltas
    };
    let bits = |m: &DMatrix<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let base = bits(&run(Scheme::NoLabelResampling, false));
    let variants = [
        bits(&run(Scheme::FixedLabel, false)),
        bits(&run(Scheme::CoupledLabel, false)),
        bits(&run(Scheme::CoupledLabel, true)),
        bits(&run(Scheme::CoupledLabelVarAdj, false)),
        bits(&run(Scheme::CoupledLabelVarAdj, true)),
    ];
    let identical = variants.iter().all(|v| *v == base);
    let elapsed = start.elapsed();
    report(
        2,
        identical && elapsed < Duration::from_secs(1),
        &format!(
            "bit-identical = {identical}, runtime {:.3} s (limit 1 s)",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 3 & 4. Bootstrap bias and the variance-corrected rate draws
// ---------------------------------------------------------------------------

struct Oracle {
    dataset: Dataset,
    rates: MisclassRates,
    spec: DesignSpec,
    n: f64,
    beta: DVector<f64>,
    /// `Γ̂₊β̂` and `Γ̂₋β̂` from explicit matrices.
    gamma_plus_beta: DVector<f64>,
    gamma_minus_beta: DVector<f64>,
}

/// Normal-equation pieces built directly from `g(0, Z)` and `g(1, Z)`.
fn oracle() -> Oracle {
    let cfg = SimConfig {
        seed: 11,
        ..SimConfig::new(8000, 1.0, 0.5)
    };
    let draw = simulate_dataset(&cfg, 0).unwrap();
    let rates = estimate_rates(&draw.external).unwrap();
    let spec = DesignSpec::intercept_interaction();
    let ds = draw.dataset;
    let n = ds.n();
    let x = build_design(&ds.theta_hat, &ds.z, &spec).unwrap();
    let g1 = build_design(&vec![true; n], &ds.z, &spec).unwrap();
    let g0 = build_design(&vec![false; n], &ds.z, &spec).unwrap();
    let nf = n as f64;
    let q_inv = (x.transpose() * &x / nf).try_inverse().unwrap();
    let beta = &q_inv * (x.transpose() * &ds.y) / nf;
    let d_plus = g1.transpose() * (&g1 - &g0) / nf;
    let d_minus = g0.transpose() * (&g0 - &g1) / nf;
    Oracle {
        gamma_plus_beta: &q_inv * d_plus * &beta,
        gamma_minus_beta: &q_inv * d_minus * &beta,
        dataset: ds,
        rates,
        spec,
        n: nf,
        beta,
    }
}

fn column_mean_se(m: &DMatrix<f64>, j: usize) -> (f64, f64) {
    let col = m.column(j);
    let b = col.len() as f64;
    let mean = col.mean();
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

#[test]
fn criterion_3_bootstrap_bias_oracle() {
    let start = Instant::now();
    let o = oracle();
    let fit = fit_dataset(&o.dataset, &o.spec).unwrap();
    let root_n = o.n.sqrt();
    let target = -(&o.gamma_plus_beta * (root_n * o.rates.f_plus)
        + &o.gamma_minus_beta * (root_n * o.rates.f_minus));
    let scaled = |rotate| {
        let plan = BootstrapPlan::new(Scheme::CoupledLabel, 5000, 23).rotated(rotate);
        run_bootstrap(&o.dataset, &o.spec, &fit, &o.rates, &plan)
            .unwrap()
            .deltas
            * root_n
    };
    // The expansion's b* uses Q̂⁻¹; the rotated draw removes the Q̂*⁻¹ − Q̂⁻¹ remainder.
    let rotated = scaled(true);
    let mut ok = true;
    let mut detail = String::new();
    for j in 0..3 {
        let (mean, se) = column_mean_se(&rotated, j);
        let z = (mean - target[j]) / se;
        ok &= z.abs() <= 3.0;
        detail += &format!(
            "[coef {j}: mean {mean:.4}, oracle {:.4}, z {z:.2}] ",
            target[j]
        );
    }
    let plain = scaled(false);
    let (mean, se) = column_mean_se(&plain, 1);
    detail += &format!(
        "unrotated slope mean {mean:.4} (z {:.1} vs oracle); ",
        (mean - target[1]) / se
    );
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    detail += &format!("runtime {:.1} s", elapsed.as_secs_f64());
    report(3, ok, &detail);
}

#[test]
fn criterion_4_variance_correction_algebra() {
    let o = oracle();
    let fit = fit_dataset(&o.dataset, &o.spec).unwrap();
    let plan = BootstrapPlan::new(Scheme::CoupledLabelVarAdj, 5000, 29);
    let draws = run_bootstrap(&o.dataset, &o.spec, &fit, &o.rates, &plan).unwrap();
    let root_n = o.n.sqrt();
    let (gp, gm) = (o.gamma_plus_beta[1], o.gamma_minus_beta[1]);
    // b* = −√n (f̄₊* Γ̂₊β̂ + f̄₋* Γ̂₋β̂) from each replication's discordance shares.
    let b_star: Vec<f64> = draws
        .label_stats
        .iter()
        .map(|s| -root_n * (s.false_pos as f64 / o.n * gp + s.false_neg as f64 / o.n * gm))
        .collect();
    let b = b_star.len() as f64;
    let mean = b_star.iter().sum::<f64>() / b;
    let empirical = b_star.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let (fp, fm, m, n) = (o.rates.f_plus, o.rates.f_minus, o.rates.m as f64, o.n);
    let leading = n * fp * (1.0 - fp) / m * gp * gp + n * fm * (1.0 - fm) / m * gm * gm;
    // Within-replication Bernoulli noise given the rate draws, and the
    // negative covariance of the two mutually exclusive discordance events.
    let small = fp * (1.0 - fp) * (1.0 - 1.0 / m) * gp * gp
        + fm * (1.0 - fm) * (1.0 - 1.0 / m) * gm * gm
        - 2.0 * fp * fm * gp * gm;
    let expected = leading + small;
    let rel = (empirical - expected).abs() / expected;
    report(
        4,
        rel <= 0.10,
        &format!(
            "slope Var*(b*) = {empirical:.4}, leading {leading:.4} + small {small:.4} = {expected:.4}, relative error {:.1}% (tol 10%)",
            100.0 * rel
        ),
    );
    let _ = o.beta;
}

// ---------------------------------------------------------------------------
// 5–7. Desk-scale Monte Carlo cells
// ---------------------------------------------------------------------------

const DESK_SEED: u64 = 20_260_101;

fn desk_cell(p_bar: f64, methods: &[Method]) -> CellResult {
    let cfg = SimConfig {
        reps: 2000,
        boot_reps: 299,
        seed: DESK_SEED,
        methods: methods.to_vec(),
        ..SimConfig::new(8000, 1.0, p_bar)
    };
    run_cell(&cfg).unwrap()
}

fn table1_cell() -> &'static CellResult {
    static CELL: OnceLock<CellResult> = OnceLock::new();
    CELL.get_or_init(|| {
        desk_cell(
            0.5,
            &[
                Method::Ols,
                Method::Bchs,
                Method::FixedLabel,
                Method::CoupledLabel,
                Method::CoupledRotatedVaradj,
            ],
        )
    })
}

fn pct(x: f64) -> f64 {
    100.0 * x
}

#[test]
fn criterion_5_table1_desk_cell() {
    let start = Instant::now();
    let cell = table1_cell();
    let get = |m| cell.method(m).unwrap();
    let (ols, bchs, coupled, rot) = (
        get(Method::Ols),
        get(Method::Bchs),
        get(Method::CoupledLabel),
        get(Method::CoupledRotatedVaradj),
    );
    let checks = [
        (
            "OLS median bias",
            ols.median_bias,
            within(ols.median_bias, -0.07, 0.01),
        ),
        (
            "OLS coverage %",
            pct(ols.coverage),
            pct(ols.coverage) <= 1.0,
        ),
        (
            "coupled coverage %",
            pct(coupled.coverage),
            within(pct(coupled.coverage), 80.6, 3.0),
        ),
        (
            "rotated+varadj coverage %",
            pct(rot.coverage),
            within(pct(rot.coverage), 94.6, 2.0),
        ),
        (
            "rotated+varadj median length",
            rot.median_length,
            within(rot.median_length, 0.11, 0.02),
        ),
        (
            "BCHS coverage %",
            pct(bchs.coverage),
            within(pct(bchs.coverage), 93.8, 2.0),
        ),
    ];
    let ok = checks.iter().all(|c| c.2);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, v, pass)| {
            format!(
                "{name} {v:.3}{}",
                if *pass { "" } else { " (out of range)" }
            )
        })
        .collect();
    report(
        5,
        ok,
        &format!(
            "{}; reps {} (failed {}), wall {:.0} s",
            detail.join(", "),
            cell.reps_completed,
            cell.failed_reps,
            cell.wall_seconds.max(start.elapsed().as_secs_f64())
        ),
    );
}

#[test]
fn criterion_6_table2_desk_cell() {
    let cell = desk_cell(
        0.05,
        &[
            Method::Ols,
            Method::FixedLabel,
            Method::CoupledRotatedVaradj,
        ],
    );
    let get = |m| cell.method(m).unwrap();
    let (ols, fixed, rot) = (
        get(Method::Ols),
        get(Method::FixedLabel),
        get(Method::CoupledRotatedVaradj),
    );
    let checks = [
        (
            "OLS median bias",
            ols.median_bias,
            within(ols.median_bias, -0.16, 0.02),
        ),
        (
            "fixed coverage %",
            pct(fixed.coverage),
            within(pct(fixed.coverage), 78.3, 3.0),
        ),
        (
            "rotated+varadj coverage %",
            pct(rot.coverage),
            within(pct(rot.coverage), 90.4, 3.0),
        ),
    ];
    let ok = checks.iter().all(|c| c.2);
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, v, pass)| {
            format!(
                "{name} {v:.3}{}",
                if *pass { "" } else { " (out of range)" }
            )
        })
        .collect();
    report(
        6,
        ok,
        &format!(
            "{}; reps {} (failed {}), wall {:.0} s",
            detail.join(", "),
            cell.reps_completed,
            cell.failed_reps,
            cell.wall_seconds
        ),
    );
}

/// Two-sided 5% critical value, Bonferroni-adjusted over the 18 entries of
/// the two L(iii) matrices.
const L3_CRITICAL: f64 = 2.99;

#[test]
fn criterion_7_fixed_label_invalidity_signal() {
    let cell = table1_cell();
    let fixed = cell.method(Method::FixedLabel).unwrap();
    let coupled = cell.method(Method::CoupledLabel).unwrap();
    let rot = cell.method(Method::CoupledRotatedVaradj).unwrap();
    let fixed_t = fixed.median_l3_t.unwrap();
    let ok = fixed.coverage < 0.75 && rot.coverage > 0.92 && fixed_t > L3_CRITICAL;
    report(
        7,
        ok,
        &format!(
            "fixed coverage {:.1}% (< 75), rotated+varadj {:.1}% (> 92), median L(iii) |t| fixed {fixed_t:.1} \
             (> {L3_CRITICAL}), coupled {:.2}",
            pct(fixed.coverage),
            pct(rot.coverage),
            coupled.median_l3_t.unwrap_or(f64::NAN)
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Correlation between the latent label and Z²
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_label_covariate_correlation() {
    let corr = |p_bar| theta_z2_correlation(&SimConfig::new(8000, 1.0, p_bar), 1_000_000).unwrap();
    let (high, low) = (corr(0.5), corr(0.05));
    let ok = within(high, 0.31, 0.02) && within(low, 0.02, 0.02);
    report(
        8,
        ok,
        &format!("corr(theta, Z^2) = {high:.4} at p_bar 0.5 (target 0.31 +- 0.02), {low:.4} at p_bar 0.05 (target 0.02 +- 0.02)"),
    );
}

// ---------------------------------------------------------------------------
// 9. Bundled near-singular sample
// ---------------------------------------------------------------------------

fn bundled_data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/remote_work.csv")
}

fn applied_config(fixed_effects: &[&str], reps: usize, out: Option<PathBuf>) -> RunConfig {
    let mut cfg = RunConfig {
        mode: Mode::Estimate,
        seed: 1,
        data: Some(DataConfig {
            path: bundled_data(),
            schema: Schema {
                outcome: "logwage".into(),
                label: "remote".into(),
                covariates: vec!["const".into()],
                fixed_effects: fixed_effects.iter().map(|s| s.to_string()).collect(),
                true_label: None,
            },
        }),
        design: DesignConfig::default(),
        rates: RatesConfig::summary(0.009, 0.018, 1000),
        output: OutputConfig {
            dir: out,
            report: Vec::new(),
        },
        ..RunConfig::default()
    };
    cfg.bootstrap.reps = Some(reps);
    cfg
}

#[test]
fn criterion_9_near_singular_ordering() {
    let mut ok = true;
    let mut detail = Vec::new();
    for fe in [&[][..], &["soc2", "fulltime"][..]] {
        let out = estimate_command(&applied_config(fe, 499, None)).unwrap();
        let est = |m| out.outcome(m).unwrap().estimate[0];
        let (ols, bchs, none, fixed, coupled, rot) = (
            est(Method::Ols),
            est(Method::Bchs),
            est(Method::NoLabel),
            est(Method::FixedLabel),
            est(Method::CoupledLabel),
            est(Method::CoupledRotatedVaradj),
        );
        let shifted_floor = bchs.max(rot) * 1.05;
        let checks = [
            (
                (none - ols).abs() <= 0.02 * ols.abs(),
                "no-label within 2% of OLS",
            ),
            (
                fixed > shifted_floor && coupled > shifted_floor,
                "unrotated bootstraps >5% above BCHS and rotated",
            ),
            (
                rot > ols && rot < fixed.min(coupled),
                "rotated between OLS and unrotated",
            ),
            (
                (rot - bchs).abs() <= 0.05 * bchs.abs(),
                "rotated within 5% of BCHS",
            ),
        ];
        let failed: Vec<&str> = checks.iter().filter(|c| !c.0).map(|c| c.1).collect();
        ok &= failed.is_empty();
        detail.push(format!(
            "{}: ols {ols:.3} bchs {bchs:.3} no-label {none:.3} fixed {fixed:.3} coupled {coupled:.3} rotated {rot:.3}{}",
            if fe.is_empty() { "no FE" } else { "FE" },
            if failed.is_empty() { String::new() } else { format!(" [failed: {}]", failed.join("; ")) }
        ));
    }
    report(9, ok, &detail.join(" | "));
}

// ---------------------------------------------------------------------------
// 10. Identical output for any thread count
// ---------------------------------------------------------------------------

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_10_thread_count_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut estimate_runs = Vec::new();
    let mut simulate_runs = Vec::new();
    for threads in [1, 4, 16] {
        let dir = tmp.path().join(format!("estimate-{threads}"));
        let mut cfg = applied_config(&["soc2", "fulltime"], 99, Some(dir.clone()));
        cfg.threads = Some(threads);
        cfg.bootstrap.write_draws = true;
        estimate_command(&cfg).unwrap();
        estimate_runs.push(files(&dir));

        let dir = tmp.path().join(format!("simulate-{threads}"));
        let mut cfg = RunConfig {
            mode: Mode::Simulate,
            seed: 5,
            threads: Some(threads),
            ..RunConfig::default()
        };
        cfg.simulate.preset = Some(labelboot_cli::Preset::Smoke);
        cfg.simulate.reps = Some(12);
        cfg.bootstrap.reps = Some(49);
        cfg.output.dir = Some(dir.clone());
        simulate_command(&cfg).unwrap();
        simulate_runs.push(files(&dir));
    }
    let same = |runs: &[Vec<(String, Vec<u8>)>]| runs.iter().all(|r| r == &runs[0]);
    let n_files = estimate_runs[0].len() + simulate_runs[0].len();
    let ok = same(&estimate_runs) && same(&simulate_runs) && n_files >= 8;
    report(
        10,
        ok,
        &format!("{n_files} output files byte-identical across 1, 4 and 16 threads: {ok}"),
    );
}
