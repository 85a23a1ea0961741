//! End-to-end acceptance suite. Each test prints one PASS line with the
//! measured quantities; run with `cargo test --test acceptance -- --nocapture`
//! to see them.

use hetheat_core::*;
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::time::Instant;

fn kernel(a1: f64, a2: f64, r1: f64, r2: f64) -> PiecewiseKernel {
    PiecewiseKernel::new(Medium::new(a1, a2, r1, r2).unwrap())
}

/// 1. For the symmetric unit medium the explicit kernel reduces to the
///    standard heat kernel to 1e-12 on a 50x50x20 grid, in under a second.
#[test]
fn acceptance_1_kernel_reduction() {
    let k = kernel(1.0, 1.0, 2.0, 2.0);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for iu in 1..=20 {
        let u = iu as f64 * 0.1;
        for ix in 0..50 {
            let x = -3.0 + 6.0 * ix as f64 / 49.0;
            for iz in 0..50 {
                let z = -3.0 + 6.0 * iz as f64 / 49.0;
                let d = (k.green(u, x, z).unwrap() - heat_kernel(u, z - x).unwrap()).abs();
                worst = worst.max(d);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst <= 1e-12, "max deviation {worst:e}");
    assert!(elapsed < 1.0, "took {elapsed:.2} s");
    println!("acceptance 1 PASS: kernel reduction, max |G - p| = {worst:.2e} in {elapsed:.2} s");
}

/// 2. Mass conservation across media, times and positions to 1e-8.
#[test]
fn acceptance_2_mass_conservation() {
    let spec = QuadratureSpec::default();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (a1, a2, r1, r2) in [
        (1.0, 1.0, 2.0, 2.0),
        (1.0, 4.0, 1.0, 2.0),
        (4.0, 1.0, 1.0, 2.0),
    ] {
        let k = kernel(a1, a2, r1, r2);
        for u in [0.01, 0.1, 1.0] {
            for x in [-1.0, 0.0, 0.5] {
                let mass = k.mass(u, x, &spec).unwrap();
                worst = worst.max((mass - 1.0).abs());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst <= 1e-8, "max |mass - 1| = {worst:e}");
    assert!(elapsed < 10.0, "took {elapsed:.2} s");
    println!(
        "acceptance 2 PASS: mass conservation, max |∫G dz - 1| = {worst:.2e} in {elapsed:.2} s"
    );
}

/// 3. The closed-form time integral of the Gaussian product matches direct
///    quadrature to relative 1e-8 on 100 random (x, y, t).
#[test]
fn acceptance_3_closed_form_cross_check() {
    let spec = QuadratureSpec {
        rel_tol: 1e-10,
        ..Default::default()
    };
    let stream = NormalStream::new(314, 0);
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let x = 4.0 * stream.uniform(3 * case) - 2.0;
        let y = 4.0 * stream.uniform(3 * case + 1) - 2.0;
        let t = 0.05 + 1.95 * stream.uniform(3 * case + 2);
        let closed = kernel::gaussian_product_time_integral(x, y, t).unwrap();
        let direct = quad::integrate(
            |v| {
                let u = v * v;
                2.0 * v * kernel::gaussian_product_integral(x, y, u).unwrap() / (2.0 * PI * u)
            },
            1e-14,
            t.sqrt(),
            &spec,
        )
        .unwrap()
        .value;
        worst = worst.max(((closed - direct) / direct).abs());
    }
    assert!(worst <= 1e-8, "max relative error {worst:e}");
    println!("acceptance 3 PASS: closed form vs quadrature, max rel err {worst:.2e} on 100 cases");
}

/// 4. Condition suite for the heterogeneous medium: H1, H2, H3 pass with
///    finite constants on h = 2^-3..2^-11 and the variogram slope is 1
///    within 0.05 (Hölder surrogate 0.5 ± 0.025). Cold cache under 5 min.
#[test]
fn acceptance_4_condition_suite() {
    let k = kernel(1.0, 4.0, 1.0, 2.0);
    assert!(k.medium().satisfies_crhoa());
    let spec = QuadratureSpec::default();
    let h_grid: Vec<f64> = (3..=11).map(|m| 0.5f64.powi(m)).collect();
    let start = Instant::now();
    let mut lines = Vec::new();
    for cond in [ConditionId::H1, ConditionId::H2, ConditionId::H3] {
        let report = verify_condition(&k, 1.0, cond, &h_grid, &spec).unwrap();
        assert!(report.pass, "{cond} failed: {report:?}");
        assert!(report.fitted_constant.is_finite() && report.fitted_constant > 0.0);
        lines.push(format!("{cond}: C = {:.4}", report.fitted_constant));
    }
    let est = holder_estimate(&k, 1.0, &h_grid, &spec).unwrap();
    assert!(
        (est.slope - 1.0).abs() <= 0.05,
        "variogram slope {}",
        est.slope
    );
    assert!(
        (est.gamma_hat - 0.5).abs() <= 0.025,
        "gamma {}",
        est.gamma_hat
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "took {elapsed:.1} s");
    println!(
        "acceptance 4 PASS: {}; variogram slope {:.4} (gamma {:.4}) in {elapsed:.1} s",
        lines.join(", "),
        est.slope,
        est.gamma_hat
    );
}

/// 5. Variance convergence at desk scale: exact E[Ṽ_N²] from the Gram is
///    within 0.05 of 1 at N = 256 and decreases along {16,...,512}.
#[test]
fn acceptance_5_variance_convergence() {
    let spec = QuadratureSpec::default();
    for (name, k) in [
        ("sym", kernel(1.0, 1.0, 2.0, 2.0)),
        ("het", kernel(1.0, 4.0, 1.0, 2.0)),
    ] {
        let ladder = [16usize, 32, 64, 128, 256, 512];
        let mut gaps = Vec::new();
        for &n in ladder.iter() {
            let gram = build_gram(&k, 1.0, n, &spec, None).unwrap();
            let m = expected_vsq(&gram);
            assert!((m.e_vsq - (1.0 + m.t2 / (2.0 * n as f64))).abs() < 1e-12);
            gaps.push((n, (m.e_vsq - 1.0).abs()));
        }
        let at_256 = gaps.iter().find(|(n, _)| *n == 256).unwrap().1;
        assert!(at_256 <= 0.05, "{name}: |e_vsq - 1| = {at_256} at N=256");
        for w in gaps.windows(2) {
            assert!(w[1].1 < w[0].1, "{name}: gap not decreasing: {gaps:?}");
        }
        println!(
            "acceptance 5 PASS ({name}): |E[V~²]-1| decreasing {:?}, at N=256: {at_256:.2e}",
            gaps.iter()
                .map(|(n, g)| format!("{n}:{g:.1e}"))
                .collect::<Vec<_>>()
        );
    }
}

/// 6. CLT rate at desk scale: KS log-log slope in [-0.8, -0.3] with 1e4
///    replicas on N in {16,64,256,512}; the exact bound value has slope
///    -0.5 ± 0.05. Under 15 minutes.
#[test]
fn acceptance_6_clt_rate() {
    let k = kernel(1.0, 4.0, 1.0, 2.0);
    let spec = QuadratureSpec::default();
    let start = Instant::now();
    let report = clt_experiment(&k, 1.0, &[16, 64, 256, 512], 10_000, 99, &spec, None).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        report.ks_slope >= -0.8 && report.ks_slope <= -0.3,
        "KS slope {} outside [-0.8, -0.3]",
        report.ks_slope
    );
    assert!(
        (report.be_slope + 0.5).abs() <= 0.05,
        "BE slope {}",
        report.be_slope
    );
    // the exact bound decreases strictly and sits above the measured
    // Kolmogorov distance everywhere on the shared ladder
    for w in report.rows.windows(2) {
        assert!(w[1].be_bound < w[0].be_bound);
    }
    for row in &report.rows {
        assert!(row.be_bound > row.ks, "ordering violated at n={}", row.n);
    }
    assert!(elapsed < 900.0, "took {elapsed:.1} s");
    println!(
        "acceptance 6 PASS: KS slope {:.3}, BE slope {:.3}, KS = {:?} in {elapsed:.1} s",
        report.ks_slope,
        report.be_slope,
        report
            .rows
            .iter()
            .map(|r| format!("{:.4}", r.ks))
            .collect::<Vec<_>>()
    );
}

/// 7. Lacunary almost-sure CLT check at K = 12 with 8 paths: for every
///    shipped test function the pooled average over the 8 paths improves
///    from K = 4 to K = 12 and lands within 0.15 of E φ(Z).
///
///    The per-path averages at K = 12 still carry sampling noise of order
///    σ(A_12) ≈ 0.2-0.4 (the nested grids give corr(Ṽ_N, Ṽ_2N) ≈ 0.75),
///    so the path-pooled average is the statistic with enough resolution
///    at desk scale; per-path behavior is asserted as a majority trend.
#[test]
fn acceptance_7_asclt_lacunary() {
    let k = kernel(1.0, 1.0, 2.0, 2.0);
    let spec = QuadratureSpec::default();
    let fns = TestFunction::shipped();
    let start = Instant::now();
    let report = asclt_experiment(&k, 1.0, 12, &fns, 8, 13, &spec, None).unwrap();
    assert!(report.lacunary);
    let elapsed = start.elapsed().as_secs_f64();

    let mut lines = Vec::new();
    let mut improvements = 0usize;
    let mut combos = 0usize;
    for (pi, name) in report.function_names.iter().enumerate() {
        let target = report.targets[pi];
        let pooled_4: f64 =
            report.paths.iter().map(|p| p.averages[pi][3]).sum::<f64>() / report.paths.len() as f64;
        let pooled_12: f64 = report.paths.iter().map(|p| p.averages[pi][11]).sum::<f64>()
            / report.paths.len() as f64;
        let early = (pooled_4 - target).abs();
        let late = (pooled_12 - target).abs();
        assert!(
            late < early,
            "{name}: no improvement, {early:.4} -> {late:.4}"
        );
        assert!(late <= 0.15, "{name}: |A_12 - Eφ(Z)| = {late:.4} > 0.15");
        lines.push(format!("{name}: {early:.3}->{late:.3}"));
        for p in &report.paths {
            combos += 1;
            if (p.averages[pi][11] - target).abs() < (p.averages[pi][3] - target).abs() {
                improvements += 1;
            }
        }
    }
    assert!(
        improvements * 2 >= combos,
        "per-path improvement only {improvements}/{combos}"
    );
    println!(
        "acceptance 7 PASS: pooled averages {}; per-path improvement {improvements}/{combos}; {elapsed:.1} s",
        lines.join(", ")
    );
}

/// 8. The exact Cholesky sampler and the noise-grid discretization agree
///    on every increment variance within 3 combined standard errors
///    (2e3 oracle replicas, m = (1,4,1,2), t = 0.5, N = 8).
#[test]
fn acceptance_8_oracle_equivalence() {
    let k = kernel(1.0, 4.0, 1.0, 2.0);
    let spec = QuadratureSpec::default();
    let t = 0.5;
    let n = 8usize;
    let start = Instant::now();

    let gram = build_gram(&k, t, n, &spec, None).unwrap();
    let m_chol = 20_000usize;
    let samples = cholesky_sample(&gram, 501, m_chol).unwrap();
    let chol_var: Vec<f64> = (0..n)
        .map(|j| {
            samples
                .iter()
                .map(|s| s.increments[j] * s.increments[j])
                .sum::<f64>()
                / m_chol as f64
        })
        .collect();

    let x_grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let oracle = NoiseGridOracle::new(&k, t, &x_grid, 4e-4, 8e-3, 6.0);
    let m_orc = 2_000usize;
    let orc_var = oracle.mean_square_increments(502, m_orc);

    let mut worst_z = 0.0f64;
    for j in 0..n {
        let se = ((2.0 * chol_var[j] * chol_var[j]) / m_chol as f64
            + (2.0 * orc_var[j] * orc_var[j]) / m_orc as f64)
            .sqrt();
        let z = (chol_var[j] - orc_var[j]) / se;
        worst_z = worst_z.max(z.abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst_z <= 3.0, "worst |z| = {worst_z:.2}");
    println!("acceptance 8 PASS: oracle equivalence, worst |z| = {worst_z:.2} over {n} increments in {elapsed:.0} s");
}

/// 9. Brute-force quadruple loops equal the trace-based contraction and
///    Malliavin-variance formulas to 1e-10 relative for random small
///    correlation matrices.
#[test]
fn acceptance_9_chaos_oracle() {
    for (n, seed) in [(3usize, 1u64), (5, 2), (8, 3), (8, 4)] {
        let s = NormalStream::new(seed, 9);
        let b = DMatrix::from_fn(n, n + 3, |i, j| s.normal((i * (n + 3) + j) as u64));
        let c = &b * b.transpose();
        let r = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt()
            }
        });
        let scale: Vec<f64> = (0..n).map(|i| 0.5 + s.uniform(10_000 + i as u64)).collect();
        let entries = DMatrix::from_fn(n, n, |i, j| r[(i, j)] * scale[i] * scale[j]);
        let gram = covariance::IncrementGram::from_matrix(1.0, entries).unwrap_or_else(|e| {
            panic!("synthetic gram must be valid: {e}");
        });

        let mut tr4 = 0.0;
        for j in 0..n {
            for kk in 0..n {
                for m in 0..n {
                    for l in 0..n {
                        tr4 += r[(j, kk)] * r[(m, l)] * r[(j, m)] * r[(kk, l)];
                    }
                }
            }
        }
        let nf = n as f64;
        let sigma2 = expected_vsq(&gram).e_vsq;
        let want_var = 8.0 * tr4 / (nf * nf);
        let want_contraction = tr4 / (4.0 * sigma2 * sigma2 * nf * nf);

        let got_var = malliavin_variance(&gram).total;
        let got_contraction = contraction_norm_sq(&gram);
        assert!(
            ((got_var - want_var) / want_var).abs() < 1e-10,
            "variance n={n}: {got_var} vs {want_var}"
        );
        assert!(
            ((got_contraction - want_contraction) / want_contraction).abs() < 1e-10,
            "contraction n={n}: {got_contraction} vs {want_contraction}"
        );
    }
    println!("acceptance 9 PASS: trace formulas equal quadruple loops to 1e-10 relative");
}
