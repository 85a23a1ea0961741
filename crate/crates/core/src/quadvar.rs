//! The centered renormalized quadratic variation `Ṽ_N` and the three
//! experiments built on it: variance convergence, the Kolmogorov-distance
//! CLT rate, and the lacunary almost-sure CLT averages.

use crate::cache::GramCache;
use crate::chaos;
use crate::covariance::{build_gram, increment_variance, CovarianceError, IncrementGram};
use crate::fit::least_squares_slope;
use crate::kernel::Kernel;
use crate::quad::{self, QuadError, QuadratureSpec};
use crate::sampler::{CholeskySampler, FieldSample, SampleError};
use crate::special::normal_cdf;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadVarError {
    #[error("sample (t={sample_t}, n={sample_n}) does not match gram (t={gram_t}, n={gram_n})")]
    Mismatch {
        sample_t: f64,
        sample_n: usize,
        gram_t: f64,
        gram_n: usize,
    },
    #[error("need at least one sample")]
    EmptySample,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// `V_N = Σ_j (Δ_j²/σ_j² - 1)` and `Ṽ_N = V_N / sqrt(2N)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadVarStat {
    pub n: usize,
    pub v: f64,
    pub v_tilde: f64,
}

pub fn v_stat(sample: &FieldSample, gram: &IncrementGram) -> Result<QuadVarStat, QuadVarError> {
    if sample.n() != gram.n() || sample.t != gram.t() {
        return Err(QuadVarError::Mismatch {
            sample_t: sample.t,
            sample_n: sample.n(),
            gram_t: gram.t(),
            gram_n: gram.n(),
        });
    }
    let n = gram.n();
    let v: f64 = sample
        .increments
        .iter()
        .zip(gram.variances())
        .map(|(d, var)| d * d / var - 1.0)
        .sum();
    Ok(QuadVarStat {
        n,
        v,
        v_tilde: v / (2.0 * n as f64).sqrt(),
    })
}

/// Two-sided Kolmogorov distance between the empirical law of `samples`
/// and the standard normal CDF.
pub fn ks_distance(samples: &[f64]) -> Result<f64, QuadVarError> {
    if samples.is_empty() {
        return Err(QuadVarError::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let phi = normal_cdf(x);
        d = d.max(phi - i as f64 / m);
        d = d.max((i + 1) as f64 / m - phi);
    }
    Ok(d)
}

/// A bounded continuous test function with a printable name.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// `E φ(Z)` by quadrature against the standard normal density (the
    /// targets are never hardcoded).
    pub fn gaussian_expectation(&self, spec: &QuadratureSpec) -> Result<f64, QuadError> {
        quad::gaussian_expectation(self.f, spec)
    }

    /// The shipped bounded-continuous set.
    pub fn shipped() -> Vec<TestFunction> {
        vec![
            TestFunction {
                name: "cos",
                f: |x| x.cos(),
            },
            TestFunction {
                name: "sin",
                f: |x| x.sin(),
            },
            TestFunction {
                name: "gauss",
                f: |x| (-0.5 * x * x).exp(),
            },
            TestFunction {
                name: "abs3",
                f: |x| x.abs().min(3.0),
            },
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CltRow {
    pub n: usize,
    pub m: usize,
    pub ks: f64,
    /// Exact constant-free Berry-Esseen bound value at this grid size.
    pub be_bound: f64,
    pub e_vsq: f64,
}

#[derive(Debug, Clone)]
pub struct CltReport {
    pub rows: Vec<CltRow>,
    /// log-log slope of the empirical KS distance in N.
    pub ks_slope: f64,
    /// log-log slope of the exact bound value in N (no Monte Carlo noise).
    pub be_slope: f64,
}

/// Sample `m_replicas` of `Ṽ_N` for each grid size and measure the
/// Kolmogorov distance of the empirical law to N(0,1).
pub fn clt_experiment<K: Kernel + ?Sized>(
    kernel: &K,
    t: f64,
    n_list: &[usize],
    m_replicas: usize,
    seed: u64,
    spec: &QuadratureSpec,
    cache: Option<&GramCache>,
) -> Result<CltReport, QuadVarError> {
    assert!(
        n_list.windows(2).all(|w| w[0] < w[1]),
        "grid sizes must increase"
    );
    assert!(
        m_replicas >= 1000,
        "need at least 1e3 replicas, got {m_replicas}"
    );

    let mut rows = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let gram = build_gram(kernel, t, n, spec, cache)?;
        let sampler = CholeskySampler::new(&gram)?;
        // Distinct stream namespace per ladder entry.
        let base = (idx as u64) << 40;
        let stats: Vec<f64> = (0..m_replicas as u64)
            .into_par_iter()
            .map(|r| {
                let sample = sampler.draw(seed, base | r);
                v_stat(&sample, &gram)
                    .expect("sampler and gram share shape")
                    .v_tilde
            })
            .collect();
        rows.push(CltRow {
            n,
            m: m_replicas,
            ks: ks_distance(&stats)?,
            be_bound: chaos::berry_esseen_value(&gram),
            e_vsq: chaos::expected_vsq(&gram).e_vsq,
        });
    }

    let ks_pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), r.ks.ln()))
        .collect();
    let be_pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), r.be_bound.ln()))
        .collect();
    Ok(CltReport {
        rows,
        ks_slope: least_squares_slope(&ks_pts),
        be_slope: least_squares_slope(&be_pts),
    })
}

#[derive(Debug, Clone)]
pub struct AscltPath {
    pub path_id: u64,
    /// `Ṽ_{2^k}` for k = 1..=level, from one nested sample.
    pub v_tilde: Vec<f64>,
    /// Running lacunary averages `A_k(φ) = (1/k) Σ_{j<=k} φ(Ṽ_{2^j})`,
    /// indexed `[phi][k-1]`.
    pub averages: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct AscltReport {
    pub level: u32,
    pub function_names: Vec<&'static str>,
    /// `E φ(Z)` per function, by quadrature.
    pub targets: Vec<f64>,
    pub paths: Vec<AscltPath>,
    /// The averages run over the lacunary subsequence N = 2^k with uniform
    /// weights, not over all N with harmonic weights.
    pub lacunary: bool,
}

/// Per-path lacunary almost-sure CLT check: one exact sample of the finest
/// dyadic grid per path, `Ṽ_{2^k}` on every nested grid via exact block
/// sums, and running averages of each test function against its Gaussian
/// expectation.
#[allow(clippy::too_many_arguments)]
pub fn asclt_experiment<K: Kernel + ?Sized>(
    kernel: &K,
    t: f64,
    level: u32,
    functions: &[TestFunction],
    n_paths: usize,
    seed: u64,
    spec: &QuadratureSpec,
    cache: Option<&GramCache>,
) -> Result<AscltReport, QuadVarError> {
    assert!(
        (1..=13).contains(&level),
        "dyadic level must be in 1..=13, got {level}"
    );
    let n = 1usize << level;
    let fine = build_gram(kernel, t, n, spec, cache)?;
    let sampler = CholeskySampler::new(&fine)?;

    // Exact coarse-level variances by block-summing the fine Gram.
    let level_variances: Vec<Vec<f64>> = (1..=level)
        .map(|k| Ok(fine.coarsen(1usize << (level - k))?.variances().to_vec()))
        .collect::<Result<_, CovarianceError>>()?;

    let targets: Vec<f64> = functions
        .iter()
        .map(|f| f.gaussian_expectation(spec))
        .collect::<Result<_, _>>()?;

    let paths: Vec<AscltPath> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path_id| {
            let fine_sample = sampler.draw(seed, path_id);
            let mut v_tilde = Vec::with_capacity(level as usize);
            for k in 1..=level {
                let block = 1usize << (level - k);
                let m = 1usize << k;
                let vars = &level_variances[(k - 1) as usize];
                let v: f64 = fine_sample
                    .increments
                    .chunks_exact(block)
                    .zip(vars)
                    .map(|(c, var)| {
                        let d = c.iter().fold(0.0, |a, &x| a + x);
                        d * d / var - 1.0
                    })
                    .sum();
                v_tilde.push(v / (2.0 * m as f64).sqrt());
            }
            let averages = functions
                .iter()
                .map(|phi| {
                    let mut acc = 0.0;
                    v_tilde
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| {
                            acc += phi.eval(v);
                            acc / (i + 1) as f64
                        })
                        .collect()
                })
                .collect();
            AscltPath {
                path_id,
                v_tilde,
                averages,
            }
        })
        .collect();

    Ok(AscltReport {
        level,
        function_names: functions.iter().map(|f| f.name).collect(),
        targets,
        paths,
        lacunary: true,
    })
}

/// One point of the spatial variogram: mean increment variance at lag h.
#[derive(Debug, Clone, Copy)]
pub struct VariogramPoint {
    pub h: f64,
    pub mean_variance: f64,
}

#[derive(Debug, Clone)]
pub struct HolderEstimate {
    pub points: Vec<VariogramPoint>,
    /// log-log slope of the variogram.
    pub slope: f64,
    /// `slope / 2`, the testable surrogate of the spatial Hölder exponent.
    pub gamma_hat: f64,
}

/// Fit the variogram scaling exponent over interior positions.
pub fn holder_estimate<K: Kernel + ?Sized>(
    kernel: &K,
    t: f64,
    h_levels: &[f64],
    spec: &QuadratureSpec,
) -> Result<HolderEstimate, QuadVarError> {
    assert!(
        h_levels
            .iter()
            .all(|&h| (2f64.powi(-11) - 1e-15..=2f64.powi(-3) + 1e-15).contains(&h)),
        "lags must lie in [2^-11, 2^-3]"
    );
    let xs = [0.1, 0.25, 0.4, 0.55, 0.7];
    let mut points = Vec::with_capacity(h_levels.len());
    for &h in h_levels {
        let vars = xs
            .par_iter()
            .map(|&x| increment_variance(kernel, t, x, x + h, spec))
            .collect::<Result<Vec<_>, _>>()?;
        points.push(VariogramPoint {
            h,
            mean_variance: vars.iter().sum::<f64>() / vars.len() as f64,
        });
    }
    Ok(holder_from_variogram(points))
}

/// Exponent fit from precomputed variogram points (exposed so transformed
/// variograms can be fitted in diagnostics and tests).
pub fn holder_from_variogram(points: Vec<VariogramPoint>) -> HolderEstimate {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.h.ln(), p.mean_variance.ln()))
        .collect();
    let slope = least_squares_slope(&pts);
    HolderEstimate {
        points,
        slope,
        gamma_hat: slope / 2.0,
    }
}
