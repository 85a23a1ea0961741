//! Exact Gaussian sampling of the spatial increment vector (Cholesky of
//! the increment Gram matrix) and an independent noise-discretization
//! oracle that builds the field from the defining stochastic convolution.

use crate::cache::GramCache;
use crate::covariance::{build_gram, CovarianceError, IncrementGram};
use crate::kernel::Kernel;
use crate::quad::QuadratureSpec;
use crate::rng::NormalStream;
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("Cholesky factorization failed even with maximum jitter; smallest eigenvalue {min_eigenvalue:e}")]
    Factorization { min_eigenvalue: f64 },
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error("sample (t={sample_t}, n={sample_n}) does not match gram (t={gram_t}, n={gram_n})")]
    Mismatch {
        sample_t: f64,
        sample_n: usize,
        gram_t: f64,
        gram_n: usize,
    },
}

/// One replica of the spatial increment vector
/// `Δ_j = u(t, x_{j+1}) - u(t, x_j)` on the uniform unit-interval grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub increments: Vec<f64>,
    pub seed: u64,
    pub replica_id: u64,
}

impl FieldSample {
    pub fn n(&self) -> usize {
        self.increments.len()
    }
}

/// Reusable factorization of an increment Gram for drawing i.i.d. replicas.
/// Per-replica streams are counter-based, so replicas can be generated in
/// any order and in parallel without changing a single bit.
pub struct CholeskySampler {
    t: f64,
    lower: DMatrix<f64>,
    jitter: f64,
}

/// Diagonal jitter ladder, in units of trace/n.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

impl CholeskySampler {
    pub fn new(gram: &IncrementGram) -> Result<Self, SampleError> {
        let n = gram.n();
        let scale = gram.trace() / n as f64;
        for &level in JITTER_LADDER.iter() {
            let jitter = level * scale;
            let mut m = gram.entries().clone();
            for j in 0..n {
                m[(j, j)] += jitter;
            }
            if let Some(chol) = m.cholesky() {
                return Ok(CholeskySampler {
                    t: gram.t(),
                    lower: chol.unpack(),
                    jitter,
                });
            }
        }
        Err(SampleError::Factorization {
            min_eigenvalue: gram.min_eigenvalue(),
        })
    }

    pub fn n(&self) -> usize {
        self.lower.nrows()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Jitter that was actually added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Draw the replica with the given identity. Pure in (seed, replica_id).
    pub fn draw(&self, seed: u64, replica_id: u64) -> FieldSample {
        let n = self.n();
        let stream = NormalStream::new(seed, replica_id);
        let noise: Vec<f64> = (0..n as u64).map(|i| stream.normal(i)).collect();
        let mut increments = vec![0.0; n];
        // x = L xi, walking columns to match the column-major layout.
        for (i, &xi) in noise.iter().enumerate() {
            let col = self.lower.column(i);
            for j in i..n {
                increments[j] += col[j] * xi;
            }
        }
        FieldSample {
            t: self.t,
            increments,
            seed,
            replica_id,
        }
    }
}

/// Draw `n_replicas` i.i.d. zero-mean Gaussian increment vectors with
/// covariance equal to `gram` (up to the diagonal jitter needed for the
/// factorization). Replica `r` uses the stream keyed by `(seed, r)`.
pub fn cholesky_sample(
    gram: &IncrementGram,
    seed: u64,
    n_replicas: usize,
) -> Result<Vec<FieldSample>, SampleError> {
    let sampler = CholeskySampler::new(gram)?;
    Ok((0..n_replicas as u64)
        .into_par_iter()
        .map(|r| sampler.draw(seed, r))
        .collect())
}

/// One sample of the finest dyadic grid together with exact coarse-level
/// views: the level-k increment j is the sum of its 2^(K-k) children,
/// summed left to right so the identity is reproducible bitwise.
#[derive(Debug, Clone)]
pub struct DyadicSample {
    level: u32,
    fine: FieldSample,
}

impl DyadicSample {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn fine(&self) -> &FieldSample {
        &self.fine
    }

    /// Increments of the grid with 2^k intervals, `k <= level`.
    pub fn increments_at_level(&self, k: u32) -> Vec<f64> {
        assert!(
            k <= self.level,
            "level {k} exceeds sample level {}",
            self.level
        );
        let block = 1usize << (self.level - k);
        self.fine
            .increments
            .chunks_exact(block)
            .map(|c| c.iter().fold(0.0, |acc, &v| acc + v))
            .collect()
    }
}

/// Exact sample at dyadic level `K` (grid 2^K), drawn once at the finest
/// level; coarse statistics come from block sums.
pub fn dyadic_sample<K: Kernel + ?Sized>(
    kernel: &K,
    t: f64,
    level: u32,
    seed: u64,
    replica_id: u64,
    spec: &QuadratureSpec,
    cache: Option<&GramCache>,
) -> Result<DyadicSample, SampleError> {
    assert!(
        level <= 13,
        "dyadic level {level} exceeds the desk-scale bound 13"
    );
    let n = 1usize << level;
    let gram = build_gram(kernel, t, n, spec, cache)?;
    let sampler = CholeskySampler::new(&gram)?;
    Ok(DyadicSample {
        level,
        fine: sampler.draw(seed, replica_id),
    })
}

/// Field values produced by the noise-grid discretization, with the
/// discretization parameters echoed alongside.
#[derive(Debug, Clone)]
pub struct NoiseGridSample {
    pub t: f64,
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Differences of consecutive grid values.
    pub increments: Vec<f64>,
    pub ds: f64,
    pub dy: f64,
    pub half_width: f64,
    pub seed: u64,
    pub replica_id: u64,
}

/// Noise-grid approximation of the mild solution:
/// `u(t,x) ~ sum_cells G(t - s_i, x, y_j) sqrt(ds dy) xi_ij` with i.i.d.
/// standard normal `xi`. The bias is O(sqrt(ds) + dy + tail(half_width));
/// accuracy is the caller's responsibility. Within each time cell the
/// kernel is evaluated at the root-mean point `((sqrt(u_lo)+sqrt(u_hi))/2)²`,
/// which integrates the `u^{-1/2}` mass of the cell exactly.
pub struct NoiseGridOracle {
    t: f64,
    x_grid: Vec<f64>,
    ds: f64,
    dy: f64,
    half_width: f64,
    /// cells x grid weight table, row per cell.
    weights: Vec<f64>,
    n_cells: usize,
}

impl NoiseGridOracle {
    pub fn new<K: Kernel + ?Sized>(
        kernel: &K,
        t: f64,
        x_grid: &[f64],
        ds: f64,
        dy: f64,
        half_width: f64,
    ) -> Self {
        assert!(
            ds > 0.0 && dy > 0.0 && half_width > 0.0,
            "discretization steps must be positive"
        );
        assert!(t > 0.0 && !x_grid.is_empty());
        let n_t = (t / ds).ceil() as usize;
        let n_y = 2 * (half_width / dy).ceil() as usize;
        let y0 = -(n_y as f64) * 0.5 * dy;
        let g = x_grid.len();
        let n_cells = n_t * n_y;
        let amp = (ds * dy).sqrt();

        let weights: Vec<f64> = (0..n_t)
            .into_par_iter()
            .flat_map_iter(|it| {
                let s_lo = it as f64 * ds;
                let s_hi = ((it + 1) as f64 * ds).min(t);
                let u_hi = t - s_lo;
                let u_lo = (t - s_hi).max(0.0);
                let u_eval = 0.25 * (u_lo.sqrt() + u_hi.sqrt()).powi(2);
                let x_grid = x_grid.to_vec();
                (0..n_y).flat_map(move |iy| {
                    let yc = y0 + (iy as f64 + 0.5) * dy;
                    x_grid
                        .iter()
                        .map(|&x| kernel.eval(u_eval, x, yc) * amp)
                        .collect::<Vec<f64>>()
                })
            })
            .collect();

        debug_assert_eq!(weights.len(), n_cells * g);
        NoiseGridOracle {
            t,
            x_grid: x_grid.to_vec(),
            ds,
            dy,
            half_width,
            weights,
            n_cells,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Exact second moments of the discretized field values, straight from
    /// the weight table: `Var u(t,x_g) = Σ_cells w_{cell,g}²`. Useful for
    /// separating discretization bias from Monte Carlo noise.
    pub fn implied_value_variances(&self) -> Vec<f64> {
        let g = self.x_grid.len();
        let mut acc = vec![0.0f64; g];
        for row in self.weights.chunks_exact(g) {
            for (a, &w) in acc.iter_mut().zip(row) {
                *a += w * w;
            }
        }
        acc
    }

    /// Monte Carlo mean squares of the increments over `n_replicas`
    /// replicas keyed by `(seed, 0..n_replicas)`, generated in parallel.
    pub fn mean_square_increments(&self, seed: u64, n_replicas: usize) -> Vec<f64> {
        let g = self.x_grid.len().saturating_sub(1);
        let acc = (0..n_replicas as u64)
            .into_par_iter()
            .map(|r| self.sample(seed, r))
            .fold(
                || vec![0.0f64; g],
                |mut a, s| {
                    for (slot, &v) in a.iter_mut().zip(&s.increments) {
                        *slot += v * v;
                    }
                    a
                },
            )
            .reduce(
                || vec![0.0f64; g],
                |mut a, b| {
                    for (slot, v) in a.iter_mut().zip(b) {
                        *slot += v;
                    }
                    a
                },
            );
        acc.into_iter().map(|v| v / n_replicas as f64).collect()
    }

    /// Exact second moments of the discretized increments.
    pub fn implied_increment_variances(&self) -> Vec<f64> {
        let g = self.x_grid.len();
        if g < 2 {
            return Vec::new();
        }
        let mut acc = vec![0.0f64; g - 1];
        for row in self.weights.chunks_exact(g) {
            for (j, a) in acc.iter_mut().enumerate() {
                let d = row[j + 1] - row[j];
                *a += d * d;
            }
        }
        acc
    }

    /// Generate the replica keyed by `(seed, replica_id)`.
    pub fn sample(&self, seed: u64, replica_id: u64) -> NoiseGridSample {
        let g = self.x_grid.len();
        let stream = NormalStream::new(seed, replica_id);
        let mut values = vec![0.0f64; g];
        for cell in 0..self.n_cells {
            let xi = stream.normal(cell as u64);
            let row = &self.weights[cell * g..(cell + 1) * g];
            for (v, &w) in values.iter_mut().zip(row) {
                *v += w * xi;
            }
        }
        let increments = values.windows(2).map(|w| w[1] - w[0]).collect();
        NoiseGridSample {
            t: self.t,
            x_grid: self.x_grid.clone(),
            values,
            increments,
            ds: self.ds,
            dy: self.dy,
            half_width: self.half_width,
            seed,
            replica_id,
        }
    }
}

/// One-shot convenience wrapper around [`NoiseGridOracle`].
#[allow(clippy::too_many_arguments)]
pub fn noise_grid_oracle<K: Kernel + ?Sized>(
    kernel: &K,
    t: f64,
    x_grid: &[f64],
    ds: f64,
    dy: f64,
    half_width: f64,
    seed: u64,
    replica_id: u64,
) -> NoiseGridSample {
    NoiseGridOracle::new(kernel, t, x_grid, ds, dy, half_width).sample(seed, replica_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{FnKernel, PiecewiseKernel};
    use crate::medium::Medium;

    fn piecewise(a1: f64, a2: f64, r1: f64, r2: f64) -> PiecewiseKernel {
        PiecewiseKernel::new(Medium::new(a1, a2, r1, r2).unwrap())
    }

    fn gram(n: usize, t: f64) -> IncrementGram {
        build_gram(
            &piecewise(1.0, 4.0, 1.0, 2.0),
            t,
            n,
            &QuadratureSpec::default(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_increment_variance_matches() {
        let g = gram(1, 1.0);
        let samples = cholesky_sample(&g, 11, 100_000).unwrap();
        let var = samples
            .iter()
            .map(|s| s.increments[0] * s.increments[0])
            .sum::<f64>()
            / samples.len() as f64;
        let want = g.variances()[0];
        assert!(
            ((var - want) / want).abs() < 0.02,
            "empirical {var} vs {want}"
        );
    }

    #[test]
    fn empirical_covariance_matches_gram() {
        let g = gram(4, 1.0);
        let m = 100_000usize;
        let samples = cholesky_sample(&g, 3, m).unwrap();
        for j in 0..4 {
            for k in 0..=j {
                let est = samples
                    .iter()
                    .map(|s| s.increments[j] * s.increments[k])
                    .sum::<f64>()
                    / m as f64;
                let want = g.entry(j, k);
                // SE of a covariance estimate from Gaussian replicas.
                let se = ((g.entry(j, j) * g.entry(k, k) + want * want) / m as f64).sqrt();
                assert!(
                    (est - want).abs() <= 4.0 * se,
                    "({j},{k}): {est} vs {want}, se {se:e}"
                );
            }
        }
    }

    #[test]
    fn replicas_are_deterministic_and_order_independent() {
        let g = gram(8, 0.5);
        let sampler = CholeskySampler::new(&g).unwrap();
        let direct = sampler.draw(99, 5);
        let batch = cholesky_sample(&g, 99, 8).unwrap();
        assert_eq!(direct, batch[5]);
        let again = cholesky_sample(&g, 99, 8).unwrap();
        assert_eq!(batch, again);
    }

    #[test]
    fn linear_functional_variances_match_quadratic_form() {
        let g = gram(6, 1.0);
        let m = 100_000usize;
        let samples = cholesky_sample(&g, 7, m).unwrap();
        let probe = NormalStream::new(123, 0);
        for ell_idx in 0..100u64 {
            let ell: Vec<f64> = (0..6).map(|i| probe.normal(ell_idx * 6 + i)).collect();
            let mut want = 0.0;
            for j in 0..6 {
                for k in 0..6 {
                    want += ell[j] * g.entry(j, k) * ell[k];
                }
            }
            let vals: Vec<f64> = samples
                .iter()
                .map(|s| {
                    s.increments
                        .iter()
                        .zip(&ell)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .collect();
            let est = vals.iter().map(|v| v * v).sum::<f64>() / m as f64;
            let se = want * (2.0 / m as f64).sqrt();
            assert!(
                (est - want).abs() <= 4.0 * se,
                "functional {ell_idx}: {est} vs {want}"
            );
        }
    }

    #[test]
    fn dyadic_block_sums_are_exact() {
        let k = piecewise(1.0, 4.0, 1.0, 2.0);
        let spec = QuadratureSpec::default();
        let s = dyadic_sample(&k, 0.5, 5, 42, 0, &spec, None).unwrap();
        let fine = &s.fine().increments;
        // Level K-1 is the pairwise child sum, bitwise.
        let parent = s.increments_at_level(4);
        for (j, c) in parent.iter().enumerate() {
            assert_eq!(*c, fine[2 * j] + fine[2 * j + 1]);
        }
        // Every level equals the left-to-right fold of its fine children.
        for level in 0..5 {
            let coarse = s.increments_at_level(level);
            assert_eq!(coarse.len(), 1 << level);
            let block = 1usize << (5 - level);
            for (j, c) in coarse.iter().enumerate() {
                let want = fine[j * block..(j + 1) * block]
                    .iter()
                    .fold(0.0, |a, &v| a + v);
                assert_eq!(*c, want, "level {level}, j {j}");
            }
        }
        // level 0 is the single increment u(t,1) - u(t,0)
        let total: f64 = fine.iter().fold(0.0, |a, &v| a + v);
        assert_eq!(s.increments_at_level(0)[0], total);
    }

    #[test]
    fn dyadic_level_variances_match_coarse_gram() {
        let k = piecewise(1.0, 1.0, 2.0, 2.0);
        let spec = QuadratureSpec::default();
        let t = 0.5;
        let fine_gram = build_gram(&k, t, 1 << 4, &spec, None).unwrap();
        let sampler = CholeskySampler::new(&fine_gram).unwrap();
        let m = 40_000usize;
        let level = 2u32;
        let coarse = build_gram(&k, t, 1 << level, &spec, None).unwrap();
        let block = 1usize << (4 - level);
        let mut est = vec![0.0f64; 1 << level];
        for r in 0..m as u64 {
            let s = DyadicSample {
                level: 4,
                fine: sampler.draw(17, r),
            };
            for (j, inc) in s.increments_at_level(level).iter().enumerate() {
                est[j] += inc * inc;
            }
            let _ = block;
        }
        for (j, acc) in est.iter().enumerate() {
            let got = acc / m as f64;
            let want = coarse.entry(j, j);
            let se = want * (2.0 / m as f64).sqrt();
            assert!(
                (got - want).abs() <= 4.0 * se,
                "level-2 var {j}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn null_kernel_yields_zero_field() {
        let null = FnKernel(|_: f64, _: f64, _: f64| 0.0);
        let s = noise_grid_oracle(&null, 0.5, &[0.0, 0.5, 1.0], 0.01, 0.05, 2.0, 1, 0);
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(s.increments.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_grid_second_moment_tracks_covariance() {
        // Coarse, fast configuration: agreement within 3 combined errors.
        let k = piecewise(1.0, 1.0, 2.0, 2.0);
        let spec = QuadratureSpec::default();
        let t = 0.5;
        let x = 0.3;
        let oracle = NoiseGridOracle::new(&k, t, &[x], 2e-3, 0.02, 5.0);
        let m = 2000usize;
        let mean_sq: f64 = (0..m as u64)
            .into_par_iter()
            .map(|r| {
                let v = oracle.sample(400, r).values[0];
                v * v
            })
            .sum::<f64>()
            / m as f64;
        let want = crate::covariance::cov_field(&k, t, x, x, &spec).unwrap();
        let se = want * (2.0 / m as f64).sqrt();
        assert!(
            (mean_sq - want).abs() <= 3.0 * se,
            "oracle {mean_sq} vs quadrature {want}, band {:.2e}",
            3.0 * se
        );
    }

    #[test]
    fn doubling_the_tail_window_changes_nothing_within_noise() {
        let k = piecewise(1.0, 4.0, 1.0, 2.0);
        let t = 0.5;
        let m = 500usize;
        let run = |half_width: f64| -> f64 {
            let oracle = NoiseGridOracle::new(&k, t, &[0.3], 5e-3, 0.05, half_width);
            (0..m as u64)
                .map(|r| oracle.sample(7, r).values[0].powi(2))
                .sum::<f64>()
                / m as f64
        };
        let narrow = run(4.0);
        let wide = run(8.0);
        let band = 3.0 * narrow * (2.0 / m as f64).sqrt();
        assert!((narrow - wide).abs() <= band, "{narrow} vs {wide}");
    }
}
