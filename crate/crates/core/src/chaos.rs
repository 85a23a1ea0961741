//! Exact second-chaos diagnostics for the renormalized quadratic
//! variation: moments, contraction norms, the variance of the Malliavin
//! derivative norm, the resulting Berry-Esseen-style bound value, and the
//! lacunary sums feeding the almost-sure CLT hypotheses.
//!
//! Everything is a polynomial in the increment correlation matrix `R` and
//! is evaluated through matrix products in O(n³); a brute-force O(n⁴)
//! oracle lives in the tests for small n.

use crate::covariance::IncrementGram;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChaosError {
    #[error("Hermite degree {q} exceeds the recurrence bound 20")]
    DegreeTooLarge { q: u32 },
}

/// Hermite polynomial in the `(-1)^q/q! e^{x²/2} d^q/dx^q e^{-x²/2}`
/// normalization, so `H2(x) = (x²-1)/2`. Evaluated by the recurrence
/// `H_{q+1} = (x H_q - H_{q-1})/(q+1)`.
pub fn hermite(q: u32, x: f64) -> Result<f64, ChaosError> {
    if q > 20 {
        return Err(ChaosError::DegreeTooLarge { q });
    }
    let (mut prev, mut cur) = (1.0, x);
    if q == 0 {
        return Ok(prev);
    }
    for deg in 1..q {
        let next = (x * cur - prev) / (deg as f64 + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Exact moments of the renormalized quadratic variation from the Gram:
/// `E[Ṽ_N²] = (T1 + T2)/(2N)` with `T1 = 2N` and
/// `T2 = 2 Σ_{j≠k} R_{jk}²`.
#[derive(Debug, Clone, Copy)]
pub struct VsqMoments {
    pub e_vsq: f64,
    pub t1: f64,
    pub t2: f64,
}

pub fn expected_vsq(gram: &IncrementGram) -> VsqMoments {
    let n = gram.n();
    let r = gram.correlation();
    let mut offsq = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                offsq += r[(j, k)] * r[(j, k)];
            }
        }
    }
    let t1 = 2.0 * n as f64;
    let t2 = 2.0 * offsq;
    VsqMoments {
        e_vsq: (t1 + t2) / (2.0 * n as f64),
        t1,
        t2,
    }
}

/// The scalar ingredients of every fourth-order functional of `R`.
struct RPowerSums {
    n: usize,
    /// Σ_{a≠b} R_ab²
    offsq: f64,
    /// Σ_{a≠b} R_ab⁴
    offpow4: f64,
    /// trace(R³)
    tr3: f64,
    /// trace(R⁴)
    tr4: f64,
    /// Σ_a (Σ_k R_ak²)²
    srow: f64,
}

fn r_power_sums(r: &DMatrix<f64>) -> RPowerSums {
    let n = r.nrows();
    let r2 = r * r;
    let mut offsq = 0.0;
    let mut offpow4 = 0.0;
    let mut tr3 = 0.0;
    let mut tr4 = 0.0;
    let mut srow = 0.0;
    for a in 0..n {
        let mut row2 = 0.0;
        for b in 0..n {
            let v = r[(a, b)];
            row2 += v * v;
            if a != b {
                offsq += v * v;
                offpow4 += v * v * v * v;
            }
            tr3 += r2[(a, b)] * v;
            tr4 += r2[(a, b)] * r2[(a, b)];
        }
        srow += row2 * row2;
    }
    RPowerSums {
        n,
        offsq,
        offpow4,
        tr3,
        tr4,
        srow,
    }
}

/// `Var(‖D Ṽ_N‖²_H) = (8/N²) Σ_{j,k,m,l} R_{jk} R_{ml} R_{jm} R_{kl}`
/// split by how many of the four indices coincide (`d4` has all four
/// equal, `d1` all distinct).
#[derive(Debug, Clone, Copy)]
pub struct MalliavinVariance {
    pub total: f64,
    pub d4: f64,
    pub d3: f64,
    pub d2: f64,
    pub d1: f64,
}

pub fn malliavin_variance(gram: &IncrementGram) -> MalliavinVariance {
    let r = gram.correlation();
    let s = r_power_sums(&r);
    let n = s.n as f64;
    let scale = 8.0 / (n * n);

    // Exact sums over index tuples grouped by their equality pattern,
    // obtained by Moebius inversion on the partition lattice of the four
    // positions (j,k,m,l) in R_{jk} R_{ml} R_{jm} R_{kl}.
    let top = n; // j=k=m=l
    let triple = s.offsq; // each of the four three-equal patterns
    let pair_jk = s.tr3 - 3.0 * s.offsq - n; // {j=k}, {m=l}, {j=m}, {k=l}
    let pair_jl = s.srow - 2.0 * s.offsq - s.offpow4 - n; // {j=l}, {k=m}
    let two_pairs_a = s.offsq; // {j=k}{m=l} and {j=m}{k=l}
    let two_pairs_b = s.offpow4; // {j=l}{k=m}

    let d4 = scale * top;
    let d3 = scale * 4.0 * triple;
    let d2 = scale * (4.0 * pair_jk + 2.0 * pair_jl + 2.0 * two_pairs_a + two_pairs_b);
    let total = scale * s.tr4;
    let d1 = total - d4 - d3 - d2;
    MalliavinVariance {
        total,
        d4,
        d3,
        d2,
        d1,
    }
}

/// `‖g_N ⊗₁ g_N‖² = trace(R⁴) / (4 σ_N⁴ N²)` where `σ_N² = E[Ṽ_N²]` is the
/// normalization of the unit-variance chaos element.
pub fn contraction_norm_sq(gram: &IncrementGram) -> f64 {
    let r = gram.correlation();
    let s = r_power_sums(&r);
    let sigma2 = expected_vsq(gram).e_vsq;
    let n = s.n as f64;
    s.tr4 / (4.0 * sigma2 * sigma2 * n * n)
}

/// Constant-free Berry-Esseen-style bound value for `Ṽ_N` against N(0,1):
/// `sqrt(Var ‖DṼ_N‖²) + sqrt(max(0, E‖DṼ_N‖² - 2))` with
/// `E‖DṼ_N‖² = 2 E[Ṽ_N²]`.
pub fn berry_esseen_value(gram: &IncrementGram) -> f64 {
    let mv = malliavin_variance(gram);
    let vsq = expected_vsq(gram);
    mv.total.sqrt() + (2.0 * vsq.e_vsq - 2.0).max(0.0).sqrt()
}

/// Everything the diagnostics table reports for one grid size.
#[derive(Debug, Clone, Copy)]
pub struct ChaosDiag {
    pub n: usize,
    pub e_vsq: f64,
    /// `T1/(2N)`, identically 1.
    pub t1_over_2n: f64,
    pub t2_over_2n: f64,
    pub d_var: f64,
    pub d4: f64,
    pub d3: f64,
    pub d2: f64,
    pub d1: f64,
    pub contraction_sq: f64,
    pub be_bound: f64,
}

pub fn chaos_diag(gram: &IncrementGram) -> ChaosDiag {
    let n = gram.n();
    let vsq = expected_vsq(gram);
    let mv = malliavin_variance(gram);
    ChaosDiag {
        n,
        e_vsq: vsq.e_vsq,
        t1_over_2n: vsq.t1 / (2.0 * n as f64),
        t2_over_2n: vsq.t2 / (2.0 * n as f64),
        d_var: mv.total,
        d4: mv.d4,
        d3: mv.d3,
        d2: mv.d2,
        d1: mv.d1,
        contraction_sq: contraction_norm_sq(gram),
        be_bound: berry_esseen_value(gram),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LevelDiag {
    pub l: usize,
    pub contraction_sq: f64,
    /// `l * contraction_sq`; bounded iff the `C/l` decay holds.
    pub scaled: f64,
}

/// Numerical sums behind the three checkable hypotheses of the
/// almost-sure CLT for second-chaos sequences.
#[derive(Debug, Clone)]
pub struct AscltHypotheses {
    /// Contraction decay per dyadic level (hypothesis: `-> 0` like `C/l`).
    pub levels: Vec<LevelDiag>,
    /// Partial sums of `Σ_N (1/(N log²N)) Σ_{l<=N} (1/l) ‖g_l ⊗₁ g_l‖²`,
    /// with the contraction interpolated log-log between dyadic anchors.
    pub condition3_partials: Vec<(usize, f64)>,
    /// Partial dyadic sub-sums of
    /// `Σ_N (1/(N log³N)) Σ_{i,j<=N} |E(G_i G_j)|/(ij)`; only dyadic
    /// `(i,j)` pairs enter, so this is a trend indicator, not the full
    /// harmonic sum.
    pub condition4_partials: Vec<(usize, f64)>,
}

/// Evaluate the almost-sure CLT hypothesis sums from one Gram at the
/// finest dyadic level; every coarser dyadic grid and every cross-grid
/// inner product is derived by exact block sums.
pub fn asclt_hypotheses(fine: &IncrementGram) -> AscltHypotheses {
    let n = fine.n();
    assert!(
        n.is_power_of_two(),
        "finest gram must have power-of-two size, got {n}"
    );
    let kmax = n.trailing_zeros();

    let coarse: Vec<IncrementGram> = (0..=kmax)
        .map(|k| fine.coarsen(n >> k).expect("power-of-two coarsening"))
        .collect(); // coarse[k] has 2^k increments

    let levels: Vec<LevelDiag> = coarse
        .iter()
        .map(|g| {
            let l = g.n();
            let c = contraction_norm_sq(g);
            LevelDiag {
                l,
                contraction_sq: c,
                scaled: l as f64 * c,
            }
        })
        .collect();

    // Condition 3: interpolate the contraction between dyadic anchors on
    // log-log scale and accumulate the harmonic-weighted double sum.
    let anchors: Vec<(f64, f64)> = levels
        .iter()
        .map(|d| ((d.l as f64).ln(), d.contraction_sq.ln()))
        .collect();
    let contraction_at = |l: usize| -> f64 {
        let x = (l as f64).ln();
        match anchors.iter().position(|a| a.0 >= x) {
            Some(0) => anchors[0].1.exp(),
            Some(i) => {
                let (x0, y0) = anchors[i - 1];
                let (x1, y1) = anchors[i];
                (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).exp()
            }
            None => anchors.last().unwrap().1.exp(),
        }
    };
    let mut condition3_partials = Vec::new();
    let mut inner = 0.0; // Σ_{l<=N} (1/l) c(l)
    let mut outer = 0.0;
    let mut next_record = 2usize;
    for big_n in 2..=n {
        if big_n == 2 {
            inner += contraction_at(1) + 0.5 * contraction_at(2);
        } else {
            inner += contraction_at(big_n) / big_n as f64;
        }
        let ln_n = (big_n as f64).ln();
        outer += inner / (big_n as f64 * ln_n * ln_n);
        if big_n == next_record {
            condition3_partials.push((big_n, outer));
            next_record *= 2;
        }
    }

    // Condition 4 over dyadic (i, j): E(G_i G_j) = 2 <g_i, g_j> with the
    // cross-grid increment inner products block-summed from the fine Gram.
    let sigma2: Vec<f64> = coarse.iter().map(|g| expected_vsq(g).e_vsq).collect();
    let mut pair_term = vec![vec![0.0f64; (kmax + 1) as usize]; (kmax + 1) as usize];
    for p in 0..=kmax as usize {
        for q in p..=kmax as usize {
            let (gi, gj) = (&coarse[p], &coarse[q]);
            let (i, j) = (gi.n(), gj.n());
            let (bi, bj) = (n / i, n / j);
            let mut sum = 0.0;
            for a in 0..i {
                for b in 0..j {
                    let mut cross = 0.0;
                    for f in a * bi..(a + 1) * bi {
                        for g in b * bj..(b + 1) * bj {
                            cross += fine.entry(f, g);
                        }
                    }
                    sum += cross * cross / (gi.variances()[a] * gj.variances()[b]);
                }
            }
            let inner_prod = sum / (2.0 * (sigma2[p] * sigma2[q]).sqrt() * ((i * j) as f64).sqrt());
            let e_gigj = 2.0 * inner_prod;
            pair_term[p][q] = e_gigj.abs() / (i as f64 * j as f64);
            pair_term[q][p] = pair_term[p][q];
        }
    }
    let mut condition4_partials = Vec::new();
    let mut outer4 = 0.0;
    for kn in 1..=kmax as usize {
        let big_n = 1usize << kn;
        let mut inner4 = 0.0;
        for row in pair_term.iter().take(kn + 1) {
            for term in row.iter().take(kn + 1) {
                inner4 += term;
            }
        }
        let ln_n = (big_n as f64).ln();
        outer4 += inner4 / (big_n as f64 * ln_n * ln_n * ln_n);
        condition4_partials.push((big_n, outer4));
    }

    AscltHypotheses {
        levels,
        condition3_partials,
        condition4_partials,
    }
}
