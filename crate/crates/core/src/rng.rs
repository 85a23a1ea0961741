//! Counter-based random streams: every draw is a pure function of
//! `(seed, replica_id, draw_index)`, so replicas are independent of
//! scheduling and thread count, and any draw can be regenerated in
//! isolation. The mixer is three rounds of the splitmix64 finalizer over
//! the three key words.

const GOLDEN: u64 = 0x9e3779b97f4a7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// One logical stream of a keyed counter generator.
#[derive(Debug, Clone, Copy)]
pub struct NormalStream {
    base: u64,
}

impl NormalStream {
    pub fn new(seed: u64, replica_id: u64) -> Self {
        let base = mix64(seed ^ mix64(replica_id.wrapping_mul(GOLDEN) ^ 0x6a09e667f3bcc909));
        NormalStream { base }
    }

    #[inline]
    fn word(&self, index: u64) -> u64 {
        mix64(self.base ^ index.wrapping_mul(GOLDEN))
    }

    /// Uniform draw in (0, 1] at the given counter position.
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        let bits = self.word(index) >> 11; // 53 bits
        ((bits + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw at the given counter position (Box-Muller on
    /// the uniform pair at 2*index, 2*index+1; no spare is kept so each
    /// index is self-contained).
    #[inline]
    pub fn normal(&self, index: u64) -> f64 {
        let u1 = self.uniform(2 * index);
        let u2 = self.uniform(2 * index + 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
