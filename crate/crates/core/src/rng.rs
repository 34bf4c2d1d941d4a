//! Keyed, counter-based random streams.
//!
//! A stream is identified by `(master_seed, stream_index, lane)`. The seed and
//! lane form the ChaCha8 key, the stream index selects one of its 2^64
//! independent counter streams. Deriving a stream is O(1), so Monte Carlo
//! path `k` always uses stream index `k` no matter which worker runs it.
//!
//! Lanes separate the independent sources a single path needs (for instance
//! the time process and the position process of an iterated path).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::scalar::Real;

/// Lane used for the time (inner) process of a path.
pub const TIME_LANE: u64 = 0;
/// Lane used for the position (outer) process of a path.
pub const POSITION_LANE: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub master_seed: u64,
    pub stream_index: u64,
    pub lane: u64,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    rng: ChaCha8Rng,
}

/// Stream for path `stream_index` of an experiment seeded with `master_seed`.
pub fn derive_stream(master_seed: u64, stream_index: u64) -> RngStream {
    RngStream::derive(master_seed, stream_index)
}

impl RngStream {
    pub fn derive(master_seed: u64, stream_index: u64) -> Self {
        Self::derive_lane(master_seed, stream_index, TIME_LANE)
    }

    pub fn derive_lane(master_seed: u64, stream_index: u64, lane: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&lane.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_index);
        Self {
            id: StreamId {
                master_seed,
                stream_index,
                lane,
            },
            rng,
        }
    }

    /// Independent stream for the same path on another lane.
    pub fn sibling(&self, lane: u64) -> Self {
        Self::derive_lane(self.id.master_seed, self.id.stream_index, lane)
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// One N(0,1) variate (ziggurat).
    pub fn standard_gaussian<T: Real>(&mut self) -> T {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        T::lit(z)
    }

    /// One standard Cauchy variate, `tan(pi (U - 1/2))`.
    pub fn standard_cauchy<T: Real>(&mut self) -> T {
        // U = 0 would map to -inf; U = 1 is excluded by `uniform`.
        let u = self.uniform_open();
        T::lit((std::f64::consts::PI * (u - 0.5)).tan())
    }

    /// Exponential variate with the given rate.
    pub fn exponential<T: Real>(&mut self, rate: T) -> T {
        let e: f64 = Exp1.sample(&mut self.rng);
        T::lit(e) / rate
    }

    /// Fair coin.
    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(stream: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| stream.standard_gaussian::<f64>()).collect()
    }

    #[test]
    fn same_inputs_same_sequence() {
        let a = draws(&mut derive_stream(42, 0), 100);
        let b = draws(&mut derive_stream(42, 0), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_index_distinct_sequence() {
        let a = draws(&mut derive_stream(42, 0), 100);
        let b = draws(&mut derive_stream(42, 1), 100);
        assert_ne!(a, b);
        let c = draws(&mut RngStream::derive_lane(42, 0, POSITION_LANE), 100);
        assert_ne!(a, c);
    }

    #[test]
    fn paired_streams_uncorrelated() {
        let n = 100_000;
        let mut s0 = derive_stream(42, 0);
        let mut s1 = derive_stream(42, 1);
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = s0.uniform();
            let y = s1.uniform();
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx / nf * sy / nf;
        let rho = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
        assert!(rho.abs() < 0.02, "rho = {rho}");
    }

    #[test]
    fn gaussian_moments_and_coverage() {
        let n = 1_000_000;
        let mut s = derive_stream(7, 3);
        let (mut sum, mut sum2, mut inside) = (0.0, 0.0, 0usize);
        for _ in 0..n {
            let z: f64 = s.standard_gaussian();
            sum += z;
            sum2 += z * z;
            if z.abs() < 1.96 {
                inside += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.95).abs() < 0.003, "coverage {frac}");
    }

    #[test]
    fn cauchy_quantiles() {
        let n = 100_000;
        let mut s = derive_stream(11, 0);
        let mut xs: Vec<f64> = (0..n).map(|_| s.standard_cauchy()).collect();
        let inside = xs.iter().filter(|x| x.abs() < 1.0).count() as f64 / n as f64;
        let below_one = xs.iter().filter(|&&x| x <= 1.0).count() as f64 / n as f64;
        xs.sort_by(f64::total_cmp);
        let median = xs[n / 2];
        assert!(median.abs() < 0.02, "median {median}");
        assert!((inside - 0.5).abs() < 0.01, "P(|C|<1) = {inside}");
        assert!((below_one - 0.75).abs() < 0.01, "F(1) = {below_one}");
    }

    #[test]
    fn exponential_mean() {
        let n = 200_000;
        let mut s = derive_stream(5, 9);
        let mean = (0..n).map(|_| s.exponential(2.0_f64)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn single_precision_draws_match_double() {
        let mut a = derive_stream(1, 1);
        let mut b = derive_stream(1, 1);
        for _ in 0..10 {
            let x: f64 = a.standard_gaussian();
            let y: f32 = b.standard_gaussian();
            assert_eq!(x as f32, y);
        }
    }
}
