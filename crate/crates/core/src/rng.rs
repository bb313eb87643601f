//! Keyed random streams and Poisson mark generation.
//!
//! Every draw in this crate flows through a [`Stream`] opened from a
//! [`StreamKey`]. The key is (master seed, replica id, role); distinct keys
//! give independent streams and the same key always replays the same stream,
//! so any replica of any experiment can be regenerated in isolation, in any
//! order, on any number of threads. ChaCha8 is a keyed counter-mode
//! generator, which is exactly the property needed: the key material IS the
//! derivation, no sequential jumping involved.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a stream is consumed for. Keeping roles distinct means the forward
/// run, the dual run, and any extra kill layer of one replica never share
/// draws by accident.
///
/// Role codes are append-only; reordering them would silently change every
/// seeded result in the repository.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamRole {
    /// Marks driving a forward (auxiliary or membrane) run.
    ForwardMarks,
    /// Marks driving a dual run.
    DualMarks,
    /// Extra kill-mark layer `index` of a coupled run.
    KillLayer(u16),
    /// Draws consumed by checks and test corpora, never by simulations.
    OracleCheck,
}

impl StreamRole {
    fn code(self) -> (u32, u32) {
        match self {
            StreamRole::ForwardMarks => (0, 0),
            StreamRole::DualMarks => (1, 0),
            StreamRole::KillLayer(layer) => (2, u32::from(layer)),
            StreamRole::OracleCheck => (3, 0),
        }
    }
}

/// Address of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replica_id: u64,
    pub role: StreamRole,
}

impl StreamKey {
    pub fn new(master_seed: u64, replica_id: u64, role: StreamRole) -> Self {
        StreamKey { master_seed, replica_id, role }
    }

    /// Same key with another replica id. Experiments fan out over this.
    pub fn replica(self, replica_id: u64) -> Self {
        StreamKey { replica_id, ..self }
    }

    /// Open the stream this key addresses.
    pub fn stream(&self) -> Stream {
        let (role, sub) = self.role.code();
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.replica_id.to_le_bytes());
        seed[16..20].copy_from_slice(&role.to_le_bytes());
        seed[20..24].copy_from_slice(&sub.to_le_bytes());
        // Domain tag so a StreamKey can never collide with other ChaCha uses.
        seed[24..32].copy_from_slice(b"spklatt1");
        Stream { rng: ChaCha8Rng::from_seed(seed) }
    }
}

/// A deterministic stream of draws.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    /// Uniform draw in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Exponential dwell with the given rate.
    #[inline]
    pub fn exp(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -(-self.rng.random::<f64>()).ln_1p() / rate
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.rng.random_range(0..n)
    }

    /// Bernoulli draw.
    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Sorted Poisson mark times on [0, horizon] for one rate.
///
/// Returns an empty vector for rate zero. Times are strictly increasing by
/// construction (exponential gaps); an exact-zero gap has probability 2^-53
/// per draw and is tolerated here because diagram assembly re-checks for
/// collisions across sites anyway.
pub fn poisson_marks(stream: &mut Stream, rate: f64, horizon: f64) -> Result<Vec<f64>> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidRate(rate));
    }
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::InvalidHorizon(horizon));
    }
    let mut times = Vec::new();
    if rate == 0.0 {
        return Ok(times);
    }
    let mut t = stream.exp(rate);
    while t <= horizon {
        times.push(t);
        t += stream.exp(rate);
    }
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(master: u64, replica: u64, role: StreamRole) -> StreamKey {
        StreamKey::new(master, replica, role)
    }

    #[test]
    fn same_key_replays_identically() {
        let k = key(7, 3, StreamRole::ForwardMarks);
        let a: Vec<f64> = {
            let mut s = k.stream();
            (0..1000).map(|_| s.uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut s = k.stream();
            (0..1000).map(|_| s.uniform()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn replica_and_role_change_the_stream() {
        let mut base = key(7, 3, StreamRole::ForwardMarks).stream();
        let mut other_replica = key(7, 4, StreamRole::ForwardMarks).stream();
        let mut other_role = key(7, 3, StreamRole::DualMarks).stream();
        let mut layered = key(7, 3, StreamRole::KillLayer(0)).stream();
        let a: Vec<u64> = (0..16).map(|_| base.next_u64()).collect();
        for s in [&mut other_replica, &mut other_role, &mut layered] {
            let b: Vec<u64> = (0..16).map(|_| s.next_u64()).collect();
            assert_ne!(a, b);
        }
    }

    #[test]
    fn kill_layers_are_distinct() {
        let mut l0 = key(1, 0, StreamRole::KillLayer(0)).stream();
        let mut l1 = key(1, 0, StreamRole::KillLayer(1)).stream();
        assert_ne!(l0.next_u64(), l1.next_u64());
    }

    #[test]
    fn uniform_mean_near_half() {
        let mut s = key(11, 0, StreamRole::OracleCheck).stream();
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| s.uniform()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn poisson_count_concentrates() {
        // rate 2, horizon 50: mean count 100, SE over 1000 streams = 0.316.
        let mut total = 0usize;
        for r in 0..1000 {
            let mut s = key(23, r, StreamRole::OracleCheck).stream();
            total += poisson_marks(&mut s, 2.0, 50.0).unwrap().len();
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - 100.0).abs() < 1.27, "mean count {mean}");
    }

    #[test]
    fn interarrival_mean_matches_rate() {
        let mut s = key(29, 0, StreamRole::OracleCheck).stream();
        let times = poisson_marks(&mut s, 4.0, 10_000.0).unwrap();
        let mean_gap = times.last().unwrap() / times.len() as f64;
        assert!((mean_gap - 0.25).abs() < 0.005, "mean gap {mean_gap}");
    }

    #[test]
    fn marks_sorted_and_bounded() {
        for r in 0..50 {
            let mut s = key(31, r, StreamRole::OracleCheck).stream();
            let rate = 0.1 + (r as f64) * 0.3;
            let horizon = 1.0 + (r as f64 % 7.0);
            let times = poisson_marks(&mut s, rate, horizon).unwrap();
            for w in times.windows(2) {
                assert!(w[0] < w[1]);
            }
            if let Some(last) = times.last() {
                assert!(*last <= horizon);
            }
        }
    }

    #[test]
    fn zero_rate_gives_no_marks() {
        let mut s = key(37, 0, StreamRole::OracleCheck).stream();
        assert!(poisson_marks(&mut s, 0.0, 100.0).unwrap().is_empty());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mut s = key(41, 0, StreamRole::OracleCheck).stream();
        assert!(matches!(poisson_marks(&mut s, -1.0, 1.0), Err(Error::InvalidRate(_))));
        assert!(matches!(poisson_marks(&mut s, f64::NAN, 1.0), Err(Error::InvalidRate(_))));
        assert!(matches!(poisson_marks(&mut s, 1.0, -2.0), Err(Error::InvalidHorizon(_))));
        assert!(matches!(
            poisson_marks(&mut s, 1.0, f64::INFINITY),
            Err(Error::InvalidHorizon(_))
        ));
    }
}
