//! Exact finite-window answers from the generator matrix.
//!
//! States of a w-site window are bitmasks (bit k = site `window.lo + k`
//! active), so a window of w sites has 2^w states and the empty state is
//! index 0. Everything here is deterministic linear algebra; these numbers
//! are what the Monte-Carlo engines are tested against.
//!
//! Mean extinction times come from the linear system on transient states,
//! solved densely (LU) up to 2^11 states and by Gauss-Seidel above that.
//! Transient distributions come from uniformization with an explicit
//! truncation-error budget of 1e-10. An independent quadrature route for the
//! mean ([`RateMatrix::mean_extinction_quadrature`]) exists so the two can
//! referee each other in tests.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, SiteWindow};


/// Which process the generator describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Active sites spike at rate 1 (reset self, activate neighbors) and are
    /// killed at rate gamma.
    Auxiliary,
    /// Every site carries a rate-1 clock setting it to the OR of its
    /// neighbors; active sites are killed at rate gamma.
    Dual,
}

/// Hard cap on window sites; 2^20 states is the outer limit of what the
/// sparse representation can hold at desk scale.
pub const MAX_SITES: usize = 20;

/// States handled by the dense LU path of the mean-extinction solve.
const DENSE_STATE_CAP: usize = 1 << 11;

/// Sparse generator of the window-clipped process.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    sites: usize,
    gamma: f64,
    kind: GeneratorKind,
    /// CSR offsets into `entries`, length `dim() + 1`.
    offsets: Vec<usize>,
    /// Off-diagonal transitions (target, rate), merged per target.
    entries: Vec<(u32, f64)>,
    /// Total exit rate per state (minus the diagonal).
    exit: Vec<f64>,
}

/// Build the generator for a window of `sites` sites.
pub fn build_generator(sites: usize, gamma: f64, kind: GeneratorKind) -> Result<RateMatrix> {
    if sites == 0 || sites > MAX_SITES {
        return Err(Error::WindowTooLarge { sites, max: MAX_SITES });
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidRate(gamma));
    }
    let dim = 1usize << sites;
    let mut offsets = Vec::with_capacity(dim + 1);
    let mut entries: Vec<(u32, f64)> = Vec::new();
    let mut exit = Vec::with_capacity(dim);
    let mut row: Vec<(u32, f64)> = Vec::with_capacity(3 * sites);

    for state in 0..dim as u32 {
        offsets.push(entries.len());
        row.clear();
        match kind {
            GeneratorKind::Auxiliary => {
                for i in 0..sites {
                    if state >> i & 1 == 0 {
                        continue;
                    }
                    let mut spiked = state & !(1 << i);
                    if i > 0 {
                        spiked |= 1 << (i - 1);
                    }
                    if i + 1 < sites {
                        spiked |= 1 << (i + 1);
                    }
                    row.push((spiked, 1.0));
                    if gamma > 0.0 {
                        row.push((state & !(1 << i), gamma));
                    }
                }
            }
            GeneratorKind::Dual => {
                for i in 0..sites {
                    let left = i > 0 && state >> (i - 1) & 1 == 1;
                    let right = i + 1 < sites && state >> (i + 1) & 1 == 1;
                    let target = if left || right { state | 1 << i } else { state & !(1 << i) };
                    if target != state {
                        row.push((target, 1.0));
                    }
                    if gamma > 0.0 && state >> i & 1 == 1 {
                        row.push((state & !(1 << i), gamma));
                    }
                }
            }
        }
        row.sort_unstable_by_key(|&(t, _)| t);
        let row_start = entries.len();
        let mut total = 0.0;
        for &(target, rate) in row.iter() {
            total += rate;
            if entries.len() > row_start && entries.last().unwrap().0 == target {
                entries.last_mut().unwrap().1 += rate;
            } else {
                entries.push((target, rate));
            }
        }
        exit.push(total);
    }
    offsets.push(entries.len());
    Ok(RateMatrix { sites, gamma, kind, offsets, entries, exit })
}

impl RateMatrix {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    /// Number of states, 2^sites.
    pub fn dim(&self) -> usize {
        self.exit.len()
    }

    /// Off-diagonal row of a state.
    pub fn row(&self, state: u32) -> &[(u32, f64)] {
        &self.entries[self.offsets[state as usize]..self.offsets[state as usize + 1]]
    }

    /// Total exit rate of a state.
    pub fn exit_rate(&self, state: u32) -> f64 {
        self.exit[state as usize]
    }

    /// Bitmask of a configuration within `window` (which must have exactly
    /// `sites` sites).
    pub fn encode(&self, window: SiteWindow, config: &Configuration) -> Result<u32> {
        if window.len() != self.sites {
            return Err(Error::InvalidWindow { lo: window.lo, hi: window.hi });
        }
        let mut mask = 0u32;
        for site in config.iter() {
            if !window.contains(site) {
                return Err(Error::SiteOutsideWindow { site, lo: window.lo, hi: window.hi });
            }
            mask |= 1 << (site - window.lo);
        }
        Ok(mask)
    }

    /// All-active state.
    pub fn full_state(&self) -> u32 {
        ((1u64 << self.sites) - 1) as u32
    }

    /// Expected absorption time into the empty state, exactly.
    ///
    /// Dense LU when the state space is small, Gauss-Seidel sweeps to
    /// residual 1e-10 otherwise.
    pub fn mean_extinction(&self, init: u32) -> Result<f64> {
        if init == 0 {
            return Ok(0.0);
        }
        let dim = self.dim();
        let means = if dim <= DENSE_STATE_CAP {
            self.mean_extinction_dense()
        } else {
            self.mean_extinction_gauss_seidel()?
        };
        Ok(means[init as usize])
    }

    /// Solve (-Q restricted to transient states) m = 1 densely.
    fn mean_extinction_dense(&self) -> Vec<f64> {
        let n = self.dim() - 1; // transient states are 1..dim
        let mut a = DMatrix::<f64>::zeros(n, n);
        for state in 1..self.dim() as u32 {
            let r = state as usize - 1;
            a[(r, r)] = self.exit_rate(state);
            for &(target, rate) in self.row(state) {
                if target != 0 {
                    a[(r, target as usize - 1)] -= rate;
                }
            }
        }
        let rhs = DMatrix::<f64>::from_element(n, 1, 1.0);
        let sol = a.lu().solve(&rhs).expect("transient generator block is nonsingular");
        let mut means = vec![0.0; self.dim()];
        for state in 1..self.dim() {
            means[state] = sol[(state - 1, 0)];
        }
        means
    }

    fn mean_extinction_gauss_seidel(&self) -> Result<Vec<f64>> {
        let dim = self.dim();
        let mut m = vec![0.0f64; dim];
        let max_sweeps = 2_000_000usize;
        for sweep in 0..max_sweeps {
            let mut delta: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for state in 1..dim as u32 {
                let mut acc = 1.0;
                for &(target, rate) in self.row(state) {
                    if target != 0 {
                        acc += rate * m[target as usize];
                    }
                }
                let next = acc / self.exit_rate(state);
                delta = delta.max((next - m[state as usize]).abs());
                scale = scale.max(next.abs());
                m[state as usize] = next;
            }
            if delta <= 1e-10 * scale {
                return Ok(m);
            }
            if sweep == max_sweeps - 1 {
                return Err(Error::SolverStall { residual: delta / scale, iterations: sweep + 1 });
            }
        }
        unreachable!()
    }

    /// Mean absorption time by uniformized quadrature: with uniformization
    /// rate L, E(tau) = (1/L) * sum_k P(embedded chain still transient after
    /// k steps). Independent of the linear solve; tests referee one against
    /// the other.
    pub fn mean_extinction_quadrature(&self, init: u32) -> Result<f64> {
        if init == 0 {
            return Ok(0.0);
        }
        let rate = self.uniformization_rate();
        let mut pi = vec![0.0f64; self.dim()];
        pi[init as usize] = 1.0;
        let mut total = 0.0;
        let mut prev_mass = 1.0f64;
        let budget = 5_000_000usize;
        for step in 0..budget {
            let mass = 1.0 - pi[0];
            total += mass;
            // Geometric tail once the decay ratio settles.
            if step > 16 && mass > 0.0 && prev_mass > 0.0 {
                let ratio = mass / prev_mass;
                if ratio < 1.0 {
                    let tail = mass * ratio / (1.0 - ratio);
                    if tail < 1e-12 * total {
                        return Ok((total + tail) / rate);
                    }
                }
            }
            if mass == 0.0 {
                return Ok(total / rate);
            }
            prev_mass = mass;
            pi = self.dtmc_step(&pi, rate);
        }
        Err(Error::TruncationBudget { required: budget + 1, budget })
    }

    fn uniformization_rate(&self) -> f64 {
        // Strictly above the max exit rate so the embedded chain is aperiodic.
        1.0 + self.exit.iter().cloned().fold(0.0, f64::max)
    }

    /// One step of the uniformized chain P = I + Q/L.
    fn dtmc_step(&self, pi: &[f64], rate: f64) -> Vec<f64> {
        let mut next = vec![0.0f64; pi.len()];
        for (state, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            next[state] += mass * (1.0 - self.exit[state] / rate);
            for &(target, r) in self.row(state as u32) {
                next[target as usize] += mass * (r / rate);
            }
        }
        next
    }

    /// Probability that the state at time `t`, started from `init`,
    /// satisfies `pred`. Uniformization truncated once the neglected Poisson
    /// mass is below 1e-10.
    pub fn transient_probability<F: Fn(u32) -> bool>(
        &self,
        init: u32,
        t: f64,
        pred: F,
    ) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidHorizon(t));
        }
        let hits: Vec<bool> = (0..self.dim() as u32).map(pred).collect();
        if t == 0.0 {
            return Ok(if hits[init as usize] { 1.0 } else { 0.0 });
        }
        let rate = self.uniformization_rate();
        let lt = rate * t;
        let budget = 400_000usize;
        let mut pi = vec![0.0f64; self.dim()];
        pi[init as usize] = 1.0;
        let mut cumulative = 0.0;
        let mut answer = 0.0;
        for k in 0..budget {
            let weight = (-lt + k as f64 * lt.ln() - ln_gamma(k as f64 + 1.0)).exp();
            if weight > 0.0 {
                let mass: f64 = pi
                    .iter()
                    .zip(hits.iter())
                    .filter(|(_, h)| **h)
                    .map(|(p, _)| p)
                    .sum();
                answer += weight * mass;
                cumulative += weight;
            }
            // Past the Poisson mode, stop once the neglected mass is inside
            // the 1e-10 budget; the underflow branch covers accumulated
            // rounding in the weights themselves.
            if k as f64 >= lt && (cumulative >= 1.0 - 1e-10 || weight < 1e-18) {
                return Ok(answer);
            }
            pi = self.dtmc_step(&pi, rate);
        }
        Err(Error::TruncationBudget { required: budget + 1, budget })
    }

    /// Dense generator including diagonal, for small-window cross-checks.
    pub fn dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut q = DMatrix::<f64>::zeros(dim, dim);
        for state in 0..dim as u32 {
            q[(state as usize, state as usize)] = -self.exit_rate(state);
            for &(target, rate) in self.row(state) {
                q[(state as usize, target as usize)] += rate;
            }
        }
        q
    }

    /// Sorted coordinate text: one `from to rate` line per entry, diagonal
    /// included.
    pub fn dump_coo(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for state in 0..self.dim() as u32 {
            let mut wrote_diag = false;
            let diag = -self.exit_rate(state);
            for &(target, rate) in self.row(state) {
                if !wrote_diag && target > state {
                    if diag != 0.0 {
                        let _ = writeln!(out, "{state} {state} {diag}");
                    }
                    wrote_diag = true;
                }
                let _ = writeln!(out, "{state} {target} {rate}");
            }
            if !wrote_diag && diag != 0.0 {
                let _ = writeln!(out, "{state} {state} {diag}");
            }
        }
        out
    }
}
