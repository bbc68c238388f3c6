//! Exact event-driven simulation of the branching process without
//! immigration (`run_z`) and with non-homogeneous Poisson immigration
//! (`run_y`).
//!
//! The event engine is a two-clock competition: one exponential clock at
//! rate `n * mu` for the next branch event (the standard aggregation of
//! `n` independent particle lifetimes) and the next immigration arrival,
//! sampled exactly by thinning against the current value of the
//! non-increasing intensity. Because the immigration process is
//! autonomous, its next arrival time is drawn once and kept as an absolute
//! deadline while branch events play out.
//!
//! Every replicate draws from its own counter-based random stream derived
//! from `(seed, replicate_index)`, so results are independent of scheduling
//! and worker count.

use crate::error::{Error, Result};
use crate::laws::{ImmigrationLaw, IntensityLaw, LawSet, OffspringLaw};
use crate::special::ln_gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

/// Default population cap: a saturated counter is reported, never wrapped.
pub const DEFAULT_MAX_POPULATION: u64 = 1 << 62;
/// Default cap on total simulated events per replicate.
pub const DEFAULT_MAX_EVENTS: u64 = 1_000_000_000;

/// Per-replicate run parameters. The law set itself lives in `Simulator`
/// so its sampling tables are built once and shared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub seed: u64,
    pub replicate_index: u64,
    pub max_population: u64,
    pub max_events: u64,
}

impl SimConfig {
    pub fn new(t_end: f64, seed: u64) -> Self {
        Self {
            t_end,
            seed,
            replicate_index: 0,
            max_population: DEFAULT_MAX_POPULATION,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn replicate(mut self, index: u64) -> Self {
        self.replicate_index = index;
        self
    }

    pub fn max_population(mut self, cap: u64) -> Self {
        self.max_population = cap;
        self
    }

    pub fn max_events(mut self, cap: u64) -> Self {
        self.max_events = cap;
        self
    }
}

/// Terminal state of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOutcome {
    pub population: u64,
    pub survived: bool,
    pub n_immigration_events: u64,
    pub n_branch_events: u64,
    /// Population hit `max_population`; the counter is pinned there and
    /// the replicate stopped early.
    pub saturated: bool,
    /// Event budget hit; the replicate was cut before `t_end`.
    pub truncated: bool,
}

/// The counter-based random stream of one replicate: the 64-bit seed is
/// expanded into a cipher key and the replicate index selects the stream.
pub fn replicate_rng(seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        // splitmix64 expansion
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate_index);
    rng
}

/// Exact sampler for the offspring law (constant scale family only):
/// sequential inversion over a cached cumulative table, with the exact
/// log-gamma survival function taking over in the far tail.
#[derive(Debug, Clone)]
pub struct OffspringSampler {
    law: OffspringLaw,
    cum: Vec<f64>,
}

impl OffspringSampler {
    pub fn new(law: &OffspringLaw) -> Result<Self> {
        if !law.scale.is_constant() {
            return Err(Error::UnsupportedFamily(
                "offspring sampling requires a constant scale function",
            ));
        }
        // Extend the mass table until the tail is negligible or the size
        // cap is reached; the recursion continues analytically past the
        // table via the survival function.
        let mut kmax = 1024usize;
        let mut masses = law.masses(kmax)?;
        while law.tail(kmax as u64)? > 1e-12 && kmax < (1 << 20) {
            kmax *= 4;
            masses = law.masses(kmax)?;
        }
        let mut cum = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for p in &masses {
            acc += p;
            cum.push(acc.min(1.0));
        }
        Ok(Self {
            law: law.clone(),
            cum,
        })
    }

    /// Table size (diagnostic).
    pub fn table_len(&self) -> usize {
        self.cum.len()
    }

    fn survival(&self, k: u64) -> f64 {
        self.law.tail(k).unwrap_or(0.0)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.r#gen();
        // Almost all mass sits at small k; searching a short prefix keeps
        // the hot path inside one cache page.
        let head = &self.cum[..self.cum.len().min(256)];
        if u < head[head.len() - 1] {
            return head.partition_point(|&c| c <= u) as u64;
        }
        let last = *self.cum.last().unwrap();
        if u < last {
            return self.cum.partition_point(|&c| c <= u) as u64;
        }
        // Tail: find the smallest k > kmax with P(xi > k) < 1 - u.
        let target = 1.0 - u;
        let mut lo = self.cum.len() as u64 - 1;
        let mut hi = lo.max(2) * 2;
        while self.survival(hi) >= target {
            lo = hi;
            if hi >= u64::MAX / 4 {
                return u64::MAX / 2; // effectively certain saturation
            }
            hi *= 2;
        }
        while hi > lo + 1 {
            let mid = lo + (hi - lo) / 2;
            if self.survival(mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Exact sampler for Sibuya-type immigrant batches (`l == 1`): inversion
/// on the survival recursion `P(N > k) = prod_{j<=k} (1 - alpha/j)`, with
/// the log-gamma closed form past a short table.
#[derive(Debug, Clone)]
pub struct SibuyaSampler {
    alpha: f64,
    ln_gamma_1ma: f64,
    table: Vec<f64>,
}

const SIBUYA_TABLE: usize = 64;

impl SibuyaSampler {
    pub fn new(law: &ImmigrationLaw) -> Result<Self> {
        if !law.scale.is_constant() || (law.scale.c - 1.0).abs() > 1e-12 {
            return Err(Error::UnsupportedFamily(
                "immigrant sampling requires the unit-scale (Sibuya) family",
            ));
        }
        let alpha = law.alpha;
        let mut table = Vec::with_capacity(SIBUYA_TABLE + 1);
        table.push(1.0);
        for k in 1..=SIBUYA_TABLE {
            let prev = *table.last().unwrap();
            table.push(prev * (1.0 - alpha / k as f64));
        }
        Ok(Self {
            alpha,
            ln_gamma_1ma: if alpha < 1.0 { ln_gamma(1.0 - alpha) } else { 0.0 },
            table,
        })
    }

    fn survival(&self, k: u64) -> f64 {
        if self.alpha >= 1.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if k <= SIBUYA_TABLE as u64 {
            return self.table[k as usize];
        }
        let kf = k as f64;
        (ln_gamma(kf + 1.0 - self.alpha) - ln_gamma(kf + 1.0) - self.ln_gamma_1ma).exp()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        if self.alpha >= 1.0 {
            return 1;
        }
        let u: f64 = rng.r#gen();
        if u > self.table[1] {
            return 1; // P(N = 1) = alpha
        }
        if u > self.table[SIBUYA_TABLE] {
            // Binary search inside the table.
            let mut lo = 1usize;
            let mut hi = SIBUYA_TABLE;
            while hi > lo + 1 {
                let mid = (lo + hi) / 2;
                if self.table[mid] >= u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return hi as u64;
        }
        // Far tail via the log-gamma survival.
        let mut lo = SIBUYA_TABLE as u64;
        let mut hi = 2 * lo;
        while self.survival(hi) >= u {
            lo = hi;
            if hi >= u64::MAX / 4 {
                return u64::MAX / 2;
            }
            hi *= 2;
        }
        while hi > lo + 1 {
            let mid = lo + (hi - lo) / 2;
            if self.survival(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Next arrival of the non-homogeneous Poisson process after `t_now`, or
/// `None` if it falls past `horizon`. Thinning with a piecewise-constant
/// envelope re-anchored at every proposal; exact because the intensity is
/// non-increasing.
pub fn next_arrival<R: Rng>(
    intensity: &IntensityLaw,
    t_now: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    let mut t = t_now;
    loop {
        let envelope = intensity.rate(t)?;
        if envelope <= 0.0 {
            return Ok(None);
        }
        let gap: f64 = rng.sample::<f64, _>(Exp1) / envelope;
        t += gap;
        if t > horizon {
            return Ok(None);
        }
        let accept: f64 = rng.r#gen();
        if accept * envelope <= intensity.rate(t)? {
            return Ok(Some(t));
        }
    }
}

enum Flow {
    ReachedDeadline,
    Saturated,
    Truncated,
}

/// Shared samplers plus the law set: build once, run many replicates.
#[derive(Debug)]
pub struct Simulator {
    pub lawset: LawSet,
    offspring: OffspringSampler,
    immigrants: SibuyaSampler,
}

impl Simulator {
    pub fn new(lawset: &LawSet) -> Result<Self> {
        Ok(Self {
            lawset: lawset.clone(),
            offspring: OffspringSampler::new(&lawset.offspring)?,
            immigrants: SibuyaSampler::new(&lawset.immigration)?,
        })
    }

    pub fn offspring_sampler(&self) -> &OffspringSampler {
        &self.offspring
    }

    pub fn immigrant_sampler(&self) -> &SibuyaSampler {
        &self.immigrants
    }

    /// Run branch events until `deadline`, absorption, saturation, or the
    /// event cap. An empty population simply coasts to the deadline.
    #[allow(clippy::too_many_arguments)]
    fn branch_until<R: Rng>(
        &self,
        n: &mut u64,
        t: &mut f64,
        deadline: f64,
        events: &mut u64,
        n_branch: &mut u64,
        config: &SimConfig,
        rng: &mut R,
    ) -> Flow {
        let mu = self.lawset.mu;
        loop {
            if *n == 0 {
                *t = deadline;
                return Flow::ReachedDeadline;
            }
            let rate = *n as f64 * mu;
            let gap: f64 = rng.sample::<f64, _>(Exp1) / rate;
            if *t + gap >= deadline {
                *t = deadline;
                return Flow::ReachedDeadline;
            }
            *t += gap;
            *events += 1;
            *n_branch += 1;
            let k = self.offspring.sample(rng);
            // n <- n - 1 + k with saturation.
            if k >= config.max_population - (*n - 1) {
                *n = config.max_population;
                return Flow::Saturated;
            }
            *n = *n - 1 + k;
            if *events >= config.max_events {
                return Flow::Truncated;
            }
        }
    }

    /// Simulate the plain branching process from `initial` particles.
    pub fn run_z(&self, config: &SimConfig, initial: u64) -> Result<SimOutcome> {
        if initial == 0 {
            return Err(Error::Domain {
                what: "initial population",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if !(config.t_end >= 0.0) {
            return Err(Error::Domain {
                what: "t_end",
                value: config.t_end,
                expected: "[0, inf)",
            });
        }
        let mut rng = replicate_rng(config.seed, config.replicate_index);
        let mut n = initial.min(config.max_population);
        let mut t = 0.0;
        let mut events = 0u64;
        let mut n_branch = 0u64;
        let flow = self.branch_until(
            &mut n,
            &mut t,
            config.t_end,
            &mut events,
            &mut n_branch,
            config,
            &mut rng,
        );
        Ok(finalize(n, n_branch, 0, flow))
    }

    /// Simulate the immigration-fed process started empty.
    pub fn run_y(&self, config: &SimConfig) -> Result<SimOutcome> {
        if !(config.t_end >= 0.0) {
            return Err(Error::Domain {
                what: "t_end",
                value: config.t_end,
                expected: "[0, inf)",
            });
        }
        if self.lawset.intensity.tau0 <= 0.0 {
            return Err(Error::Singularity(
                "thinning needs a finite envelope at t = 0 (tau0 > 0)",
            ));
        }
        let mut rng = replicate_rng(config.seed, config.replicate_index);
        let mut n = 0u64;
        let mut t = 0.0f64;
        let mut events = 0u64;
        let mut n_branch = 0u64;
        let mut n_immigration = 0u64;

        let mut next_im = next_arrival(&self.lawset.intensity, 0.0, config.t_end, &mut rng)?;
        loop {
            let deadline = next_im.unwrap_or(config.t_end);
            let flow = self.branch_until(
                &mut n,
                &mut t,
                deadline,
                &mut events,
                &mut n_branch,
                config,
                &mut rng,
            );
            match flow {
                Flow::ReachedDeadline => {}
                other => return Ok(finalize(n, n_branch, n_immigration, other)),
            }
            match next_im {
                None => return Ok(finalize(n, n_branch, n_immigration, Flow::ReachedDeadline)),
                Some(arrival) => {
                    t = arrival;
                    events += 1;
                    n_immigration += 1;
                    let batch = self.immigrants.sample(&mut rng);
                    if batch >= config.max_population - n {
                        n = config.max_population;
                        return Ok(finalize(n, n_branch, n_immigration, Flow::Saturated));
                    }
                    n += batch;
                    if events >= config.max_events {
                        return Ok(finalize(n, n_branch, n_immigration, Flow::Truncated));
                    }
                    next_im = next_arrival(&self.lawset.intensity, arrival, config.t_end, &mut rng)?;
                }
            }
        }
    }
}

fn finalize(n: u64, n_branch: u64, n_immigration: u64, flow: Flow) -> SimOutcome {
    let (saturated, truncated) = match flow {
        Flow::ReachedDeadline => (false, false),
        Flow::Saturated => (true, false),
        Flow::Truncated => (false, true),
    };
    SimOutcome {
        population: n,
        survived: n > 0,
        n_immigration_events: n_immigration,
        n_branch_events: n_branch,
        saturated,
        truncated,
    }
}
