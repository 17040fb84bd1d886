use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{cache_key, float_text, EvalCache, Evaluation};
use super::{position_update, velocity_update, SwarmConfig};
use crate::error::{Error, Result};

/// Format version written into checkpoints.
pub const CHECKPOINT_VERSION: u32 = 1;

/// A search space of fixed-length bitstrings with a cost to minimize.
pub trait Objective: Sync {
    fn n_bits(&self) -> usize;

    /// Key under which results are cached. Bitstrings with equal keys must
    /// have equal costs.
    fn canonicalize(&self, bits: &[bool]) -> Vec<bool> {
        bits.to_vec()
    }

    fn evaluate(&self, canonical: &[bool]) -> Result<Evaluation>;

    /// Text form of a canonical key for the history.
    fn describe(&self, canonical: &[bool]) -> String {
        cache_key(canonical)
    }
}

/// Cost = number of zero bits.
#[derive(Clone, Copy, Debug)]
pub struct OneMax {
    pub n: usize,
}

impl Objective for OneMax {
    fn n_bits(&self) -> usize {
        self.n
    }

    fn evaluate(&self, bits: &[bool]) -> Result<Evaluation> {
        let zeros = bits.iter().filter(|b| !**b).count();
        Ok(Evaluation::new(zeros as f64, f64::NAN, f64::NAN))
    }
}

mod rng_state {
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct State {
        seed: String,
        stream: u64,
        word_pos: String,
    }

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
        let seed: String = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        State {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
        let st = State::deserialize(d)?;
        if st.seed.len() != 64 {
            return Err(D::Error::custom("rng seed must be 32 bytes"));
        }
        let mut seed = [0u8; 32];
        for (k, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&st.seed[2 * k..2 * k + 2], 16).map_err(D::Error::custom)?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(st.stream);
        rng.set_word_pos(st.word_pos.parse().map_err(D::Error::custom)?);
        Ok(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub position: Vec<bool>,
    pub velocity: Vec<f64>,
    pub pbest_position: Vec<bool>,
    #[serde(with = "float_text")]
    pub pbest_cost: f64,
    /// Cost of the current position.
    #[serde(with = "float_text")]
    pub cost: f64,
    #[serde(with = "rng_state")]
    rng: ChaCha8Rng,
}

impl Particle {
    fn new(id: u64, seed: u64, n_bits: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        // same rule as `random_grid` at density 0.5
        let position: Vec<bool> = (0..n_bits).map(|_| rng.gen::<f64>() < 0.5).collect();
        Self {
            id,
            pbest_position: position.clone(),
            position,
            velocity: vec![0.0; n_bits],
            pbest_cost: f64::INFINITY,
            cost: f64::INFINITY,
            rng,
        }
    }

    fn draw(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen::<f64>()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    #[serde(with = "float_text")]
    pub gbest_cost: f64,
    #[serde(with = "float_text")]
    pub s11_db: f64,
    #[serde(with = "float_text")]
    pub s21_db: f64,
    pub cache_hit_rate: f64,
    pub bits_hex: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    /// Canonical form of the best design.
    pub best_bits: Vec<bool>,
    pub best_hex: String,
    pub best: Evaluation,
    pub history: Vec<HistoryRow>,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub failures: u64,
}

/// Complete optimizer state between steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Swarm {
    version: u32,
    config: SwarmConfig,
    n_bits: usize,
    iter: usize,
    particles: Vec<Particle>,
    gbest_position: Vec<bool>,
    gbest_canonical: Vec<bool>,
    gbest: Evaluation,
    cache: EvalCache,
    history: Vec<HistoryRow>,
    failures: u64,
}

impl Swarm {
    /// Draw the initial population and evaluate it.
    pub fn new(config: SwarmConfig, obj: &dyn Objective) -> Result<Self> {
        config.validate()?;
        let n_bits = obj.n_bits();
        if n_bits == 0 {
            return Err(Error::invalid("objective has no searchable bits"));
        }
        let particles = (0..config.n_particles as u64)
            .map(|id| Particle::new(id, config.seed, n_bits))
            .collect();
        let mut swarm = Self {
            version: CHECKPOINT_VERSION,
            config,
            n_bits,
            iter: 0,
            particles,
            gbest_position: Vec::new(),
            gbest_canonical: Vec::new(),
            gbest: Evaluation::new(f64::INFINITY, f64::NAN, f64::NAN),
            cache: EvalCache::new(),
            history: Vec::new(),
            failures: 0,
        };
        let evals = swarm.evaluate_all(obj);
        swarm.gbest_position = swarm.particles[0].position.clone();
        swarm.gbest_canonical = evals[0].0.clone();
        swarm.gbest = evals[0].1.clone();
        swarm.absorb(evals);
        Ok(swarm)
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.config
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn cache(&self) -> &EvalCache {
        &self.cache
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn gbest(&self) -> &Evaluation {
        &self.gbest
    }

    pub fn gbest_canonical(&self) -> &[bool] {
        &self.gbest_canonical
    }

    pub fn is_done(&self) -> bool {
        self.iter >= self.config.n_iters
    }

    /// Canonicalize every particle and fetch or compute its evaluation.
    /// Hits and misses are counted in particle order; a key first seen in
    /// this batch counts one miss, later repeats count hits.
    fn evaluate_all(&mut self, obj: &dyn Objective) -> Vec<(Vec<bool>, Evaluation)> {
        let canon: Vec<Vec<bool>> = self.particles.par_iter().map(|p| obj.canonicalize(&p.position)).collect();
        let keys: Vec<String> = canon.iter().map(|c| cache_key(c)).collect();

        let mut pending: Vec<usize> = Vec::new();
        for (k, key) in keys.iter().enumerate() {
            if self.cache.peek(key).is_none() && !pending.iter().any(|&q| keys[q] == *key) {
                pending.push(k);
            }
        }
        let fresh: Vec<Evaluation> = pending
            .par_iter()
            .map(|&k| obj.evaluate(&canon[k]).unwrap_or_else(|e| Evaluation::failed(e.to_string())))
            .collect();
        for (&k, eval) in pending.iter().zip(fresh) {
            if eval.error.is_some() {
                self.failures += 1;
            }
            self.cache.insert(keys[k].clone(), eval);
        }

        let mut out = Vec::with_capacity(keys.len());
        for (k, (key, c)) in keys.iter().zip(canon).enumerate() {
            let eval = if pending.contains(&k) {
                self.cache.peek(key).cloned()
            } else {
                self.cache.get(key).cloned()
            };
            out.push((c, eval.expect("every key was inserted above")));
        }
        out
    }

    /// Record costs, then update personal and global bests by ascending
    /// particle index.
    fn absorb(&mut self, evals: Vec<(Vec<bool>, Evaluation)>) {
        for (p, (canon, eval)) in self.particles.iter_mut().zip(evals) {
            p.cost = eval.cost;
            if eval.cost < p.pbest_cost {
                p.pbest_cost = eval.cost;
                p.pbest_position = p.position.clone();
            }
            if eval.cost < self.gbest.cost {
                self.gbest_position = p.position.clone();
                self.gbest_canonical = canon;
                self.gbest = eval;
            }
        }
    }

    /// Move every particle, evaluate, update bests and append a history row.
    pub fn step(&mut self, obj: &dyn Objective) -> Result<()> {
        if obj.n_bits() != self.n_bits {
            return Err(Error::invalid(format!(
                "objective has {} bits, swarm {}",
                obj.n_bits(),
                self.n_bits
            )));
        }
        let t = self.iter + 1;
        let w = self.config.inertia(t);
        let cfg = self.config;
        let gbest = &self.gbest_position;
        let n = self.n_bits;
        self.particles.par_iter_mut().for_each(|p| {
            let r1 = p.draw(n);
            let r2 = p.draw(n);
            velocity_update(
                &mut p.velocity,
                &p.position,
                &p.pbest_position,
                gbest,
                w,
                (cfg.c1, cfg.c2),
                cfg.v_max,
                &r1,
                &r2,
            );
            let r = p.draw(n);
            position_update(&mut p.position, &p.velocity, cfg.transfer, &r);
        });
        let evals = self.evaluate_all(obj);
        self.absorb(evals);
        self.iter = t;
        self.history.push(HistoryRow {
            iter: t,
            gbest_cost: self.gbest.cost,
            s11_db: self.gbest.s11_db,
            s21_db: self.gbest.s21_db,
            cache_hit_rate: self.cache.hit_rate(),
            bits_hex: obj.describe(&self.gbest_canonical),
        });
        Ok(())
    }

    pub fn result(&self, obj: &dyn Objective) -> OptResult {
        OptResult {
            best_bits: self.gbest_canonical.clone(),
            best_hex: obj.describe(&self.gbest_canonical),
            best: self.gbest.clone(),
            history: self.history.clone(),
            cache_hits: self.cache.hits(),
            cache_misses: self.cache.misses(),
            failures: self.failures,
        }
    }

    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(self).expect("swarm state is serializable")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let swarm: Swarm =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("unreadable checkpoint: {e}")))?;
        if swarm.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                swarm.version
            )));
        }
        if swarm.particles.len() != swarm.config.n_particles
            || swarm.particles.iter().any(|p| p.position.len() != swarm.n_bits)
        {
            return Err(Error::invalid("checkpoint is internally inconsistent"));
        }
        Ok(swarm)
    }
}

/// Initial population plus `config.n_iters` steps.
pub fn run(config: SwarmConfig, obj: &dyn Objective) -> Result<OptResult> {
    let mut swarm = Swarm::new(config, obj)?;
    while !swarm.is_done() {
        swarm.step(obj)?;
    }
    Ok(swarm.result(obj))
}
