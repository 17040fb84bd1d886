use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Cost and the two reported figures for one canonical design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    #[serde(with = "float_text")]
    pub cost: f64,
    #[serde(with = "float_text")]
    pub s11_db: f64,
    #[serde(with = "float_text")]
    pub s21_db: f64,
    /// Set when the evaluator failed; the cost is then `+inf`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Evaluation {
    pub fn new(cost: f64, s11_db: f64, s21_db: f64) -> Self {
        Self {
            cost,
            s11_db,
            s21_db,
            error: None,
        }
    }

    pub fn failed(message: String) -> Self {
        Self {
            cost: f64::INFINITY,
            s11_db: f64::NAN,
            s21_db: f64::NAN,
            error: Some(message),
        }
    }
}

/// Floats as their shortest round-trip text, so `inf` and `NaN` survive JSON.
pub(crate) mod float_text {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:?}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(|_| D::Error::custom(format!("bad float {text:?}")))
    }
}

/// Memo table keyed by the canonical bitstring, packed as hex.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCache {
    map: BTreeMap<String, Evaluation>,
    hits: u64,
    misses: u64,
}

/// Bits packed LSB-first into bytes, hex-encoded.
pub fn cache_key(bits: &[bool]) -> String {
    let mut out = String::with_capacity(bits.len().div_ceil(4));
    for chunk in bits.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (k, &b)| acc | (u8::from(b) << k));
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Lookup that counts a hit when present.
    pub fn get(&mut self, key: &str) -> Option<&Evaluation> {
        let found = self.map.get(key);
        if found.is_some() {
            self.hits += 1;
        }
        found
    }

    pub fn peek(&self, key: &str) -> Option<&Evaluation> {
        self.map.get(key)
    }

    /// Store a freshly computed evaluation, counting a miss.
    pub fn insert(&mut self, key: String, eval: Evaluation) {
        self.misses += 1;
        self.map.insert(key, eval);
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Hits over all lookups so far; 0 before any lookup.
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}
