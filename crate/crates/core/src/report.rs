//! Verification report types shared by every check.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{ContactPoint, PhasePoint, SamplingGrid};

/// Location of a reported extremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// `(Re z_j, Im z_j)` pairs.
    pub z: Vec<[f64; 2]>,
    pub t: Option<f64>,
    pub s: Option<f64>,
}

impl Witness {
    pub fn new(z: &PhasePoint, t: Option<f64>, s: Option<f64>) -> Self {
        Self { z: z.z.iter().map(|c| [c.re, c.im]).collect(), t, s }
    }

    pub fn from_contact(x: &ContactPoint, s: Option<f64>) -> Self {
        Self::new(&x.z, Some(x.t), s)
    }

    pub fn point(&self) -> PhasePoint {
        PhasePoint::new(self.z.iter().map(|a| crate::geometry::C64::new(a[0], a[1])).collect())
    }
}

pub const SAMPLED_LABEL: &str = "sampled lower bound";

/// Result of a grid verification. `value` is the minimum of the checked
/// quantity over the evaluated points; ties keep the earliest grid index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub quantity: String,
    pub value: f64,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    pub pass: bool,
    pub evaluated: usize,
    pub skipped: usize,
    pub nonfinite: usize,
    pub grid: Option<SamplingGrid>,
    pub extras: BTreeMap<String, f64>,
    pub label: String,
    /// Wall-clock time; excluded from serialized output to keep reports reproducible.
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl BoundReport {
    pub fn new(quantity: impl Into<String>, tolerance: f64) -> Self {
        Self {
            quantity: quantity.into(),
            value: f64::INFINITY,
            witness: None,
            tolerance,
            pass: false,
            evaluated: 0,
            skipped: 0,
            nonfinite: 0,
            grid: None,
            extras: BTreeMap::new(),
            label: SAMPLED_LABEL.to_string(),
            runtime_ms: 0.0,
        }
    }

    pub fn with_grid(mut self, grid: &SamplingGrid) -> Self {
        self.grid = Some(grid.clone());
        self
    }

    /// Records a value; keeps the first strict minimum.
    pub fn observe(&mut self, v: f64, witness: impl FnOnce() -> Witness) {
        if v.is_nan() {
            self.nonfinite += 1;
            return;
        }
        if v < self.value || self.witness.is_none() {
            self.value = v;
            self.witness = Some(witness());
        }
    }

    pub fn finish(&mut self, start: Instant) {
        self.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    }

    /// Sets `pass` to `value ≥ threshold` with no skipped or non-finite values.
    pub fn decide_min(&mut self, threshold: f64) {
        self.pass = self.evaluated > 0 && self.nonfinite == 0 && self.value >= threshold;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_first_minimum() {
        let mut r = BoundReport::new("x", 0.0);
        let z = PhasePoint::zeros(1);
        for (i, v) in [3.0, 1.0, 1.0, 2.0].iter().enumerate() {
            r.observe(*v, || Witness::new(&z, Some(i as f64), None));
        }
        assert_eq!(r.value, 1.0);
        assert_eq!(r.witness.unwrap().t, Some(1.0));
    }

    #[test]
    fn runtime_not_serialized() {
        let mut r = BoundReport::new("x", 0.0);
        r.runtime_ms = 12.0;
        let s = serde_json::to_string(&r).unwrap();
        assert!(!s.contains("runtime"));
    }
}
