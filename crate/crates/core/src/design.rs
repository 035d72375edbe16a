use crate::error::Result;
use crate::rng::RandomStream;
use serde::{Deserialize, Serialize};

/// One iteration of a walk: the pivot, the signed step taken, and the units
/// frozen by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub pivot: usize,
    pub delta: f64,
    pub frozen: Vec<usize>,
}

/// A ±1 treatment vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub z: Vec<i8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceStep>>,
}

impl Assignment {
    pub fn new(z: Vec<i8>) -> Self {
        debug_assert!(z.iter().all(|&v| v == 1 || v == -1));
        Self { z, trace: None }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn treated(&self) -> usize {
        self.z.iter().filter(|&&v| v == 1).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.z.iter().map(|&v| v as f64).collect()
    }
}

/// Anything that draws random assignments for `n` units.
pub trait Design: Sync {
    fn n(&self) -> usize;

    fn draw(&self, rng: &mut RandomStream) -> Result<Assignment>;

    fn name(&self) -> &'static str;
}
