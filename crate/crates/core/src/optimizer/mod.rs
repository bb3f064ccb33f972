//! Greedy proposal-and-accept descent on the seven-term energy.
//!
//! Each sweep runs the configured proposal families in order. A proposal is
//! committed only when the exactly recomputed total energy strictly
//! decreases, so the accepted entries of a [`DescentTrace`] form a strictly
//! decreasing sequence.

mod proposals;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::SegmentTuple;
use crate::energy::{EnergyBreakdown, EnergyConfig, EnergyContext, EnergyWeights};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::levelset::JumpSet;
use crate::registry::Registry;

pub use proposals::{proposals, window_median, Proposal};

/// Unsigned size of a region's curvature current: `Σ √(a² + b²)`.
pub fn region_regularity_cost(tuples: &[SegmentTuple]) -> f64 {
    tuples.iter().map(SegmentTuple::mass).sum()
}

/// `max_θ (cos θ Σa + sin θ Σb) = |(Σa, Σb)|`: what survives signed cancellation.
pub fn region_flatnorm_penalty(tuples: &[SegmentTuple]) -> f64 {
    let (sa, sb) = tuples.iter().fold((0.0, 0.0), |(sa, sb), t| (sa + t.a, sb + t.b));
    sa.hypot(sb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentParams {
    /// Maximum number of sweeps.
    pub max_iters: usize,
    /// Curvature-flow step as a fraction of the explicit stability limit `h²/4`.
    pub step: f64,
    /// Side of the square flattening windows, in pixels.
    pub region_size: usize,
    pub seed: u64,
    /// A window is proposed for flattening when its regularity cost exceeds
    /// this multiple of its flat-norm penalty.
    pub trigger_ratio: f64,
    /// Pixels around a window included when estimating its energy change.
    pub margin_px: Option<usize>,
    /// Jump segments whose traces differ by less than this are dropped after a change.
    pub min_jump_height: f64,
    /// Candidate cuts tried per sweep.
    pub max_cuts: usize,
    /// Proposal families in sweep order.
    pub proposals: Vec<String>,
}

impl Default for DescentParams {
    fn default() -> Self {
        Self {
            max_iters: 20,
            step: 0.5,
            region_size: 8,
            seed: 0,
            trigger_ratio: 2.0,
            margin_px: None,
            min_jump_height: 0.1,
            max_cuts: 8,
            proposals: vec!["smooth".into(), "flatten".into(), "discontinuity".into()],
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters must be at least 1"));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::validation(format!("step must be in (0, 1], got {}", self.step)));
        }
        if self.region_size < 3 {
            return Err(Error::validation(format!("region_size must be at least 3 pixels, got {}", self.region_size)));
        }
        if !(self.trigger_ratio >= 1.0 && self.trigger_ratio.is_finite()) {
            return Err(Error::validation(format!("trigger_ratio must be at least 1, got {}", self.trigger_ratio)));
        }
        if !(self.min_jump_height > 0.0) {
            return Err(Error::validation("min_jump_height must be positive"));
        }
        if self.proposals.is_empty() {
            return Err(Error::validation("at least one proposal family is required"));
        }
        let known = proposals();
        for p in &self.proposals {
            known.get(p)?;
        }
        Ok(())
    }

    pub fn margin(&self) -> usize {
        self.margin_px.unwrap_or(self.region_size).max(3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sweep: usize,
    pub total: f64,
    pub step: String,
    pub accepted: bool,
}

/// Every exactly evaluated proposal, in order. `initial` is the energy of `f0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub initial: f64,
    pub records: Vec<IterationRecord>,
}

impl DescentTrace {
    pub fn accepted(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    /// Initial energy followed by the energy after each accepted step.
    pub fn accepted_energies(&self) -> Vec<f64> {
        std::iter::once(self.initial).chain(self.accepted().map(|r| r.total)).collect()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.accepted_energies().windows(2).all(|w| w[1] < w[0])
    }

    /// One JSON object per record.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub(crate) fn push(&mut self, sweep: usize, total: f64, step: String, accepted: bool) {
        let iteration = self.records.len();
        self.records.push(IterationRecord {
            iteration,
            sweep,
            total,
            step,
            accepted,
        });
    }
}

/// Current iterate: the field, its jump set, and its exact energy.
#[derive(Debug, Clone)]
pub struct DescentState {
    pub field: ScalarField,
    pub jumps: JumpSet,
    pub energy: EnergyBreakdown,
}

impl DescentState {
    /// Evaluates a candidate and commits it when the total strictly decreases.
    pub(crate) fn offer(
        &mut self,
        ctx: &EnergyContext,
        field: ScalarField,
        jumps: JumpSet,
        trace: &mut DescentTrace,
        sweep: usize,
        step: String,
    ) -> Result<bool> {
        let e = ctx.evaluate(&field, &jumps)?;
        let accepted = e.total < self.energy.total;
        trace.push(sweep, e.total, step, accepted);
        if accepted {
            self.field = field;
            self.jumps = jumps;
            self.energy = e;
        }
        Ok(accepted)
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub field: ScalarField,
    pub jumps: JumpSet,
    pub energy: EnergyBreakdown,
    pub trace: DescentTrace,
}

/// Descends from `f0` towards low `E(·, g)`.
pub fn descend(
    f0: &ScalarField,
    g: &ScalarField,
    weights: &EnergyWeights,
    config: &EnergyConfig,
    params: &DescentParams,
) -> Result<DescentOutcome> {
    f0.same_grid(g)?;
    params.validate()?;
    let ctx = EnergyContext::with_extracted_jumps(g.clone(), *weights, config.clone())?;
    let j0 = config.jumps(f0)?;
    descend_with(&ctx, f0, j0, params)
}

/// Descent against a prepared context, starting from `(f0, j0)`.
pub fn descend_with(ctx: &EnergyContext, f0: &ScalarField, j0: JumpSet, params: &DescentParams) -> Result<DescentOutcome> {
    params.validate()?;
    let registry: Registry<dyn Proposal> = proposals();
    let families: Vec<&dyn Proposal> = params.proposals.iter().map(|n| registry.get(n)).collect::<Result<_>>()?;
    let energy = ctx.evaluate(f0, &j0)?;
    let mut trace = DescentTrace {
        initial: energy.total,
        records: Vec::new(),
    };
    let mut state = DescentState {
        field: f0.clone(),
        jumps: j0,
        energy,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for sweep in 0..params.max_iters {
        let mut any = false;
        for p in &families {
            any |= p.run(&mut state, ctx, params, sweep, &mut rng, &mut trace)?;
        }
        if !any {
            break;
        }
    }
    Ok(DescentOutcome {
        field: state.field,
        jumps: state.jumps,
        energy: state.energy,
        trace,
    })
}
