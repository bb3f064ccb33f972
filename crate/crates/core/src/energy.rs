//! The seven-term energy `E(f, g) = Σ γᵢ termᵢ`.
//!
//! Terms are strategies in a registry keyed `r1` .. `r5`, `f1`, `f2`. An
//! [`EnergyContext`] fixes the observed image `g`, its jump set, the weights
//! and the discretisation, and caches the target curvature chain so repeated
//! evaluations only rebuild the candidate side.

use serde::{Deserialize, Serialize};

use crate::chain::GridPattern;
use crate::error::{Error, Result};
use crate::fidelity::{f1_l1, field_complex, CurrentParams, F2Context};
use crate::field::ScalarField;
use crate::levelset::{default_levels, extract_jump_set, JumpParams, JumpSet, MAX_LEVELS};
use crate::registry::{Named, Registry};
use crate::regularity::{r1_weighted, r2_jump_curvature, r3_weighted, r4_graph_mass, r5_weighted, RegularityParams};

pub const TERM_NAMES: [&str; 7] = ["r1", "r2", "r3", "r4", "r5", "f1", "f2"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma5: f64,
    pub gamma6: f64,
    pub gamma7: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl EnergyWeights {
    pub fn uniform(v: f64) -> Self {
        Self::from_array([v; 7])
    }

    pub fn from_array(g: [f64; 7]) -> Self {
        Self {
            gamma1: g[0],
            gamma2: g[1],
            gamma3: g[2],
            gamma4: g[3],
            gamma5: g[4],
            gamma6: g[5],
            gamma7: g[6],
        }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.gamma1, self.gamma2, self.gamma3, self.gamma4, self.gamma5, self.gamma6, self.gamma7]
    }

    pub fn validate(&self) -> Result<()> {
        for (k, g) in self.as_array().iter().enumerate() {
            if !(g.is_finite() && *g >= 0.0) {
                return Err(Error::validation(format!("gamma{} must be finite and nonnegative, got {g}", k + 1)));
            }
        }
        Ok(())
    }
}

/// Term values, the weights used, and `total = Σ γᵢ termᵢ`. Terms listed in
/// `skipped` had zero weight and were not evaluated; they read as 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub f1: f64,
    pub f2: f64,
    pub weights: EnergyWeights,
    pub total: f64,
    pub skipped: Vec<String>,
}

impl EnergyBreakdown {
    pub fn from_terms(terms: [f64; 7], weights: EnergyWeights, skipped: Vec<String>) -> Self {
        let total = terms.iter().zip(weights.as_array()).map(|(t, g)| if g == 0.0 { 0.0 } else { g * t }).sum();
        Self {
            r1: terms[0],
            r2: terms[1],
            r3: terms[2],
            r4: terms[3],
            r5: terms[4],
            f1: terms[5],
            f2: terms[6],
            weights,
            total,
            skipped,
        }
    }

    pub fn terms(&self) -> [f64; 7] {
        [self.r1, self.r2, self.r3, self.r4, self.r5, self.f1, self.f2]
    }
}

/// Discretisation shared by every energy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub regularity: RegularityParams,
    /// Number of levels in the midpoint ladder of the curvature current.
    pub levels: usize,
    /// Flat-norm unit length; triangle areas are divided by it.
    pub scale: f64,
    /// Pixels per complex cell; `None` picks the smallest stride giving at
    /// most [`AUTO_CELLS`] cells along the longer side.
    pub stride_px: Option<usize>,
    pub pattern: GridPattern,
    /// Intensity change across one pixel that counts as a jump.
    pub jump_threshold_px: f64,
    /// Derivative terms ignore pixels within this many pixels of a jump.
    pub mask_radius_px: f64,
    pub corner_threshold: f64,
    pub contour_simplify_px: f64,
    pub jump_exclusion_px: f64,
    /// Evaluate zero-weight terms as well, for reporting.
    pub evaluate_all: bool,
}

/// Target cell count along the longer side for the automatic stride.
pub const AUTO_CELLS: usize = 64;

impl Default for EnergyConfig {
    fn default() -> Self {
        let cp = CurrentParams::with_levels(Vec::new());
        Self {
            regularity: RegularityParams::default(),
            levels: 8,
            scale: 1.0,
            stride_px: None,
            pattern: GridPattern::Crossed,
            jump_threshold_px: 0.3,
            mask_radius_px: 1.5,
            corner_threshold: cp.corner_threshold,
            contour_simplify_px: cp.contour_simplify_px,
            jump_exclusion_px: cp.jump_exclusion_px,
            evaluate_all: false,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be positive, got {v}")))
            }
        };
        if self.levels == 0 || self.levels > MAX_LEVELS {
            return Err(Error::validation(format!("levels must be in 1..={MAX_LEVELS}, got {}", self.levels)));
        }
        if self.stride_px == Some(0) {
            return Err(Error::validation("stride_px must be at least 1"));
        }
        positive("scale", self.scale)?;
        positive("jump_threshold_px", self.jump_threshold_px)?;
        positive("epsilon", self.regularity.epsilon)?;
        positive("crease_threshold", self.regularity.crease_threshold)?;
        if !(self.mask_radius_px >= 0.0 && self.contour_simplify_px >= 0.0 && self.jump_exclusion_px >= 0.0) {
            return Err(Error::validation("pixel radii must be nonnegative"));
        }
        Ok(())
    }

    pub fn current_params(&self) -> CurrentParams {
        CurrentParams {
            levels: default_levels(self.levels),
            corner_threshold: self.corner_threshold,
            jump_exclusion_px: self.jump_exclusion_px,
            contour_simplify_px: self.contour_simplify_px,
        }
    }

    pub fn stride_for(&self, f: &ScalarField) -> usize {
        self.stride_px
            .unwrap_or_else(|| f.width().max(f.height()).div_ceil(AUTO_CELLS).max(1))
    }

    /// Jump set of `f` at this configuration's per-pixel threshold.
    pub fn jumps(&self, f: &ScalarField) -> Result<JumpSet> {
        extract_jump_set(f, self.jump_threshold_px / f.spacing(), &JumpParams::default())
    }
}

/// Everything a term may read.
pub struct TermInput<'a> {
    pub f: &'a ScalarField,
    pub jf: &'a JumpSet,
    /// Per-pixel derivative weight; zero next to `jf`.
    pub mask: Option<&'a [f64]>,
    pub ctx: &'a EnergyContext,
}

pub trait EnergyTerm: Named + Send + Sync {
    /// Position in [`TERM_NAMES`] and in the weight vector.
    fn index(&self) -> usize;
    fn evaluate(&self, input: &TermInput<'_>) -> Result<f64>;
}

struct R1;
struct R2;
struct R3;
struct R4;
struct R5;
struct F1;
struct F2;

macro_rules! named {
    ($t:ty, $n:literal) => {
        impl Named for $t {
            fn name(&self) -> &'static str {
                $n
            }
        }
    };
}
named!(R1, "r1");
named!(R2, "r2");
named!(R3, "r3");
named!(R4, "r4");
named!(R5, "r5");
named!(F1, "f1");
named!(F2, "f2");

impl EnergyTerm for R1 {
    fn index(&self) -> usize {
        0
    }
    fn evaluate(&self, s: &TermInput<'_>) -> Result<f64> {
        Ok(r1_weighted(s.f, s.ctx.config.regularity.epsilon, s.mask))
    }
}

impl EnergyTerm for R2 {
    fn index(&self) -> usize {
        1
    }
    fn evaluate(&self, s: &TermInput<'_>) -> Result<f64> {
        Ok(r2_jump_curvature(s.jf))
    }
}

impl EnergyTerm for R3 {
    fn index(&self) -> usize {
        2
    }
    fn evaluate(&self, s: &TermInput<'_>) -> Result<f64> {
        Ok(r3_weighted(s.f, s.ctx.config.regularity.crease_threshold, s.mask))
    }
}

impl EnergyTerm for R4 {
    fn index(&self) -> usize {
        3
    }
    fn evaluate(&self, s: &TermInput<'_>) -> Result<f64> {
        Ok(r4_graph_mass(s.f, s.jf, s.ctx.config.regularity.jump_factor, s.mask))
    }
}

impl EnergyTerm for R5 {
    fn index(&self) -> usize {
        4
    }
    fn evaluate(&self, s: &TermInput<'_>) -> Result<f64> {
        Ok(r5_weighted(s.f, s.ctx.config.regularity.hessian_norm, s.mask))
    }
}

impl EnergyTerm for F1 {
    fn index(&self) -> usize {
        5
    }
    fn evaluate(&self, s: &TermInput<'_>) -> Result<f64> {
        f1_l1(s.f, &s.ctx.g)
    }
}

impl EnergyTerm for F2 {
    fn index(&self) -> usize {
        6
    }
    fn evaluate(&self, s: &TermInput<'_>) -> Result<f64> {
        match &s.ctx.f2 {
            Some(c) => c.evaluate(s.f, s.jf),
            None => Err(Error::validation("flat-norm fidelity was not prepared for this context")),
        }
    }
}

pub fn energy_terms() -> Registry<dyn EnergyTerm> {
    Registry::<dyn EnergyTerm>::new("energy term")
        .with(Box::new(R1))
        .with(Box::new(R2))
        .with(Box::new(R3))
        .with(Box::new(R4))
        .with(Box::new(R5))
        .with(Box::new(F1))
        .with(Box::new(F2))
}

/// Fixed observation, weights and discretisation for repeated evaluation.
pub struct EnergyContext {
    g: ScalarField,
    jg: JumpSet,
    weights: EnergyWeights,
    config: EnergyConfig,
    f2: Option<F2Context>,
    terms: Registry<dyn EnergyTerm>,
}

impl EnergyContext {
    pub fn new(g: ScalarField, jg: JumpSet, weights: EnergyWeights, config: EnergyConfig) -> Result<Self> {
        weights.validate()?;
        config.validate()?;
        let f2 = if weights.gamma7 > 0.0 || config.evaluate_all {
            let k = field_complex(&g, config.stride_for(&g), config.pattern)?;
            Some(F2Context::new(&g, &jg, config.current_params(), k, config.scale)?)
        } else {
            None
        };
        Ok(Self {
            g,
            jg,
            weights,
            config,
            f2,
            terms: energy_terms(),
        })
    }

    /// Context whose observed jump set is extracted from `g` itself.
    pub fn with_extracted_jumps(g: ScalarField, weights: EnergyWeights, config: EnergyConfig) -> Result<Self> {
        let jg = config.jumps(&g)?;
        Self::new(g, jg, weights, config)
    }

    pub fn g(&self) -> &ScalarField {
        &self.g
    }

    pub fn g_jumps(&self) -> &JumpSet {
        &self.jg
    }

    pub fn weights(&self) -> &EnergyWeights {
        &self.weights
    }

    pub fn config(&self) -> &EnergyConfig {
        &self.config
    }

    pub fn f2_context(&self) -> Option<&F2Context> {
        self.f2.as_ref()
    }

    pub fn mask(&self, f: &ScalarField, jf: &JumpSet) -> Option<Vec<f64>> {
        (!jf.is_empty()).then(|| jf.pixel_mask(f.width(), f.height(), f.spacing(), self.config.mask_radius_px))
    }

    /// Evaluates one named term, whatever its weight.
    pub fn term(&self, name: &str, f: &ScalarField, jf: &JumpSet) -> Result<f64> {
        f.same_grid(&self.g)?;
        let mask = self.mask(f, jf);
        let input = TermInput {
            f,
            jf,
            mask: mask.as_deref(),
            ctx: self,
        };
        self.terms.get(name)?.evaluate(&input)
    }

    pub fn evaluate(&self, f: &ScalarField, jf: &JumpSet) -> Result<EnergyBreakdown> {
        f.same_grid(&self.g)?;
        let mask = self.mask(f, jf);
        let input = TermInput {
            f,
            jf,
            mask: mask.as_deref(),
            ctx: self,
        };
        let w = self.weights.as_array();
        let mut values = [0.0; 7];
        let mut skipped = Vec::new();
        for term in self.terms.iter() {
            let i = term.index();
            if w[i] == 0.0 && !self.config.evaluate_all {
                skipped.push(term.name().to_string());
                continue;
            }
            values[i] = term.evaluate(&input)?;
        }
        skipped.sort_by_key(|n| TERM_NAMES.iter().position(|t| t == n));
        Ok(EnergyBreakdown::from_terms(values, self.weights, skipped))
    }

    pub fn total(&self, f: &ScalarField, jf: &JumpSet) -> Result<f64> {
        Ok(self.evaluate(f, jf)?.total)
    }
}

/// One-shot evaluation; both jump sets are extracted with `config`.
pub fn energy(f: &ScalarField, g: &ScalarField, w: &EnergyWeights, config: &EnergyConfig) -> Result<EnergyBreakdown> {
    f.same_grid(g)?;
    let ctx = EnergyContext::with_extracted_jumps(g.clone(), *w, config.clone())?;
    let jf = config.jumps(f)?;
    ctx.evaluate(f, &jf)
}
