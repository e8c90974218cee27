//! Conversion of trajectories into observation sequences.
//!
//! Two vectorizers share one output type. The Boolean vectorizer emits an
//! area name exactly when the fixation sits inside that area's kernel. The
//! possibilistic vectorizer assesses every fixation against every area and
//! emits the area with the strongest necessity, falling back to the
//! strongest possibility when it beats the relevance threshold. Fixations
//! matching neither rule emit nothing, so sequences may be shorter than
//! their trajectories.

use crate::aoi::{AttractionStats, Fixation, InterfaceLayout, Trajectory};
use crate::error::{Error, Result};
use crate::possibility::FixationContext;

/// An ordered list of emitted area names plus bookkeeping: the id of the
/// trajectory it came from and its task-class label, when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSequence {
    pub symbols: Vec<String>,
    pub source: Option<String>,
    pub label: Option<String>,
}

impl ObservationSequence {
    pub fn new(symbols: Vec<String>, label: Option<String>) -> Self {
        Self {
            symbols,
            source: None,
            label,
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Knobs of the possibilistic vectorizer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VectorizerParams {
    /// Extra width of every Near band, in pixels.
    pub omega: f64,
    /// Bezdek fuzzifier (> 1).
    pub fuzzifier: f64,
    /// Lowest possibility that still counts as relevant; an emission on the
    /// possibility rule requires strictly more than this.
    pub relevance_threshold: f64,
    /// Sampling interval in centiseconds.
    pub ds: u32,
}

impl Default for VectorizerParams {
    fn default() -> Self {
        Self {
            omega: 3.0,
            fuzzifier: 2.0,
            relevance_threshold: 0.5,
            ds: 1,
        }
    }
}

impl VectorizerParams {
    pub fn with_omega(omega: f64) -> Self {
        Self {
            omega,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must be finite and >= 0 (got {})",
                self.omega
            )));
        }
        if !(self.fuzzifier > 1.0) {
            return Err(Error::InvalidFuzzifier(self.fuzzifier));
        }
        if !((0.0..=1.0).contains(&self.relevance_threshold)) {
            return Err(Error::InvalidParameter(format!(
                "relevance threshold must lie in [0, 1] (got {})",
                self.relevance_threshold
            )));
        }
        if self.ds == 0 {
            return Err(Error::InvalidSamplingInterval);
        }
        Ok(())
    }
}

/// Boolean emission: the index of the kernel containing the fixation, if any.
pub fn classical_emission(f: &Fixation, layout: &InterfaceLayout) -> Option<usize> {
    layout
        .areas()
        .iter()
        .position(|a| a.kernel.contains(f.x, f.y))
}

/// Possibilistic emission: strongest necessity first, then strongest
/// possibility above the relevance threshold. Ties prefer the area with the
/// smaller kernel distance, then the earlier area in layout order.
pub fn possibilistic_emission(
    f: &Fixation,
    layout: &InterfaceLayout,
    stats: &AttractionStats,
    params: &VectorizerParams,
) -> Result<Option<usize>> {
    params.validate()?;
    let ctx = FixationContext::new(f, layout, params.fuzzifier)?;
    emission_from_context(&ctx, stats, params.relevance_threshold)
}

fn argmax_with_distance_ties(values: &[f64], distances: &[f64]) -> usize {
    let mut best = 0usize;
    for i in 1..values.len() {
        if values[i] > values[best]
            || (values[i] == values[best] && distances[i] < distances[best])
        {
            best = i;
        }
    }
    best
}

pub(crate) fn emission_from_context(
    ctx: &FixationContext,
    stats: &AttractionStats,
    relevance_threshold: f64,
) -> Result<Option<usize>> {
    let measures = ctx.measures(stats)?;
    let necessities: Vec<f64> = measures.iter().map(|&(_, _, n)| n).collect();
    let best_n = argmax_with_distance_ties(&necessities, &ctx.distances);
    if necessities[best_n] > 0.0 {
        return Ok(Some(best_n));
    }
    let possibilities: Vec<f64> = measures.iter().map(|&(_, p, _)| p).collect();
    let best_p = argmax_with_distance_ties(&possibilities, &ctx.distances);
    if possibilities[best_p] > relevance_threshold {
        return Ok(Some(best_p));
    }
    Ok(None)
}

/// Boolean vectorization: one symbol per in-kernel fixation, in time order.
pub fn vectorize_classical(traj: &Trajectory, layout: &InterfaceLayout) -> ObservationSequence {
    let symbols = traj
        .fixations()
        .iter()
        .filter_map(|f| classical_emission(f, layout))
        .map(|i| layout.area(i).name.clone())
        .collect();
    ObservationSequence::new(symbols, traj.label().map(str::to_string))
}

/// Possibilistic vectorization under attraction stats built with the same
/// `omega` as `params.omega`.
pub fn vectorize_possibilistic(
    traj: &Trajectory,
    layout: &InterfaceLayout,
    stats: &AttractionStats,
    params: &VectorizerParams,
) -> Result<ObservationSequence> {
    params.validate()?;
    if stats.omega() != params.omega {
        return Err(Error::InvalidParameter(format!(
            "attraction stats were built with omega = {}, vectorizer uses {}",
            stats.omega(),
            params.omega
        )));
    }
    let geometry = trajectory_geometry(traj, layout, params.fuzzifier)?;
    let indices = indices_from_geometry(&geometry, stats, params.relevance_threshold)?;
    Ok(ObservationSequence::new(
        indices
            .into_iter()
            .map(|i| layout.area(i).name.clone())
            .collect(),
        traj.label().map(str::to_string),
    ))
}

/// Distance/attachment contexts for every fixation of a trajectory. The
/// contexts depend only on geometry and the fuzzifier, not on attraction
/// stats, so evaluation folds compute them once and reuse them per fold.
pub(crate) fn trajectory_geometry(
    traj: &Trajectory,
    layout: &InterfaceLayout,
    fuzzifier: f64,
) -> Result<Vec<FixationContext>> {
    traj.fixations()
        .iter()
        .map(|f| FixationContext::new(f, layout, fuzzifier))
        .collect()
}

pub(crate) fn indices_from_geometry(
    geometry: &[FixationContext],
    stats: &AttractionStats,
    relevance_threshold: f64,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(geometry.len());
    for ctx in geometry {
        if let Some(i) = emission_from_context(ctx, stats, relevance_threshold)? {
            out.push(i);
        }
    }
    Ok(out)
}
