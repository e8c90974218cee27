//! Possibility-theory primitives and the per-fixation membership measures.
//!
//! A [`PossibilityDistribution`] carries the two dual event measures of
//! quantitative possibility theory. On top of the distribution type, this
//! module quantifies how plausibly (`possibility`) and how certainly
//! (`necessity`) a cursor fixation belongs to each area of a layout:
//! Bezdek fuzzy memberships over kernel distances, their max-normalized
//! attachment degrees, the Far-region possibility and the Near-region
//! necessity, combined by [`assess_fixation`].

use std::collections::{HashMap, HashSet};

use crate::aoi::{AttractionStats, Fixation, InterfaceLayout, Region};
use crate::error::{Error, Result};

/// A normalized possibility distribution over a finite universe.
///
/// The supremum of the degrees must be exactly 1; every degree lies in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PossibilityDistribution {
    universe: Vec<String>,
    degrees: Vec<f64>,
    index: HashMap<String, usize>,
}

impl PossibilityDistribution {
    pub fn new(elements: Vec<(String, f64)>) -> Result<Self> {
        let mut universe = Vec::with_capacity(elements.len());
        let mut degrees = Vec::with_capacity(elements.len());
        let mut index = HashMap::with_capacity(elements.len());
        let mut max = f64::NEG_INFINITY;
        for (name, degree) in elements {
            if index.contains_key(&name) {
                return Err(Error::DuplicateElement(name));
            }
            if !(degree.is_finite() && (0.0..=1.0).contains(&degree)) {
                return Err(Error::UnnormalizedDistribution(degree));
            }
            max = max.max(degree);
            index.insert(name.clone(), degrees.len());
            universe.push(name);
            degrees.push(degree);
        }
        if max != 1.0 {
            return Err(Error::UnnormalizedDistribution(max));
        }
        Ok(Self {
            universe,
            degrees,
            index,
        })
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn degree(&self, element: &str) -> Option<f64> {
        self.index.get(element).map(|&i| self.degrees[i])
    }

    fn event_set<I>(&self, event: I) -> Result<HashSet<usize>>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut set = HashSet::new();
        for e in event {
            let name = e.as_ref();
            match self.index.get(name) {
                Some(&i) => {
                    set.insert(i);
                }
                None => return Err(Error::UnknownElement(name.to_string())),
            }
        }
        Ok(set)
    }

    /// Possibility of an event: the maximum degree over its elements, and 0
    /// for the empty event.
    pub fn possibility<I>(&self, event: I) -> Result<f64>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let set = self.event_set(event)?;
        Ok(set
            .iter()
            .map(|&i| self.degrees[i])
            .fold(0.0_f64, f64::max))
    }

    /// Necessity of an event: one minus the possibility of its complement.
    pub fn necessity<I>(&self, event: I) -> Result<f64>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let set = self.event_set(event)?;
        let complement_max = self
            .degrees
            .iter()
            .enumerate()
            .filter(|(i, _)| !set.contains(i))
            .map(|(_, &d)| d)
            .fold(0.0_f64, f64::max);
        Ok(1.0 - complement_max)
    }
}

/// Bezdek fuzzy membership of one point against every kernel, from the
/// vector of kernel distances. All distances must be strictly positive;
/// callers handle the in-kernel case before getting here.
///
/// The computation runs on ratios against the smallest distance, so very
/// small or very large distances cannot overflow the intermediate powers.
pub fn bezdek_membership(distances: &[f64], fuzzifier: f64) -> Result<Vec<f64>> {
    if !(fuzzifier > 1.0) {
        return Err(Error::InvalidFuzzifier(fuzzifier));
    }
    if distances.is_empty() {
        return Err(Error::InvalidParameter(
            "membership needs at least one distance".into(),
        ));
    }
    let mut min = f64::INFINITY;
    for (i, &d) in distances.iter().enumerate() {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::ZeroDistance(i));
        }
        min = min.min(d);
    }
    let exponent = 2.0 / (fuzzifier - 1.0);
    let weights: Vec<f64> = distances.iter().map(|&d| (min / d).powf(exponent)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Attachment degrees: memberships normalized by their maximum, so the most
/// attached area reaches exactly 1.
pub fn attachment_degree(memberships: &[f64]) -> Vec<f64> {
    let max = memberships.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    memberships.iter().map(|&u| u / max).collect()
}

/// Far-region possibility: the attachment degree shrunk by how far past the
/// proximity boundary the fixation sits (`attachment * proximity / distance`).
///
/// Strictly decreasing in the distance and increasing in the proximity
/// extent. A zero proximity extent yields the limit value 0.
pub fn possibility_far(attachment: f64, distance: f64, proximity: f64) -> Result<f64> {
    if distance < proximity {
        return Err(Error::RegionViolation(format!(
            "Far possibility needs distance >= proximity (d = {distance}, proximity = {proximity})"
        )));
    }
    if !(0.0..=1.0).contains(&attachment) {
        return Err(Error::InvalidParameter(format!(
            "attachment degree must lie in [0, 1] (got {attachment})"
        )));
    }
    if proximity <= 0.0 {
        return Ok(0.0);
    }
    Ok(attachment * proximity / distance)
}

/// Near-region necessity: grows toward 1 as the fixation approaches the
/// kernel, vanishes at the proximity boundary, and is damped by how much
/// closer some other kernel is (`min_distance / distance`).
pub fn necessity_near(distance: f64, proximity: f64, min_distance: f64) -> Result<f64> {
    if distance <= 0.0 || distance >= proximity {
        return Err(Error::RegionViolation(format!(
            "Near necessity needs 0 < distance < proximity (d = {distance}, proximity = {proximity})"
        )));
    }
    if !(0.0..=distance).contains(&min_distance) {
        return Err(Error::InvalidParameter(format!(
            "min kernel distance must lie in [0, d] (got {min_distance}, d = {distance})"
        )));
    }
    Ok((1.0 - distance / proximity) * (min_distance / distance))
}

/// Possibility and necessity of one fixation belonging to one area.
///
/// Invariants: `necessity <= possibility`; a Kernel region carries (1, 1);
/// Near carries possibility 1; Far carries necessity 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipAssessment {
    pub area: String,
    pub region: Region,
    pub possibility: f64,
    pub necessity: f64,
}

/// Distances and attachment degrees of one fixation against a whole layout,
/// computed once and reused by every per-area measure.
#[derive(Debug, Clone)]
pub(crate) struct FixationContext {
    pub distances: Vec<f64>,
    pub min_distance: f64,
    pub attachment: Vec<f64>,
}

impl FixationContext {
    pub(crate) fn new(f: &Fixation, layout: &InterfaceLayout, fuzzifier: f64) -> Result<Self> {
        let distances = layout.kernel_distances(f);
        let mut min_distance = f64::INFINITY;
        let mut kernel_hit = None;
        for (i, &d) in distances.iter().enumerate() {
            min_distance = min_distance.min(d);
            if d == 0.0 && kernel_hit.is_none() {
                kernel_hit = Some(i);
            }
        }
        // In-kernel fixations bypass the Bezdek formula: the zero-distance
        // area takes the full attachment, everything else none.
        let attachment = match kernel_hit {
            Some(hit) => {
                let mut phi = vec![0.0; distances.len()];
                phi[hit] = 1.0;
                phi
            }
            None => attachment_degree(&bezdek_membership(&distances, fuzzifier)?),
        };
        Ok(Self {
            distances,
            min_distance,
            attachment,
        })
    }

    /// Per-area `(region, possibility, necessity)` under the given stats.
    pub(crate) fn measures(&self, stats: &AttractionStats) -> Result<Vec<(Region, f64, f64)>> {
        if stats.len() != self.distances.len() {
            return Err(Error::InvalidParameter(format!(
                "attraction stats cover {} areas, layout has {}",
                stats.len(),
                self.distances.len()
            )));
        }
        let mut out = Vec::with_capacity(self.distances.len());
        for (i, &d) in self.distances.iter().enumerate() {
            let proximity = stats.proximity(i);
            let region = Region::classify(d, proximity);
            let measure = match region {
                Region::Kernel => (Region::Kernel, 1.0, 1.0),
                Region::Near => {
                    let n = necessity_near(d, proximity, self.min_distance)?;
                    (Region::Near, 1.0, n)
                }
                Region::Far => {
                    let p = possibility_far(self.attachment[i], d, proximity)?;
                    (Region::Far, p, 0.0)
                }
            };
            out.push(measure);
        }
        Ok(out)
    }
}

/// Assesses a fixation against every area of the layout: classifies the
/// region and fills in the possibility/necessity pair for each one.
pub fn assess_fixation(
    f: &Fixation,
    layout: &InterfaceLayout,
    stats: &AttractionStats,
    fuzzifier: f64,
) -> Result<Vec<MembershipAssessment>> {
    let ctx = FixationContext::new(f, layout, fuzzifier)?;
    let measures = ctx.measures(stats)?;
    Ok(layout
        .areas()
        .iter()
        .zip(measures)
        .map(|(area, (region, possibility, necessity))| MembershipAssessment {
            area: area.name.clone(),
            region,
            possibility,
            necessity,
        })
        .collect())
}
