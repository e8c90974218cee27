//! Screen geometry: areas of interest, cursor fixations and the attraction
//! statistics that size each area's proximity band.
//!
//! An interface is modelled as a set of named, axis-aligned kernel
//! rectangles. Every recorded cursor position (a [`Fixation`]) relates to
//! each area through the Euclidean distance to its kernel, and falls into
//! one of three concentric regions: inside the kernel, within the proximity
//! band, or beyond it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sampled cursor position. `t` counts sampling ticks (units of `ds`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub t: u32,
    pub x: f64,
    pub y: f64,
}

impl Fixation {
    pub fn new(t: u32, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.x >= 0.0 && self.y >= 0.0) {
            return Err(Error::InvalidCoordinates {
                index,
                x: self.x,
                y: self.y,
            });
        }
        Ok(())
    }
}

/// Axis-aligned kernel rectangle in pixels. Both edges are part of the
/// kernel, so distances are zero on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRect {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl KernelRect {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn surface(&self) -> f64 {
        self.width * self.height
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.left && x <= self.right() && y >= self.top && y <= self.bottom()
    }

    /// Euclidean distance from `(x, y)` to the nearest point of the closed
    /// rectangle; zero inside and on the boundary.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let dx = (self.left - x).max(x - self.right()).max(0.0);
        let dy = (self.top - y).max(y - self.bottom()).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    /// True when the closed rectangles share at least one point. Touching
    /// edges count: a shared boundary point would be at distance zero from
    /// both kernels, which makes symbol emission ambiguous.
    pub fn intersects(&self, other: &KernelRect) -> bool {
        self.left <= other.right()
            && other.left <= self.right()
            && self.top <= other.bottom()
            && other.top <= self.bottom()
    }
}

/// A named screen region that attracts cursor fixations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaOfInterest {
    pub name: String,
    pub kernel: KernelRect,
}

impl AreaOfInterest {
    pub fn new(name: impl Into<String>, kernel: KernelRect) -> Self {
        Self {
            name: name.into(),
            kernel,
        }
    }
}

/// The full set of areas on one screen. Area order defines the symbol
/// alphabet order used by the vectorizers and classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceLayout {
    areas: Vec<AreaOfInterest>,
}

impl InterfaceLayout {
    /// Validates that there is at least one area, names are unique, kernels
    /// are non-degenerate and pairwise disjoint (boundaries included).
    pub fn new(areas: Vec<AreaOfInterest>) -> Result<Self> {
        if areas.is_empty() {
            return Err(Error::EmptyLayout);
        }
        for area in &areas {
            if !(area.kernel.width > 0.0 && area.kernel.height > 0.0) {
                return Err(Error::DegenerateKernel {
                    name: area.name.clone(),
                    width: area.kernel.width,
                    height: area.kernel.height,
                });
            }
        }
        for (i, a) in areas.iter().enumerate() {
            for b in areas.iter().skip(i + 1) {
                if a.name == b.name {
                    return Err(Error::DuplicateArea(a.name.clone()));
                }
                if a.kernel.intersects(&b.kernel) {
                    return Err(Error::OverlappingKernels(a.name.clone(), b.name.clone()));
                }
            }
        }
        Ok(Self { areas })
    }

    pub fn areas(&self) -> &[AreaOfInterest] {
        &self.areas
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn area(&self, index: usize) -> &AreaOfInterest {
        &self.areas[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.areas.iter().position(|a| a.name == name)
    }

    /// The observation alphabet: area names in layout order.
    pub fn alphabet(&self) -> Vec<String> {
        self.areas.iter().map(|a| a.name.clone()).collect()
    }

    /// Distances from a fixation to every kernel, in layout order.
    pub fn kernel_distances(&self, f: &Fixation) -> Vec<f64> {
        self.areas
            .iter()
            .map(|a| a.kernel.distance_to(f.x, f.y))
            .collect()
    }
}

/// A recorded cursor trajectory: one fixation per sampling tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    fixations: Vec<Fixation>,
    ds: u32,
    label: Option<String>,
}

impl Trajectory {
    /// Validates non-emptiness, coordinate sanity and the uniform time step
    /// (`t` must increase by exactly one per fixation).
    pub fn new(fixations: Vec<Fixation>, ds: u32, label: Option<String>) -> Result<Self> {
        if ds == 0 {
            return Err(Error::InvalidSamplingInterval);
        }
        if fixations.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let start = fixations[0].t;
        for (index, f) in fixations.iter().enumerate() {
            f.validate(index)?;
            let expected = start + index as u32;
            if f.t != expected {
                return Err(Error::NonUniformTimeStep {
                    index,
                    t: f.t,
                    expected,
                });
            }
        }
        Ok(Self {
            fixations,
            ds,
            label,
        })
    }

    pub fn fixations(&self) -> &[Fixation] {
        &self.fixations
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }

    pub fn ds(&self) -> u32 {
        self.ds
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }
}

/// The membership region of a fixation relative to one area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Kernel,
    Near,
    Far,
}

impl Region {
    /// Region from a kernel distance and the area's proximity extent:
    /// `Kernel` at distance zero, `Near` strictly inside the band,
    /// `Far` from the band boundary outward (`d == proximity` is `Far`,
    /// where the necessity formula reaches zero anyway).
    pub fn classify(distance: f64, proximity: f64) -> Region {
        if distance == 0.0 {
            Region::Kernel
        } else if distance < proximity {
            Region::Near
        } else {
            Region::Far
        }
    }
}

/// Euclidean distance between a fixation and the kernel of an area.
pub fn kernel_distance(f: &Fixation, area: &AreaOfInterest) -> f64 {
    area.kernel.distance_to(f.x, f.y)
}

/// Per-area attraction statistics: raw kernel-fixation density, its
/// max-normalized form, and the proximity extent that bounds each Near band.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionStats {
    raw: Vec<f64>,
    normalized: Vec<f64>,
    proximity: Vec<f64>,
    omega: f64,
}

impl AttractionStats {
    /// Builds the normalized attraction powers and proximity extents from
    /// raw per-area attraction densities. Fails when every density is zero,
    /// because normalization then divides by zero.
    pub fn from_raw_attractions(raw: Vec<f64>, omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "proximity margin omega must be finite and >= 0 (got {omega})"
            )));
        }
        if raw.iter().any(|&a| !(a.is_finite() && a >= 0.0)) {
            return Err(Error::InvalidParameter(
                "raw attractions must be finite and >= 0".into(),
            ));
        }
        let max = raw.iter().cloned().fold(0.0_f64, f64::max);
        if max <= 0.0 {
            return Err(Error::AllAttractionsZero);
        }
        let normalized: Vec<f64> = raw.iter().map(|&a| a / max).collect();
        let proximity: Vec<f64> = normalized.iter().map(|&l| l + omega).collect();
        Ok(Self {
            raw,
            normalized,
            proximity,
            omega,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Raw attraction: kernel fixations per square pixel.
    pub fn raw_attraction(&self, area: usize) -> f64 {
        self.raw[area]
    }

    /// Attraction normalized by the strongest area; the maximum is 1.
    pub fn normalized_attraction(&self, area: usize) -> f64 {
        self.normalized[area]
    }

    /// Width of the Near band in pixels: normalized attraction plus the
    /// margin `omega` (the mixed-unit sum is intentional; see the guide).
    pub fn proximity(&self, area: usize) -> f64 {
        self.proximity[area]
    }

    pub fn proximities(&self) -> &[f64] {
        &self.proximity
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Region of a fixation relative to one area of the layout the stats
    /// were built from.
    pub fn region_of(&self, f: &Fixation, layout: &InterfaceLayout, area: usize) -> Region {
        let d = kernel_distance(f, layout.area(area));
        Region::classify(d, self.proximity[area])
    }
}

/// Per-area kernel-fixation counts over a corpus, in layout order.
pub fn kernel_fixation_counts(layout: &InterfaceLayout, corpus: &[Trajectory]) -> Vec<u64> {
    let mut counts = vec![0u64; layout.len()];
    for traj in corpus {
        for f in traj.fixations() {
            for (i, area) in layout.areas().iter().enumerate() {
                if area.kernel.contains(f.x, f.y) {
                    counts[i] += 1;
                    break; // kernels are disjoint
                }
            }
        }
    }
    counts
}

/// Computes attraction statistics for a layout from a training corpus:
/// each area's raw attraction is its kernel-fixation count divided by the
/// kernel surface, then normalized by the maximum and widened by `omega`.
pub fn compute_attraction_stats(
    layout: &InterfaceLayout,
    corpus: &[Trajectory],
    omega: f64,
) -> Result<AttractionStats> {
    let counts = kernel_fixation_counts(layout, corpus);
    attraction_stats_from_counts(layout, &counts, omega)
}

/// Same as [`compute_attraction_stats`] but starting from precomputed
/// kernel-fixation counts (used by the evaluation folds, which subtract one
/// held-out trajectory's counts from a corpus total).
pub fn attraction_stats_from_counts(
    layout: &InterfaceLayout,
    counts: &[u64],
    omega: f64,
) -> Result<AttractionStats> {
    debug_assert_eq!(counts.len(), layout.len());
    let raw: Vec<f64> = counts
        .iter()
        .zip(layout.areas())
        .map(|(&c, area)| c as f64 / area.kernel.surface())
        .collect();
    AttractionStats::from_raw_attractions(raw, omega)
}
