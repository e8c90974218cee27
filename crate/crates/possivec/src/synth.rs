//! Synthetic labeled trajectories over a built-in 15-area layout.
//!
//! Three task scripts drive seeded random walks: sample the next area from
//! a per-class transition matrix, glide the cursor toward it with Gaussian
//! travel noise, then dwell on a landing point — inside the kernel, or,
//! with some probability, overshooting to a point just outside it. The
//! overshoots are what give the possibilistic vectorizer something the
//! Boolean one cannot see. All coordinates are integer pixels, matching
//! what a screen recorder would log.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aoi::{AreaOfInterest, Fixation, InterfaceLayout, KernelRect, Trajectory};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Canvas size of the built-in layout, in pixels.
pub const CANVAS: (u32, u32) = (1024, 768);

/// Cursor speed used for travel interpolation, in pixels per tick.
const CURSOR_SPEED: f64 = 18.0;

/// How one task class moves over the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScript {
    pub class: String,
    /// Initial area distribution.
    pub start: Vec<f64>,
    /// Row-stochastic visit-order matrix over the layout's areas.
    pub transition: Vec<Vec<f64>>,
    /// Dwell duration distribution in ticks.
    pub dwell_mean: f64,
    pub dwell_std: f64,
    /// Gaussian noise applied to travel fixations, in pixels.
    pub travel_noise: f64,
    /// Chance that a dwell lands just outside its target kernel.
    pub overshoot_prob: f64,
    /// Largest overshoot distance in pixels (at least 1).
    pub overshoot_reach: f64,
}

impl TaskScript {
    pub fn validate(&self, n_areas: usize) -> Result<()> {
        let check_dist = |row: &[f64], what: &str| -> Result<()> {
            if row.len() != n_areas {
                return Err(Error::InvalidParameter(format!(
                    "{what} must cover {n_areas} areas (got {})",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "{what} must be non-negative"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "{what} sums to {sum}, expected 1"
                )));
            }
            Ok(())
        };
        check_dist(&self.start, "start distribution")?;
        for (i, row) in self.transition.iter().enumerate() {
            check_dist(row, &format!("transition row {i}"))?;
        }
        if self.transition.len() != n_areas {
            return Err(Error::InvalidParameter(format!(
                "transition matrix must have {n_areas} rows"
            )));
        }
        if !(self.dwell_mean >= 1.0) {
            return Err(Error::InvalidParameter("dwell mean must be >= 1 tick".into()));
        }
        if !(self.dwell_std >= 0.0 && self.travel_noise >= 0.0) {
            return Err(Error::InvalidParameter(
                "dwell std and travel noise must be >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.overshoot_prob) {
            return Err(Error::InvalidParameter(
                "overshoot probability must lie in [0, 1]".into(),
            ));
        }
        if !(self.overshoot_reach >= 1.0) {
            return Err(Error::InvalidParameter(
                "overshoot reach must be >= 1 pixel".into(),
            ));
        }
        Ok(())
    }
}

/// Scale and seeding of a generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub master_seed: u64,
    /// Trajectories per task class.
    pub per_task: usize,
    /// Trajectory duration range in ticks, inclusive.
    pub duration_range: (u32, u32),
    /// Sampling interval in centiseconds.
    pub ds: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            per_task: 17,
            duration_range: (240, 400),
            ds: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_task == 0 {
            return Err(Error::InvalidParameter("per_task must be >= 1".into()));
        }
        let (lo, hi) = self.duration_range;
        if lo == 0 || hi < lo {
            return Err(Error::InvalidParameter(format!(
                "invalid duration range {lo}..={hi}"
            )));
        }
        if self.ds == 0 {
            return Err(Error::InvalidSamplingInterval);
        }
        Ok(())
    }
}

/// One generated trajectory with its stable id.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub id: String,
    pub trajectory: Trajectory,
}

/// The built-in 15-area layout (named `A` through `O`) on a 1024x768
/// canvas: coefficient sliders on the left, the plot area and equation
/// display in the middle, zoom and second-curve controls on the right.
pub fn builtin_layout() -> InterfaceLayout {
    let rect = |l: f64, t: f64, w: f64, h: f64| KernelRect::new(l, t, w, h);
    InterfaceLayout::new(vec![
        AreaOfInterest::new("A", rect(60.0, 150.0, 150.0, 50.0)), // a-coefficient slider
        AreaOfInterest::new("B", rect(60.0, 260.0, 150.0, 50.0)), // b-coefficient slider
        AreaOfInterest::new("C", rect(60.0, 370.0, 150.0, 50.0)), // c-coefficient slider
        AreaOfInterest::new("D", rect(300.0, 140.0, 400.0, 360.0)), // plot area
        AreaOfInterest::new("E", rect(60.0, 480.0, 90.0, 40.0)),  // reset
        AreaOfInterest::new("F", rect(740.0, 160.0, 50.0, 40.0)), // zoom in
        AreaOfInterest::new("G", rect(740.0, 240.0, 50.0, 40.0)), // zoom out
        AreaOfInterest::new("H", rect(300.0, 60.0, 400.0, 50.0)), // equation display
        AreaOfInterest::new("I", rect(340.0, 540.0, 300.0, 36.0)), // x-axis ticks
        AreaOfInterest::new("J", rect(240.0, 180.0, 40.0, 280.0)), // y-axis ticks
        AreaOfInterest::new("K", rect(830.0, 150.0, 140.0, 50.0)), // curve-2 b slider
        AreaOfInterest::new("L", rect(830.0, 260.0, 140.0, 40.0)), // curve-2 toggle
        AreaOfInterest::new("M", rect(830.0, 340.0, 140.0, 40.0)), // standard-form toggle
        AreaOfInterest::new("N", rect(830.0, 420.0, 60.0, 40.0)), // help
        AreaOfInterest::new("O", rect(920.0, 420.0, 50.0, 40.0)), // save
    ])
    .expect("built-in layout is valid")
}

fn script_from_interest(
    class: &str,
    interest: [f64; 15],
    dwell_mean: f64,
    overshoot_prob: f64,
) -> TaskScript {
    let start_total: f64 = interest.iter().sum();
    let start: Vec<f64> = interest.iter().map(|w| w / start_total).collect();
    // Next-visit distribution: proportional to interest, never staying put.
    let transition: Vec<Vec<f64>> = (0..15)
        .map(|from| {
            let total: f64 = interest
                .iter()
                .enumerate()
                .filter(|&(to, _)| to != from)
                .map(|(_, w)| w)
                .sum();
            interest
                .iter()
                .enumerate()
                .map(|(to, w)| if to == from { 0.0 } else { w / total })
                .collect()
        })
        .collect();
    TaskScript {
        class: class.to_string(),
        start,
        transition,
        dwell_mean,
        dwell_std: 4.0,
        travel_noise: 1.2,
        overshoot_prob,
        overshoot_reach: 6.0,
    }
}

/// The three built-in task scripts. They share the heavily used plot and
/// equation areas but differ in their control usage: `DEG1` never touches
/// the `A` slider, `INT` leans on the second-curve controls, `DEG2` works
/// all three coefficient sliders.
pub fn builtin_scripts() -> Vec<TaskScript> {
    //                         A     B     C     D    E    F    G    H    I    J    K     L    M    N    O
    let deg2: [f64; 15] = [
        16.0, 12.0, 12.0, 22.0, 3.0, 5.0, 5.0, 8.0, 3.0, 3.0, 0.5, 0.5, 4.0, 1.0, 1.0,
    ];
    let deg1: [f64; 15] = [
        0.0, 18.0, 16.0, 22.0, 4.0, 2.0, 2.0, 10.0, 4.0, 4.0, 1.0, 1.0, 6.0, 1.0, 1.0,
    ];
    let int: [f64; 15] = [
        8.0, 8.0, 8.0, 20.0, 2.0, 3.0, 3.0, 6.0, 8.0, 8.0, 12.0, 8.0, 2.0, 1.0, 1.0,
    ];
    vec![
        script_from_interest("DEG2", deg2, 12.0, 0.35),
        script_from_interest("DEG1", deg1, 12.0, 0.35),
        script_from_interest("INT", int, 11.0, 0.35),
    ]
}

fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn integer_bounds(kernel: &KernelRect) -> (i64, i64, i64, i64) {
    (
        kernel.left.ceil() as i64,
        kernel.right().floor() as i64,
        kernel.top.ceil() as i64,
        kernel.bottom().floor() as i64,
    )
}

/// Integer landing point of one dwell: uniform inside the kernel, or, when
/// overshooting, a point 1..=reach pixels off one side of the rectangle.
fn sample_landing<R: Rng>(
    rng: &mut R,
    kernel: &KernelRect,
    overshoot: bool,
    reach: f64,
) -> (f64, f64) {
    let (left, right, top, bottom) = integer_bounds(kernel);
    if !overshoot {
        let x = rng.random_range(left..=right);
        let y = rng.random_range(top..=bottom);
        return (x as f64, y as f64);
    }
    let off = rng.random_range(1..=reach.floor().max(1.0) as i64);
    let side = rng.random_range(0..4u8);
    let (x, y) = match side {
        0 => (right + off, rng.random_range(top..=bottom)),
        1 => ((left - off).max(0), rng.random_range(top..=bottom)),
        2 => (rng.random_range(left..=right), bottom + off),
        _ => (rng.random_range(left..=right), (top - off).max(0)),
    };
    (x as f64, y as f64)
}

fn clamp_to_canvas(x: f64, y: f64) -> (f64, f64) {
    (
        x.round().clamp(0.0, (CANVAS.0 - 1) as f64),
        y.round().clamp(0.0, (CANVAS.1 - 1) as f64),
    )
}

/// Generates one labeled trajectory by walking the script over the layout.
/// Deterministic in `(script, layout, config, seed)`.
pub fn generate_trajectory(
    script: &TaskScript,
    layout: &InterfaceLayout,
    config: &GeneratorConfig,
    seed: u64,
) -> Trajectory {
    script
        .validate(layout.len())
        .expect("script matches layout");
    config.validate().expect("valid generator config");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = config.duration_range;
    let duration = rng.random_range(lo..=hi) as usize;
    let dwell_dist = Normal::new(script.dwell_mean, script.dwell_std).expect("validated");
    let noise_dist = Normal::new(0.0, script.travel_noise.max(1e-12)).expect("validated");

    let mut points: Vec<(f64, f64)> = Vec::with_capacity(duration + 32);
    let mut pos = (
        (CANVAS.0 / 2) as f64,
        (CANVAS.1 / 2) as f64,
    );
    let mut area = sample_index(&mut rng, &script.start);
    while points.len() < duration {
        let kernel = &layout.area(area).kernel;
        let overshoot = rng.random::<f64>() < script.overshoot_prob;
        let landing = sample_landing(&mut rng, kernel, overshoot, script.overshoot_reach);

        // Travel: straight-line interpolation plus noise, one point per tick.
        let dist = ((landing.0 - pos.0).powi(2) + (landing.1 - pos.1).powi(2)).sqrt();
        let steps = (dist / CURSOR_SPEED).ceil().max(1.0) as usize;
        for k in 1..=steps {
            let frac = k as f64 / steps as f64;
            let base_x = pos.0 + frac * (landing.0 - pos.0);
            let base_y = pos.1 + frac * (landing.1 - pos.1);
            let (nx, ny) = if script.travel_noise > 0.0 {
                (
                    base_x + noise_dist.sample(&mut rng),
                    base_y + noise_dist.sample(&mut rng),
                )
            } else {
                (base_x, base_y)
            };
            points.push(clamp_to_canvas(nx, ny));
        }

        // Dwell: hold the landing point.
        let dwell = dwell_dist.sample(&mut rng).round().max(1.0) as usize;
        for _ in 0..dwell {
            points.push(landing);
        }

        pos = landing;
        area = sample_index(&mut rng, &script.transition[area]);
    }
    points.truncate(duration);

    let fixations = points
        .into_iter()
        .enumerate()
        .map(|(t, (x, y))| Fixation::new(t as u32, x, y))
        .collect();
    Trajectory::new(fixations, config.ds, Some(script.class.clone()))
        .expect("generated trajectory is valid")
}

/// Generates the full dataset: `per_task` trajectories for each built-in
/// script, with per-trajectory seeds derived from the master seed. Entry
/// ids are `<class>_<index>` in lower case.
pub fn generate_dataset(config: &GeneratorConfig) -> Result<Vec<DatasetEntry>> {
    generate_dataset_with(config, &builtin_layout(), &builtin_scripts())
}

/// Same as [`generate_dataset`] for a custom layout and script set.
pub fn generate_dataset_with(
    config: &GeneratorConfig,
    layout: &InterfaceLayout,
    scripts: &[TaskScript],
) -> Result<Vec<DatasetEntry>> {
    config.validate()?;
    for script in scripts {
        script.validate(layout.len())?;
    }
    let mut entries = Vec::with_capacity(scripts.len() * config.per_task);
    for script in scripts {
        for i in 0..config.per_task {
            let seed = derive_seed(
                config.master_seed,
                &["gen", &script.class, &i.to_string()],
            );
            let trajectory = generate_trajectory(script, layout, config, seed);
            entries.push(DatasetEntry {
                id: format!("{}_{:02}", script.class.to_lowercase(), i),
                trajectory,
            });
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aoi::{compute_attraction_stats, kernel_distance};
    use crate::vectorize::vectorize_classical;

    #[test]
    fn builtin_layout_shape() {
        let layout = builtin_layout();
        assert_eq!(layout.len(), 15);
        let names: Vec<String> = layout.alphabet();
        let expected: Vec<String> = (b'A'..=b'O').map(|c| (c as char).to_string()).collect();
        assert_eq!(names, expected);
        // Disjointness is enforced by the InterfaceLayout constructor; the
        // canvas bound is checked here.
        for area in layout.areas() {
            assert!(area.kernel.right() <= CANVAS.0 as f64);
            assert!(area.kernel.bottom() <= CANVAS.1 as f64);
        }
    }

    #[test]
    fn builtin_scripts_are_valid_and_distinct() {
        let layout = builtin_layout();
        let scripts = builtin_scripts();
        assert_eq!(scripts.len(), 3);
        for s in &scripts {
            s.validate(layout.len()).unwrap();
        }
        let a_index = layout.index_of("A").unwrap();
        let deg1 = scripts.iter().find(|s| s.class == "DEG1").unwrap();
        assert_eq!(deg1.start[a_index], 0.0);
        for row in &deg1.transition {
            assert_eq!(row[a_index], 0.0);
        }
        // Pairwise distinct transition structure.
        for i in 0..scripts.len() {
            for j in i + 1..scripts.len() {
                assert_ne!(scripts[i].transition, scripts[j].transition);
            }
        }
    }

    #[test]
    fn landing_without_overshoot_is_in_kernel() {
        let layout = builtin_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for area in layout.areas() {
            for _ in 0..50 {
                let (x, y) = sample_landing(&mut rng, &area.kernel, false, 6.0);
                assert_eq!(area.kernel.distance_to(x, y), 0.0);
                assert_eq!(x, x.round());
                assert_eq!(y, y.round());
            }
        }
    }

    #[test]
    fn landing_with_overshoot_is_just_outside() {
        let layout = builtin_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let reach = 6.0;
        for area in layout.areas() {
            for _ in 0..100 {
                let (x, y) = sample_landing(&mut rng, &area.kernel, true, reach);
                let d = area.kernel.distance_to(x, y);
                assert!(d > 0.0 && d <= reach, "distance {d} outside (0, {reach}]");
            }
        }
        // Overshoots stay well inside twice the widest proximity band at
        // the default sweep midpoint (omega = 3 gives max proximity 4).
        assert!(reach < 2.0 * 4.0);
    }

    #[test]
    fn zero_noise_zero_overshoot_dwells_sit_in_kernels() {
        let layout = builtin_layout();
        let mut script = builtin_scripts()[0].clone();
        script.overshoot_prob = 0.0;
        script.travel_noise = 0.0;
        let config = GeneratorConfig {
            per_task: 1,
            duration_range: (300, 300),
            ..GeneratorConfig::default()
        };
        let traj = generate_trajectory(&script, &layout, &config, 9);
        // Dwell points repeat; any fixation equal to its successor is part
        // of a dwell and must sit inside some kernel.
        let fx = traj.fixations();
        let mut dwell_count = 0;
        for w in fx.windows(2) {
            if (w[0].x, w[0].y) == (w[1].x, w[1].y) {
                let min_d = layout
                    .areas()
                    .iter()
                    .map(|a| kernel_distance(&w[0], a))
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(min_d, 0.0);
                dwell_count += 1;
            }
        }
        assert!(dwell_count > 50, "expected plenty of dwell ticks");
    }

    #[test]
    fn generation_is_deterministic() {
        let config = GeneratorConfig {
            per_task: 2,
            ..GeneratorConfig::default()
        };
        let a = generate_dataset(&config).unwrap();
        let b = generate_dataset(&config).unwrap();
        assert_eq!(a, b);

        let other = GeneratorConfig {
            master_seed: 43,
            ..config
        };
        let c = generate_dataset(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn dataset_scale_and_balance() {
        let config = GeneratorConfig {
            per_task: 17,
            ..GeneratorConfig::default()
        };
        let entries = generate_dataset(&config).unwrap();
        assert_eq!(entries.len(), 51);
        for class in ["DEG2", "DEG1", "INT"] {
            let count = entries
                .iter()
                .filter(|e| e.trajectory.label() == Some(class))
                .count();
            assert_eq!(count, 17);
        }
        // Ids are unique and stable.
        let mut ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 51);
    }

    #[test]
    fn dataset_covers_every_area_with_kernel_fixations() {
        let layout = builtin_layout();
        let entries = generate_dataset(&GeneratorConfig::default()).unwrap();
        let corpus: Vec<Trajectory> = entries.iter().map(|e| e.trajectory.clone()).collect();
        let counts = crate::aoi::kernel_fixation_counts(&layout, &corpus);
        for (area, &count) in layout.areas().iter().zip(&counts) {
            assert!(count > 0, "area {} never received a kernel fixation", area.name);
        }
        // And the attraction stats build without error.
        compute_attraction_stats(&layout, &corpus, 3.0).unwrap();
    }

    #[test]
    fn classical_sequences_are_nonempty_and_classy() {
        let layout = builtin_layout();
        let config = GeneratorConfig {
            per_task: 3,
            ..GeneratorConfig::default()
        };
        let entries = generate_dataset(&config).unwrap();
        for e in &entries {
            let seq = vectorize_classical(&e.trajectory, &layout);
            assert!(!seq.is_empty(), "trajectory {} never hit a kernel", e.id);
            assert_eq!(seq.label.as_deref(), e.trajectory.label());
        }
    }
}
