//! Deterministic walker and RSS simulator used as a stand-in for a
//! physical testbed.
//!
//! Walkers follow random-waypoint motion inside a rectangular room. The
//! link's line of sight is a segment; a walker crossing it produces a
//! crossing timestamp, and while any walker is within `pulse_halfwidth` of
//! it the simulated RSS drops by `pulse_depth`.

pub mod geometry;
pub mod scenario;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use geometry::{Point, Room, Segment};
pub use scenario::{RssModel, SimScenario};

use crate::error::{Error, Result};
use crate::types::{BlockageSequence, RssReading, RssTrace};
use crate::window::{slot_index, slots_per_window, timestamps_to_sequence};

/// Stream reserved for multipath noise; agent `k` uses stream `k`.
const NOISE_STREAM: u64 = u64::MAX;

/// Positions of one walker sampled at a fixed rate, plus the waypoints it
/// visited (starting position first).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sample_rate: f64,
    pub positions: Vec<Point>,
    pub waypoints: Vec<Point>,
}

impl Trajectory {
    pub fn time_of(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate
    }

    /// Lengths of the completed straight legs between waypoints.
    pub fn leg_lengths(&self) -> Vec<f64> {
        self.waypoints
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .collect()
    }
}

/// Mixes a base seed with two indices into an independent seed.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(base) ^ a) ^ b.rotate_left(32))
}

fn uniform_point<R: Rng + ?Sized>(room: &Room, rng: &mut R) -> Point {
    Point::new(
        rng.random_range(0.0..=room.width),
        rng.random_range(0.0..=room.height),
    )
}

/// Random-waypoint walk of agent `index`; depends only on
/// `(scenario.rng_seed, index)` and the motion parameters.
pub fn simulate_agent(scenario: &SimScenario, index: usize) -> Result<Trajectory> {
    scenario.validate_motion()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    rng.set_stream(index as u64);
    let room = scenario.room;
    let pick_speed = |rng: &mut ChaCha8Rng| {
        if scenario.speed_max > scenario.speed_min {
            rng.random_range(scenario.speed_min..scenario.speed_max)
        } else {
            scenario.speed_min
        }
    };

    let start = uniform_point(&room, &mut rng);
    let mut from = start;
    let mut to = uniform_point(&room, &mut rng);
    let mut leg_start = 0.0;
    let mut leg_time = from.distance(to) / pick_speed(&mut rng);
    let mut waypoints = vec![start];

    let n = scenario.num_samples();
    let rate = scenario.rss.sample_rate;
    let mut positions = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / rate;
        while t > leg_start + leg_time {
            leg_start += leg_time;
            from = to;
            waypoints.push(to);
            to = uniform_point(&room, &mut rng);
            leg_time = from.distance(to) / pick_speed(&mut rng);
        }
        let frac = if leg_time > 0.0 {
            ((t - leg_start) / leg_time).clamp(0.0, 1.0)
        } else {
            1.0
        };
        positions.push(from.lerp(to, frac));
    }
    Ok(Trajectory {
        sample_rate: rate,
        positions,
        waypoints,
    })
}

/// Trajectories of every agent in the scenario.
pub fn simulate_walk(scenario: &SimScenario) -> Result<Vec<Trajectory>> {
    scenario.validate_motion()?;
    (0..scenario.agents)
        .map(|i| simulate_agent(scenario, i))
        .collect()
}

/// Times at which a trajectory crosses the line-of-sight segment.
///
/// A crossing needs two consecutive samples strictly on opposite sides of
/// the supporting line whose connecting step also meets the segment; the
/// time is interpolated linearly along that step.
pub fn crossings(trajectory: &Trajectory, los: &Segment) -> Vec<f64> {
    let mut out = Vec::new();
    for (k, pair) in trajectory.positions.windows(2).enumerate() {
        let (p0, p1) = (pair[0], pair[1]);
        let (s0, s1) = (los.side(p0), los.side(p1));
        if !(s0 * s1 < 0.0) {
            continue;
        }
        if !Segment::new(p0, p1).intersects(los) {
            continue;
        }
        let frac = s0 / (s0 - s1);
        let t0 = trajectory.time_of(k);
        out.push(t0 + frac / trajectory.sample_rate);
    }
    out
}

/// Whether any walker is within the blocking distance of the link at sample `k`.
fn blocked_at(trajectories: &[Trajectory], los: &Segment, halfwidth: f64, k: usize) -> bool {
    trajectories
        .iter()
        .any(|tr| los.distance_to(tr.positions[k]) < halfwidth)
}

/// RSS readings for the whole scenario duration.
pub fn synthesize_rss(trajectories: &[Trajectory], scenario: &SimScenario) -> Result<RssTrace> {
    let m = scenario.rss;
    let n = scenario.num_samples();
    if trajectories.iter().any(|t| t.positions.len() != n) {
        return Err(Error::Scenario(
            "trajectory sample count does not match the scenario".into(),
        ));
    }
    let noise = Normal::new(0.0, m.multipath_sigma)
        .map_err(|e| Error::Scenario(format!("multipath sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    rng.set_stream(NOISE_STREAM);
    let readings = (0..n)
        .map(|k| {
            let dip = if blocked_at(trajectories, &scenario.los, m.pulse_halfwidth, k) {
                m.pulse_depth
            } else {
                0.0
            };
            RssReading {
                t: k as f64 / m.sample_rate,
                rss: m.baseline + noise.sample(&mut rng) - dip,
            }
        })
        .collect();
    RssTrace::new(readings, scenario.duration)
}

/// Everything known about one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub trace: RssTrace,
    /// Number of walkers.
    pub count: usize,
    /// Slots containing at least one LoS crossing.
    pub sequence: BlockageSequence,
    /// Slots containing at least one sample where someone blocks the link;
    /// what a noise-free detector sees.
    pub occupancy: BlockageSequence,
    /// Crossing times per agent.
    pub crossings: Vec<Vec<f64>>,
}

/// Slots during which the link is physically blocked.
pub fn occupancy_sequence(
    trajectories: &[Trajectory],
    scenario: &SimScenario,
    slot_duration: f64,
) -> Result<BlockageSequence> {
    let w = slots_per_window(scenario.duration, slot_duration)?;
    let mut bits = vec![false; w];
    for k in 0..scenario.num_samples() {
        if blocked_at(trajectories, &scenario.los, scenario.rss.pulse_halfwidth, k) {
            let t = k as f64 / scenario.rss.sample_rate;
            bits[slot_index(t, slot_duration, w)] = true;
        }
    }
    Ok(BlockageSequence::from_bits(bits, slot_duration))
}

/// Simulates walkers, their crossings, and the resulting RSS trace.
pub fn generate_ground_truth(scenario: &SimScenario, slot_duration: f64) -> Result<GroundTruth> {
    scenario.validate()?;
    let w = slots_per_window(scenario.duration, slot_duration)?;
    let trajectories = simulate_walk(scenario)?;
    let per_agent: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| crossings(t, &scenario.los))
        .collect();
    let mut all: Vec<f64> = per_agent.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    Ok(GroundTruth {
        trace: synthesize_rss(&trajectories, scenario)?,
        count: scenario.agents,
        sequence: timestamps_to_sequence(&all, w, slot_duration)?,
        occupancy: occupancy_sequence(&trajectories, scenario, slot_duration)?,
        crossings: per_agent,
    })
}
