use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::geometry::{Point, Room, Segment};

/// RSS model: constant baseline, Gaussian multipath, and a fixed-depth
/// dip while anyone stands near the line of sight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssModel {
    /// dBm with nobody near the link.
    pub baseline: f64,
    /// Standard deviation of the multipath fluctuation, dB.
    pub multipath_sigma: f64,
    /// Attenuation while the link is blocked, dB.
    pub pulse_depth: f64,
    /// Distance from the LoS segment within which a body blocks it, m.
    pub pulse_halfwidth: f64,
    /// Readings per second.
    pub sample_rate: f64,
}

impl Default for RssModel {
    fn default() -> Self {
        Self {
            baseline: -40.0,
            multipath_sigma: 1.5,
            pulse_depth: 8.0,
            pulse_halfwidth: 0.3,
            sample_rate: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub room: Room,
    pub los: Segment,
    pub agents: usize,
    /// Walking speed bounds, m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Seconds.
    pub duration: f64,
    pub rss: RssModel,
    pub rng_seed: u64,
}

impl Default for SimScenario {
    /// A 7 x 7 m room with the link across its middle.
    fn default() -> Self {
        Self {
            room: Room {
                width: 7.0,
                height: 7.0,
            },
            los: Segment::new(Point::new(0.0, 3.5), Point::new(7.0, 3.5)),
            agents: 1,
            speed_min: 0.5,
            speed_max: 1.5,
            duration: 300.0,
            rss: RssModel::default(),
            rng_seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "room_width",
    "room_height",
    "los_x0",
    "los_y0",
    "los_x1",
    "los_y1",
    "agents",
    "speed_min",
    "speed_max",
    "duration",
    "baseline",
    "multipath_sigma",
    "pulse_depth",
    "pulse_halfwidth",
    "sample_rate",
    "rng_seed",
];

impl SimScenario {
    /// Checks the geometry and motion parameters.
    pub fn validate_motion(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scenario(msg));
        let r = self.room;
        if !(r.width.is_finite() && r.height.is_finite() && r.width > 0.0 && r.height > 0.0) {
            return bad(format!("room {} x {} has no area", r.width, r.height));
        }
        if !(self.speed_min > 0.0 && self.speed_max >= self.speed_min && self.speed_max.is_finite()) {
            return bad(format!(
                "speed range [{}, {}] must be positive and ordered",
                self.speed_min, self.speed_max
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.rss.sample_rate.is_finite() && self.rss.sample_rate > 0.0) {
            return bad(format!(
                "sample rate must be positive, got {}",
                self.rss.sample_rate
            ));
        }
        let pts = [self.los.a, self.los.b];
        if pts.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return bad("LoS endpoints must be finite".into());
        }
        Ok(())
    }

    /// Full check, including that blockage dips stand out from multipath.
    pub fn validate(&self) -> Result<()> {
        self.validate_motion()?;
        let m = self.rss;
        if !(m.baseline.is_finite() && m.multipath_sigma >= 0.0 && m.pulse_halfwidth >= 0.0) {
            return Err(Error::Scenario(
                "baseline must be finite; sigma and halfwidth non-negative".into(),
            ));
        }
        if !(m.pulse_depth > m.multipath_sigma) {
            return Err(Error::Scenario(format!(
                "pulse depth {} dB must exceed multipath sigma {} dB",
                m.pulse_depth, m.multipath_sigma
            )));
        }
        Ok(())
    }

    /// Number of RSS samples over the whole duration.
    pub fn num_samples(&self) -> usize {
        (self.duration * self.rss.sample_rate).round() as usize
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Scenario(format!("{key}: cannot parse '{value}'")))
        }
        let key = key.trim();
        match key {
            "room_width" => self.room.width = num(key, value)?,
            "room_height" => self.room.height = num(key, value)?,
            "los_x0" => self.los.a.x = num(key, value)?,
            "los_y0" => self.los.a.y = num(key, value)?,
            "los_x1" => self.los.b.x = num(key, value)?,
            "los_y1" => self.los.b.y = num(key, value)?,
            "agents" => self.agents = num(key, value)?,
            "speed_min" => self.speed_min = num(key, value)?,
            "speed_max" => self.speed_max = num(key, value)?,
            "duration" => self.duration = num(key, value)?,
            "baseline" => self.rss.baseline = num(key, value)?,
            "multipath_sigma" => self.rss.multipath_sigma = num(key, value)?,
            "pulse_depth" => self.rss.pulse_depth = num(key, value)?,
            "pulse_halfwidth" => self.rss.pulse_halfwidth = num(key, value)?,
            "sample_rate" => self.rss.sample_rate = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            other => {
                return Err(Error::Scenario(format!(
                    "unknown key '{other}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut s = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at_line(origin, n + 1, "expected key=value".into()))?;
            s.set(k, v)
                .map_err(|e| {
                    let msg = match e {
                        Error::Scenario(m) => m,
                        other => other.to_string(),
                    };
                    at_line(origin, n + 1, msg)
                })?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let values = [
            self.room.width,
            self.room.height,
            self.los.a.x,
            self.los.a.y,
            self.los.b.x,
            self.los.b.y,
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!(
            "agents={}\nspeed_min={}\nspeed_max={}\nduration={}\nbaseline={}\n\
             multipath_sigma={}\npulse_depth={}\npulse_halfwidth={}\nsample_rate={}\nrng_seed={}\n",
            self.agents,
            self.speed_min,
            self.speed_max,
            self.duration,
            self.rss.baseline,
            self.rss.multipath_sigma,
            self.rss.pulse_depth,
            self.rss.pulse_halfwidth,
            self.rss.sample_rate,
            self.rng_seed
        ));
        out
    }
}

/// A scenario error located at `path:line`.
fn at_line(path: &Path, line: usize, msg: String) -> Error {
    Error::Scenario(format!("{}:{line}: {msg}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut s = SimScenario::default();
        s.agents = 4;
        s.los.b.y = 6.25;
        s.rss.multipath_sigma = 0.0;
        s.rng_seed = 12;
        assert_eq!(SimScenario::parse(&s.to_text(), Path::new("s")).unwrap(), s);
    }

    #[test]
    fn invalid_scenarios() {
        for bad in [
            "room_width=0",
            "speed_min=0",
            "speed_max=0.2",
            "pulse_depth=1",
            "sample_rate=0",
            "colour=blue",
        ] {
            assert!(SimScenario::parse(bad, Path::new("s")).is_err(), "{bad}");
        }
    }
}
