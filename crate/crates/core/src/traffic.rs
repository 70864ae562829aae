//! Poisson passenger arrival streams and their line-delimited file format.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::building::{BuildingConfig, Floor};
use crate::error::{domain, Error, Result};

/// Origin/destination pattern of a traffic stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Trips between upper floors, never touching the lobby.
    Interfloor,
    UpPeak,
    DownPeak,
    Mixed(MixWeights),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixWeights {
    pub up_peak: f64,
    pub down_peak: f64,
    pub interfloor: f64,
}

impl MixWeights {
    /// 45% up-peak, 45% down-peak, 10% inter-floor.
    pub const LUNCH: MixWeights = MixWeights { up_peak: 0.45, down_peak: 0.45, interfloor: 0.10 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub pattern: Pattern,
    /// Percent of the building population arriving per five minutes.
    pub rate: f64,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
}

impl TrafficSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return domain(format!("arrival rate must be positive, got {}", self.rate));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return domain(format!("duration must be nonnegative, got {}", self.duration));
        }
        if let Pattern::Mixed(w) = self.pattern {
            let parts = [w.up_peak, w.down_peak, w.interfloor];
            if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return domain("mixed traffic weights must be probabilities summing to 1");
            }
        }
        Ok(())
    }

    /// Arrivals per second for a building of `population` persons.
    pub fn intensity(&self, population: u32) -> f64 {
        self.rate / 100.0 * population as f64 / 300.0
    }
}

/// One passenger request: a button press at `origin` bound for `destination`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrival {
    pub id: u64,
    pub arrival_time: f64,
    pub origin: Floor,
    pub destination: Floor,
}

/// Draws a passenger list for `building`; deterministic per `spec.seed`.
pub fn generate(spec: &TrafficSpec, building: &BuildingConfig) -> Result<Vec<Arrival>> {
    spec.validate()?;
    building.validate()?;
    if building.population == 0 {
        return domain("population must be positive");
    }
    let floors = building.floors;
    let needs_interfloor = match spec.pattern {
        Pattern::Interfloor => true,
        Pattern::Mixed(w) => w.interfloor > 0.0,
        _ => false,
    };
    if needs_interfloor && floors < 3 {
        return domain("inter-floor traffic needs at least two floors above the lobby");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gap = Exp::new(spec.intensity(building.population)).map_err(|e| Error::Domain(e.to_string()))?;
    let mut out = Vec::new();
    let mut t = 0.0f64;
    loop {
        let next = t + gap.sample(&mut rng);
        if next >= spec.duration {
            break;
        }
        t = if out.is_empty() || next > t { next } else { t.next_up() };
        let kind = match spec.pattern {
            Pattern::Mixed(w) => {
                let u: f64 = rng.random();
                if u < w.up_peak {
                    Pattern::UpPeak
                } else if u < w.up_peak + w.down_peak {
                    Pattern::DownPeak
                } else {
                    Pattern::Interfloor
                }
            }
            p => p,
        };
        let (origin, destination) = match kind {
            Pattern::UpPeak => (0, rng.random_range(1..floors)),
            Pattern::DownPeak => (rng.random_range(1..floors), 0),
            _ => {
                let o = rng.random_range(1..floors);
                let mut d = rng.random_range(1..floors - 1);
                if d >= o {
                    d += 1;
                }
                (o, d)
            }
        };
        out.push(Arrival { id: out.len() as u64, arrival_time: t, origin, destination });
    }
    Ok(out)
}

/// Checks ordering and floor ranges of a passenger list.
pub fn validate_arrivals(arrivals: &[Arrival], floors: usize) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for a in arrivals {
        if !(a.arrival_time.is_finite() && a.arrival_time >= 0.0) || a.arrival_time < last {
            return domain(format!("passenger {} arrives out of order at {}", a.id, a.arrival_time));
        }
        if a.origin == a.destination || a.origin >= floors || a.destination >= floors {
            return domain(format!("passenger {} has an invalid trip {} -> {}", a.id, a.origin, a.destination));
        }
        last = a.arrival_time;
    }
    Ok(())
}

pub const TRAFFIC_SCHEMA: &str = "liftsched.traffic";
pub const TRAFFIC_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficHeader {
    schema: String,
    version: u32,
    floors: usize,
}

/// Writes a header line followed by one JSON object per passenger.
pub fn write_traffic<W: Write>(mut w: W, floors: usize, arrivals: &[Arrival]) -> Result<()> {
    let header = TrafficHeader { schema: TRAFFIC_SCHEMA.into(), version: TRAFFIC_VERSION, floors };
    let line = |v: serde_json::Result<String>| v.map_err(|e| Error::Parse(e.to_string()));
    writeln!(w, "{}", line(serde_json::to_string(&header))?)?;
    for a in arrivals {
        writeln!(w, "{}", line(serde_json::to_string(a))?)?;
    }
    Ok(())
}

/// Reads a file written by [`write_traffic`]; returns the floor count and
/// the passengers.
pub fn read_traffic<R: BufRead>(r: R) -> Result<(usize, Vec<Arrival>)> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty traffic file".into()))??;
    let header: TrafficHeader = serde_json::from_str(&first).map_err(|e| Error::Parse(format!("traffic header: {e}")))?;
    if header.schema != TRAFFIC_SCHEMA || header.version != TRAFFIC_VERSION {
        return Err(Error::Parse(format!("unsupported traffic schema {} v{}", header.schema, header.version)));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("traffic line {}: {e}", k + 2)))?);
    }
    validate_arrivals(&out, header.floors)?;
    Ok((header.floors, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pattern: Pattern, duration: f64, seed: u64) -> TrafficSpec {
        TrafficSpec { pattern, rate: 10.0, duration, seed }
    }

    #[test]
    fn zero_duration_is_empty() {
        let b = BuildingConfig::new(8, 2);
        assert!(generate(&spec(Pattern::Interfloor, 0.0, 1), &b).unwrap().is_empty());
    }

    #[test]
    fn interfloor_avoids_lobby() {
        let b = BuildingConfig::new(10, 2);
        let list = generate(&spec(Pattern::Interfloor, 3600.0, 3), &b).unwrap();
        assert!(!list.is_empty());
        assert!(list.iter().all(|a| a.origin != 0 && a.destination != 0 && a.origin != a.destination));
        assert!(list.windows(2).all(|w| w[0].arrival_time < w[1].arrival_time));
        assert!(list.iter().all(|a| a.arrival_time < 3600.0));
    }

    #[test]
    fn peak_patterns_fix_the_lobby_end() {
        let b = BuildingConfig::new(8, 2);
        assert!(generate(&spec(Pattern::UpPeak, 1800.0, 1), &b).unwrap().iter().all(|a| a.origin == 0));
        assert!(generate(&spec(Pattern::DownPeak, 1800.0, 1), &b).unwrap().iter().all(|a| a.destination == 0));
    }

    #[test]
    fn same_seed_same_stream() {
        let b = BuildingConfig::new(8, 2);
        let s = spec(Pattern::Mixed(MixWeights::LUNCH), 3600.0, 9);
        assert_eq!(generate(&s, &b).unwrap(), generate(&s, &b).unwrap());
    }

    #[test]
    fn invalid_inputs() {
        let mut b = BuildingConfig::new(8, 2);
        let mut s = spec(Pattern::Interfloor, 60.0, 0);
        s.rate = 0.0;
        assert!(generate(&s, &b).is_err());
        s.rate = 10.0;
        b.population = 0;
        assert!(generate(&s, &b).is_err());
        let bad = MixWeights { up_peak: 0.5, down_peak: 0.5, interfloor: 0.5 };
        assert!(spec(Pattern::Mixed(bad), 60.0, 0).validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let b = BuildingConfig::new(8, 2);
        let list = generate(&spec(Pattern::Interfloor, 600.0, 5), &b).unwrap();
        let mut buf = Vec::new();
        write_traffic(&mut buf, 8, &list).unwrap();
        let (floors, back) = read_traffic(buf.as_slice()).unwrap();
        assert_eq!(floors, 8);
        assert_eq!(back, list);
        assert!(read_traffic(&b"{\"schema\":\"other\",\"version\":1,\"floors\":8}\n"[..]).is_err());
    }
}
