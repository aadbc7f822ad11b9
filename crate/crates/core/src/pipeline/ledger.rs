//! Per-tick accounting of what was sent and what it cost.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::Weather;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TickDecision {
    /// First map of the stream, sent to fill the cache.
    Prime,
    Transmit,
    Discard,
    /// Baseline: the full frame goes out every tick.
    Frame,
}

/// One tick. VoI fields are empty for ticks that were not scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickRecord {
    pub timestamp: u64,
    pub aoi: Option<u64>,
    pub change: Option<f64>,
    pub voi: Option<f64>,
    pub decision: TickDecision,
    pub payload_bytes: u64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Full frames every tick.
    Baseline,
    /// VoI-gated semantic maps at the given threshold.
    Scdgsc { voi_threshold: f64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Scdgsc { .. } => "scdgsc",
        }
    }
}

/// Summary of receiver-side regeneration during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub maps: usize,
    pub samples_per_map: usize,
    pub guidance_scale: f64,
    /// Mean distance between generated and true object centroids, in
    /// normalised frame coordinates.
    pub mean_centroid_error: f64,
    pub guidance_reliable: bool,
}

/// Records plus running totals. Energy is summed exactly and rounded once,
/// so the total is the correctly rounded sum of the per-tick energies and
/// does not depend on the order of the records.
#[derive(Debug, Clone)]
pub struct RunLedger {
    pub scheme: Scheme,
    pub weather: Weather,
    pub bandwidth_hz: f64,
    pub provenance: Provenance,
    /// One-time cost of the static reference view; kept out of the totals.
    pub reference_energy_j: Option<f64>,
    pub generation: Option<GenerationStats>,
    records: Vec<TickRecord>,
    energy: ExactSum,
    total_bytes: u64,
    transmit_count: usize,
}

impl RunLedger {
    pub fn new(scheme: Scheme, weather: Weather, bandwidth_hz: f64, provenance: Provenance) -> Self {
        Self {
            scheme,
            weather,
            bandwidth_hz,
            provenance,
            reference_energy_j: None,
            generation: None,
            records: Vec::new(),
            energy: ExactSum::default(),
            total_bytes: 0,
            transmit_count: 0,
        }
    }

    pub fn push(&mut self, record: TickRecord) {
        if record.decision != TickDecision::Discard {
            self.transmit_count += 1;
        }
        self.energy.add(record.energy_j);
        self.total_bytes += record.payload_bytes;
        self.records.push(record);
    }

    pub fn records(&self) -> &[TickRecord] {
        &self.records
    }

    pub fn ticks(&self) -> usize {
        self.records.len()
    }

    pub fn total_energy_j(&self) -> f64 {
        self.energy.value()
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_bytes
    }

    pub fn transmit_count(&self) -> usize {
        self.transmit_count
    }

    pub fn voi_threshold(&self) -> Option<f64> {
        match self.scheme {
            Scheme::Scdgsc { voi_threshold } => Some(voi_threshold),
            Scheme::Baseline => None,
        }
    }

    /// Per-tick CSV preceded by `#`-prefixed provenance lines.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        let p = &self.provenance;
        writeln!(buf, "# scheme={}", self.scheme.name()).unwrap();
        writeln!(buf, "# weather={}", self.weather).unwrap();
        if let Some(th) = self.voi_threshold() {
            writeln!(buf, "# voi_threshold={th}").unwrap();
        }
        writeln!(buf, "# bandwidth_hz={}", self.bandwidth_hz).unwrap();
        writeln!(buf, "# config_hash={}", p.config_hash).unwrap();
        writeln!(buf, "# seed={}", p.seed).unwrap();
        writeln!(buf, "# code_version={}", p.code_version).unwrap();
        writeln!(buf, "# total_energy_j={}", self.total_energy_j()).unwrap();
        writeln!(buf, "# total_bytes={}", self.total_bytes).unwrap();
        writeln!(buf, "# transmit_count={}", self.transmit_count).unwrap();
        if let Some(e) = self.reference_energy_j {
            writeln!(buf, "# reference_energy_j={e}").unwrap();
        }
        if let Some(g) = &self.generation {
            writeln!(
                buf,
                "# generation maps={} samples_per_map={} guidance_scale={} mean_centroid_error={} guidance_reliable={}",
                g.maps, g.samples_per_map, g.guidance_scale, g.mean_centroid_error, g.guidance_reliable
            )
            .unwrap();
        }
        let mut w = csv::Writer::from_writer(buf);
        if self.records.is_empty() {
            w.write_record([
                "timestamp", "aoi", "change", "voi", "decision", "payload_bytes", "energy_j",
            ])
            .map_err(csv_err)?;
        }
        for r in &self.records {
            w.serialize(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Shewchuk's non-overlapping partials: the exact sum of everything added,
/// held as a few doubles and rounded once on read.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        let mut kept = 0;
        for i in 0..self.partials.len() {
            let mut y = self.partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    /// Correctly rounded value of the exact sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some((&top, rest)) = p.split_last() else {
            return 0.0;
        };
        let mut hi = top;
        let mut lo = 0.0;
        let mut i = rest.len();
        while i > 0 {
            i -= 1;
            let x = hi;
            let y = rest[i];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even fix-up when the remainder sits exactly on a tie.
        if i > 0 && ((lo < 0.0 && rest[i - 1] < 0.0) || (lo > 0.0 && rest[i - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Contract(format!("csv serialisation failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, decision: TickDecision, bytes: u64, e: f64) -> TickRecord {
        TickRecord {
            timestamp: t,
            aoi: None,
            change: None,
            voi: None,
            decision,
            payload_bytes: bytes,
            energy_j: e,
        }
    }

    #[test]
    fn totals_track_records() {
        let mut l = RunLedger::new(
            Scheme::Scdgsc { voi_threshold: 0.1 },
            Weather::Clear,
            1e6,
            Provenance::new("abc".into(), 1),
        );
        l.push(rec(0, TickDecision::Prime, 10, 0.1));
        l.push(rec(1, TickDecision::Discard, 0, 0.0));
        l.push(rec(2, TickDecision::Transmit, 12, 0.2));
        assert_eq!(l.transmit_count(), 2);
        assert_eq!(l.total_bytes(), 22);
        assert_eq!(l.total_energy_j(), 0.30000000000000004);
    }

    #[test]
    fn exact_sum_is_correctly_rounded() {
        let mut s = ExactSum::default();
        for x in [1e16, 1.0, -1e16, 1e-3, 0.1, 0.2] {
            s.add(x);
        }
        // 1 + 1e-3 + 0.1 + 0.2, whose naive left-to-right sum is off.
        let mut naive = ExactSum::default();
        for x in [1.0, 1e-3, 0.1, 0.2] {
            naive.add(x);
        }
        assert_eq!(s.value(), naive.value());
        let mut t = ExactSum::default();
        for _ in 0..10 {
            t.add(0.1);
        }
        assert_eq!(t.value(), 1.0);
        assert_eq!(ExactSum::default().value(), 0.0);
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        let mut l = RunLedger::new(Scheme::Baseline, Weather::Fog, 1e6, Provenance::new("h".into(), 3));
        l.push(rec(0, TickDecision::Frame, 5, 0.5));
        l.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# scheme=baseline\n# weather=fog\n"));
        assert!(text.contains("timestamp,aoi,change,voi,decision,payload_bytes,energy_j\n0,,,,frame,5,0.5\n"));
    }
}
