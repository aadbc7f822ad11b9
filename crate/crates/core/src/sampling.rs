//! Value-of-information gated semantic sampling.
//!
//! The source keeps the last semantic map it delivered. Each new map is
//! scored by `tau_aoi * age + tau_change * change_degree` against that cache
//! and only maps scoring at or above the threshold are sent.

use crate::error::{Error, Result};

/// Binary mask of task-relevant object pixels, stamped with a frame tick.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    timestamp: u64,
    cells: Vec<bool>,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, timestamp: u64, cells: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Contract(format!(
                "semantic map must be non-empty, got {width}x{height}"
            )));
        }
        if cells.len() != width * height {
            return Err(Error::Contract(format!(
                "expected {} cells for {width}x{height}, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            timestamp,
            cells,
        })
    }

    pub fn empty(width: usize, height: usize, timestamp: u64) -> Result<Self> {
        Self::new(width, height, timestamp, vec![false; width * height])
    }

    /// Builds a map by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        timestamp: u64,
        f: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        let cells = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, timestamp, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn with_timestamp(mut self, timestamp: u64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.cells[y * self.width + x] = v;
    }

    /// Number of object pixels.
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn same_shape(&self, other: &SemanticMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn check_shape(&self, other: &SemanticMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "map dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

/// Age of information in ticks.
pub fn aoi(t: u64, t_prev: u64) -> u64 {
    t.abs_diff(t_prev)
}

/// Fraction of object pixels not shared by the two maps, `1 - Dice`.
///
/// Two empty maps have no change.
pub fn change_degree(a: &SemanticMap, b: &SemanticMap) -> Result<f64> {
    a.check_shape(b)?;
    let (mut na, mut nb, mut nab) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.cells.iter().zip(&b.cells) {
        na += x as usize;
        nb += y as usize;
        nab += (x && y) as usize;
    }
    let total = na + nb;
    if total == 0 {
        return Ok(0.0);
    }
    Ok((total - 2 * nab) as f64 / total as f64)
}

/// Weights and threshold of the VoI gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiParams {
    pub threshold: f64,
    pub tau_aoi: f64,
    pub tau_change: f64,
}

impl VoiParams {
    pub fn new(threshold: f64, tau_aoi: f64, tau_change: f64) -> Result<Self> {
        for (name, v) in [
            ("voi_threshold", threshold),
            ("tau_aoi", tau_aoi),
            ("tau_change", tau_change),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if tau_aoi + tau_change <= 0.0 {
            return Err(Error::config("tau_aoi + tau_change", "must be > 0"));
        }
        Ok(Self {
            threshold,
            tau_aoi,
            tau_change,
        })
    }
}

/// `tau_aoi * aoi + tau_change * change`.
pub fn voi(g_aoi: f64, g_change: f64, params: &VoiParams) -> f64 {
    params.tau_aoi * g_aoi + params.tau_change * g_change
}

/// The components of one VoI evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiScore {
    pub aoi: u64,
    pub change: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    /// First map of a stream; always sent so the cache exists.
    Prime,
    Transmit(VoiScore),
    Discard(VoiScore),
}

impl Decision {
    pub fn transmits(&self) -> bool {
        !matches!(self, Decision::Discard(_))
    }

    pub fn score(&self) -> Option<VoiScore> {
        match self {
            Decision::Prime => None,
            Decision::Transmit(s) | Decision::Discard(s) => Some(*s),
        }
    }
}

/// Source-side cache of the last delivered map.
#[derive(Debug, Clone)]
pub struct SamplerState {
    params: VoiParams,
    cached: Option<SemanticMap>,
}

impl SamplerState {
    /// A sampler whose first offer primes the cache.
    pub fn new(params: VoiParams) -> Self {
        Self {
            params,
            cached: None,
        }
    }

    pub fn with_cache(params: VoiParams, cached: SemanticMap) -> Self {
        Self {
            params,
            cached: Some(cached),
        }
    }

    pub fn params(&self) -> &VoiParams {
        &self.params
    }

    pub fn cached_map(&self) -> Option<&SemanticMap> {
        self.cached.as_ref()
    }

    pub fn cached_time(&self) -> Option<u64> {
        self.cached.as_ref().map(SemanticMap::timestamp)
    }

    /// Scores `candidate` against the cache and replaces the cache if it is sent.
    ///
    /// A score equal to the threshold transmits.
    pub fn offer(&mut self, candidate: &SemanticMap) -> Result<Decision> {
        let Some(cached) = &self.cached else {
            self.cached = Some(candidate.clone());
            return Ok(Decision::Prime);
        };
        if candidate.timestamp < cached.timestamp {
            return Err(Error::Contract(format!(
                "out-of-order map: t = {} precedes cached t' = {}",
                candidate.timestamp, cached.timestamp
            )));
        }
        let change = change_degree(candidate, cached)?;
        let age = aoi(candidate.timestamp, cached.timestamp);
        let value = voi(age as f64, change, &self.params);
        let score = VoiScore {
            aoi: age,
            change,
            value,
        };
        if value < self.params.threshold {
            Ok(Decision::Discard(score))
        } else {
            self.cached = Some(candidate.clone());
            Ok(Decision::Transmit(score))
        }
    }
}

/// Nearest-neighbour decimation by an integer factor that divides both sides.
pub fn resize_map(map: &SemanticMap, factor: usize) -> Result<SemanticMap> {
    if factor == 0 || !map.width.is_multiple_of(factor) || !map.height.is_multiple_of(factor) {
        return Err(Error::Contract(format!(
            "resize factor {factor} must divide {}x{}",
            map.width, map.height
        )));
    }
    if factor == 1 {
        return Ok(map.clone());
    }
    SemanticMap::from_fn(
        map.width / factor,
        map.height / factor,
        map.timestamp,
        |x, y| map.get(x * factor, y * factor),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map_from(rows: &[&str], t: u64) -> SemanticMap {
        let h = rows.len();
        let w = rows[0].len();
        let cells = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| b == b'1'))
            .collect();
        SemanticMap::new(w, h, t, cells).unwrap()
    }

    #[test]
    fn aoi_examples() {
        assert_eq!(aoi(10, 7), 3);
        assert_eq!(aoi(5, 5), 0);
        assert_eq!(aoi(7, 10), 3);
    }

    #[test]
    fn change_degree_examples() {
        let a = map_from(&["1100", "1100", "0000", "0000"], 0);
        assert_eq!(change_degree(&a, &a).unwrap(), 0.0);
        let disjoint = map_from(&["0000", "0000", "0011", "0011"], 1);
        assert_eq!(change_degree(&a, &disjoint).unwrap(), 1.0);
        // n_a = 4, n_b = 4, n_ab = 2
        let half = map_from(&["0110", "0110", "0000", "0000"], 1);
        assert_eq!(change_degree(&a, &half).unwrap(), 0.5);
        let e = SemanticMap::empty(4, 4, 0).unwrap();
        assert_eq!(change_degree(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn change_degree_rejects_shape_mismatch() {
        let a = SemanticMap::empty(4, 4, 0).unwrap();
        let b = SemanticMap::empty(4, 2, 0).unwrap();
        assert!(matches!(change_degree(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn voi_examples() {
        let p = VoiParams::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(voi(17.0, 0.37, &p), 0.37);
        let p = VoiParams::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(voi(3.0, 0.9, &p), 3.0);
        let p = VoiParams::new(0.0, 0.5, 2.0).unwrap();
        assert_eq!(voi(2.0, 0.25, &p), 1.5);
        assert!(VoiParams::new(0.0, 0.0, 0.0).is_err());
        assert!(VoiParams::new(-0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn offer_primes_then_gates() {
        let p = VoiParams::new(0.1, 0.0, 1.0).unwrap();
        let mut s = SamplerState::new(p);
        let a = map_from(&["1100", "1100", "0000", "0000"], 0);
        assert_eq!(s.offer(&a).unwrap(), Decision::Prime);
        let d = s.offer(&a.clone().with_timestamp(1)).unwrap();
        assert!(matches!(d, Decision::Discard(_)));
        assert_eq!(s.cached_time(), Some(0));
        let b = map_from(&["0110", "0110", "0000", "0000"], 2);
        let d = s.offer(&b).unwrap();
        assert!(d.transmits());
        assert_eq!(d.score().unwrap().aoi, 2);
        assert_eq!(s.cached_time(), Some(2));
        assert!(matches!(
            s.offer(&b.clone().with_timestamp(1)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn offer_threshold_extremes() {
        let a = map_from(&["10", "00"], 0);
        let b = map_from(&["01", "00"], 1);
        let mut zero = SamplerState::with_cache(VoiParams::new(0.0, 0.0, 1.0).unwrap(), a.clone());
        assert!(zero.offer(&a.clone().with_timestamp(1)).unwrap().transmits());
        let mut never = SamplerState::with_cache(VoiParams::new(1.01, 0.0, 1.0).unwrap(), a.clone());
        for t in 1..20 {
            let m = if t % 2 == 0 { &a } else { &b };
            let d = never.offer(&m.clone().with_timestamp(t)).unwrap();
            assert!(!d.transmits());
        }
    }

    #[test]
    fn tie_transmits() {
        let a = map_from(&["1100"], 0);
        let b = map_from(&["0110"], 1);
        let mut s = SamplerState::with_cache(VoiParams::new(0.5, 0.0, 1.0).unwrap(), a);
        assert!(s.offer(&b).unwrap().transmits());
    }

    #[test]
    fn resize_examples() {
        let m = map_from(&["1010", "0101", "1010", "0101"], 9);
        assert_eq!(resize_map(&m, 1).unwrap(), m);
        let r = resize_map(&m, 2).unwrap();
        assert_eq!(r, map_from(&["11", "11"], 9));
        let ones = SemanticMap::from_fn(8, 8, 3, |_, _| true).unwrap();
        let r = resize_map(&ones, 2).unwrap();
        assert_eq!((r.width(), r.height(), r.count(), r.timestamp()), (4, 4, 16, 3));
        assert!(resize_map(&m, 3).is_err());
        assert!(resize_map(&m, 0).is_err());
    }

    fn dice(a: &[bool], b: &[bool]) -> f64 {
        let na = a.iter().filter(|&&v| v).count() as f64;
        let nb = b.iter().filter(|&&v| v).count() as f64;
        let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count() as f64;
        if na + nb == 0.0 {
            1.0
        } else {
            2.0 * both / (na + nb)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]
        #[test]
        fn change_degree_laws(
            (a, b) in (1usize..12, 1usize..12).prop_flat_map(|(w, h)| (
                proptest::collection::vec(any::<bool>(), w * h).prop_map(move |c| (w, h, c)),
                proptest::collection::vec(any::<bool>(), w * h),
            ))
        ) {
            let (w, h, ca) = a;
            let ma = SemanticMap::new(w, h, 0, ca.clone()).unwrap();
            let mb = SemanticMap::new(w, h, 1, b.clone()).unwrap();
            let ab = change_degree(&ma, &mb).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, change_degree(&mb, &ma).unwrap());
            prop_assert_eq!(change_degree(&ma, &ma).unwrap(), 0.0);
            prop_assert!((ab - (1.0 - dice(&ca, &b))).abs() < 1e-15);
        }
    }
}
