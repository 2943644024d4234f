//! Per-segment typical traversal times, piecewise constant between resamples.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;
use crate::graph::NavGraph;

/// Worst-case and nominal walking speeds in m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speeds {
    pub worst: f64,
    pub nominal: f64,
}

impl Speeds {
    pub const SHIP: Speeds = Speeds {
        worst: 0.067,
        nominal: 0.67,
    };

    pub fn new(worst: f64, nominal: f64) -> Result<Self, ConfigError> {
        for (name, value) in [("v_worst", worst), ("v_nominal", nominal)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        if worst > nominal {
            return Err(ConfigError::SpeedOrder { worst, nominal });
        }
        Ok(Speeds { worst, nominal })
    }
}

impl Default for Speeds {
    fn default() -> Self {
        Speeds::SHIP
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentTimes {
    pub t_worst: f64,
    pub t_nominal: f64,
    pub t_typical: f64,
}

impl SegmentTimes {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.t_worst > self.t_nominal {
            rng.gen_range(self.t_nominal..=self.t_worst)
        } else {
            self.t_nominal
        }
    }
}

/// How typical times are set when a field is created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TypicalInit {
    /// Uniform draw in `[t_nominal, t_worst]`.
    #[default]
    Sampled,
    /// Every segment starts at its nominal time.
    Nominal,
    /// Every segment starts at its worst-case time.
    Worst,
}

/// Immutable copy of the typical times at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    epoch: u64,
    typical: Arc<[f64]>,
}

impl FieldSnapshot {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn typical(&self) -> &[f64] {
        &self.typical
    }

    pub fn edge_count(&self) -> usize {
        self.typical.len()
    }
}

/// Typical traversal times for every edge, redrawn once per change interval.
///
/// At each resample a segment keeps its previous value with probability
/// `persistence` and otherwise takes a fresh uniform draw, so the marginal
/// law stays uniform on `[t_nominal, t_worst]` while the lag-k correlation
/// is `persistence^k`. `persistence = 0` gives independent epochs.
#[derive(Debug, Clone)]
pub struct TraversalTimeField {
    segments: Vec<SegmentTimes>,
    epoch: u64,
    change_interval: f64,
    persistence: f64,
    frozen: bool,
    rng: ChaCha8Rng,
}

impl TraversalTimeField {
    pub fn new(
        g: &NavGraph,
        speeds: Speeds,
        init: TypicalInit,
        mut rng: ChaCha8Rng,
    ) -> Result<Self, ConfigError> {
        let speeds = Speeds::new(speeds.worst, speeds.nominal)?;
        let segments = g
            .edges()
            .iter()
            .map(|e| {
                let mut seg = SegmentTimes {
                    t_worst: e.length / speeds.worst,
                    t_nominal: e.length / speeds.nominal,
                    t_typical: 0.0,
                };
                seg.t_typical = match init {
                    TypicalInit::Sampled => seg.draw(&mut rng),
                    TypicalInit::Nominal => seg.t_nominal,
                    TypicalInit::Worst => seg.t_worst,
                };
                seg
            })
            .collect();
        Ok(TraversalTimeField {
            segments,
            epoch: 0,
            change_interval: 5.0,
            persistence: 0.0,
            frozen: false,
            rng,
        })
    }

    pub fn with_change_interval(mut self, seconds: f64) -> Self {
        self.change_interval = seconds;
        self
    }

    pub fn with_persistence(mut self, persistence: f64) -> Self {
        self.persistence = persistence;
        self
    }

    /// A static field keeps its values on every resample.
    pub fn with_static(mut self, frozen: bool) -> Self {
        self.frozen = frozen;
        self
    }

    /// Replaces the typical times, clamped into each segment's bounds.
    pub fn set_typical(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.segments.len(), "one value per edge");
        for (seg, &v) in self.segments.iter_mut().zip(values) {
            seg.t_typical = v.clamp(seg.t_nominal, seg.t_worst);
        }
    }

    pub fn resample(&mut self) {
        self.epoch += 1;
        if self.frozen {
            return;
        }
        let keep = self.persistence;
        for seg in &mut self.segments {
            if keep > 0.0 && self.rng.gen_bool(keep) {
                continue;
            }
            seg.t_typical = seg.draw(&mut self.rng);
        }
    }

    pub fn freeze_snapshot(&self) -> FieldSnapshot {
        FieldSnapshot {
            epoch: self.epoch,
            typical: self.segments.iter().map(|s| s.t_typical).collect(),
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn change_interval(&self) -> f64 {
        self.change_interval
    }

    pub fn is_static(&self) -> bool {
        self.frozen
    }

    pub fn segments(&self) -> &[SegmentTimes] {
        &self.segments
    }

    pub fn typical(&self, edge: usize) -> f64 {
        self.segments[edge].t_typical
    }

    pub fn worst_times(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.t_worst).collect()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::graph::parse_graph;

    fn single_edge(len: f64) -> NavGraph {
        parse_graph(&format!(
            "nodes 2\nexit 1\nnode 0 0 0 0\nnode 1 0 1 0\nedge 0 1 {len} passage\n"
        ))
        .unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bounds_follow_speeds() {
        let f = TraversalTimeField::new(&single_edge(6.7), Speeds::SHIP, TypicalInit::Sampled, rng(1))
            .unwrap();
        let s = f.segments()[0];
        assert!((s.t_worst - 100.0).abs() < 1e-9);
        assert!((s.t_nominal - 10.0).abs() < 1e-9);
        assert!((s.t_worst / s.t_nominal - 10.0).abs() < 1e-9);
        assert!(s.t_nominal <= s.t_typical && s.t_typical <= s.t_worst);
        assert_eq!(f.epoch(), 0);
    }

    #[test]
    fn rejects_bad_speeds() {
        let g = single_edge(1.0);
        for speeds in [
            Speeds { worst: 0.0, nominal: 1.0 },
            Speeds { worst: 0.1, nominal: -1.0 },
            Speeds { worst: 1.0, nominal: 0.5 },
        ] {
            assert!(TraversalTimeField::new(&g, speeds, TypicalInit::Sampled, rng(0)).is_err());
        }
    }

    #[test]
    fn init_draws_are_uniform() {
        let g = single_edge(6.7);
        let n = 10_000;
        let mut sum = 0.0;
        for seed in 0..n {
            let f = TraversalTimeField::new(&g, Speeds::SHIP, TypicalInit::Sampled, rng(seed))
                .unwrap();
            let t = f.typical(0);
            assert!((10.0 - 1e-9..=100.0 + 1e-9).contains(&t));
            sum += t;
        }
        let mean = sum / n as f64;
        assert!((mean - 55.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn resample_advances_epoch_and_keeps_bounds() {
        let g = single_edge(3.0);
        let mut f =
            TraversalTimeField::new(&g, Speeds::SHIP, TypicalInit::Sampled, rng(3)).unwrap();
        let before = f.segments()[0];
        for k in 1..=50 {
            f.resample();
            assert_eq!(f.epoch(), k);
            let s = f.segments()[0];
            assert_eq!((s.t_worst, s.t_nominal), (before.t_worst, before.t_nominal));
            assert!(s.t_nominal <= s.t_typical && s.t_typical <= s.t_worst);
        }
    }

    #[test]
    fn degenerate_interval_is_unchanged() {
        let g = single_edge(2.0);
        let mut f =
            TraversalTimeField::new(&g, Speeds { worst: 0.5, nominal: 0.5 }, TypicalInit::Sampled, rng(3))
                .unwrap();
        f.resample();
        assert_eq!(f.typical(0), 4.0);
    }

    #[test]
    fn same_seed_same_resample() {
        let g = single_edge(5.0);
        let mut a = TraversalTimeField::new(&g, Speeds::SHIP, TypicalInit::Sampled, rng(8)).unwrap();
        let mut b = a.clone();
        a.resample();
        b.resample();
        assert_eq!(a.freeze_snapshot(), b.freeze_snapshot());
    }

    #[test]
    fn snapshots_are_immutable_and_tagged() {
        let g = single_edge(5.0);
        let mut f = TraversalTimeField::new(&g, Speeds::SHIP, TypicalInit::Sampled, rng(2)).unwrap();
        f.resample();
        f.resample();
        let snap = f.freeze_snapshot();
        assert_eq!(snap.epoch(), 2);
        assert_eq!(snap, f.freeze_snapshot());
        let value = snap.typical()[0];
        f.resample();
        assert_eq!(snap.typical()[0], value);
        assert_eq!(snap.epoch(), 2);
    }

    #[test]
    fn static_field_never_changes() {
        let g = single_edge(5.0);
        let mut f = TraversalTimeField::new(&g, Speeds::SHIP, TypicalInit::Sampled, rng(2))
            .unwrap()
            .with_static(true);
        let v = f.typical(0);
        for _ in 0..10 {
            f.resample();
            assert_eq!(f.typical(0), v);
        }
        assert_eq!(f.epoch(), 10);
    }

    fn lag_one_correlation(persistence: f64) -> f64 {
        let g = single_edge(6.7);
        let mut f = TraversalTimeField::new(&g, Speeds::SHIP, TypicalInit::Sampled, rng(77))
            .unwrap()
            .with_persistence(persistence);
        let mut xs = Vec::with_capacity(20_001);
        xs.push(f.typical(0));
        for _ in 0..20_000 {
            f.resample();
            xs.push(f.typical(0));
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        cov / var
    }

    #[test]
    fn independent_epochs_have_no_serial_correlation() {
        let r = lag_one_correlation(0.0);
        assert!(r.abs() < 0.03, "lag-1 correlation {r}");
    }

    #[test]
    fn persistence_sets_lag_one_correlation() {
        let r = lag_one_correlation(0.5);
        assert!((r - 0.5).abs() < 0.03, "lag-1 correlation {r}");
    }
}
