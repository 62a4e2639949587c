use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::config::{LoadPhase, Pacing};
use crate::model::Region;

/// Event time of the first phase's start.
pub const LOAD_EPOCH_NS: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadEvent {
    pub phase: usize,
    pub region: Region,
    pub content_id: String,
    /// Event time, ns.
    pub t: u64,
}

/// Request stream for `phases`, a pure function of its arguments. Phases are
/// laid end to end starting at [`LOAD_EPOCH_NS`].
pub fn generate_load(phases: &[LoadPhase], seed: u64, pacing: Pacing) -> Vec<LoadEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut start = LOAD_EPOCH_NS as f64;
    for (index, phase) in phases.iter().enumerate() {
        let span_ns = phase.duration_s * 1e9;
        let ids: Vec<&String> = phase.content_mix.keys().collect();
        let weights: Vec<f64> = phase.content_mix.values().copied().collect();
        let picker = WeightedIndex::new(&weights).ok();
        if let (Some(picker), true) = (picker, phase.rate > 0.0) {
            let region = Region::id(&phase.region);
            let offsets: Vec<f64> = match pacing {
                Pacing::Deterministic => {
                    let n = (phase.rate * phase.duration_s).round() as u64;
                    (0..n).map(|i| i as f64 * 1e9 / phase.rate).collect()
                }
                Pacing::Stochastic => {
                    let exp = Exp::new(phase.rate).expect("rate > 0");
                    let mut v = Vec::new();
                    let mut at = exp.sample(&mut rng) * 1e9;
                    while at < span_ns {
                        v.push(at);
                        at += exp.sample(&mut rng) * 1e9;
                    }
                    v
                }
            };
            for off in offsets {
                out.push(LoadEvent {
                    phase: index,
                    region: region.clone(),
                    content_id: ids[picker.sample(&mut rng)].clone(),
                    t: (start + off).round() as u64,
                });
            }
        }
        start += span_ns;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn phase(region: &str, rate: f64, duration_s: f64) -> LoadPhase {
        let mut mix = BTreeMap::new();
        mix.insert("c1".to_string(), 2.0);
        mix.insert("c2".to_string(), 1.0);
        LoadPhase {
            name: "p".into(),
            region: region.into(),
            rate,
            duration_s,
            content_mix: mix,
        }
    }

    #[test]
    fn deterministic_counts_and_replay() {
        let p = [phase("quebec", 60.0, 10.0)];
        let a = generate_load(&p, 7, Pacing::Deterministic);
        assert_eq!(a.len(), 600);
        assert_eq!(a, generate_load(&p, 7, Pacing::Deterministic));
        assert_ne!(
            a.iter().map(|e| &e.content_id).collect::<Vec<_>>(),
            generate_load(&p, 8, Pacing::Deterministic)
                .iter()
                .map(|e| &e.content_id)
                .collect::<Vec<_>>()
        );
        assert!(a.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn mixed_regions_count_oracle() {
        let p = [phase("bc", 5.0, 4.0), phase("quebec", 30.0, 2.0), phase("bc", 1.0, 3.0)];
        let ev = generate_load(&p, 1, Pacing::Deterministic);
        let count = |r: &str| ev.iter().filter(|e| e.region.id == r).count();
        assert_eq!(count("bc"), 20 + 3);
        assert_eq!(count("quebec"), 60);
        // phases do not overlap in time
        assert!(ev.iter().all(|e| {
            let lo = [0.0, 4.0, 6.0][e.phase];
            e.t >= LOAD_EPOCH_NS + (lo * 1e9) as u64
        }));
    }

    #[test]
    fn zero_rate_is_empty() {
        assert!(generate_load(&[phase("q", 0.0, 5.0)], 1, Pacing::Deterministic).is_empty());
    }

    #[test]
    fn stochastic_is_seeded() {
        let p = [phase("q", 100.0, 5.0)];
        let a = generate_load(&p, 3, Pacing::Stochastic);
        assert_eq!(a, generate_load(&p, 3, Pacing::Stochastic));
        assert!(a.len() > 350 && a.len() < 650);
    }
}
