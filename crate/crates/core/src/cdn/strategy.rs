//! Pluggable content placement and request redirection algorithms.

use std::collections::{BTreeMap, BTreeSet};

use super::detector::rank;
use crate::model::{Region, SurrogateRegistration};

/// Picks the contents a new surrogate in `region` should hold.
pub trait PlacementStrategy: Send + Sync {
    /// `history` maps content id to request count in the region.
    fn place(&self, region: &Region, history: &BTreeMap<String, u64>) -> Vec<String>;
}

/// Top-k by request count, ties by content id; an empty history yields the
/// default content set.
pub struct TopKPlacement {
    pub k: usize,
    pub default_contents: Vec<String>,
}

impl PlacementStrategy for TopKPlacement {
    fn place(&self, _region: &Region, history: &BTreeMap<String, u64>) -> Vec<String> {
        if history.is_empty() {
            return self.default_contents.clone();
        }
        let expanded = history
            .iter()
            .flat_map(|(id, n)| std::iter::repeat_n(id.as_str(), *n as usize));
        rank(expanded)
            .into_iter()
            .take(self.k)
            .map(|c| c.content_id)
            .collect()
    }
}

/// A ready surrogate as seen by the redirection algorithm.
pub struct Candidate<'a> {
    pub registration: &'a SurrogateRegistration,
    pub holdings: &'a BTreeSet<String>,
    pub active_sessions: usize,
}

pub trait RedirectStrategy: Send + Sync {
    /// Index into `candidates` of the chosen surrogate, or None for origin.
    fn choose(&self, region: &Region, content_id: &str, candidates: &[Candidate<'_>]) -> Option<usize>;
}

/// Region match first, then fewest active sessions, then lowest id.
pub struct NearestLeastLoaded;

impl RedirectStrategy for NearestLeastLoaded {
    fn choose(&self, region: &Region, content_id: &str, candidates: &[Candidate<'_>]) -> Option<usize> {
        candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.registration.ready && c.holdings.contains(content_id))
            .min_by(|(_, a), (_, b)| {
                let key = |c: &Candidate<'_>| (c.registration.region != *region, c.active_sessions);
                key(a)
                    .cmp(&key(b))
                    .then_with(|| a.registration.surrogate_id.cmp(&b.registration.surrogate_id))
            })
            .map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AccessInfo;

    #[test]
    fn top_k_counts() {
        let p = TopKPlacement {
            k: 1,
            default_contents: vec!["sample-1".into()],
        };
        let q = Region::id("quebec");
        let mut h = BTreeMap::new();
        h.insert("c1".to_string(), 5);
        h.insert("c2".to_string(), 3);
        assert_eq!(p.place(&q, &h), vec!["c1"]);
        let all = TopKPlacement { k: 10, ..p };
        assert_eq!(all.place(&q, &h), vec!["c1", "c2"]);
        assert_eq!(all.place(&q, &BTreeMap::new()), vec!["sample-1"]);
    }

    fn reg(id: &str, region: &str, ready: bool) -> SurrogateRegistration {
        SurrogateRegistration {
            surrogate_id: id.into(),
            region: Region::id(region),
            control_access: AccessInfo::new("http://127.0.0.1:1/"),
            data_access: AccessInfo::new("http://127.0.0.1:2/"),
            ready,
        }
    }

    #[test]
    fn prefers_region_then_load_then_id() {
        let held: BTreeSet<String> = ["c1".to_string()].into();
        let (a, b, c) = (reg("s-b", "bc", true), reg("s-a", "quebec", true), reg("s-0", "quebec", false));
        let cands = [
            Candidate { registration: &a, holdings: &held, active_sessions: 0 },
            Candidate { registration: &b, holdings: &held, active_sessions: 9 },
            Candidate { registration: &c, holdings: &held, active_sessions: 0 },
        ];
        let s = NearestLeastLoaded;
        assert_eq!(s.choose(&Region::id("quebec"), "c1", &cands), Some(1));
        assert_eq!(s.choose(&Region::id("bc"), "c1", &cands), Some(0));
        assert_eq!(s.choose(&Region::id("bc"), "c9", &cands), None);
    }
}
