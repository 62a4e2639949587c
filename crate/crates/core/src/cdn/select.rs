use crate::error::{Error, ErrorCode, Result};
use crate::model::{PoDDescriptor, Region};

pub const REGION_WEIGHT: f64 = 10.0;

pub fn score(pod: &PoDDescriptor, target: &Region) -> f64 {
    let region = if pod.region == *target { REGION_WEIGHT } else { 0.0 };
    region + pod.free_ratio()
}

/// Highest-scoring PoD with at least `required_slots` free, ties broken by
/// the smallest pod id.
pub fn select_pod(
    candidates: &[PoDDescriptor],
    target: &Region,
    required_slots: u32,
) -> Result<PoDDescriptor> {
    candidates
        .iter()
        .filter(|p| p.capacity_free >= required_slots)
        .max_by(|a, b| {
            score(a, target)
                .total_cmp(&score(b, target))
                .then_with(|| b.pod_id.cmp(&a.pod_id))
        })
        .cloned()
        .ok_or_else(|| {
            Error::new(
                ErrorCode::NoEligiblePod,
                format!(
                    "no PoD with {required_slots} free slots among {} candidates",
                    candidates.len()
                ),
            )
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AccessInfo;
    use proptest::prelude::*;

    fn pod(id: &str, region: &str, total: u32, free: u32) -> PoDDescriptor {
        PoDDescriptor {
            pod_id: id.into(),
            region: Region::id(region),
            capacity_total: total,
            capacity_free: free,
            access: AccessInfo::new("http://127.0.0.1:1/"),
        }
    }

    #[test]
    fn montreal_for_quebec() {
        let c = [pod("pod-van-1", "bc", 4, 4), pod("pod-mtl-1", "quebec", 4, 4)];
        assert_eq!(select_pod(&c, &Region::id("quebec"), 2).unwrap().pod_id, "pod-mtl-1");
    }

    #[test]
    fn tie_breaks_on_id() {
        let c = [pod("pod-b", "q", 4, 2), pod("pod-a", "q", 4, 2)];
        assert_eq!(select_pod(&c, &Region::id("q"), 1).unwrap().pod_id, "pod-a");
        let one = [pod("x", "other", 2, 2)];
        assert_eq!(select_pod(&one, &Region::id("q"), 1).unwrap().pod_id, "x");
    }

    #[test]
    fn none_eligible() {
        let c = [pod("a", "q", 4, 1)];
        assert_eq!(
            select_pod(&c, &Region::id("q"), 2).unwrap_err().code(),
            ErrorCode::NoEligiblePod
        );
        assert!(select_pod(&[], &Region::id("q"), 0).is_err());
    }

    fn arb_pods() -> impl Strategy<Value = Vec<PoDDescriptor>> {
        prop::collection::vec((0u8..30, 0u8..3, 1u32..8, 0u32..8), 1..=20).prop_map(|v| {
            v.into_iter()
                .map(|(id, r, total, free)| {
                    pod(&format!("pod-{id:02}"), ["a", "b", "c"][r as usize], total, free.min(total))
                })
                .collect()
        })
    }

    /// Exhaustive argmax with explicit tie-break, written independently.
    fn oracle(c: &[PoDDescriptor], target: &Region, slots: u32) -> Option<String> {
        let mut best: Option<(f64, &str)> = None;
        for p in c.iter().filter(|p| p.capacity_free >= slots) {
            let s = if p.region.id == target.id { 10.0 } else { 0.0 }
                + p.capacity_free as f64 / p.capacity_total as f64;
            best = match best {
                None => Some((s, &p.pod_id)),
                Some((bs, bid)) if s > bs || (s == bs && p.pod_id.as_str() < bid) => {
                    Some((s, &p.pod_id))
                }
                keep => keep,
            };
        }
        best.map(|(_, id)| id.to_string())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn equals_brute_force(c in arb_pods(), r in 0u8..3, slots in 0u32..4) {
            let target = Region::id(["a", "b", "c"][r as usize]);
            let got = select_pod(&c, &target, slots).ok().map(|p| p.pod_id);
            prop_assert_eq!(got, oracle(&c, &target, slots));
        }

        #[test]
        fn monotone_in_own_capacity(c in arb_pods(), r in 0u8..3) {
            let target = Region::id(["a", "b", "c"][r as usize]);
            if let Ok(sel) = select_pod(&c, &target, 1) {
                let mut more = c.clone();
                for p in more.iter_mut().filter(|p| p.pod_id == sel.pod_id) {
                    p.capacity_free = p.capacity_total;
                }
                prop_assert_eq!(select_pod(&more, &target, 1).unwrap().pod_id, sel.pod_id);
            }
        }
    }
}
