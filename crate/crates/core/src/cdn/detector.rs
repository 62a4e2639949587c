use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::{ContentCount, FlashCrowdTrigger, Region, RequestEvent};

const NS: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub window_s: f64,
    /// Requests per second per region.
    pub threshold: f64,
    /// How long a region stays suppressed after a failed order.
    pub failure_backoff_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_s: 10.0,
            threshold: 50.0,
            failure_backoff_s: 30.0,
        }
    }
}

impl DetectorConfig {
    pub fn window_ns(&self) -> u64 {
        (self.window_s * NS as f64).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suppression {
    InFlight,
    Covered,
    Backoff,
}

#[derive(Default)]
struct RegionWindow {
    events: VecDeque<(u64, String)>,
}

/// Sliding-window flash-crowd detector over event time. A region fires when
/// the count in `(t - W, t]` divided by `W` reaches the threshold, unless it
/// is suppressed.
pub struct FlashCrowdDetector {
    config: DetectorConfig,
    windows: HashMap<Region, RegionWindow>,
    in_flight: HashSet<Region>,
    covered: HashSet<Region>,
    backoff_until: HashMap<Region, u64>,
}

impl FlashCrowdDetector {
    pub fn new(config: DetectorConfig) -> Self {
        FlashCrowdDetector {
            config,
            windows: HashMap::new(),
            in_flight: HashSet::new(),
            covered: HashSet::new(),
            backoff_until: HashMap::new(),
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Current rate of `region` as of time `t`, requests per second.
    pub fn rate(&mut self, region: &Region, t: u64) -> f64 {
        let w = self.config.window_ns();
        match self.windows.get_mut(region) {
            Some(win) => {
                prune(win, t, w);
                win.events.len() as f64 / self.config.window_s
            }
            None => 0.0,
        }
    }

    pub fn suppression(&self, region: &Region, t: u64) -> Option<Suppression> {
        if self.in_flight.contains(region) {
            Some(Suppression::InFlight)
        } else if self.covered.contains(region) {
            Some(Suppression::Covered)
        } else if self.backoff_until.get(region).is_some_and(|&until| t < until) {
            Some(Suppression::Backoff)
        } else {
            None
        }
    }

    /// Feeds one event; returns a trigger when the region crosses the
    /// threshold and is not suppressed. The caller is expected to mark the
    /// region in flight when it acts on the trigger.
    pub fn observe(&mut self, event: &RequestEvent) -> Option<FlashCrowdTrigger> {
        let w = self.config.window_ns();
        let win = self.windows.entry(event.region.clone()).or_default();
        let pos = win
            .events
            .iter()
            .rposition(|(t, _)| *t <= event.t)
            .map_or(0, |p| p + 1);
        win.events.insert(pos, (event.t, event.content_id.clone()));
        let now = win.events.back().map_or(event.t, |(t, _)| *t);
        prune(win, now, w);
        let rate = win.events.len() as f64 / self.config.window_s;
        if rate < self.config.threshold || self.suppression(&event.region, now).is_some() {
            return None;
        }
        let win = &self.windows[&event.region];
        Some(FlashCrowdTrigger {
            region: event.region.clone(),
            top_contents: rank(win.events.iter().map(|(_, c)| c.as_str())),
            window: (now.saturating_sub(w), now),
            rate,
        })
    }

    pub fn mark_in_flight(&mut self, region: &Region) {
        self.in_flight.insert(region.clone());
    }

    /// Ends an order. Success covers the region; failure suppresses it until
    /// `t + failure_backoff`.
    pub fn release(&mut self, region: &Region, success: bool, t: u64) {
        self.in_flight.remove(region);
        if success {
            self.covered.insert(region.clone());
            self.backoff_until.remove(region);
        } else {
            let backoff = (self.config.failure_backoff_s * NS as f64).round() as u64;
            self.backoff_until.insert(region.clone(), t.saturating_add(backoff));
        }
    }

    pub fn uncover(&mut self, region: &Region) {
        self.covered.remove(region);
    }
}

fn prune(win: &mut RegionWindow, now: u64, w: u64) {
    let floor = now.saturating_sub(w);
    while win.events.front().is_some_and(|(t, _)| *t <= floor && now >= w) {
        win.events.pop_front();
    }
}

/// Counts sorted by count descending, then content id ascending.
pub fn rank<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<ContentCount> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for id in ids {
        *counts.entry(id).or_default() += 1;
    }
    let mut out: Vec<ContentCount> = counts
        .into_iter()
        .map(|(id, n)| ContentCount {
            content_id: id.to_string(),
            request_count: n,
        })
        .collect();
    out.sort_by(|a, b| {
        b.request_count
            .cmp(&a.request_count)
            .then_with(|| a.content_id.cmp(&b.content_id))
    });
    out
}
