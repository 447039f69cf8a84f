//! Lossy, jittered single-photon detection and time-tag streams.
//!
//! Pair emission is a Poisson process. Independent per-photon losses thin it into
//! three independent Poisson processes (both photons detected, signal only, idler
//! only), which are drawn directly so the cost scales with detected events rather
//! than emitted pairs.

mod histogram;

pub use histogram::{car, car_report, coincidence_histogram, window_coincidences, CarReport, CoincidenceHistogram};

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::diag::{Checker, Validate};
use crate::error::{Error, Result};
use crate::sampling::{rng_from_seed, SimRng};
use crate::timebin::{AmziRouter, RoutedPhoton};
use crate::{db_to_transmission, PS_PER_S};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct DetectorParams {
    /// Transmission plus detection loss for the channel.
    pub channel_loss_db: f64,
    pub dark_rate: f64,
    pub jitter_sigma_ps: f64,
    pub dead_time_ns: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            channel_loss_db: 28.0,
            dark_rate: 100.0,
            jitter_sigma_ps: 30.0,
            dead_time_ns: 40.0,
        }
    }
}

impl DetectorParams {
    pub fn efficiency(&self) -> f64 {
        db_to_transmission(self.channel_loss_db)
    }

    /// Adds a flat background (Raman, stray light) to the dark rate.
    pub fn with_background(&self, cps: f64) -> DetectorParams {
        DetectorParams {
            dark_rate: self.dark_rate + cps,
            ..*self
        }
    }

    fn dead_time_ps(&self) -> u64 {
        libm::round(self.dead_time_ns * 1e3) as u64
    }
}

impl Validate for DetectorParams {
    fn diagnose(&self, c: &mut Checker<'_>) {
        if self.channel_loss_db.is_nan() || self.channel_loss_db < 0.0 {
            c.error("channel_loss_db", "must be >= 0");
        }
        c.require("dark_rate", self.dark_rate, self.dark_rate >= 0.0, ">= 0");
        c.require(
            "jitter_sigma_ps",
            self.jitter_sigma_ps,
            self.jitter_sigma_ps >= 0.0,
            ">= 0",
        );
        c.require("dead_time_ns", self.dead_time_ns, self.dead_time_ns >= 0.0, ">= 0");
    }
}

/// Sorted detection times of one detector, in ps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    pub channel_id: String,
    duration_ps: u64,
    tags: Vec<u64>,
}

impl TimeTagStream {
    /// Checks that tags are sorted and inside `[0, duration]`.
    pub fn new(channel_id: impl Into<String>, duration_s: f64, tags: Vec<u64>) -> Result<Self> {
        let duration_ps = duration_to_ps(duration_s)?;
        if let Some(i) = tags.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::invalid("tags", alloc::format!("not sorted at index {}", i + 1)));
        }
        if tags.last().is_some_and(|&t| t > duration_ps) {
            return Err(Error::invalid("tags", "tag beyond the stream duration"));
        }
        Ok(TimeTagStream {
            channel_id: channel_id.into(),
            duration_ps,
            tags,
        })
    }

    pub fn tags(&self) -> &[u64] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn rate(&self) -> f64 {
        self.tags.len() as f64 / self.duration_s()
    }

    /// Smallest gap between consecutive tags.
    pub fn min_separation_ps(&self) -> Option<u64> {
        self.tags.windows(2).map(|w| w[1] - w[0]).min()
    }
}

fn duration_to_ps(duration_s: f64) -> Result<u64> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid("duration_s", "must be finite and > 0"));
    }
    let ps = libm::round(duration_s * PS_PER_S);
    if ps >= u64::MAX as f64 {
        return Err(Error::invalid("duration_s", "too long for picosecond tags"));
    }
    Ok(ps as u64)
}

fn poisson_count(rng: &mut SimRng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d: Poisson<f64> = Poisson::new(mean).expect("finite positive mean");
    d.sample(rng) as u64
}

/// Accumulates raw detection times for one detector before finalising.
struct Channel {
    id: String,
    raw: Vec<f64>,
    jitter_ps: f64,
    dead_time_ps: u64,
}

impl Channel {
    fn new(id: &str, det: &DetectorParams, capacity: usize) -> Self {
        Channel {
            id: id.into(),
            raw: Vec::with_capacity(capacity),
            jitter_ps: det.jitter_sigma_ps,
            dead_time_ps: det.dead_time_ps(),
        }
    }

    fn detect(&mut self, rng: &mut SimRng, t_ps: f64) {
        let z: f64 = StandardNormal.sample(rng);
        self.raw.push(t_ps + self.jitter_ps * z);
    }

    /// Darks arrive at uniform times and bypass the optics.
    fn add_darks(&mut self, rng: &mut SimRng, rate: f64, duration_ps: u64) {
        let span = duration_ps as f64;
        let n = poisson_count(rng, rate * span / PS_PER_S);
        self.raw.extend((0..n).map(|_| rng.random::<f64>() * span));
    }

    /// Rounds to 1 ps, drops tags outside the acquisition, sorts, then
    /// removes clicks that fall inside the dead time of the previous kept click.
    fn finish(self, duration_ps: u64) -> TimeTagStream {
        let end = duration_ps as f64;
        let mut tags: Vec<u64> = self
            .raw
            .into_iter()
            .map(libm::round)
            .filter(|&t| (0.0..=end).contains(&t))
            .map(|t| t as u64)
            .collect();
        tags.sort_unstable();
        if self.dead_time_ps > 0 {
            let mut last: Option<u64> = None;
            tags.retain(|&t| match last {
                Some(l) if t - l < self.dead_time_ps => false,
                _ => {
                    last = Some(t);
                    true
                }
            });
        }
        TimeTagStream {
            channel_id: self.id,
            duration_ps,
            tags,
        }
    }
}

/// Expected numbers of (both, signal-only, idler-only) detected pair photons.
fn thinned_means(pair_rate: f64, eta_s: f64, eta_i: f64, duration_s: f64) -> (f64, f64, f64) {
    let n = pair_rate * duration_s;
    (
        n * eta_s * eta_i,
        n * eta_s * (1.0 - eta_i),
        n * (1.0 - eta_s) * eta_i,
    )
}

fn check_inputs(pair_rate: f64, det_s: &DetectorParams, det_i: &DetectorParams, duration_s: f64) -> Result<u64> {
    if !(pair_rate >= 0.0 && pair_rate.is_finite()) {
        return Err(Error::invalid("pair_rate", "must be finite and >= 0"));
    }
    det_s.diagnostics_to_result("signal")?;
    det_i.diagnostics_to_result("idler")?;
    duration_to_ps(duration_s)
}

impl DetectorParams {
    fn diagnostics_to_result(&self, prefix: &str) -> Result<()> {
        let mut out = Vec::new();
        self.diagnose(&mut Checker::new(prefix, &mut out));
        match out.into_iter().next() {
            Some(d) => Err(Error::InvalidParameter {
                field: d.path,
                reason: d.message,
            }),
            None => Ok(()),
        }
    }
}

/// Signal and idler streams for pairs emitted at `pair_rate`, without an AMZI.
pub fn simulate_streams(
    pair_rate: f64,
    det_s: &DetectorParams,
    det_i: &DetectorParams,
    duration_s: f64,
    seed: u64,
) -> Result<(TimeTagStream, TimeTagStream)> {
    let duration_ps = check_inputs(pair_rate, det_s, det_i, duration_s)?;
    let span = duration_ps as f64;
    let mut rng = rng_from_seed(seed);
    let (both, s_only, i_only) = thinned_means(pair_rate, det_s.efficiency(), det_i.efficiency(), duration_s);
    let cap = |m: f64| (m + det_s.dark_rate.max(det_i.dark_rate) * duration_s) as usize;
    let mut sig = Channel::new("signal", det_s, cap(both + s_only));
    let mut idl = Channel::new("idler", det_i, cap(both + i_only));

    for _ in 0..poisson_count(&mut rng, both) {
        let t = rng.random::<f64>() * span;
        sig.detect(&mut rng, t);
        idl.detect(&mut rng, t);
    }
    for _ in 0..poisson_count(&mut rng, s_only) {
        let t = rng.random::<f64>() * span;
        sig.detect(&mut rng, t);
    }
    for _ in 0..poisson_count(&mut rng, i_only) {
        let t = rng.random::<f64>() * span;
        idl.detect(&mut rng, t);
    }
    sig.add_darks(&mut rng, det_s.dark_rate, duration_ps);
    idl.add_darks(&mut rng, det_i.dark_rate, duration_ps);
    Ok((sig.finish(duration_ps), idl.finish(duration_ps)))
}

/// Streams at the four X-basis outputs: `signal[p]` is port X`p`, `idler[p]` is X'`p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedStreams {
    pub signal: [TimeTagStream; 2],
    pub idler: [TimeTagStream; 2],
}

/// Like [`simulate_streams`] with both photons passing their AMZI first. Each of the
/// four output ports has its own detector with the channel's parameters.
pub fn simulate_routed_streams(
    pair_rate: f64,
    det_s: &DetectorParams,
    det_i: &DetectorParams,
    duration_s: f64,
    seed: u64,
    router: &AmziRouter,
) -> Result<RoutedStreams> {
    let duration_ps = check_inputs(pair_rate, det_s, det_i, duration_s)?;
    let span = duration_ps as f64;
    let mut rng = rng_from_seed(seed);
    let eta_amzi = router.transmission();
    let (both, s_only, i_only) = thinned_means(
        pair_rate,
        det_s.efficiency() * eta_amzi,
        det_i.efficiency() * eta_amzi,
        duration_s,
    );
    let cap_s = ((both + s_only) / 2.0 + det_s.dark_rate * duration_s) as usize;
    let cap_i = ((both + i_only) / 2.0 + det_i.dark_rate * duration_s) as usize;
    let mut sig = [Channel::new("X0", det_s, cap_s), Channel::new("X1", det_s, cap_s)];
    let mut idl = [Channel::new("X'0", det_i, cap_i), Channel::new("X'1", det_i, cap_i)];

    let detect = |rng: &mut SimRng, ch: &mut [Channel; 2], t: f64, ph: RoutedPhoton| {
        ch[ph.port.index()].detect(rng, t + ph.delay_ps);
    };
    for _ in 0..poisson_count(&mut rng, both) {
        let t = rng.random::<f64>() * span;
        let pair = router.assign_pair(&mut rng);
        detect(&mut rng, &mut sig, t, pair.signal);
        detect(&mut rng, &mut idl, t, pair.idler);
    }
    for _ in 0..poisson_count(&mut rng, s_only) {
        let t = rng.random::<f64>() * span;
        let ph = router.assign_single(&mut rng);
        detect(&mut rng, &mut sig, t, ph);
    }
    for _ in 0..poisson_count(&mut rng, i_only) {
        let t = rng.random::<f64>() * span;
        let ph = router.assign_single(&mut rng);
        detect(&mut rng, &mut idl, t, ph);
    }
    for ch in sig.iter_mut() {
        ch.add_darks(&mut rng, det_s.dark_rate, duration_ps);
    }
    for ch in idl.iter_mut() {
        ch.add_darks(&mut rng, det_i.dark_rate, duration_ps);
    }
    let [s0, s1] = sig;
    let [i0, i1] = idl;
    Ok(RoutedStreams {
        signal: [s0.finish(duration_ps), s1.finish(duration_ps)],
        idler: [i0.finish(duration_ps), i1.finish(duration_ps)],
    })
}
