//! Complete description of one simulated experiment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::detection::DetectorParams;
use crate::diag::{Checker, Diagnostic, Validate};
use crate::pairgen::{PumpConfig, PumpPorts, SourceModel};
use crate::resonator::{resonance_comb, RingParams};
use crate::timebin::{AmziConfig, TimeBinState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ScenarioKind {
    /// Drop-port spectrum of the comb.
    Spectrum,
    /// Direct coincidence histogram and CAR.
    Car,
    /// X-basis fringe sweep over PLC temperature.
    Visibility,
    /// Drop spectrum around the pump under single- and double-port pumping.
    PumpFringe,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Spectrum => "spectrum",
            ScenarioKind::Car => "car",
            ScenarioKind::Visibility => "visibility",
            ScenarioKind::PumpFringe => "pump-fringe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Detectors {
    pub signal: DetectorParams,
    pub idler: DetectorParams,
}

/// One measured channel pair. Unset fields fall back to the scenario-wide values.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ChannelSpec {
    pub order: u32,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub brightness: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub visibility_source: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub duration_s: Option<f64>,
    /// Reference (X0-X'0, X0-X'1) visibilities `[value, error]` for `--check`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub target_visibilities: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SweepSpec {
    pub start_c: f64,
    pub stop_c: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn temperatures(&self) -> Vec<f64> {
        crate::resonator::linspace(self.start_c, self.stop_c, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct HistogramSpec {
    pub bin_width_ps: u64,
    pub span_ps: u64,
    pub peak_window_ps: u64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            bin_width_ps: 64,
            span_ps: 25_000,
            peak_window_ps: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SpectrumSpec {
    /// Resonances on each side of the pump.
    pub n_side: u32,
    pub points: usize,
    /// Grid half-width around the pump resonance, in linewidths; `None` spans the comb.
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub half_width_fwhm: Option<f64>,
    /// Pump-phase realisations per spectrum.
    pub phase_samples: usize,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec {
            n_side: 3,
            points: 4001,
            half_width_fwhm: None,
            phase_samples: 10,
        }
    }
}

/// Thresholds evaluated by `--check`. Unset entries are not checked.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct CheckSpec {
    pub min_car: Option<f64>,
    /// Largest relative deviation of the measured accidental floor from `S1·S2·bw·T`.
    pub accidental_tolerance: Option<f64>,
    pub require_entangled: bool,
    pub require_antiphase: bool,
    /// Expected double-to-single rate ratio, met within three standard errors.
    pub rate_ratio: Option<f64>,
    pub require_fringe_contrast: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    /// Acquisition time of one repeat.
    #[cfg_attr(feature = "serde", serde(default = "default_duration"))]
    pub duration_s: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_repeats"))]
    pub repeats: u32,
    #[cfg_attr(feature = "serde", serde(default = "default_ring_temperature"))]
    pub ring_temperature_c: f64,
    /// Drop ports measured; two needs double-port pumping.
    #[cfg_attr(feature = "serde", serde(default = "default_drop_ports"))]
    pub drop_ports: u32,
    /// Also run the same sweep under single-port pumping and report the rate ratio.
    #[cfg_attr(feature = "serde", serde(default))]
    pub compare_single_port: bool,
    /// φ samples for the double-port enhancement.
    #[cfg_attr(feature = "serde", serde(default = "default_enhancement_samples"))]
    pub enhancement_samples: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub ring: RingParams,
    #[cfg_attr(feature = "serde", serde(default))]
    pub pump: PumpConfig,
    #[cfg_attr(feature = "serde", serde(default))]
    pub source: SourceModel,
    #[cfg_attr(feature = "serde", serde(default))]
    pub state: TimeBinState,
    #[cfg_attr(feature = "serde", serde(default))]
    pub amzi: AmziConfig,
    #[cfg_attr(feature = "serde", serde(default))]
    pub detectors: Detectors,
    #[cfg_attr(feature = "serde", serde(default))]
    pub channels: Vec<ChannelSpec>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub sweep: Option<SweepSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub histogram: HistogramSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub spectrum: SpectrumSpec,
    #[cfg_attr(feature = "serde", serde(default))]
    pub check: CheckSpec,
}

#[cfg(feature = "serde")]
fn default_duration() -> f64 {
    60.0
}
#[cfg(feature = "serde")]
fn default_repeats() -> u32 {
    1
}
#[cfg(feature = "serde")]
fn default_ring_temperature() -> f64 {
    RingParams::default().anchor_temperature_c
}
#[cfg(feature = "serde")]
fn default_drop_ports() -> u32 {
    1
}
#[cfg(feature = "serde")]
fn default_enhancement_samples() -> usize {
    100_000
}

impl Scenario {
    /// A minimal scenario of the given kind with every other field at its default.
    pub fn new(name: &str, kind: ScenarioKind, seed: u64) -> Self {
        Scenario {
            name: name.into(),
            kind,
            seed,
            duration_s: 60.0,
            repeats: 1,
            ring_temperature_c: RingParams::default().anchor_temperature_c,
            drop_ports: 1,
            compare_single_port: false,
            enhancement_samples: 100_000,
            ring: RingParams::default(),
            pump: PumpConfig::default(),
            source: SourceModel::default(),
            state: TimeBinState::default(),
            amzi: AmziConfig::default(),
            detectors: Detectors::default(),
            channels: Vec::new(),
            sweep: None,
            histogram: HistogramSpec::default(),
            spectrum: SpectrumSpec::default(),
            check: CheckSpec::default(),
        }
    }

    pub fn max_order(&self) -> u32 {
        self.channels.iter().map(|c| c.order).max().unwrap_or(0)
    }

    /// Side peaks needed for the comb: enough for every channel and the spectrum.
    pub fn comb_side_count(&self) -> u32 {
        let spectrum = match self.kind {
            ScenarioKind::Spectrum | ScenarioKind::PumpFringe => self.spectrum.n_side,
            _ => 1,
        };
        self.max_order().max(spectrum).max(1)
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

fn positive(c: &mut Checker<'_>, field: &str, v: f64) {
    c.require(field, v, v > 0.0, "> 0");
}

impl Validate for Scenario {
    fn diagnose(&self, c: &mut Checker<'_>) {
        if self.name.trim().is_empty() {
            c.error("name", "must not be empty");
        }
        positive(c, "duration_s", self.duration_s);
        if self.repeats == 0 {
            c.error("repeats", "must be at least 1");
        }
        c.require("ring_temperature_c", self.ring_temperature_c, true, "");
        self.ring.diagnose(&mut c.nested("ring"));
        self.pump.diagnose(&mut c.nested("pump"));
        self.source.diagnose(&mut c.nested("source"));
        self.state.diagnose(&mut c.nested("state"));
        self.amzi.diagnose(&mut c.nested("amzi"));
        self.detectors.signal.diagnose(&mut c.nested("detectors").nested("signal"));
        self.detectors.idler.diagnose(&mut c.nested("detectors").nested("idler"));

        if !(1..=2).contains(&self.drop_ports) {
            c.error("drop_ports", format!("must be 1 or 2, got {}", self.drop_ports));
        } else if self.drop_ports == 2 && self.pump.ports != PumpPorts::Double {
            c.error("drop_ports", "a second drop port needs double-port pumping");
        }
        if self.compare_single_port && self.pump.ports != PumpPorts::Double {
            c.error("compare_single_port", "only meaningful with double-port pumping");
        }
        if self.pump.ports == PumpPorts::Double && self.enhancement_samples == 0 {
            c.error("enhancement_samples", "must be at least 1");
        }

        let needs_channels = matches!(self.kind, ScenarioKind::Car | ScenarioKind::Visibility);
        if needs_channels && self.channels.is_empty() {
            c.error("channels", "at least one channel is required");
        }
        let mut seen = Vec::new();
        for (i, ch) in self.channels.iter().enumerate() {
            let mut cc = c.nested(&format!("channels[{i}]"));
            if ch.order == 0 {
                cc.error("order", "must be at least 1");
            } else if seen.contains(&ch.order) {
                cc.error("order", format!("order {} listed twice", ch.order));
            }
            seen.push(ch.order);
            if let Some(b) = ch.brightness {
                cc.require("brightness", b, b >= 0.0, ">= 0");
            }
            if let Some(v) = ch.visibility_source {
                cc.require("visibility_source", v, (0.0..=1.0).contains(&v), "in [0, 1]");
            }
            if let Some(d) = ch.duration_s {
                positive(&mut cc, "duration_s", d);
            }
            if let Some(t) = ch.target_visibilities {
                for (k, [v, e]) in t.iter().enumerate() {
                    cc.require(&format!("target_visibilities[{k}]"), *v, e.is_finite() && *e >= 0.0, "a finite [value, error >= 0]");
                }
            }
        }

        if self.kind == ScenarioKind::Visibility {
            match &self.sweep {
                None => c.error("sweep", "a visibility scenario needs a sweep"),
                Some(s) => {
                    let mut sc = c.nested("sweep");
                    sc.require("start_c", s.start_c, true, "");
                    sc.require("stop_c", s.stop_c, s.stop_c > s.start_c, "> start_c");
                    if s.points < 5 {
                        sc.error("points", format!("need at least 5 points for a fit, got {}", s.points));
                    }
                }
            }
        }

        let h = &self.histogram;
        let mut hc = c.nested("histogram");
        if h.bin_width_ps == 0 {
            hc.error("bin_width_ps", "must be > 0");
        } else if h.span_ps < 4 * h.bin_width_ps {
            hc.error("span_ps", "must cover at least four bins on each side");
        }
        if h.peak_window_ps == 0 {
            hc.error("peak_window_ps", "must be > 0");
        }

        let sp = &self.spectrum;
        let mut spc = c.nested("spectrum");
        if sp.n_side == 0 {
            spc.error("n_side", "must be at least 1");
        }
        if sp.points == 0 {
            spc.error("points", "must be at least 1");
        }
        if let Some(w) = sp.half_width_fwhm {
            positive(&mut spc, "half_width_fwhm", w);
        }
        if self.kind == ScenarioKind::PumpFringe && sp.phase_samples < 2 {
            spc.error("phase_samples", "must be at least 2");
        }

        let ck = &self.check;
        let mut kc = c.nested("check");
        if let Some(v) = ck.min_car {
            kc.require("min_car", v, v > 0.0, "> 0");
        }
        if let Some(v) = ck.accidental_tolerance {
            kc.require("accidental_tolerance", v, v > 0.0, "> 0");
        }
        if let Some(v) = ck.rate_ratio {
            kc.require("rate_ratio", v, v > 0.0, "> 0");
        }

        // comb-dependent checks only make sense once the ring itself is sound
        let ring_ok = self.ring.validate().is_ok() && self.ring_temperature_c.is_finite();
        if ring_ok {
            match resonance_comb(&self.ring, self.ring_temperature_c, self.comb_side_count()) {
                Ok(comb) => self.pump.diagnose_detuning(&comb, &mut c.nested("pump")),
                Err(e) => c.error("ring", format!("{e}")),
            }
        }
    }
}

/// Every diagnostic for a scenario, errors first.
pub fn diagnostics(s: &Scenario) -> Vec<Diagnostic> {
    let mut d = s.diagnostics();
    d.sort_by_key(|x| x.severity != crate::diag::Severity::Error);
    d
}
