use alloc::vec::Vec;

use super::TimeTagStream;
use crate::error::{Error, Result};

/// Counts of idler-minus-signal delays.
///
/// Bin `k` is centred on `k·bin_width` and collects delays that round to it, with
/// ties rounded away from zero so the binning is mirror symmetric. With an even
/// width the central bin is therefore one picosecond narrower than the rest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoincidenceHistogram {
    pub bin_width_ps: u64,
    /// Coincidence window of one data point.
    pub window_ps: u64,
    pub delays_ps: Vec<i64>,
    pub counts: Vec<u64>,
    pub duration_s: f64,
}

impl CoincidenceHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Largest bin index on each side.
    pub fn half_bins(&self) -> usize {
        self.counts.len() / 2
    }

    pub fn count_at(&self, k: i64) -> Option<u64> {
        let idx = k + self.half_bins() as i64;
        usize::try_from(idx).ok().and_then(|i| self.counts.get(i).copied())
    }
}

#[inline]
fn bin_index(d: i64, bw: i64) -> i64 {
    let k = (2 * d.abs() + bw) / (2 * bw);
    if d < 0 {
        -k
    } else {
        k
    }
}

/// Histogram of `t_i - t_s` over `[-span, +span]` at `bin_width_ps`, counting every
/// tag pair in range.
pub fn coincidence_histogram(
    s: &TimeTagStream,
    i: &TimeTagStream,
    bin_width_ps: u64,
    span_ps: u64,
) -> Result<CoincidenceHistogram> {
    if bin_width_ps == 0 {
        return Err(Error::invalid("bin_width_ps", "must be > 0"));
    }
    if span_ps < bin_width_ps {
        return Err(Error::invalid("span_ps", "must cover at least one bin each side"));
    }
    if span_ps > i64::MAX as u64 / 4 {
        return Err(Error::invalid("span_ps", "too large"));
    }
    let half = (span_ps / bin_width_ps) as i64;
    let bw = bin_width_ps as i64;
    let mut counts = alloc::vec![0u64; 2 * half as usize + 1];
    // farthest delay that still rounds into an outer bin
    let reach = (half * bw + (bw - 1) / 2) as u64;

    let idler = i.tags();
    let mut lo = 0usize;
    for &ts in s.tags() {
        let start = ts.saturating_sub(reach);
        while lo < idler.len() && idler[lo] < start {
            lo += 1;
        }
        for &ti in &idler[lo..] {
            if ti > ts + reach {
                break;
            }
            let k = bin_index(ti as i64 - ts as i64, bw);
            if k.abs() <= half {
                counts[(k + half) as usize] += 1;
            }
        }
    }
    Ok(CoincidenceHistogram {
        bin_width_ps,
        window_ps: bin_width_ps,
        delays_ps: (-half..=half).map(|k| k * bw).collect(),
        counts,
        duration_s: s.duration_s().min(i.duration_s()),
    })
}

/// Coincidences inside one bin-width window centred on zero delay.
pub fn window_coincidences(s: &TimeTagStream, i: &TimeTagStream, window_ps: u64) -> Result<u64> {
    let h = coincidence_histogram(s, i, window_ps, window_ps)?;
    Ok(h.count_at(0).unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CarReport {
    pub car: f64,
    pub peak_counts: u64,
    pub peak_bins: usize,
    /// Mean accidental counts per bin from the wings.
    pub wing_mean: f64,
    pub wing_bins: usize,
}

/// CAR with accidentals estimated from the outer half of the histogram.
///
/// The peak window takes every bin whose centre is within `peak_window/2` of zero
/// delay. Wing bins are those at least half the span away from zero, so side peaks
/// near the centre (AMZI delays) stay out of the accidental estimate.
pub fn car_report(h: &CoincidenceHistogram, peak_window_ps: u64) -> Result<CarReport> {
    if h.bin_width_ps == 0 || h.counts.len() != h.delays_ps.len() {
        return Err(Error::invalid("histogram", "malformed"));
    }
    let half_window = (peak_window_ps / 2) as i64;
    let wing_start = (h.half_bins() as i64 * h.bin_width_ps as i64) / 2;
    let (mut peak_counts, mut peak_bins, mut wing_sum, mut wing_bins) = (0u64, 0usize, 0u64, 0usize);
    for (&d, &c) in h.delays_ps.iter().zip(&h.counts) {
        if d.abs() <= half_window {
            peak_counts += c;
            peak_bins += 1;
        } else if d.abs() >= wing_start {
            wing_sum += c;
            wing_bins += 1;
        }
    }
    if wing_bins == 0 || peak_bins == 0 {
        return Err(Error::DegenerateHistogram);
    }
    let wing_mean = wing_sum as f64 / wing_bins as f64;
    let car = if wing_sum == 0 {
        if peak_counts == 0 {
            return Err(Error::EmptyHistogram);
        }
        f64::INFINITY
    } else {
        peak_counts as f64 / (wing_mean * peak_bins as f64)
    };
    Ok(CarReport {
        car,
        peak_counts,
        peak_bins,
        wing_mean,
        wing_bins,
    })
}

pub fn car(h: &CoincidenceHistogram, peak_window_ps: u64) -> Result<f64> {
    car_report(h, peak_window_ps).map(|r| r.car)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{simulate_streams, DetectorParams};
    use alloc::vec;
    use proptest::prelude::*;

    fn stream(tags: Vec<u64>) -> TimeTagStream {
        TimeTagStream::new("t", 1.0, tags).unwrap()
    }

    // Every pair, no pointer tricks.
    fn brute(s: &[u64], i: &[u64], bw: i64, half: i64) -> Vec<u64> {
        let mut out = vec![0u64; 2 * half as usize + 1];
        for &a in s {
            for &b in i {
                let d = b as i64 - a as i64;
                let k = (d.abs() as f64 / bw as f64 + 0.5).floor() as i64 * d.signum();
                if k.abs() <= half {
                    out[(k + half) as usize] += 1;
                }
            }
        }
        out
    }

    #[test]
    fn empty_streams_give_zero_counts() {
        let h = coincidence_histogram(&stream(vec![]), &stream(vec![]), 64, 640).unwrap();
        assert_eq!(h.counts.len(), 21);
        assert_eq!(h.total(), 0);
        assert_eq!(h.delays_ps[0], -640);
        assert_eq!(h.delays_ps[20], 640);
    }

    #[test]
    fn simultaneous_tags_land_in_zero_bin() {
        let h = coincidence_histogram(&stream(vec![5000]), &stream(vec![5000]), 64, 640).unwrap();
        assert_eq!(h.count_at(0), Some(1));
        assert_eq!(h.total(), 1);
    }

    #[test]
    fn rounding_is_mirror_symmetric() {
        assert_eq!(bin_index(31, 64), 0);
        assert_eq!(bin_index(32, 64), 1);
        assert_eq!(bin_index(-32, 64), -1);
        assert_eq!(bin_index(-31, 64), 0);
        assert_eq!(bin_index(95, 64), 1);
        assert_eq!(bin_index(96, 64), 2);
    }

    #[test]
    fn flat_histogram_car_is_one() {
        let h = CoincidenceHistogram {
            bin_width_ps: 64,
            window_ps: 64,
            delays_ps: (-10..=10).map(|k| k * 64).collect(),
            counts: vec![7; 21],
            duration_s: 1.0,
        };
        assert_eq!(car(&h, 64).unwrap(), 1.0);
    }

    #[test]
    fn zero_wings_are_infinite() {
        let mut counts = vec![0u64; 21];
        counts[10] = 12;
        let h = CoincidenceHistogram {
            bin_width_ps: 64,
            window_ps: 64,
            delays_ps: (-10..=10).map(|k| k * 64).collect(),
            counts,
            duration_s: 1.0,
        };
        assert_eq!(car(&h, 64).unwrap(), f64::INFINITY);
        let empty = CoincidenceHistogram {
            counts: vec![0; 21],
            ..h.clone()
        };
        assert_eq!(car(&empty, 64), Err(Error::EmptyHistogram));
        assert_eq!(car(&h, 64 * 40), Err(Error::DegenerateHistogram));
    }

    #[test]
    fn accidental_floor_matches_product_of_rates() {
        let d = DetectorParams {
            channel_loss_db: 0.0,
            dark_rate: 2e5,
            jitter_sigma_ps: 0.0,
            dead_time_ns: 0.0,
        };
        let (s, _) = simulate_streams(0.0, &d, &d, 1.0, 1).unwrap();
        let (_, i) = simulate_streams(0.0, &d, &d, 1.0, 2).unwrap();
        let h = coincidence_histogram(&s, &i, 64, 20_000).unwrap();
        let rep = car_report(&h, 64).unwrap();
        let expected = s.rate() * i.rate() * 64e-12 * 1.0;
        assert!(rep.wing_bins >= 100);
        assert!((rep.wing_mean - expected).abs() / expected < 0.05, "{} vs {expected}", rep.wing_mean);
    }

    #[test]
    fn correlated_peak_stands_out() {
        let d = DetectorParams {
            channel_loss_db: 3.0,
            dark_rate: 1e4,
            jitter_sigma_ps: 20.0,
            dead_time_ns: 0.0,
        };
        let (s, i) = simulate_streams(1e5, &d, &d, 1.0, 4).unwrap();
        let h = coincidence_histogram(&s, &i, 64, 10_000).unwrap();
        assert!(car(&h, 64).unwrap() > 50.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            mut a in proptest::collection::vec(0u64..200_000, 0..60),
            mut b in proptest::collection::vec(0u64..200_000, 0..60),
            bw in 1u64..500,
            half in 1u64..40,
        ) {
            a.sort_unstable();
            b.sort_unstable();
            let h = coincidence_histogram(&stream(a.clone()), &stream(b.clone()), bw, half * bw).unwrap();
            prop_assert_eq!(&h.counts, &brute(&a, &b, bw as i64, half as i64));
            prop_assert!(h.total() <= (a.len() * b.len()) as u64);
        }

        #[test]
        fn car_symmetric_under_exchange(
            mut a in proptest::collection::vec(0u64..100_000, 1..80),
            mut b in proptest::collection::vec(0u64..100_000, 1..80),
            bw in 1u64..200,
        ) {
            a.sort_unstable();
            b.sort_unstable();
            let (sa, sb) = (stream(a), stream(b));
            let f = coincidence_histogram(&sa, &sb, bw, 40 * bw).unwrap();
            let r = coincidence_histogram(&sb, &sa, bw, 40 * bw).unwrap();
            let mut flipped = r.counts.clone();
            flipped.reverse();
            prop_assert_eq!(&f.counts, &flipped);
            prop_assert_eq!(car(&f, bw), car(&r, bw));
        }
    }
}
