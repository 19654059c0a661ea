//! Performance measures: normalized ISI, NCCI and symbol error rate.

use crate::error::{Error, Result};
use crate::signal_model::{CombinedResponse, Constellation, EqualizedStream, C64};

/// Reported value for perfect equalization.
pub const DB_FLOOR: f64 = -100.0;

pub fn to_db(linear: f64) -> f64 {
    if linear <= 0.0 {
        DB_FLOOR
    } else {
        (10.0 * linear.log10()).max(DB_FLOOR)
    }
}

/// Alias of [`to_db`] for ISI values.
pub fn isi_db(linear: f64) -> f64 {
    to_db(linear)
}

fn residual_ratio(energies: impl Iterator<Item = f64>) -> Result<f64> {
    let (mut total, mut peak) = (0.0f64, 0.0f64);
    for e in energies {
        total += e;
        peak = peak.max(e);
    }
    if peak == 0.0 {
        return Err(Error::UndefinedMetric("response is identically zero".into()));
    }
    Ok(((total - peak) / peak).max(0.0))
}

/// `(Σ|c|^2 - max|c|^2) / max|c|^2` over all taps of one output stream.
pub fn isi_of(taps: &[C64]) -> Result<f64> {
    residual_ratio(taps.iter().map(|c| c.norm_sqr()))
}

/// ISI of stream `i`, taken over every source and lag.
pub fn isi(c: &CombinedResponse, i: usize) -> Result<f64> {
    isi_of(c.stream(i))
}

/// Sum of per-stream ISI.
pub fn sum_isi(c: &CombinedResponse) -> Result<f64> {
    (0..c.n_streams()).map(|i| isi(c, i)).sum()
}

/// Cross-channel interference of one row of an instantaneous combined
/// matrix: `(Σ_j|c_j|^2 - max_j|c_j|^2) / max_j|c_j|^2`.
pub fn ncci_row(row: &[C64]) -> Result<f64> {
    residual_ratio(row.iter().map(|c| c.norm_sqr()))
}

/// NCCI of stream `i` with each source weighted by its total response
/// energy; equals [`ncci_row`] on instantaneous mixtures.
pub fn ncci(c: &CombinedResponse, i: usize) -> Result<f64> {
    residual_ratio((0..c.n_tx()).map(|n| c.get(i, n).iter().map(|x| x.norm_sqr()).sum()))
}

/// Average NCCI over all output streams.
pub fn mean_ncci(c: &CombinedResponse) -> Result<f64> {
    let n = c.n_streams();
    if n == 0 {
        return Err(Error::UndefinedMetric("no output streams".into()));
    }
    Ok((0..n).map(|i| ncci(c, i)).sum::<Result<f64>>()? / n as f64)
}

/// Source, lag and complex gain of the dominant tap of stream `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub source: usize,
    pub delay: usize,
    /// `y_i(k) ≈ gain · s_source(k - delay)`.
    pub gain: C64,
}

pub fn dominant_tap(c: &CombinedResponse, i: usize) -> Result<Alignment> {
    let mut best: Option<Alignment> = None;
    let mut peak = 0.0;
    for n in 0..c.n_tx() {
        for (k, tap) in c.get(i, n).iter().enumerate() {
            if tap.norm_sqr() > peak {
                peak = tap.norm_sqr();
                best = Some(Alignment {
                    source: n,
                    delay: k,
                    gain: tap.conj(),
                });
            }
        }
    }
    best.ok_or_else(|| Error::UndefinedMetric("response is identically zero".into()))
}

/// Symbol error rate of `y` against `source` after undoing delay and
/// complex gain, followed by nearest-point decisions.
pub fn ser_aligned(y: &EqualizedStream, source: &[C64], align: &Alignment, constellation: &Constellation) -> Result<f64> {
    if align.gain.norm_sqr() == 0.0 {
        return Err(Error::UndefinedMetric("zero alignment gain".into()));
    }
    let mut errors = 0usize;
    let mut count = 0usize;
    for (t, yk) in y.samples.iter().enumerate() {
        let k = y.start + t;
        let Some(src_k) = k.checked_sub(align.delay) else { continue };
        let Some(s) = source.get(src_k) else { continue };
        let decided = constellation.decide(yk / align.gain);
        count += 1;
        if (decided - s).norm() > 1e-9 {
            errors += 1;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("no samples overlap after delay alignment".into()));
    }
    Ok(errors as f64 / count as f64)
}

/// SER of stream `i`, aligned with the dominant tap of its known combined
/// response (phase, gain and delay ambiguities resolved with channel
/// knowledge).
pub fn ser(
    y: &EqualizedStream,
    sources: &[Vec<C64>],
    response: &CombinedResponse,
    i: usize,
    constellation: &Constellation,
) -> Result<f64> {
    if y.samples.is_empty() {
        return Err(Error::UndefinedMetric("empty output stream".into()));
    }
    let align = dominant_tap(response, i)?;
    let source = sources
        .get(align.source)
        .ok_or_else(|| Error::UndefinedMetric(format!("source {} not available", align.source)))?;
    ser_aligned(y, source, &align, constellation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn isi_examples() {
        assert_eq!(isi_of(&[c(0.0), c(1.0), c(0.0)]).unwrap(), 0.0);
        assert_eq!(isi_db(0.0), DB_FLOOR);
        let v = isi_of(&[c(1.0), c(0.1)]).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
        assert!((isi_db(v) + 20.0).abs() < 1e-9);
        assert_eq!(isi_of(&[c(1.0), c(1.0)]).unwrap(), 1.0);
        assert!(matches!(isi_of(&[c(0.0)]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn ncci_examples() {
        assert_eq!(ncci_row(&[c(1.0), c(0.0)]).unwrap(), 0.0);
        assert_eq!(ncci_row(&[c(1.0), c(1.0), c(0.0), c(0.0)]).unwrap(), 1.0);
        assert_eq!(ncci_row(&[c(2.0), c(1.0), c(1.0), c(0.0)]).unwrap(), 0.5);
        assert!(ncci_row(&[c(0.0), c(0.0)]).is_err());
    }

    #[test]
    fn ser_resolves_sign_ambiguity() {
        let q = Constellation::qpsk();
        let s: Vec<C64> = (0..40).map(|k| q.points()[k % 4]).collect();
        let y = EqualizedStream {
            start: 0,
            samples: s.iter().map(|x| -x).collect(),
        };
        let naive = Alignment {
            source: 0,
            delay: 0,
            gain: c(1.0),
        };
        assert_eq!(ser_aligned(&y, &s, &naive, &q).unwrap(), 1.0);
        let resolved = Alignment { gain: c(-1.0), ..naive };
        assert_eq!(ser_aligned(&y, &s, &resolved, &q).unwrap(), 0.0);
        let beyond = Alignment { delay: 100, ..resolved };
        assert!(ser_aligned(&y, &s, &beyond, &q).is_err());
    }
}
