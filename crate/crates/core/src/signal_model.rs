//! Baseband MIMO signal model: QAM sources, multipath FIR channels with
//! AWGN, stacked equalizer regressors and combined channel-equalizer
//! responses.
//!
//! Sample indices are 0-based throughout. A frame holds `K` samples per
//! antenna; the transmission starts at sample 0 with nothing sent before it,
//! so `x_j(k)` only collects `s_n(k - m)` for `k - m >= 0`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex<f64>;

/// Finite symbol alphabet, assumed used with uniform probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    name: String,
    points: Vec<C64>,
}

/// Exact moments of a constellation under a uniform symbol distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationStats {
    /// Average power `E|s|^2`.
    pub sigma_s2: f64,
    /// `E|s|^4`.
    pub fourth_moment: f64,
    /// Dispersion constant `E|s|^4 / E|s|^2`.
    pub r2: f64,
    /// Circular fourth-order cumulant `E|s|^4 - 2(E|s|^2)^2 - |E s^2|^2`.
    pub kurtosis: f64,
}

/// Moments of a uniformly used alphabet, by enumeration.
pub fn constellation_stats(points: &[C64]) -> Result<ConstellationStats> {
    if points.is_empty() {
        return Err(invalid("constellation alphabet is empty"));
    }
    let n = points.len() as f64;
    let sigma_s2 = points.iter().map(|s| s.norm_sqr()).sum::<f64>() / n;
    let fourth_moment = points.iter().map(|s| s.norm_sqr().powi(2)).sum::<f64>() / n;
    let pseudo = points.iter().map(|s| s * s).sum::<C64>() / n;
    if sigma_s2 <= 0.0 {
        return Err(invalid("constellation has zero average power"));
    }
    Ok(ConstellationStats {
        sigma_s2,
        fourth_moment,
        r2: fourth_moment / sigma_s2,
        kurtosis: fourth_moment - 2.0 * sigma_s2 * sigma_s2 - pseudo.norm_sqr(),
    })
}

impl Constellation {
    pub fn new(name: impl Into<String>, points: Vec<C64>) -> Result<Self> {
        constellation_stats(&points)?;
        for (i, a) in points.iter().enumerate() {
            if points[i + 1..].iter().any(|b| (a - b).norm() < 1e-12) {
                return Err(invalid(format!("duplicate constellation point {a}")));
            }
        }
        Ok(Self {
            name: name.into(),
            points,
        })
    }

    /// Antipodal `{-1, +1}`.
    pub fn bpsk() -> Self {
        Self::square("BPSK", &[-1.0, 1.0], false)
    }

    /// Unit-power QPSK `{(±1 ± j)/√2}`.
    pub fn qpsk() -> Self {
        Self::square("QPSK", &[-1.0, 1.0], true)
    }

    /// Unit-power square 16-QAM `{±1, ±3}²/√10`.
    pub fn qam16() -> Self {
        Self::square("16QAM", &[-3.0, -1.0, 1.0, 3.0], true)
    }

    fn square(name: &str, levels: &[f64], complex: bool) -> Self {
        let points: Vec<C64> = if complex {
            levels
                .iter()
                .flat_map(|&re| levels.iter().map(move |&im| C64::new(re, im)))
                .collect()
        } else {
            levels.iter().map(|&re| C64::new(re, 0.0)).collect()
        };
        let power = points.iter().map(|s| s.norm_sqr()).sum::<f64>() / points.len() as f64;
        let scale = power.sqrt().recip();
        Self {
            name: name.to_string(),
            points: points.into_iter().map(|s| s * scale).collect(),
        }
    }

    /// Looks up one of the built-in alphabets by a case-insensitive name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bpsk" => Ok(Self::bpsk()),
            "qpsk" | "4qam" => Ok(Self::qpsk()),
            "16qam" | "qam16" => Ok(Self::qam16()),
            other => Err(invalid(format!(
                "unknown constellation `{other}` (expected bpsk, qpsk or 16qam)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn stats(&self) -> ConstellationStats {
        constellation_stats(&self.points).expect("validated on construction")
    }

    /// Nearest alphabet point (minimum Euclidean distance decision).
    pub fn decide(&self, y: C64) -> C64 {
        *self
            .points
            .iter()
            .min_by(|a, b| (y - **a).norm_sqr().total_cmp(&(y - **b).norm_sqr()))
            .expect("non-empty alphabet")
    }
}

/// How random tap variances are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TapPower {
    /// Every tap is CN(0, 1).
    #[default]
    PerTap,
    /// Taps are CN(0, 1/L) so the expected total power is one.
    Total,
}

/// Complex FIR impulse responses `h_{j,n}(m)` of an `n_rx × n_tx` channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    n_tx: usize,
    n_rx: usize,
    len: usize,
    /// Row-major over `(j, n, m)`.
    taps: Vec<C64>,
}

impl ChannelModel {
    /// Builds a channel from `taps[j][n]`, the response from transmitter `n`
    /// to receiver `j`. All sub-channels must have the same length.
    pub fn new(taps: Vec<Vec<Vec<C64>>>) -> Result<Self> {
        let n_rx = taps.len();
        if n_rx == 0 || taps[0].is_empty() {
            return Err(invalid("channel needs at least one receiver and one transmitter"));
        }
        let n_tx = taps[0].len();
        let len = taps[0][0].len();
        if len == 0 {
            return Err(invalid("channel impulse response is empty"));
        }
        let mut flat = Vec::with_capacity(n_rx * n_tx * len);
        for (j, row) in taps.iter().enumerate() {
            if row.len() != n_tx {
                return Err(invalid(format!("receiver {j} has {} sub-channels, expected {n_tx}", row.len())));
            }
            for (n, h) in row.iter().enumerate() {
                if h.len() != len {
                    return Err(invalid(format!(
                        "sub-channel ({j},{n}) has {} taps, expected {len}",
                        h.len()
                    )));
                }
                flat.extend_from_slice(h);
            }
        }
        if flat.iter().all(|h| h.norm_sqr() == 0.0) {
            return Err(invalid("channel is identically zero"));
        }
        Ok(Self {
            n_tx,
            n_rx,
            len,
            taps: flat,
        })
    }

    pub fn siso(taps: Vec<C64>) -> Result<Self> {
        Self::new(vec![vec![taps]])
    }

    /// Instantaneous mixing `x(k) = H s(k)`; `matrix[j][n]`.
    pub fn flat(matrix: Vec<Vec<C64>>) -> Result<Self> {
        Self::new(
            matrix
                .into_iter()
                .map(|row| row.into_iter().map(|h| vec![h]).collect())
                .collect(),
        )
    }

    /// Independent circular Gaussian taps.
    pub fn rayleigh<R: Rng + ?Sized>(
        n_rx: usize,
        n_tx: usize,
        n_taps: usize,
        power: TapPower,
        rng: &mut R,
    ) -> Result<Self> {
        if n_taps == 0 {
            return Err(invalid("Rayleigh channel needs at least one tap"));
        }
        let var = match power {
            TapPower::PerTap => 1.0,
            TapPower::Total => 1.0 / n_taps as f64,
        };
        let sd = (var / 2.0).sqrt();
        let taps = (0..n_rx)
            .map(|_| {
                (0..n_tx)
                    .map(|_| {
                        (0..n_taps)
                            .map(|_| {
                                let re: f64 = rng.sample(StandardNormal);
                                let im: f64 = rng.sample(StandardNormal);
                                C64::new(sd * re, sd * im)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(taps)
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    /// Channel order `L_h` (number of taps minus one).
    pub fn order(&self) -> usize {
        self.len - 1
    }

    pub fn sub_channel(&self, j: usize, n: usize) -> &[C64] {
        let start = (j * self.n_tx + n) * self.len;
        &self.taps[start..start + self.len]
    }

    pub fn tap(&self, j: usize, n: usize, m: usize) -> C64 {
        self.sub_channel(j, n)[m]
    }

    /// Expected noiseless received power per antenna, averaged over antennas.
    pub fn mean_received_power(&self, sigma_s2: f64) -> f64 {
        sigma_s2 * self.taps.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.n_rx as f64
    }

    /// Noise variance giving the requested per-antenna SNR; zero for `+inf`.
    pub fn noise_variance(&self, sigma_s2: f64, snr_db: f64) -> Result<f64> {
        if snr_db == f64::INFINITY {
            return Ok(0.0);
        }
        if !snr_db.is_finite() {
            return Err(invalid(format!("SNR must be finite or +inf, got {snr_db}")));
        }
        Ok(self.mean_received_power(sigma_s2) / 10f64.powf(snr_db / 10.0))
    }
}

/// One realization of sources, channel outputs and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalFrame {
    /// `sources[n][k]`.
    pub sources: Vec<Vec<C64>>,
    /// `received[j][k]`.
    pub received: Vec<Vec<C64>>,
    pub noise_variance: f64,
    pub seed: u64,
}

impl SignalFrame {
    /// Samples per antenna.
    pub fn len(&self) -> usize {
        self.received.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_rx(&self) -> usize {
        self.received.len()
    }

    pub fn n_tx(&self) -> usize {
        self.sources.len()
    }
}

/// Draws i.i.d. uniform symbols, filters them through `ch` and adds circular
/// white Gaussian noise at `snr_db` (`f64::INFINITY` for a noiseless frame).
pub fn generate_frame(
    constellation: &Constellation,
    ch: &ChannelModel,
    k_len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<SignalFrame> {
    if k_len == 0 {
        return Err(invalid("frame length must be positive"));
    }
    if k_len <= ch.order() {
        return Err(invalid(format!(
            "frame length {k_len} must exceed the channel order {}",
            ch.order()
        )));
    }
    let noise_variance = ch.noise_variance(constellation.stats().sigma_s2, snr_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = constellation.points();
    let sources: Vec<Vec<C64>> = (0..ch.n_tx())
        .map(|_| {
            (0..k_len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect()
        })
        .collect();

    let mut received = vec![vec![C64::new(0.0, 0.0); k_len]; ch.n_rx()];
    for (j, x) in received.iter_mut().enumerate() {
        for (n, s) in sources.iter().enumerate() {
            let h = ch.sub_channel(j, n);
            for (m, &hm) in h.iter().enumerate() {
                if hm.norm_sqr() == 0.0 {
                    continue;
                }
                for k in m..k_len {
                    x[k] += hm * s[k - m];
                }
            }
        }
    }
    if noise_variance > 0.0 {
        let sd = (noise_variance / 2.0).sqrt();
        for x in received.iter_mut() {
            for xk in x.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *xk += C64::new(sd * re, sd * im);
            }
        }
    }
    Ok(SignalFrame {
        sources,
        received,
        noise_variance,
        seed,
    })
}

/// Stacked regressor `x(k) = [x_1(k) .. x_1(k-L_w), x_2(k) .. ]`, antenna-major.
///
/// Valid for `l_w <= k < K` so that every delay line is fully populated.
pub fn build_regressor(frame: &SignalFrame, l_w: usize, k: usize) -> Result<Vec<C64>> {
    if k < l_w || k >= frame.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: l_w,
            hi: frame.len(),
        });
    }
    let mut out = Vec::with_capacity(frame.n_rx() * (l_w + 1));
    for x in &frame.received {
        out.extend((0..=l_w).map(|l| x[k - l]));
    }
    Ok(out)
}

/// Per-stream FIR equalizers `w_{i,j}(l)`, stored stacked as `w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerBank {
    n_rx: usize,
    order: usize,
    streams: Vec<Vec<C64>>,
}

impl EqualizerBank {
    pub fn new(n_rx: usize, order: usize, streams: Vec<Vec<C64>>) -> Result<Self> {
        let n = n_rx * (order + 1);
        if n_rx == 0 {
            return Err(invalid("equalizer needs at least one receive antenna"));
        }
        if let Some((i, w)) = streams.iter().enumerate().find(|(_, w)| w.len() != n) {
            return Err(invalid(format!(
                "stream {i} has {} coefficients, expected N = N_R (L_w + 1) = {n}",
                w.len()
            )));
        }
        Ok(Self {
            n_rx,
            order,
            streams,
        })
    }

    pub fn n_streams(&self) -> usize {
        self.streams.len()
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    /// Equalizer order `L_w`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Stacked length `N = N_R (L_w + 1)`.
    pub fn stacked_len(&self) -> usize {
        self.n_rx * (self.order + 1)
    }

    pub fn stream(&self, i: usize) -> &[C64] {
        &self.streams[i]
    }

    pub fn tap(&self, i: usize, j: usize, l: usize) -> C64 {
        self.streams[i][j * (self.order + 1) + l]
    }
}

/// Output samples `y(k) = w^H x(k)` for `k = start .. K-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedStream {
    pub start: usize,
    pub samples: Vec<C64>,
}

pub fn equalize(frame: &SignalFrame, w: &[C64], l_w: usize) -> Result<EqualizedStream> {
    if w.len() != frame.n_rx() * (l_w + 1) {
        return Err(invalid(format!(
            "equalizer length {} does not match N_R (L_w + 1) = {}",
            w.len(),
            frame.n_rx() * (l_w + 1)
        )));
    }
    if frame.len() <= l_w {
        return Err(invalid("frame shorter than the equalizer"));
    }
    let samples = (l_w..frame.len())
        .map(|k| {
            let mut y = C64::new(0.0, 0.0);
            for (j, x) in frame.received.iter().enumerate() {
                for l in 0..=l_w {
                    y += w[j * (l_w + 1) + l].conj() * x[k - l];
                }
            }
            y
        })
        .collect();
    Ok(EqualizedStream { start: l_w, samples })
}

/// Combined responses `c_{i,n}(k)`, `k = 0 ..= L_h + L_w`, defined so that
/// `y_i(k) = Σ_n Σ_m conj(c_{i,n}(m)) s_n(k - m) + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedResponse {
    n_streams: usize,
    n_tx: usize,
    len: usize,
    data: Vec<C64>,
}

impl CombinedResponse {
    pub fn n_streams(&self) -> usize {
        self.n_streams
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    /// Number of lags, `L_h + L_w + 1`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Response of stream `i` to source `n`.
    pub fn get(&self, i: usize, n: usize) -> &[C64] {
        let start = (i * self.n_tx + n) * self.len;
        &self.data[start..start + self.len]
    }

    /// All taps seen by stream `i`, source-major.
    pub fn stream(&self, i: usize) -> &[C64] {
        let start = i * self.n_tx * self.len;
        &self.data[start..start + self.n_tx * self.len]
    }

    /// Instantaneous combined matrix `c_{i,n}(0)`; meaningful for flat
    /// channels with `L_w = 0`.
    pub fn matrix(&self) -> Vec<Vec<C64>> {
        (0..self.n_streams)
            .map(|i| (0..self.n_tx).map(|n| self.get(i, n)[0]).collect())
            .collect()
    }
}

pub fn combined_response(ch: &ChannelModel, eq: &EqualizerBank) -> Result<CombinedResponse> {
    if ch.n_rx() != eq.n_rx() {
        return Err(invalid(format!(
            "channel has {} receivers but the equalizer expects {}",
            ch.n_rx(),
            eq.n_rx()
        )));
    }
    let len = ch.order() + eq.order() + 1;
    let mut data = vec![C64::new(0.0, 0.0); eq.n_streams() * ch.n_tx() * len];
    for i in 0..eq.n_streams() {
        for n in 0..ch.n_tx() {
            let c = &mut data[(i * ch.n_tx() + n) * len..(i * ch.n_tx() + n + 1) * len];
            for j in 0..ch.n_rx() {
                let h = ch.sub_channel(j, n);
                for l in 0..=eq.order() {
                    let w = eq.tap(i, j, l);
                    for (m, hm) in h.iter().enumerate() {
                        c[l + m] += w * hm.conj();
                    }
                }
            }
        }
    }
    Ok(CombinedResponse {
        n_streams: eq.n_streams(),
        n_tx: ch.n_tx(),
        len,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn qpsk_moments() {
        let s = Constellation::qpsk().stats();
        assert!((s.sigma_s2 - 1.0).abs() < 1e-15);
        assert!((s.fourth_moment - 1.0).abs() < 1e-15);
        assert!((s.r2 - 1.0).abs() < 1e-15);
        assert!((s.kurtosis + 1.0).abs() < 1e-15);
    }

    #[test]
    fn qam16_moments_by_enumeration() {
        // |s|^2 over {±1,±3}^2 takes 2 (x4), 10 (x8), 18 (x4); divide by 10.
        let p2: f64 = (4.0 * 2.0 + 8.0 * 10.0 + 4.0 * 18.0) / 16.0 / 10.0;
        let p4: f64 = (4.0 * 4.0 + 8.0 * 100.0 + 4.0 * 324.0) / 16.0 / 100.0;
        let s = Constellation::qam16().stats();
        assert!((s.sigma_s2 - p2).abs() < 1e-14);
        assert!((s.fourth_moment - 1.32).abs() < 1e-14 && (p4 - 1.32).abs() < 1e-14);
        assert!((s.r2 - 1.32).abs() < 1e-14);
        assert!((s.kurtosis + 0.68).abs() < 1e-14);
    }

    #[test]
    fn bpsk_kurtosis_uses_pseudo_moment() {
        let s = Constellation::bpsk().stats();
        assert_eq!(s.sigma_s2, 1.0);
        assert_eq!(s.r2, 1.0);
        assert!((s.kurtosis + 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_or_duplicate_alphabet_rejected() {
        assert!(matches!(constellation_stats(&[]), Err(Error::InvalidInput(_))));
        assert!(Constellation::new("dup", vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(Constellation::new("zero", vec![c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn identity_channel_passes_symbols_through() {
        let ch = ChannelModel::siso(vec![c(1.0, 0.0)]).unwrap();
        let f = generate_frame(&Constellation::qpsk(), &ch, 64, f64::INFINITY, 3).unwrap();
        assert_eq!(f.noise_variance, 0.0);
        assert_eq!(f.sources[0], f.received[0]);
    }

    #[test]
    fn zero_subchannel_gives_noise_only() {
        // The zero sub-channel is allowed as long as the whole channel is nonzero.
        let ch = ChannelModel::new(vec![vec![vec![c(0.0, 0.0)]], vec![vec![c(1.0, 0.0)]]]).unwrap();
        let f = generate_frame(&Constellation::qpsk(), &ch, 200, 10.0, 9).unwrap();
        assert!(f.noise_variance > 0.0);
        let p0 = f.received[0].iter().map(|x| x.norm_sqr()).sum::<f64>() / 200.0;
        assert!((p0 / f.noise_variance - 1.0).abs() < 0.3);
        assert!(ChannelModel::siso(vec![c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn empirical_snr_close_to_target() {
        let ch = ChannelModel::siso(vec![c(0.3, -0.1), c(1.0, 0.2), c(-0.2, 0.4)]).unwrap();
        let noiseless = generate_frame(&Constellation::qpsk(), &ch, 1000, f64::INFINITY, 5).unwrap();
        let noisy = generate_frame(&Constellation::qpsk(), &ch, 1000, 14.0, 5).unwrap();
        // Same seed: identical sources, so the difference is the noise.
        assert_eq!(noiseless.sources, noisy.sources);
        let ps = noiseless.received[0].iter().map(|x| x.norm_sqr()).sum::<f64>() / 1000.0;
        let pn = noisy.received[0]
            .iter()
            .zip(&noiseless.received[0])
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / 1000.0;
        let snr = 10.0 * (ps / noisy.noise_variance).log10();
        assert!((snr - 14.0).abs() < 1.0, "snr {snr}");
        assert!((pn / noisy.noise_variance - 1.0).abs() < 0.15);
    }

    #[test]
    fn frame_generation_is_deterministic() {
        let ch = ChannelModel::siso(vec![c(1.0, 0.0), c(0.5, 0.5)]).unwrap();
        let a = generate_frame(&Constellation::qam16(), &ch, 300, 12.0, 77).unwrap();
        let b = generate_frame(&Constellation::qam16(), &ch, 300, 12.0, 77).unwrap();
        assert_eq!(a, b);
        let d = generate_frame(&Constellation::qam16(), &ch, 300, 12.0, 78).unwrap();
        assert_ne!(a.sources, d.sources);
    }

    #[test]
    fn frame_rejects_bad_lengths() {
        let ch = ChannelModel::siso(vec![c(1.0, 0.0), c(0.5, 0.0), c(0.1, 0.0)]).unwrap();
        assert!(generate_frame(&Constellation::qpsk(), &ch, 0, 10.0, 1).is_err());
        assert!(generate_frame(&Constellation::qpsk(), &ch, 2, 10.0, 1).is_err());
        assert!(generate_frame(&Constellation::qpsk(), &ch, 20, f64::NAN, 1).is_err());
    }

    #[test]
    fn regressor_layout() {
        let frame = SignalFrame {
            sources: vec![],
            received: vec![vec![c(1.0, 0.0), c(2.0, 0.0)]],
            noise_variance: 0.0,
            seed: 0,
        };
        assert_eq!(build_regressor(&frame, 1, 1).unwrap(), vec![c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            build_regressor(&frame, 1, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(build_regressor(&frame, 1, 2).is_err());

        let two = SignalFrame {
            sources: vec![],
            received: vec![vec![c(1.0, 1.0), c(2.0, 0.0)], vec![c(3.0, 0.0), c(4.0, -1.0)]],
            noise_variance: 0.0,
            seed: 0,
        };
        assert_eq!(build_regressor(&two, 0, 1).unwrap(), vec![c(2.0, 0.0), c(4.0, -1.0)]);
        let y = equalize(&two, &[c(1.0, 0.0), c(0.0, 0.0)], 0).unwrap();
        assert_eq!(y.start, 0);
        assert_eq!(y.samples, vec![c(1.0, 1.0), c(2.0, 0.0)]);
    }

    #[test]
    fn combined_response_simple_cases() {
        let eq = EqualizerBank::new(1, 0, vec![vec![c(1.0, 0.0)]]).unwrap();
        let id = ChannelModel::siso(vec![c(1.0, 0.0)]).unwrap();
        assert_eq!(combined_response(&id, &eq).unwrap().get(0, 0), &[c(1.0, 0.0)]);
        let delay = ChannelModel::siso(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(
            combined_response(&delay, &eq).unwrap().get(0, 0),
            &[c(0.0, 0.0), c(1.0, 0.0)]
        );
        let mimo = ChannelModel::flat(vec![vec![c(1.0, 0.0)]; 2]).unwrap();
        assert!(combined_response(&mimo, &eq).is_err());
    }

    #[test]
    fn combined_response_matches_direct_filtering() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = ChannelModel::rayleigh(2, 2, 3, TapPower::PerTap, &mut rng).unwrap();
        let l_w = 2;
        let streams = (0..2)
            .map(|_| {
                (0..2 * (l_w + 1))
                    .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect()
            })
            .collect();
        let eq = EqualizerBank::new(2, l_w, streams).unwrap();
        let frame = generate_frame(&Constellation::qam16(), &ch, 120, f64::INFINITY, 4).unwrap();
        let resp = combined_response(&ch, &eq).unwrap();
        for i in 0..2 {
            let y = equalize(&frame, eq.stream(i), l_w).unwrap();
            let mut worst = 0.0f64;
            for (t, yk) in y.samples.iter().enumerate() {
                let k = y.start + t;
                if k < resp.len() {
                    continue;
                }
                let mut direct = c(0.0, 0.0);
                for n in 0..2 {
                    for (m, cm) in resp.get(i, n).iter().enumerate() {
                        direct += cm.conj() * frame.sources[n][k - m];
                    }
                }
                worst = worst.max((direct - yk).norm());
            }
            assert!(worst < 1e-10, "stream {i}: {worst}");
        }
    }
}
