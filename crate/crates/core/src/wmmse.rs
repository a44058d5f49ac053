//! MMSE equalizers, MMSE weights and weighted MSEs of every decoded stream, and
//! their sample averages over conditional channel realizations.
//!
//! The weighted MSE of a stream with equalizer `g`, weight `ω` and MSE `ε` is
//!
//! ```text
//! ξ = (ω ε − ln ω) / ln 2 + 1 − 1/ln 2
//! ```
//!
//! so that `ω = 1/ε` is its minimizer over `ω` and, at the MMSE equalizer,
//! `ξ = 1 − log2(T / I) = 1 − R` exactly, with rates in bits.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::model::{ChannelSet, Precoders};
use crate::scalar::{inner, Real};

/// Identifies one decoded stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StreamId {
    /// Common stream decoded at user `k`.
    Common(usize),
    /// Private stream of user `k` decoded at user `k`.
    Private(usize),
    /// Private stream of `owner` decoded by `eavesdropper`.
    Wiretap { owner: usize, eavesdropper: usize },
}

impl StreamId {
    /// User whose channel receives the stream.
    pub fn receiver(self) -> usize {
        match self {
            StreamId::Common(k) | StreamId::Private(k) => k,
            StreamId::Wiretap { eavesdropper, .. } => eavesdropper,
        }
    }

    /// Whether the common precoder contributes to the received power `T`.
    pub fn includes_common(self) -> bool {
        matches!(self, StreamId::Common(_))
    }

    /// Private precoders contributing to `T` (signal included for private/wiretap streams).
    pub fn private_in_total(self, n_users: usize) -> Vec<usize> {
        match self {
            StreamId::Common(_) | StreamId::Private(_) => (0..n_users).collect(),
            StreamId::Wiretap { eavesdropper, .. } => (0..n_users).filter(|&i| i != eavesdropper).collect(),
        }
    }

    fn signal<'a, T>(self, precoders: &'a Precoders<T>) -> &'a [Complex<T>] {
        match self {
            StreamId::Common(_) => &precoders.common,
            StreamId::Private(k) => &precoders.private[k],
            StreamId::Wiretap { owner, .. } => &precoders.private[owner],
        }
    }

    /// Every stream of a `K`-user system in a fixed order: commons, privates, wiretaps.
    pub fn all(n_users: usize) -> Vec<StreamId> {
        let mut out: Vec<StreamId> = (0..n_users).map(StreamId::Common).collect();
        out.extend((0..n_users).map(StreamId::Private));
        for owner in 0..n_users {
            for eavesdropper in (0..n_users).filter(|&j| j != owner) {
                out.push(StreamId::Wiretap { owner, eavesdropper });
            }
        }
        out
    }
}

/// `1 / ln 2`, the scale of the weighted MSE.
pub fn wmse_scale<T: Real>() -> T {
    T::LOG2_E()
}

/// Weighted MSE `(ω ε − ln ω)/ln 2 + 1 − 1/ln 2`.
pub fn wmse<T: Real>(weight: T, mse: T) -> T {
    let s = wmse_scale::<T>();
    s * (weight * mse - weight.ln()) + T::one() - s
}

/// MSE `|g|² T − 2 Re{g s} + 1` for received signal amplitude `s = hᴴp`.
pub fn mse<T: Real>(g: Complex<T>, signal: Complex<T>, total: T) -> T {
    g.norm_sqr() * total - T::lit(2.0) * (g * signal).re + T::one()
}

/// Received signal amplitude and power terms of one stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamPower<T> {
    /// `hᴴ p` of the stream's own precoder.
    pub signal: Complex<T>,
    /// Total received power `T` (signal + interference + noise).
    pub total: T,
    /// Interference plus noise `I = T − |hᴴp|²`.
    pub interference: T,
}

pub fn stream_power<T: Real>(id: StreamId, channels: &ChannelSet<T>, precoders: &Precoders<T>, noise: T) -> StreamPower<T> {
    let h = channels.user(id.receiver());
    let signal = inner(h, id.signal(precoders));
    let mut total = noise;
    if id.includes_common() {
        total = total + inner(h, &precoders.common).norm_sqr();
    }
    let mut interference = noise;
    for i in id.private_in_total(precoders.n_users()) {
        let pw = inner(h, &precoders.private[i]).norm_sqr();
        total = total + pw;
        let is_signal = matches!(id, StreamId::Private(k) | StreamId::Wiretap { owner: k, .. } if k == i);
        if !is_signal {
            interference = interference + pw;
        }
    }
    StreamPower { signal, total, interference }
}

/// Closed-form MMSE quantities of one stream in one channel sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmseStream<T> {
    pub equalizer: Complex<T>,
    pub mse: T,
    pub weight: T,
    pub total: T,
    pub interference: T,
    /// `hᴴ p` of the stream's own precoder.
    pub signal: Complex<T>,
}

impl<T: Real> MmseStream<T> {
    pub fn from_power(pw: StreamPower<T>) -> Self {
        let equalizer = pw.signal.conj() / pw.total;
        let mse = pw.interference / pw.total;
        Self {
            equalizer,
            mse,
            weight: mse.recip(),
            total: pw.total,
            interference: pw.interference,
            signal: pw.signal,
        }
    }

    /// Rate `log2(T / I)` of the stream.
    pub fn rate(&self) -> T {
        (self.total / self.interference).log2()
    }

    /// Weighted MSE at the MMSE equalizer and weight.
    pub fn wmse(&self) -> T {
        wmse(self.weight, mse(self.equalizer, self.signal, self.total))
    }

    /// `|ξ^MMSE − (1 − R)|`.
    pub fn rate_wmmse_gap(&self) -> T {
        (self.wmse() - (T::one() - self.rate())).abs()
    }
}

/// MMSE quantities of every stream of one channel sample, in [`StreamId::all`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMmse<T> {
    pub streams: Vec<(StreamId, MmseStream<T>)>,
}

impl<T: Real> SampleMmse<T> {
    pub fn compute(channels: &ChannelSet<T>, precoders: &Precoders<T>, noise: T) -> Self {
        let streams = StreamId::all(channels.n_users())
            .into_iter()
            .map(|id| (id, MmseStream::from_power(stream_power(id, channels, precoders, noise))))
            .collect();
        Self { streams }
    }

    pub fn get(&self, id: StreamId) -> &MmseStream<T> {
        &self
            .streams
            .iter()
            .find(|(s, _)| *s == id)
            .expect("stream present in sample")
            .1
    }
}

/// Equalizers and weights for every sample (the outer-loop state of the AO).
pub type MmseState<T> = Vec<SampleMmse<T>>;

pub fn update_equalizers_and_weights<T: Real>(
    precoders: &Precoders<T>,
    samples: &[ChannelSet<T>],
    noise: T,
) -> MmseState<T> {
    samples
        .iter()
        .map(|h| SampleMmse::compute(h, precoders, noise))
        .collect()
}

/// `|ξ^MMSE − (1 − R)|` for every stream of one sample.
pub fn rate_wmmse_gap<T: Real>(
    channels: &ChannelSet<T>,
    precoders: &Precoders<T>,
    noise: T,
) -> Vec<(StreamId, T)> {
    SampleMmse::compute(channels, precoders, noise)
        .streams
        .into_iter()
        .map(|(id, s)| (id, s.rate_wmmse_gap()))
        .collect()
}

/// Sample-averaged coefficients of one stream's weighted MSE:
/// `t̄ = ⟨ω|g|²⟩`, `Ψ̄ = ⟨t h hᴴ⟩`, `f̄ = ⟨ω h g*⟩`, `v̄ = ⟨log2 ω⟩`, `ū = ⟨ω⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamAverage<T> {
    pub id: StreamId,
    pub t: T,
    pub psi: Vec<Vec<Complex<T>>>,
    pub f: Vec<Complex<T>>,
    pub v: T,
    pub u: T,
}

impl<T: Real> StreamAverage<T> {
    /// Averaged weighted MSE `ξ̄(P)` under these fixed coefficients.
    pub fn wmse_at(&self, precoders: &Precoders<T>, noise: T) -> T {
        let mut quad = T::zero();
        if self.id.includes_common() {
            quad = quad + quad_form(&self.psi, &precoders.common);
        }
        for i in self.id.private_in_total(precoders.n_users()) {
            quad = quad + quad_form(&self.psi, &precoders.private[i]);
        }
        self.assemble(quad, precoders, noise)
    }

    /// `ξ̄` with every quadratic term `pᴴΨ̄p` replaced by its tangent at `expansion`.
    pub fn wmse_linearized(&self, precoders: &Precoders<T>, expansion: &Precoders<T>, noise: T) -> T {
        let mut quad = T::zero();
        if self.id.includes_common() {
            quad = quad + quad_tangent(&self.psi, &precoders.common, &expansion.common);
        }
        for i in self.id.private_in_total(precoders.n_users()) {
            quad = quad + quad_tangent(&self.psi, &precoders.private[i], &expansion.private[i]);
        }
        self.assemble(quad, precoders, noise)
    }

    fn assemble(&self, quad: T, precoders: &Precoders<T>, noise: T) -> T {
        let signal = self.id.signal(precoders);
        let cross = inner(&self.f, signal).re;
        let s = wmse_scale::<T>();
        s * (quad + self.t * noise - T::lit(2.0) * cross + self.u) - self.v + T::one() - s
    }
}

fn mat_vec<T: Real>(m: &[Vec<Complex<T>>], x: &[Complex<T>]) -> Vec<Complex<T>> {
    m.iter()
        .map(|row| row.iter().zip(x).fold(Complex::new(T::zero(), T::zero()), |a, (r, v)| a + r * v))
        .collect()
}

/// `xᴴ Ψ x` (real for Hermitian `Ψ`).
pub fn quad_form<T: Real>(psi: &[Vec<Complex<T>>], x: &[Complex<T>]) -> T {
    inner(x, &mat_vec(psi, x)).re
}

/// `2 Re{x0ᴴ Ψ x} − x0ᴴ Ψ x0`.
pub fn quad_tangent<T: Real>(psi: &[Vec<Complex<T>>], x: &[Complex<T>], x0: &[Complex<T>]) -> T {
    T::lit(2.0) * inner(x0, &mat_vec(psi, x)).re - quad_form(psi, x0)
}

/// Averaged coefficients of all streams, in [`StreamId::all`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedCoefficients<T> {
    pub streams: Vec<StreamAverage<T>>,
}

impl<T: Real> AveragedCoefficients<T> {
    pub fn get(&self, id: StreamId) -> &StreamAverage<T> {
        self.streams
            .iter()
            .find(|s| s.id == id)
            .expect("stream present in averages")
    }
}

/// Arithmetic means of the per-sample coefficients, summed in sample order.
pub fn compute_averages<T: Real>(state: &MmseState<T>, samples: &[ChannelSet<T>]) -> AveragedCoefficients<T> {
    assert_eq!(state.len(), samples.len(), "one MMSE state per sample");
    assert!(!samples.is_empty(), "at least one sample");
    let n = samples[0].n_tx();
    let m = T::lit(samples.len() as f64);
    let zero = Complex::new(T::zero(), T::zero());
    let ids = StreamId::all(samples[0].n_users());
    let streams = ids
        .into_iter()
        .map(|id| {
            let mut avg = StreamAverage {
                id,
                t: T::zero(),
                psi: vec![vec![zero; n]; n],
                f: vec![zero; n],
                v: T::zero(),
                u: T::zero(),
            };
            for (sample, h_set) in state.iter().zip(samples) {
                let s = sample.get(id);
                let h = h_set.user(id.receiver());
                let t = s.weight * s.equalizer.norm_sqr();
                avg.t = avg.t + t;
                for (a, row) in avg.psi.iter_mut().enumerate() {
                    for (b, entry) in row.iter_mut().enumerate() {
                        *entry = *entry + h[a] * h[b].conj() * t;
                    }
                }
                for (fa, ha) in avg.f.iter_mut().zip(h) {
                    *fa = *fa + ha * s.equalizer.conj() * s.weight;
                }
                avg.v = avg.v + s.weight.log2();
                avg.u = avg.u + s.weight;
            }
            avg.t = avg.t / m;
            avg.psi.iter_mut().flatten().for_each(|e| *e = *e / m);
            avg.f.iter_mut().for_each(|e| *e = *e / m);
            avg.v = avg.v / m;
            avg.u = avg.u / m;
            avg
        })
        .collect();
    AveragedCoefficients { streams }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_rates, random_channels};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_precoders(k: usize, n: usize, rng: &mut ChaCha8Rng) -> Precoders<f64> {
        let mut v = || c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        Precoders {
            common: (0..n).map(|_| v()).collect(),
            private: (0..k).map(|_| (0..n).map(|_| v()).collect()).collect(),
        }
    }

    #[test]
    fn worked_single_user_instance() {
        let ch = ChannelSet::new(vec![vec![c(1., 0.), c(0., 0.)]]).unwrap();
        let p = Precoders {
            common: vec![c(1., 0.), c(0., 0.)],
            private: vec![vec![c(0., 0.), c(1., 0.)]],
        };
        let s = MmseStream::from_power(stream_power(StreamId::Common(0), &ch, &p, 1.0));
        assert_eq!(s.total, 2.0);
        assert_eq!(s.equalizer, c(0.5, 0.0));
        assert_eq!(s.mse, 0.5);
        assert_eq!(s.weight, 2.0);
        assert!(s.wmse().abs() < 1e-15);
        assert_eq!(s.rate(), 1.0);
        assert!(s.rate_wmmse_gap() < 1e-15);
    }

    #[test]
    fn zero_precoders() {
        let ch = random_channels::<f64>(3, 2, 3).unwrap();
        let p = Precoders::zeros(3, 2);
        for (_, s) in SampleMmse::compute(&ch, &p, 1.0).streams {
            assert_eq!(s.equalizer, c(0.0, 0.0));
            assert_eq!(s.mse, 1.0);
            assert_eq!(s.weight, 1.0);
            assert_eq!(s.wmse(), 1.0);
            assert_eq!(s.rate(), 0.0);
        }
    }

    #[test]
    fn rates_agree_with_rate_breakdown() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = random_channels::<f64>(3, 4, 12).unwrap();
        let p = random_precoders(3, 4, &mut rng);
        let r = compute_rates(&ch, &p, 1.0).unwrap();
        let sm = SampleMmse::compute(&ch, &p, 1.0);
        for (id, s) in &sm.streams {
            let expected = match *id {
                StreamId::Common(k) => r.rate_common[k],
                StreamId::Private(k) => r.rate_private[k],
                StreamId::Wiretap { owner, eavesdropper } => r.rate_wiretap[owner][eavesdropper],
            };
            assert!((s.rate() - expected).abs() < 1e-12, "{id:?}");
        }
    }

    #[test]
    fn doubled_equalizer_is_worse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = random_channels::<f64>(2, 2, 6).unwrap();
        let p = random_precoders(2, 2, &mut rng);
        for (_, s) in SampleMmse::compute(&ch, &p, 1.0).streams {
            let xi = wmse(s.weight, mse(s.equalizer * 2.0, s.signal, s.total));
            assert!(xi > 1.0 - s.rate());
        }
    }

    #[test]
    fn averages_of_one_and_two_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = random_channels::<f64>(2, 2, 9).unwrap();
        let p = random_precoders(2, 2, &mut rng);
        let st = update_equalizers_and_weights(&p, std::slice::from_ref(&ch), 1.0);
        let one = compute_averages(&st, std::slice::from_ref(&ch));
        for avg in &one.streams {
            let s = st[0].get(avg.id);
            assert!((avg.t - s.weight * s.equalizer.norm_sqr()).abs() < 1e-14);
            assert!((avg.u - s.weight).abs() < 1e-14);
            // single-sample averaged WMSE equals the instantaneous one
            assert!((avg.wmse_at(&p, 1.0) - s.wmse()).abs() < 1e-12);
        }

        let twice = vec![ch.clone(), ch.clone()];
        let st2 = update_equalizers_and_weights(&p, &twice, 1.0);
        assert_eq!(compute_averages(&st2, &twice).streams.len(), one.streams.len());
        for (a, b) in compute_averages(&st2, &twice).streams.iter().zip(&one.streams) {
            assert!((a.t - b.t).abs() < 1e-14);
            assert!((a.v - b.v).abs() < 1e-14);
        }
    }

    #[test]
    fn two_sample_mean_of_t() {
        // t = ω|g|² equal to 1 and 3 on two samples gives t̄ = 2
        let ch = ChannelSet::new(vec![vec![c(1., 0.)]]).unwrap();
        let p1 = Precoders { common: vec![c(0., 0.)], private: vec![vec![c(1., 0.)]] };
        let sample = SampleMmse::compute(&ch, &p1, 1.0);
        let t1 = sample.get(StreamId::Private(0));
        // Private stream: T = 2, I = 1, g = 1/2, ω = 2 → t = 0.5
        assert!((t1.weight * t1.equalizer.norm_sqr() - 0.5).abs() < 1e-15);
        let mut s1 = sample.clone();
        let mut s2 = sample.clone();
        for (id, s) in s1.streams.iter_mut() {
            if *id == StreamId::Private(0) {
                s.weight = 4.0;
                s.equalizer = c(0.5, 0.0);
            }
        }
        for (id, s) in s2.streams.iter_mut() {
            if *id == StreamId::Private(0) {
                s.weight = 12.0;
                s.equalizer = c(0.5, 0.0);
            }
        }
        let avg = compute_averages(&vec![s1, s2], &[ch.clone(), ch]);
        assert!((avg.get(StreamId::Private(0)).t - 2.0).abs() < 1e-15);
    }

    #[test]
    fn linearized_wiretap_wmse_is_tangent_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let samples: Vec<_> = (0..5).map(|s| random_channels::<f64>(3, 2, 100 + s).unwrap()).collect();
        let p0 = random_precoders(3, 2, &mut rng);
        let st = update_equalizers_and_weights(&p0, &samples, 1.0);
        let avg = compute_averages(&st, &samples);
        for a in avg.streams.iter().filter(|a| matches!(a.id, StreamId::Wiretap { .. })) {
            let at = a.wmse_at(&p0, 1.0);
            assert!((a.wmse_linearized(&p0, &p0, 1.0) - at).abs() < 1e-10);
            for _ in 0..50 {
                let p = random_precoders(3, 2, &mut rng);
                assert!(a.wmse_linearized(&p, &p0, 1.0) <= a.wmse_at(&p, 1.0) + 1e-10);
            }
        }
    }
}
