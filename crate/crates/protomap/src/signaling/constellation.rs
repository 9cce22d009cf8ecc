//! ASK constellations, Gray labeling and input distributions.

use super::Error;

/// Binary reflected Gray code over `2^m` values: the classic sequence in
/// which neighboring codes differ in exactly one bit.
pub fn brgc_codes(m: usize) -> Vec<u32> {
    assert!((1..=8).contains(&m), "label width out of range");
    (0..(1u32 << m)).map(|i| i ^ (i >> 1)).collect()
}

/// An M-ASK constellation with an m-bit labeling.
///
/// Points are the unscaled odd amplitudes `-(M-1), ..., -1, +1, ..., (M-1)`
/// in ascending order. Gray codes are assigned in descending amplitude
/// order, which makes bit level 1 the sign indicator (label bit 0 on
/// positive amplitudes) and leaves the remaining bits mirror-symmetric in
/// the amplitude, the layout systematic shaped transmission relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    m: usize,
    points: Vec<f64>,
    labels: Vec<u32>,
}

impl Constellation {
    pub fn ask(m: usize) -> Self {
        let size = 1usize << m;
        let points: Vec<f64> = (0..size)
            .map(|k| (2.0 * k as f64) - (size as f64 - 1.0))
            .collect();
        let gray = brgc_codes(m);
        let labels: Vec<u32> = (0..size).map(|k| gray[size - 1 - k]).collect();
        Constellation { m, points, labels }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Unscaled amplitude of point `k` (ascending order).
    pub fn point(&self, k: usize) -> f64 {
        self.points[k]
    }

    pub fn label(&self, k: usize) -> u32 {
        self.labels[k]
    }

    /// Bit `j` (1-based, bit 1 first) of the label of point `k`.
    pub fn label_bit(&self, k: usize, j: usize) -> bool {
        debug_assert!((1..=self.m).contains(&j));
        (self.labels[k] >> (self.m - j)) & 1 == 1
    }

    /// Point index carrying `label`.
    pub fn point_with_label(&self, label: u32) -> usize {
        self.labels.iter().position(|&l| l == label).expect("label")
    }

    /// Positive amplitudes in ascending order (unscaled).
    pub fn amplitudes(&self) -> Vec<f64> {
        self.points.iter().cloned().filter(|&x| x > 0.0).collect()
    }

    /// Index of the point with amplitude `amp` and the given sign bit.
    pub fn point_with_amplitude(&self, amp: f64, sign_bit: bool) -> usize {
        let target = if sign_bit { -amp } else { amp };
        self.points
            .iter()
            .position(|&x| (x - target).abs() < 1e-9)
            .expect("amplitude")
    }

    /// The amplitude-identifying label bits (levels 2..m) shared by `+a`
    /// and `-a`, packed with bit level 2 as the most significant bit.
    pub fn amplitude_label(&self, amp_index: usize) -> u32 {
        let amp = self.amplitudes()[amp_index];
        let k = self.point_with_amplitude(amp, false);
        self.labels[k] & ((1 << (self.m - 1)) - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionMode {
    Uniform,
    MaxwellBoltzmann { nu: f64 },
}

/// A symbol distribution over the constellation points, with derived
/// amplitude and sign views.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    probs: Vec<f64>,
    mode: DistributionMode,
}

impl InputDistribution {
    pub fn uniform(size: usize) -> Self {
        InputDistribution {
            probs: vec![1.0 / size as f64; size],
            mode: DistributionMode::Uniform,
        }
    }

    /// Maxwell-Boltzmann family `P(x) ∝ exp(-nu x²)` over the unscaled
    /// points; symmetric by construction.
    pub fn maxwell_boltzmann(constellation: &Constellation, nu: f64) -> Result<Self, Error> {
        if nu < 0.0 || !nu.is_finite() {
            return Err(Error::InvalidParameter("nu must be non-negative".into()));
        }
        let weights: Vec<f64> = (0..constellation.size())
            .map(|k| {
                let x = constellation.point(k);
                (-nu * x * x).exp()
            })
            .collect();
        let z: f64 = weights.iter().sum();
        Ok(InputDistribution {
            probs: weights.into_iter().map(|w| w / z).collect(),
            mode: DistributionMode::MaxwellBoltzmann { nu },
        })
    }

    pub fn mode(&self) -> DistributionMode {
        self.mode
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    /// Amplitude marginal over the positive amplitudes, ascending.
    pub fn amplitude_probs(&self, constellation: &Constellation) -> Vec<f64> {
        constellation
            .amplitudes()
            .iter()
            .map(|&a| {
                (0..constellation.size())
                    .filter(|&k| (constellation.point(k).abs() - a).abs() < 1e-9)
                    .map(|k| self.probs[k])
                    .sum()
            })
            .collect()
    }

    /// Entropy of the amplitude marginal in bits.
    pub fn amplitude_entropy(&self, constellation: &Constellation) -> f64 {
        entropy_bits(&self.amplitude_probs(constellation))
    }

    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }
}

pub(crate) fn entropy_bits(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// A complete signaling specification: constellation, labeling, input
/// distribution, shaping mode and power normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Signaling {
    constellation: Constellation,
    distribution: InputDistribution,
    scale: f64,
    pas: bool,
    dm_rate: Option<f64>,
}

impl Signaling {
    /// Uniformly distributed `2^m`-ASK.
    pub fn uniform_ask(m: usize) -> Self {
        let constellation = Constellation::ask(m);
        let distribution = InputDistribution::uniform(constellation.size());
        Self::assemble(constellation, distribution, false, None)
    }

    /// Maxwell-Boltzmann shaped `2^m`-ASK for shaped transmission.
    pub fn pas_ask(m: usize, nu: f64, dm_rate: f64) -> Result<Self, Error> {
        let constellation = Constellation::ask(m);
        let distribution = InputDistribution::maxwell_boltzmann(&constellation, nu)?;
        Ok(Self::assemble(constellation, distribution, true, Some(dm_rate)))
    }

    /// Shaped `2^m`-ASK whose Maxwell-Boltzmann parameter is solved so the
    /// matcher achieves `dm_rate` bits/amplitude at the given blocklength.
    pub fn pas_ask_for_rate(m: usize, dm_rate: f64, dm_blocklength: u64) -> Result<Self, Error> {
        let constellation = Constellation::ask(m);
        let nu = super::ccdm::solve_nu(dm_rate, &constellation, dm_blocklength)?;
        Self::pas_ask(m, nu, dm_rate)
    }

    fn assemble(
        constellation: Constellation,
        distribution: InputDistribution,
        pas: bool,
        dm_rate: Option<f64>,
    ) -> Self {
        let power: f64 = (0..constellation.size())
            .map(|k| {
                let x = constellation.point(k);
                distribution.prob(k) * x * x
            })
            .sum();
        Signaling {
            constellation,
            distribution,
            scale: 1.0 / power.sqrt(),
            pas,
            dm_rate,
        }
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn distribution(&self) -> &InputDistribution {
        &self.distribution
    }

    pub fn is_pas(&self) -> bool {
        self.pas
    }

    pub fn dm_rate(&self) -> Option<f64> {
        self.dm_rate
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.constellation.bits_per_symbol()
    }

    /// Normalization factor making E[X²] = 1 under the active distribution.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Transmitted value of point `k`.
    pub fn scaled_point(&self, k: usize) -> f64 {
        self.scale * self.constellation.point(k)
    }

    /// Source entropy H(X) = H(B) in bits.
    pub fn entropy(&self) -> f64 {
        self.distribution.entropy()
    }

    /// Prior probability that label bit `j` equals `b`.
    pub fn bit_prior(&self, j: usize, b: bool) -> f64 {
        (0..self.constellation.size())
            .filter(|&k| self.constellation.label_bit(k, j) == b)
            .map(|k| self.distribution.prob(k))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gray_sequences() {
        assert_eq!(brgc_codes(1), vec![0b0, 0b1]);
        assert_eq!(brgc_codes(2), vec![0b00, 0b01, 0b11, 0b10]);
    }

    #[test]
    fn gray_adjacency_all_pairs() {
        for m in 1..=4 {
            let c = Constellation::ask(m);
            for k in 0..c.size() - 1 {
                let diff = (c.label(k) ^ c.label(k + 1)).count_ones();
                assert_eq!(diff, 1, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn sign_bit_convention() {
        let c = Constellation::ask(3);
        for k in 0..c.size() {
            assert_eq!(c.label_bit(k, 1), c.point(k) < 0.0);
        }
        // amplitude bits are mirror symmetric
        for k in 0..c.size() / 2 {
            let neg = c.label(k) & 0b011;
            let pos = c.label(c.size() - 1 - k) & 0b011;
            assert_eq!(neg, pos);
        }
    }

    #[test]
    fn mb_limits() {
        let c = Constellation::ask(4);
        let d = InputDistribution::maxwell_boltzmann(&c, 0.0).unwrap();
        for k in 0..16 {
            assert_relative_eq!(d.prob(k), 1.0 / 16.0, epsilon = 1e-12);
        }
        // large nu concentrates on the innermost pair
        let d = InputDistribution::maxwell_boltzmann(&c, 10.0).unwrap();
        let inner: f64 = (0..16)
            .filter(|&k| c.point(k).abs() < 1.5)
            .map(|k| d.prob(k))
            .sum();
        assert!(inner > 0.999999);
        let p_plus1 = d.prob(c.point_with_amplitude(1.0, false));
        assert_relative_eq!(p_plus1, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn mb_symmetric_and_normalized_power() {
        let s = Signaling::pas_ask(4, 0.03, 2.152).unwrap();
        let c = s.constellation();
        for k in 0..c.size() / 2 {
            assert_relative_eq!(
                s.distribution().prob(k),
                s.distribution().prob(c.size() - 1 - k),
                epsilon = 1e-14
            );
        }
        let power: f64 = (0..c.size())
            .map(|k| s.distribution().prob(k) * s.scaled_point(k) * s.scaled_point(k))
            .sum();
        assert_relative_eq!(power, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn uniform_power_normalization() {
        let s = Signaling::uniform_ask(3);
        let power: f64 = (0..8)
            .map(|k| s.distribution().prob(k) * s.scaled_point(k) * s.scaled_point(k))
            .sum();
        assert_relative_eq!(power, 1.0, epsilon = 1e-12);
        // uniform 8-ASK: E[X²] = (M²-1)/3 = 21 before scaling
        assert_relative_eq!(s.scale(), (21.0f64).sqrt().recip(), epsilon = 1e-12);
    }

    #[test]
    fn amplitude_labels_identify_amplitudes() {
        let c = Constellation::ask(4);
        let amps = c.amplitudes();
        assert_eq!(amps, vec![1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0]);
        let mut seen = std::collections::BTreeSet::new();
        for a in 0..amps.len() {
            assert!(seen.insert(c.amplitude_label(a)));
        }
    }
}
