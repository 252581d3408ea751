//! Frequency sweeps, channel impulse responses and learner features.
//!
//! The impulse response of a link is the inverse DFT of its frequency sweep,
//! `h = F^{-1}{X}`, computed with a mixed-radix transform so any sweep length
//! works, normalized by `1/N`. Tap `b` of the result sits at delay
//! `b * bin_spacing_s` relative to the sweep's phase reference.
//! [`features_from_cirs`] then packs a set of link CIRs into the fixed-length
//! real vector the learners consume.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SweepConfig;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("CIR length mismatch: link {link_id} has {got} taps, expected {expected}")]
    CirLengthMismatch {
        link_id: usize,
        got: usize,
        expected: usize,
    },
    #[error("k_taps {k_taps} out of range 1..={max}")]
    KTapsOutOfRange { k_taps: usize, max: usize },
    #[error("no CIRs given")]
    Empty,
}

/// Complex channel observations of one link over the sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencySweep {
    pub samples: Vec<Complex64>,
    pub cfg: SweepConfig,
    pub link_id: usize,
}

/// Complex impulse response of one link.
#[derive(Clone, Debug, PartialEq)]
pub struct Cir {
    pub taps: Vec<Complex64>,
    /// Delay spacing between consecutive taps, seconds.
    pub bin_spacing_s: f64,
    pub link_id: usize,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Inverse DFT of a sweep, `1/N` normalized.
pub fn cir_from_sweep(sweep: &FrequencySweep) -> Cir {
    let n = sweep.samples.len();
    let mut taps = sweep.samples.clone();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(n);
        fft.process(&mut taps);
    });
    let scale = 1.0 / n as f64;
    for t in &mut taps {
        *t *= scale;
    }
    Cir {
        taps,
        bin_spacing_s: sweep.cfg.delay_bin_spacing(),
        link_id: sweep.link_id,
    }
}

/// How a complex CIR is turned into real-valued channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// One `|h|` channel per link.
    Magnitude,
    /// Two channels per link: real and imaginary parts.
    RealImag,
}

impl FeatureMode {
    pub fn channels_per_link(self) -> usize {
        match self {
            FeatureMode::Magnitude => 1,
            FeatureMode::RealImag => 2,
        }
    }
}

/// Per-link scaling applied to the feature channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalize {
    /// Divide each link's channels by that link's max `|h|` over the kept taps.
    PerLinkMax,
    None,
}

/// Shape metadata of a feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub num_links: usize,
    pub channels_per_link: usize,
    pub k_taps: usize,
    pub mode: FeatureMode,
    pub normalize: Normalize,
}

impl FeatureLayout {
    pub fn channel_count(&self) -> usize {
        self.num_links * self.channels_per_link
    }

    pub fn len(&self) -> usize {
        self.channel_count() * self.k_taps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fixed-length real features of one sensing sample.
///
/// Values are stored link-major, channel-minor: all channels of link 0 first,
/// each channel a contiguous run of `k_taps` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: FeatureLayout,
}

impl FeatureVector {
    /// The `ch`-th channel of link `link` as a slice.
    pub fn channel(&self, link: usize, ch: usize) -> &[f64] {
        let k = self.layout.k_taps;
        let start = (link * self.layout.channels_per_link + ch) * k;
        &self.values[start..start + k]
    }

    /// A new vector keeping only the given links, in the given order.
    pub fn restrict_links(&self, links: &[usize]) -> FeatureVector {
        let k = self.layout.k_taps;
        let cpl = self.layout.channels_per_link;
        let mut values = Vec::with_capacity(links.len() * cpl * k);
        for &link in links {
            let start = link * cpl * k;
            values.extend_from_slice(&self.values[start..start + cpl * k]);
        }
        FeatureVector {
            values,
            layout: FeatureLayout {
                num_links: links.len(),
                ..self.layout
            },
        }
    }
}

/// Truncates, rectifies and normalizes link CIRs into one feature vector.
///
/// Each CIR keeps its first `k_taps` taps. Magnitude mode emits `|h|`;
/// real-imag mode emits the real and imaginary parts as two channels. With
/// [`Normalize::PerLinkMax`] every channel of a link is divided by that
/// link's maximum `|h|` over the kept taps (links with an all-zero window are
/// left as zeros).
pub fn features_from_cirs(
    cirs: &[Cir],
    k_taps: usize,
    mode: FeatureMode,
    normalize: Normalize,
) -> Result<FeatureVector, DspError> {
    let first = cirs.first().ok_or(DspError::Empty)?;
    let n = first.taps.len();
    for c in cirs {
        if c.taps.len() != n {
            return Err(DspError::CirLengthMismatch {
                link_id: c.link_id,
                got: c.taps.len(),
                expected: n,
            });
        }
    }
    if k_taps == 0 || k_taps > n {
        return Err(DspError::KTapsOutOfRange { k_taps, max: n });
    }

    let layout = FeatureLayout {
        num_links: cirs.len(),
        channels_per_link: mode.channels_per_link(),
        k_taps,
        mode,
        normalize,
    };
    let mut values = Vec::with_capacity(layout.len());
    for cir in cirs {
        let window = &cir.taps[..k_taps];
        let scale = match normalize {
            Normalize::PerLinkMax => {
                let max = window.iter().map(|t| t.norm()).fold(0.0f64, f64::max);
                if max > 0.0 {
                    1.0 / max
                } else {
                    1.0
                }
            }
            Normalize::None => 1.0,
        };
        match mode {
            FeatureMode::Magnitude => {
                values.extend(window.iter().map(|t| t.norm() * scale));
            }
            FeatureMode::RealImag => {
                values.extend(window.iter().map(|t| t.re * scale));
                values.extend(window.iter().map(|t| t.im * scale));
            }
        }
    }
    Ok(FeatureVector { values, layout })
}
