//! Published measurements of the hardware implementation. These are report
//! context only; nothing here is a target for the simulator.

use crate::golden::Precision;

/// Memory clock shared by every published configuration.
pub const F_MEM_HZ: f64 = 312e6;

/// One implementation configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedConfig {
    pub version: &'static str,
    pub precision: Precision,
    pub n_bar: usize,
    pub par: usize,
    /// `None` for the configuration that failed implementation.
    pub f_kernel_hz: Option<f64>,
    /// Compute latency numerator and the clock it was divided by.
    pub compute_latency: Option<(u64, f64)>,
    pub e2e_throughput_eps: Option<f64>,
    pub e2e_latency_s: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
const fn cfg(
    version: &'static str,
    precision: Precision,
    n_bar: usize,
    par: usize,
    f_kernel_hz: Option<f64>,
    compute_latency: Option<(u64, f64)>,
    e2e_throughput_eps: Option<f64>,
    e2e_latency_s: Option<f64>,
) -> PublishedConfig {
    PublishedConfig {
        version,
        precision,
        n_bar,
        par,
        f_kernel_hz,
        compute_latency,
        e2e_throughput_eps,
        e2e_latency_s,
    }
}

/// Configurations A to F. The 8-bit, 64-point compute latency was published
/// as `316 / 260 MHz` although that version is clocked at 280 MHz.
pub const PUBLISHED: [PublishedConfig; 6] = [
    cfg(
        "A",
        Precision::Fixed8,
        32,
        2,
        Some(290e6),
        Some((203, 290e6)),
        Some(13_521_610.312_868_804),
        Some(1.045e-6),
    ),
    cfg(
        "B",
        Precision::Fixed16,
        32,
        2,
        Some(260e6),
        Some((244, 260e6)),
        Some(13_480_890.278_520_592),
        Some(1.331e-6),
    ),
    cfg(
        "C",
        Precision::Fixed8,
        64,
        2,
        Some(280e6),
        Some((316, 260e6)),
        Some(6_849_612.869_780_431),
        Some(1.514e-6),
    ),
    cfg(
        "D",
        Precision::Fixed16,
        64,
        2,
        Some(249e6),
        Some((354, 249e6)),
        Some(6_771_423.139_553_146),
        Some(1.818_99e-6),
    ),
    cfg(
        "E",
        Precision::Fixed8,
        128,
        1,
        Some(127e6),
        Some((940, 127e6)),
        Some(991_185.562_956_375_7),
        Some(7.598e-6),
    ),
    cfg("F", Precision::Fixed16, 128, 1, None, None, None, None),
];

/// GPU baseline by event size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpuBaseline {
    pub n_bar: usize,
    pub e2e_throughput_eps: f64,
    pub e2e_latency_s: f64,
    /// Published end-to-end speedup of the 8-bit version over this baseline.
    pub speedup: f64,
}

pub const GPU_BASELINE: [GpuBaseline; 3] = [
    GpuBaseline {
        n_bar: 32,
        e2e_throughput_eps: 3_913_289.728,
        e2e_latency_s: 51.2695e-6,
        speedup: 3.46,
    },
    GpuBaseline {
        n_bar: 64,
        e2e_throughput_eps: 1_305_927.0,
        e2e_latency_s: 50.293e-6,
        speedup: 5.25,
    },
    GpuBaseline {
        n_bar: 128,
        e2e_throughput_eps: 412_736.512,
        e2e_latency_s: 54.4434e-6,
        speedup: 2.40,
    },
];

pub fn published(version: &str) -> Option<&'static PublishedConfig> {
    PUBLISHED
        .iter()
        .find(|c| c.version.eq_ignore_ascii_case(version))
}

/// Published configuration matching an architecture point, if any.
pub fn published_for(
    precision: Precision,
    n_bar: usize,
    par: usize,
) -> Option<&'static PublishedConfig> {
    PUBLISHED
        .iter()
        .find(|c| c.precision == precision && c.n_bar == n_bar && c.par == par)
}

pub fn gpu_baseline(n_bar: usize) -> Option<&'static GpuBaseline> {
    GPU_BASELINE.iter().find(|g| g.n_bar == n_bar)
}
