//! Physical and OFDM-grid constants shared across the crate.

/// Subcarrier spacing of 20 MHz 802.11n channels, in hertz.
pub const SUBCARRIER_SPACING_HZ: f64 = 312_500.0;

/// Speed of light in vacuum, in metres per second.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Number of populated (data + pilot) subcarriers on the 20 MHz 802.11n grid.
pub const HT20_TONE_COUNT: usize = 56;

/// Highest populated subcarrier index on the 20 MHz 802.11n grid.
pub const HT20_MAX_INDEX: i32 = 28;

/// Default centre frequency used by examples and presets: 2.412 GHz
/// (Wi-Fi channel 1).
pub const DEFAULT_CENTER_FREQ_HZ: f64 = 2_412_000_000.0;
