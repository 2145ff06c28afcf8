//! Temperature and power unit conversions used at the I/O boundary.
//!
//! Everything inside the engine is SI with temperatures in °C.

pub fn fahrenheit_to_celsius(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}

pub fn celsius_to_fahrenheit(c: f64) -> f64 {
    c * 9.0 / 5.0 + 32.0
}

/// Converts a temperature *difference* in kelvin to degrees Fahrenheit.
pub fn kelvin_delta_to_fahrenheit(dk: f64) -> f64 {
    dk * 9.0 / 5.0
}

pub fn fahrenheit_delta_to_kelvin(df: f64) -> f64 {
    df * 5.0 / 9.0
}

pub fn kilowatts_to_watts(kw: f64) -> f64 {
    kw * 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setpoint_conversion() {
        assert!((fahrenheit_to_celsius(71.0) - 21.666_666_666_666_668).abs() < 1e-12);
        assert!((celsius_to_fahrenheit(fahrenheit_to_celsius(85.0)) - 85.0).abs() < 1e-12);
    }

    #[test]
    fn deltas() {
        assert!((kelvin_delta_to_fahrenheit(1.0) - 1.8).abs() < 1e-15);
        assert!((fahrenheit_delta_to_kelvin(1.0) - 0.555_555_555_555_555_6).abs() < 1e-15);
    }
}
