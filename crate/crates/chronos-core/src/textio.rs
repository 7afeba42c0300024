//! Text formatting shared by the CSV writers.

/// Format with 17 significant digits, enough for a bit-faithful f64 round
/// trip through text.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::sig17;

    #[test]
    fn round_trips_exactly() {
        for x in [
            0.1,
            -3.0,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            let back: f64 = sig17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {}", sig17(x));
        }
    }
}
