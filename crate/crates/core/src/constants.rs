//! Physical constants (exact SI values).

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Responsivity of a unity-quantum-efficiency photodiode at `wavelength` (m), in A/W.
pub fn ideal_responsivity(wavelength: f64) -> f64 {
    wavelength * ELEMENTARY_CHARGE / (PLANCK * SPEED_OF_LIGHT)
}

/// Photon energy at `wavelength` (m), in J.
pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn responsivity_at_2070nm() {
        // lambda q / h c evaluated at 30 digits
        let r = ideal_responsivity(2.07e-6);
        assert!((r - 1.669_567_595_031_286_8).abs() < 1e-12);
    }
}
