//! OFDM radar resolution and SINR-dependent velocity accuracy.

use crate::error::{Error, Result};
use crate::num::{Real, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct SensingParams<T> {
    pub n_subcarriers: usize,
    pub carrier_hz: T,
    pub bandwidth_hz: T,
    /// Spacing between consecutive frames of a slot (s).
    pub frame_period_s: T,
    pub n_frames_max: usize,
    pub v_max: T,
    pub d_max: T,
    /// Optional separate period for the velocity-resolution formula; falls back
    /// to `frame_period_s`.
    pub velocity_period_s: Option<T>,
}

impl<T: Real> SensingParams<T> {
    /// Frames tile the slot when the maximum frame count is used.
    pub fn for_slot(slot_s: T, n_frames_max: usize) -> Self {
        Self {
            n_subcarriers: 512,
            carrier_hz: T::lit(60e9),
            bandwidth_hz: T::lit(2.16e9),
            frame_period_s: slot_s / T::from_count(n_frames_max as u64),
            n_frames_max,
            v_max: T::lit(50.0),
            d_max: T::lit(50.0),
            velocity_period_s: None,
        }
    }

    pub fn subcarrier_spacing_hz(&self) -> T {
        self.bandwidth_hz / T::from_count(self.n_subcarriers as u64)
    }

    fn check_frames(&self, n_frames: usize) -> Result<()> {
        if n_frames == 0 || n_frames > self.n_frames_max {
            return Err(Error::Domain(format!(
                "frame count {n_frames} outside 1..={}",
                self.n_frames_max
            )));
        }
        Ok(())
    }
}

impl<T: Real> Default for SensingParams<T> {
    fn default() -> Self {
        Self::for_slot(T::lit(0.002), 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution<T> {
    pub delta_d_m: T,
    pub delta_v_ms: T,
}

/// Range and velocity resolution for `n_frames` frames.
pub fn resolutions<T: Real>(n_frames: usize, params: &SensingParams<T>) -> Result<Resolution<T>> {
    params.check_frames(n_frames)?;
    let c = T::lit(SPEED_OF_LIGHT);
    let two = T::lit(2.0);
    let period = params.velocity_period_s.unwrap_or(params.frame_period_s);
    Ok(Resolution {
        delta_d_m: c / (two * T::from_count(params.n_subcarriers as u64) * params.subcarrier_spacing_hz()),
        delta_v_ms: c / (two * T::from_count(n_frames as u64) * params.carrier_hz * period),
    })
}

/// Velocity-estimate RMSE (m/s): `c / (2 n T_d f_c sqrt(2 eta))`.
pub fn velocity_rmse<T: Real>(n_frames: usize, eta_linear: T, params: &SensingParams<T>) -> Result<T> {
    if n_frames == 0 {
        return Err(Error::Domain("frame count must be at least 1".into()));
    }
    if !(eta_linear > T::zero()) {
        return Err(Error::Domain(format!("SINR must be positive, got {eta_linear}")));
    }
    let two = T::lit(2.0);
    Ok(T::lit(SPEED_OF_LIGHT)
        / (two
            * T::from_count(n_frames as u64)
            * params.frame_period_s
            * params.carrier_hz
            * (two * eta_linear).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_frame_period() {
        let p = SensingParams::<f64>::default();
        assert!((p.frame_period_s - 2e-5).abs() < 1e-18);
        assert!((p.subcarrier_spacing_hz() - 4.21875e6).abs() < 1e-6);
    }

    #[test]
    fn resolution_examples() {
        let p = SensingParams::<f64>::default();
        let r = resolutions(100, &p).unwrap();
        assert!((r.delta_d_m - 3e8 / (2.0 * 512.0 * 4.21875e6)).abs() < 1e-12);
        assert!((r.delta_d_m - 0.06944).abs() < 1e-5);
        assert!((r.delta_v_ms - 1.25).abs() < 1e-12);
        let half = resolutions(50, &p).unwrap();
        assert!((half.delta_v_ms - 2.0 * r.delta_v_ms).abs() < 1e-12);
        assert_eq!(half.delta_d_m, r.delta_d_m);
        assert!(resolutions(0, &p).is_err());
        assert!(resolutions(101, &p).is_err());
    }

    #[test]
    fn velocity_period_override() {
        let mut p = SensingParams::<f64>::default();
        p.velocity_period_s = Some(4e-5);
        assert!((resolutions(100, &p).unwrap().delta_v_ms - 0.625).abs() < 1e-12);
        // The RMSE keeps using the frame period.
        assert!((velocity_rmse(1, 1.0, &p).unwrap() - 88.388_347_648).abs() < 1e-6);
    }

    #[test]
    fn rmse_examples() {
        let p = SensingParams::<f64>::default();
        assert!((velocity_rmse(100, 190.1, &p).unwrap() - 0.0641).abs() < 1e-4);
        // 3e8 / (2 · 2e-5 · 6e10 · sqrt 2)
        assert!((velocity_rmse(1, 1.0, &p).unwrap() - 88.4).abs() < 0.05);
        let a = velocity_rmse(7, 3.0, &p).unwrap();
        let b = velocity_rmse(7, 12.0, &p).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(velocity_rmse(10, 0.0, &p).is_err());
        assert!(velocity_rmse(10, -1.0, &p).is_err());
        assert!(velocity_rmse(0, 1.0, &p).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rmse_strictly_decreasing(n in 1usize..100, eta in 1e-4f64..1e4) {
                let p = SensingParams::<f64>::default();
                prop_assert!(velocity_rmse(n + 1, eta, &p).unwrap() < velocity_rmse(n, eta, &p).unwrap());
                prop_assert!(velocity_rmse(n, eta * 1.5, &p).unwrap() < velocity_rmse(n, eta, &p).unwrap());
            }

            #[test]
            fn rmse_scaling_identity(n in 1usize..=100, eta in 1e-4f64..1e4) {
                let p = SensingParams::<f64>::default();
                let k = velocity_rmse(n, eta, &p).unwrap() * n as f64 * (2.0 * eta).sqrt();
                let k0 = velocity_rmse(1, 0.5, &p).unwrap();
                prop_assert!((k / k0 - 1.0).abs() < 1e-12);
            }

            #[test]
            fn range_resolution_ignores_frames(n in 1usize..=100) {
                let p = SensingParams::<f64>::default();
                prop_assert_eq!(resolutions(n, &p).unwrap().delta_d_m, resolutions(1, &p).unwrap().delta_d_m);
            }
        }
    }
}
