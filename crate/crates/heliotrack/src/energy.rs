//! Clear-sky energy capture: how much direct beam a panel orientation
//! collects compared to another over a day.
//!
//! The model is deliberately minimal: constant direct-normal irradiance while
//! the sun is up, no diffuse component, no atmosphere. The collected power is
//! then proportional to the cosine of the angle between the panel normal and
//! the sun direction, so absolute irradiance cancels in every ratio this
//! module reports.

use chrono::{Duration as ChronoDuration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::sun::{solar_position, Site};
use crate::Result;

/// Mounting strategy of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PanelOrientation {
    /// Panel flat on the ground.
    HorizontalFixed,
    /// Fixed tilt toward a fixed compass direction.
    TiltedFixed { tilt_deg: f64, azimuth_deg: f64 },
    /// Ideal two-axis tracking: always normal to the sun.
    DualAxisTracked,
}

impl PanelOrientation {
    pub fn validate(&self) -> Result<()> {
        if let PanelOrientation::TiltedFixed { tilt_deg, .. } = self {
            if !tilt_deg.is_finite() || !(0.0..=90.0).contains(tilt_deg) {
                return Err(Error::param(format!(
                    "panel tilt_deg must be within [0, 90], got {tilt_deg}"
                )));
            }
        }
        Ok(())
    }

    /// Short name for tables.
    pub fn label(&self) -> String {
        match self {
            PanelOrientation::HorizontalFixed => "horizontal".to_string(),
            PanelOrientation::TiltedFixed {
                tilt_deg,
                azimuth_deg,
            } => format!("tilted({tilt_deg:.0} deg @ {azimuth_deg:.0} deg)"),
            PanelOrientation::DualAxisTracked => "tracked".to_string(),
        }
    }
}

/// Cosine-of-incidence factor in [0, 1]; zero when the sun is down or behind
/// the panel.
pub fn incidence_factor(
    orientation: &PanelOrientation,
    sun_azimuth_deg: f64,
    sun_elevation_deg: f64,
) -> f64 {
    if sun_elevation_deg <= 0.0 {
        return 0.0;
    }
    let el = sun_elevation_deg.to_radians();
    match orientation {
        PanelOrientation::DualAxisTracked => 1.0,
        PanelOrientation::HorizontalFixed => el.sin().max(0.0),
        PanelOrientation::TiltedFixed {
            tilt_deg,
            azimuth_deg,
        } => {
            let tilt = tilt_deg.to_radians();
            let daz = (sun_azimuth_deg - azimuth_deg).to_radians();
            (tilt.sin() * el.cos() * daz.cos() + tilt.cos() * el.sin()).max(0.0)
        }
    }
}

/// Integrated incidence of one orientation over a local day (unit: seconds of
/// equivalent full exposure).
pub fn daily_exposure(
    site: &Site,
    date: NaiveDate,
    orientation: &PanelOrientation,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param(format!("energy dt must be > 0, got {dt}")));
    }
    orientation.validate()?;
    site.validate()?;

    let local_midnight = date.and_hms_opt(0, 0, 0).expect("00:00 exists");
    let utc_midnight = chrono::DateTime::<chrono::Utc>::from_naive_utc_and_offset(
        local_midnight - ChronoDuration::milliseconds((site.utc_offset_hours * 3.6e6) as i64),
        chrono::Utc,
    );

    let n = (86_400.0 / dt).ceil() as usize;
    let mut total = 0.0;
    for k in 0..n {
        // Midpoint sampling.
        let t = (k as f64 + 0.5) * dt;
        let instant = utc_midnight + ChronoDuration::milliseconds((t * 1e3) as i64);
        let pos = solar_position(instant, site)?;
        total += incidence_factor(orientation, pos.azimuth_deg, pos.elevation_deg) * dt;
    }
    Ok(total)
}

/// Ratio of daily collected energy, orientation `a` over orientation `b`.
pub fn daily_energy_ratio(
    site: &Site,
    date: NaiveDate,
    a: &PanelOrientation,
    b: &PanelOrientation,
    dt: f64,
) -> Result<f64> {
    let num = daily_exposure(site, date, a, dt)?;
    let den = daily_exposure(site, date, b, dt)?;
    if den <= 0.0 {
        return Err(Error::ZeroEnergyBaseline);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn tracked_panel_is_always_fully_lit() {
        let t = PanelOrientation::DualAxisTracked;
        assert_eq!(incidence_factor(&t, 123.0, 41.0), 1.0);
        assert_eq!(incidence_factor(&t, 300.0, 0.5), 1.0);
        assert_eq!(incidence_factor(&t, 10.0, -1.0), 0.0);
    }

    #[test]
    fn horizontal_panel_follows_sin_elevation() {
        let h = PanelOrientation::HorizontalFixed;
        assert_relative_eq!(incidence_factor(&h, 0.0, 90.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(incidence_factor(&h, 0.0, 30.0), 0.5, max_relative = 1e-12);
        assert_eq!(incidence_factor(&h, 0.0, 0.0), 0.0);
    }

    #[test]
    fn tilted_panel_facing_the_sun_exactly_is_fully_lit() {
        // Sun at azimuth 180, elevation 50; panel tilted 40 toward 180.
        let p = PanelOrientation::TiltedFixed {
            tilt_deg: 40.0,
            azimuth_deg: 180.0,
        };
        assert_relative_eq!(incidence_factor(&p, 180.0, 50.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn tracked_over_tracked_is_unity() {
        let site = Site::new(0.0, 0.0, 0.0);
        let date = NaiveDate::from_ymd_opt(2024, 3, 20).unwrap();
        let r = daily_energy_ratio(
            &site,
            date,
            &PanelOrientation::DualAxisTracked,
            &PanelOrientation::DualAxisTracked,
            60.0,
        )
        .unwrap();
        assert_eq!(r, 1.0);
    }

    /// Closed-form oracle: with the sun crossing the zenith at the equator on
    /// the equinox, tracked collects ∫1 dh over the half-turn while horizontal
    /// collects ∫cos h dh, so the ratio is π/2.
    #[test]
    fn equator_equinox_ratio_is_half_pi() {
        let site = Site::new(0.0, 0.0, 0.0);
        let date = NaiveDate::from_ymd_opt(2024, 3, 20).unwrap();
        let r = daily_energy_ratio(
            &site,
            date,
            &PanelOrientation::DualAxisTracked,
            &PanelOrientation::HorizontalFixed,
            60.0,
        )
        .unwrap();
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, max_relative = 5e-3);
    }

    #[test]
    fn midlatitude_summer_gain_brackets_the_field_reports() {
        let site = Site::default();
        let date = NaiveDate::from_ymd_opt(2024, 6, 21).unwrap();
        let r = daily_energy_ratio(
            &site,
            date,
            &PanelOrientation::DualAxisTracked,
            &PanelOrientation::HorizontalFixed,
            60.0,
        )
        .unwrap();
        assert!((1.3..=1.8).contains(&r), "summer ratio {r}");
    }

    #[test]
    fn refinement_changes_the_ratio_below_a_tenth_percent() {
        let site = Site::default();
        let date = NaiveDate::from_ymd_opt(2024, 6, 21).unwrap();
        let args = (
            PanelOrientation::DualAxisTracked,
            PanelOrientation::HorizontalFixed,
        );
        let r60 = daily_energy_ratio(&site, date, &args.0, &args.1, 60.0).unwrap();
        let r30 = daily_energy_ratio(&site, date, &args.0, &args.1, 30.0).unwrap();
        assert!(
            ((r60 - r30) / r30).abs() < 1e-3,
            "refinement moved the ratio from {r60} to {r30}"
        );
    }

    #[test]
    fn polar_night_baseline_is_an_error() {
        let site = Site::new(78.0, 15.0, 1.0);
        let date = NaiveDate::from_ymd_opt(2024, 12, 21).unwrap();
        let err = daily_energy_ratio(
            &site,
            date,
            &PanelOrientation::DualAxisTracked,
            &PanelOrientation::HorizontalFixed,
            60.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroEnergyBaseline));
    }

    proptest! {
        /// The factor is a clamped cosine, and no fixed mount beats tracking.
        #[test]
        fn factor_bounds_and_tracking_dominance(
            az in 0.0f64..360.0,
            el in -10.0f64..90.0,
            tilt in 0.0f64..90.0,
            paz in 0.0f64..360.0,
        ) {
            let orientations = [
                PanelOrientation::HorizontalFixed,
                PanelOrientation::TiltedFixed { tilt_deg: tilt, azimuth_deg: paz },
                PanelOrientation::DualAxisTracked,
            ];
            let tracked = incidence_factor(&PanelOrientation::DualAxisTracked, az, el);
            for o in &orientations {
                let f = incidence_factor(o, az, el);
                prop_assert!((0.0..=1.0).contains(&f));
                prop_assert!(f <= tracked + 1e-12);
            }
        }
    }
}
