use approx::assert_abs_diff_eq;
use iab_core::link_model::*;
use iab_core::scenario::Point;
use proptest::prelude::*;

proptest! {
    #[test]
    fn snr_strictly_decreases_with_distance(d in 1.0f64..5000.0, extra in 0.5f64..500.0) {
        let radio = RadioConfig::default();
        prop_assert!(link_snr_db(d + extra, &radio).unwrap() < link_snr_db(d, &radio).unwrap());
    }

    #[test]
    fn predicates_are_downward_closed(d in 0.0f64..600.0, shrink in 0.0f64..1.0, snr_mode in any::<bool>()) {
        let radio = RadioConfig {
            coverage_mode: if snr_mode { CoverageMode::Snr } else { CoverageMode::Radius },
            ..RadioConfig::default()
        };
        let origin = Point::new(0.0, 0.0);
        let far = Point::new(d, 0.0);
        let near = Point::new(d * shrink, 0.0);
        if covers(origin, far, &radio) {
            prop_assert!(covers(origin, near, &radio));
        }
        if backhaul_reachable(origin, far, &radio) {
            prop_assert!(backhaul_reachable(origin, near, &radio));
        }
    }

    #[test]
    fn noise_scales_by_ten_db_per_decade(w in 1e3f64..1e11) {
        let step = thermal_noise_dbm(10.0 * w).unwrap() - thermal_noise_dbm(w).unwrap();
        prop_assert!((step - 10.0).abs() < 1e-9);
    }

    #[test]
    fn budget_matches_direct_formula(
        pt in -10.0f64..40.0,
        gt in 0.0f64..30.0,
        gr in 0.0f64..30.0,
        w in 1e6f64..4e9,
        f in 20.0f64..100.0,
        atm in 0.0f64..20.0,
        rain in 0.0f64..20.0,
        d in 1.0f64..3000.0,
    ) {
        let radio = RadioConfig {
            tx_power_dbm: pt,
            tx_gain_db: gt,
            rx_gain_db: gr,
            bandwidth_hz: w,
            frequency_ghz: f,
            atmospheric_atten_db_per_km: atm,
            rain_atten_db_per_km: rain,
            ..RadioConfig::default()
        };
        let km = d / 1000.0;
        let expected = pt + gt + gr
            - (20.0 * km.log10() + 20.0 * f.log10() + 92.45 + (atm + rain) * km)
            - (-174.0 + 10.0 * w.log10());
        prop_assert!((link_snr_db(d, &radio).unwrap() - expected).abs() < 1e-9);
    }
}

#[test]
fn one_gigahertz_noise_floor() {
    assert_abs_diff_eq!(thermal_noise_dbm(1e9).unwrap(), -84.0, epsilon = 1e-12);
}
