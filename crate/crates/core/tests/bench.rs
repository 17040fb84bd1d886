use pixiso_core::bench::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn designed_patch_resonates_at_target(f0 in 1e9f64..10e9, eps_r in 1.0f64..10.0, h in 0.1e-3f64..1.6e-3) {
        let d = design_standard_patch(f0, eps_r, h).unwrap();
        let f = hammerstad_resonance(d.w, d.l, eps_r, h).unwrap();
        prop_assert!((f - f0).abs() <= DESIGN_TOL_HZ);
        prop_assert!(d.l > 0.0 && d.l < d.w * 2.0);
        prop_assert!(d.eps_eff >= 1.0 && d.eps_eff <= eps_r);
    }

    #[test]
    fn resonance_falls_with_length(w in 5e-3f64..40e-3, l in 5e-3f64..40e-3, k in 1.01f64..2.0) {
        let a = hammerstad_resonance(w, l, 2.2, 0.787e-3).unwrap();
        let b = hammerstad_resonance(w, l * k, 2.2, 0.787e-3).unwrap();
        prop_assert!(b < a);
    }
}

#[test]
fn reference_design_dimensions() {
    let d = design_standard_patch(F0_DEFAULT, 2.2, 0.787e-3).unwrap();
    assert!((d.w - 21.96e-3).abs() < 0.05e-3, "{}", d.w);
    assert!(d.l > 17.5e-3 && d.l < 19.0e-3, "{}", d.l);
}
