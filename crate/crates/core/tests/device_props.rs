use gfet_prva::device::{
    default_gate_grid, interpolate_current, linear_grid, synthesize_characteristic, CharacteristicLibrary,
    SweepBranch, SyntheticGfetParams, TransferCurve,
};
use proptest::prelude::*;

fn arb_curve() -> impl Strategy<Value = TransferCurve> {
    (4usize..40, 0.05f64..5.0, any::<bool>()).prop_flat_map(|(n, bias, fwd)| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(1e-9f64..1e-3, n),
            -10.0f64..0.0,
        )
            .prop_map(move |(steps, currents, start)| {
                let mut v = start;
                let points: Vec<_> = steps
                    .iter()
                    .zip(&currents)
                    .map(|(dv, i)| {
                        v += dv;
                        (v, *i)
                    })
                    .collect();
                let branch = if fwd { SweepBranch::Forward } else { SweepBranch::Reverse };
                TransferCurve::new(bias, branch, &points).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn interpolation_stays_within_current_range(curve in arb_curve(), v in -20.0f64..20.0) {
        let (lo, hi) = curve.current_range();
        let i = interpolate_current(&curve, v);
        prop_assert!(i >= lo && i <= hi, "{i} outside [{lo}, {hi}]");
    }

    #[test]
    fn interpolation_is_lipschitz(curve in arb_curve(), v in -12.0f64..12.0, eps in -0.5f64..0.5) {
        let slope = curve.max_slope();
        let di = (interpolate_current(&curve, v + eps) - interpolate_current(&curve, v)).abs();
        prop_assert!(di <= slope * eps.abs() * (1.0 + 1e-9) + 1e-18);
    }

    #[test]
    fn csv_round_trip_keeps_nine_digits(curves in prop::collection::vec(arb_curve(), 1..4)) {
        // distinct keys
        let curves: Vec<_> = curves
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let pts: Vec<_> = c.points().collect();
                TransferCurve::new(0.1 * (k + 1) as f64, c.branch(), &pts).unwrap()
            })
            .collect();
        let lib = CharacteristicLibrary::new(curves).unwrap();
        let mut buf = Vec::new();
        lib.write_csv(&mut buf).unwrap();
        let back = CharacteristicLibrary::load_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), lib.len());
        for (a, b) in lib.curves().zip(back.curves()) {
            prop_assert_eq!(a.branch(), b.branch());
            prop_assert_eq!(a.v_ds_bias(), b.v_ds_bias());
            prop_assert_eq!(a.len(), b.len());
            for ((va, ia), (vb, ib)) in a.points().zip(b.points()) {
                prop_assert!((va - vb).abs() <= 5e-9 * va.abs().max(1e-300));
                prop_assert!((ia - ib).abs() <= 5e-9 * ia);
            }
        }
    }

    #[test]
    fn synthetic_curves_are_ambipolar(
        v_dirac_step in -30i32..30,
        i_min in 1e-7f64..1e-4,
        gp in 1e-6f64..1e-3,
        gn in 1e-6f64..1e-3,
        scale in 0.0f64..3.0,
        bias in 0.1f64..2.0,
    ) {
        let grid = default_gate_grid();
        // Dirac point on a grid knot
        let v_dirac = grid[(100 + v_dirac_step) as usize];
        let p = SyntheticGfetParams { v_dirac, i_min, transconductance_p: gp, transconductance_n: gn, bias_depth_scale: scale };
        let curve = synthesize_characteristic(&p, bias, &grid).unwrap();
        let pts: Vec<_> = curve.points().collect();
        let min_idx = pts.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0;
        prop_assert!((pts[min_idx].0 - v_dirac).abs() < 1e-9);
        prop_assert!(pts[..=min_idx].windows(2).all(|w| w[1].1 < w[0].1));
        prop_assert!(pts[min_idx..].windows(2).all(|w| w[1].1 > w[0].1));
    }
}

#[test]
fn dirac_current_formula() {
    let p = SyntheticGfetParams::default();
    for bias in [0.2, 0.8, 1.0] {
        let c = synthesize_characteristic(&p, bias, &default_gate_grid()).unwrap();
        let expect = p.i_min * (1.0 + p.bias_depth_scale * bias);
        assert!((c.current_at(p.v_dirac) - expect).abs() < 1e-18);
    }
}

#[test]
fn deeper_valley_with_bias() {
    let p = SyntheticGfetParams::default();
    let grid = linear_grid(-10.0, 10.0, 41);
    let low = synthesize_characteristic(&p, 0.4, &grid).unwrap();
    let high = synthesize_characteristic(&p, 1.0, &grid).unwrap();
    let depth = |c: &TransferCurve| {
        let (lo, hi) = c.current_range();
        hi - lo
    };
    assert!(depth(&high) > depth(&low));
}

#[test]
fn micro_ampere_unit_is_scaled() {
    let csv = "v_gs,i_ds,v_ds,branch,unit_i\n-1,5,1,F,uA\n0,2,1,F,uA\n1,4,1,F,uA\n2,8,1,F,uA\n";
    let lib = CharacteristicLibrary::load_csv(csv.as_bytes()).unwrap();
    let c = lib.get(1.0, SweepBranch::Forward).unwrap();
    assert!((c.current_at(0.0) - 2e-6).abs() < 1e-20);
    assert_eq!(c.dirac_point().0, 0.0);
}
