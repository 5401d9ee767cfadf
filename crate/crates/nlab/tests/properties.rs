use nlab::field::{pgm_bytes, read_binary, write_binary, Field};
use nlab::geometry::{
    build_obstacle_mask, geodesic_distances, line_of_sight, GridDomain, ObstacleSpec,
};
use nlab::kernels::{KernelProfile, KernelStencil};
use nlab::nonlinearity::{
    default_kappa, extend_tilde, make_cubic_bistable, make_shifted, Nonlinearity,
};
use nlab::nonlocal_op::{OperatorContext, OperatorMode};
use nlab::solver::comparison_check;
use proptest::prelude::*;

fn annulus_op(r0: f64, r1: f64, n: usize, mode: OperatorMode) -> OperatorContext<f64> {
    let profile = KernelProfile::tent(2, 0.5).rescale(0.4).unwrap();
    let w = r1 + 4.5 * profile.support;
    let h = 2.0 * w / n as f64;
    let st = KernelStencil::discretize(&profile, h).unwrap();
    let d = build_obstacle_mask(&ObstacleSpec::annulus(r0, r1), w, h, profile.support).unwrap();
    OperatorContext::assemble(&st, &d, mode).unwrap()
}

fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constants_are_annihilated(c in -3.0f64..3.0, r0 in 0.15f64..0.3, gap in 0.1f64..0.3) {
        let op = annulus_op(r0, r0 + gap, 48, OperatorMode::Euclidean);
        let u = Field::constant(48, c);
        let lu = op.apply(&u).unwrap();
        prop_assert!(lu.values.iter().all(|v| v.abs() <= 1e-15 * (1.0 + c.abs())));
    }

    #[test]
    fn fast_and_direct_paths_agree(seed in any::<u64>(), r0 in 0.15f64..0.3, geodesic in any::<bool>()) {
        let mode = if geodesic { OperatorMode::Geodesic } else { OperatorMode::Euclidean };
        let op = annulus_op(r0, r0 + 0.2, 64, mode);
        let u = Field { n: 64, values: pseudo_random(op.len(), seed) };
        let a = op.apply(&u).unwrap();
        let b = op.apply_fast(&u).unwrap();
        let diff = a.max_diff(&b, |k| op.domain.active[k]);
        prop_assert!(diff <= 1e-12, "{}", diff);
    }

    #[test]
    fn weighted_sum_is_symmetric(seed in any::<u64>(), r0 in 0.15f64..0.3) {
        let op = annulus_op(r0, r0 + 0.25, 64, OperatorMode::Geodesic);
        let v = pseudo_random(op.len(), seed);
        let w = pseudo_random(op.len(), seed ^ 0x9e37);
        let mask = |x: &[f64]| -> Vec<f64> {
            x.iter().zip(&op.domain.active).map(|(&a, &on)| if on { a } else { 0.0 }).collect()
        };
        let (v, w) = (mask(&v), mask(&w));
        let sv = op.weighted_sum_direct(&v);
        let sw = op.weighted_sum_direct(&w);
        let lhs: f64 = sv.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = v.iter().zip(&sw).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn stencil_sums_to_one(eps in 0.1f64..1.0, cells in 4usize..16) {
        let profile = KernelProfile::tent(2, 0.5).rescale(eps).unwrap();
        let h = profile.support / cells as f64;
        let st = KernelStencil::discretize(&profile, h).unwrap();
        prop_assert!((st.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(st.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn comparison_never_contradicted(seed in any::<u64>(), k in 0.01f64..1.0, scale in 0.0f64..1.0) {
        let op = annulus_op(0.2, 0.45, 64, OperatorMode::Euclidean);
        let noise = pseudo_random(op.len(), seed);
        let values = (0..op.len())
            .map(|c| if op.domain.far[c] { -scale * noise[c].abs() } else { scale * noise[c] - 0.5 * scale })
            .collect();
        let w = Field { n: 64, values };
        let v = comparison_check(&op, &w, k).unwrap();
        prop_assert!(v.consistent(), "{:?}", v);
    }

    #[test]
    fn geodesic_dominates_euclidean(a in 0usize..2304, b in 0usize..2304) {
        let n = 48;
        let d = build_obstacle_mask(&ObstacleSpec::annulus(0.25, 0.5), 1.0, 2.0 / n as f64, 0.1).unwrap();
        prop_assume!(d.active[a] && d.active[b]);
        let df = geodesic_distances(&d, a, 10.0).unwrap();
        let (ai, aj) = d.ij(a);
        let (bi, bj) = d.ij(b);
        let e = ((ai as f64 - bi as f64).powi(2) + (aj as f64 - bj as f64).powi(2)).sqrt() * d.spacing;
        let g = df.get(b);
        prop_assert!(g >= e - 1e-12, "{} < {}", g, e);
        prop_assert_eq!(line_of_sight(&d, a, b), line_of_sight(&d, b, a));
    }

    #[test]
    fn cubic_zeros_and_sign(theta in 0.05f64..0.49, amp in 0.1f64..3.0, s in 0.0f64..1.0) {
        let f = make_cubic_bistable(theta, amp).unwrap();
        prop_assert_eq!(f.eval(0.0), 0.0);
        prop_assert!(f.eval(theta).abs() <= 1e-15);
        prop_assert_eq!(f.eval(1.0), 0.0);
        let v = f.eval(s);
        if s > 0.0 && s < theta { prop_assert!(v < 0.0); }
        if s > theta && s < 1.0 { prop_assert!(v > 0.0); }
    }

    #[test]
    fn tilde_dominates_base(theta in 0.1f64..0.49, amp in 0.1f64..3.0, s in 0.0f64..1.0) {
        let f = make_cubic_bistable(theta, amp).unwrap();
        let kappa = default_kappa(&f).unwrap();
        let t = extend_tilde(&f, kappa).unwrap();
        prop_assert!(t.eval(s) >= f.eval(s) - 1e-14);
        prop_assert_eq!(t.eval(0.0), 0.0);
        prop_assert!(t.eval(theta).abs() <= 1e-15);
    }

    #[test]
    fn shifted_lies_below_base(theta in 0.1f64..0.49, frac in 0.05f64..0.5, s in -0.2f64..1.0) {
        let f = make_cubic_bistable(theta, 1.0).unwrap();
        let delta = frac * theta * 0.5;
        if let Ok(g) = make_shifted(&f, delta) {
            let sf = Nonlinearity::Shifted(g);
            prop_assert!(sf.eval(s) <= f.eval(s) + 1e-15);
            prop_assert!(sf.eval(-delta).abs() <= 1e-15);
            prop_assert!(sf.eval(theta).abs() <= 1e-15);
        }
    }

    #[test]
    fn binary_round_trip(seed in any::<u64>(), n in 2usize..20) {
        let d = GridDomain::<f64>::free(n, 1.5, 1);
        let f = Field { n, values: pseudo_random(n * n, seed) };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_binary(&p, &f, &d).unwrap();
        let (hdr, g) = read_binary(&p).unwrap();
        prop_assert_eq!(hdr.count, n * n);
        prop_assert_eq!(f.values, g.values);
    }

    #[test]
    fn constant_field_renders_flat(c in 0.0f64..1.0, n in 1usize..24) {
        let f = Field::constant(n, c);
        let bytes = pgm_bytes(&f, 0.0, 1.0);
        let header = format!("P5\n{n} {n}\n255\n");
        prop_assert!(bytes.starts_with(header.as_bytes()));
        let pixels = &bytes[header.len()..];
        prop_assert_eq!(pixels.len(), n * n);
        let expect = (c * 255.0).round() as u8;
        prop_assert!(pixels.iter().all(|&p| p == expect));
    }
}
