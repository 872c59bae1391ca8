mod common;

use std::cmp::Ordering;

use proptest::prelude::*;

use common::*;
use ssbplan_core::association::{coverage_sinr_linear, rsrp_row, select_serving_from_row};
use ssbplan_core::codebook::dft_subbook;
use ssbplan_core::config::RadioConfig;
use ssbplan_core::ega::{apply_individual, Fitness, Genome};
use ssbplan_core::evaluation::{achievable_rate, percentile, CdfSummary};
use ssbplan_core::mama::{cross_corr_frobenius, inv_condition_number};
use ssbplan_core::scenario::{discretize_highway, hex_site_positions, site_count};
use ssbplan_core::{Vec3, C64};

fn fitness() -> impl Strategy<Value = Fitness> {
    (-30.0f64..30.0, 0usize..4).prop_map(|(s, v)| Fitness {
        value: if v == 0 { s } else { f64::NEG_INFINITY },
        violations: v,
        min_sinr_db: s,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn percentile_is_monotone_and_bounded(xs in prop::collection::vec(-100.0f64..100.0, 1..60), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = percentile(&xs, lo).unwrap();
        let b = percentile(&xs, hi).unwrap();
        prop_assert!(a <= b);
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= a && b <= max);
        prop_assert!(xs.contains(&a));
        let cdf = CdfSummary::new(xs.clone()).unwrap();
        prop_assert!(min <= cdf.mean() && cdf.mean() <= max);
    }

    #[test]
    fn rate_is_monotone(s1 in 0.0f64..1e4, s2 in 0.0f64..1e4, n in 1usize..8) {
        let radio = RadioConfig::default();
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(achievable_rate(lo, n, &radio) >= 0.0);
        prop_assert!(achievable_rate(lo, n, &radio) <= achievable_rate(hi, n, &radio));
        prop_assert!(achievable_rate(hi, n + 1, &radio) <= achievable_rate(hi, n, &radio));
    }

    #[test]
    fn rank_order_is_antisymmetric_and_prefers_feasible(a in fitness(), b in fitness()) {
        prop_assert_eq!(a.rank_cmp(&b), b.rank_cmp(&a).reverse());
        if a.is_feasible() && !b.is_feasible() {
            prop_assert_eq!(a.rank_cmp(&b), Ordering::Greater);
        }
        if !a.is_feasible() && !b.is_feasible() && a.violations < b.violations {
            prop_assert_eq!(a.rank_cmp(&b), Ordering::Greater);
        }
    }

    #[test]
    fn individual_changes_exactly_one_slot_per_designated_cell(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng(seed);
        let n_sectors = rng.random_range(2..7);
        let n_slots = rng.random_range(1..5);
        let cb = random_codebook(&mut rng, 3, 6);
        let baseline = random_plan(&mut rng, n_sectors, n_slots, cb.len());
        let designated: Vec<usize> = (0..n_sectors).filter(|_| rng.random::<bool>()).collect();
        let replaced: Vec<usize> = designated.iter().map(|_| rng.random_range(0..n_slots)).collect();
        let p_max = dbm_to_mw(46.0);
        let g = Genome {
            // an index no baseline slot uses, so every replaced slot changes
            codewords: designated.iter().map(|_| cb.len()).collect(),
            powers_mw: designated.iter().map(|_| p_max * rng.random_range(0.01..=1.0)).collect(),
        };
        let mut cb_big = cb.clone();
        cb_big.codewords.push(cb.codewords[0].clone());
        let plan = apply_individual(&g, &baseline, &designated, &replaced);
        let diff = plan.diff(&baseline);
        prop_assert_eq!(diff.len(), designated.len());
        for (b, s) in diff {
            let d = designated.iter().position(|&x| x == b).expect("only designated cells change");
            prop_assert_eq!(s, replaced[d]);
            prop_assert!(plan.slot(b, s).power_dbm <= 46.0 + 1e-9);
            prop_assert!(plan.slot(b, s).codeword < cb_big.len());
            prop_assert_eq!(plan.slot(b, s).sweep_index, baseline.slot(b, s).sweep_index);
        }
    }

    #[test]
    fn interference_only_lowers_sinr(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng(seed);
        let n_sectors = rng.random_range(1..6);
        let cb = random_codebook(&mut rng, 4, 5);
        let plan = random_plan(&mut rng, n_sectors, 3, cb.len());
        let ch = random_channels(&mut rng, 1, n_sectors, 4, true);
        let row = rsrp_row(ch.rx_links(0), &plan, &cb);
        let serving = select_serving_from_row(&row, &plan).unwrap();
        let noise = 1e-12;
        let sinr = coverage_sinr_linear(&row, &plan, serving, noise);
        let snr = row[serving.0 * plan.n_slots + serving.1] / noise;
        prop_assert!(sinr <= snr * (1.0 + 1e-12));
        prop_assert!(sinr > 0.0);
    }

    #[test]
    fn inv_cond_is_scale_invariant_and_bounded(seed in any::<u64>(), scale in 1e-6f64..1e6) {
        use rand::Rng;
        let mut rng = rng(seed);
        let (r, c) = (rng.random_range(1..6), rng.random_range(1..6));
        let h = nalgebra::DMatrix::from_fn(r, c, |_, _| cgauss(&mut rng));
        let a = inv_condition_number(&h);
        let b = inv_condition_number(&(h.clone() * C64::new(scale, 0.0)));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
    }

    #[test]
    fn cross_corr_is_symmetric(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng(seed);
        let m = rng.random_range(1..6);
        let (na, nb) = (rng.random_range(1..5), rng.random_range(1..5));
        let a = nalgebra::DMatrix::from_fn(na, m, |_, _| cgauss(&mut rng));
        let b = nalgebra::DMatrix::from_fn(nb, m, |_, _| cgauss(&mut rng));
        prop_assert!(close(cross_corr_frobenius(&a, &b), cross_corr_frobenius(&b, &a), 1e-12));
    }

    #[test]
    fn beam_gain_scales_quadratically(seed in any::<u64>(), a in 0.01f64..10.0) {
        use rand::Rng;
        let mut rng = rng(seed);
        let m = rng.random_range(1..9);
        let link = random_link(&mut rng, m, true);
        let w = cvec(&mut rng, m);
        let wa: Vec<C64> = w.iter().map(|x| x * a).collect();
        prop_assert!(close(link.beam_gain(&wa), a * a * link.beam_gain(&w), 1e-12));
    }

    #[test]
    fn dft_codewords_have_unit_norm(m_h in 1usize..5, m_v in 1usize..5, active in 1usize..5, o_h in 1usize..5, o_v in 1usize..3) {
        let active = active.min(m_h);
        let book = dft_subbook(active, m_h, m_v, (o_h, o_v));
        prop_assert_eq!(book.len(), active * o_h * m_v * o_v);
        for c in &book {
            prop_assert!((c.norm() - 1.0).abs() < 1e-12);
            for col in active..m_h {
                for row in 0..m_v {
                    prop_assert_eq!(c.weights[col * m_v + row], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn highway_segments_partition_points(length in 30.0f64..3000.0, d_r in 5.0f64..60.0, n_s in 1usize..12) {
        prop_assume!(length >= d_r);
        let poly = [Vec3::new(0.0, 0.0, 100.0), Vec3::new(length, 0.0, 100.0)];
        let hw = discretize_highway(&poly, d_r, n_s).unwrap();
        prop_assert_eq!(hw.n_points(), (length / d_r + 1e-9).floor() as usize + 1);
        let mut next = 0;
        for seg in &hw.segments {
            prop_assert_eq!(seg.start, next);
            prop_assert!(seg.end > seg.start && seg.end - seg.start <= n_s);
            next = seg.end;
        }
        prop_assert_eq!(next, hw.n_points());
        for w in hw.points.windows(2) {
            prop_assert!(((w[1] - w[0]).norm() - d_r).abs() <= 1e-6 * d_r);
        }
    }

    #[test]
    fn hex_layout_has_expected_site_count(tiers in 0usize..4, isd in 100.0f64..1000.0) {
        let sites = hex_site_positions(tiers, isd);
        prop_assert_eq!(sites.len(), site_count(tiers));
        prop_assert_eq!(site_count(tiers), 1 + 3 * tiers * (tiers + 1));
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[i + 1..] {
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                prop_assert!(d >= isd * (1.0 - 1e-9));
            }
        }
    }
}
