//! Brute-force oracles for the metric, association, precoder and fitness
//! kernels. Each check panics on the first mismatch.

use nalgebra::DMatrix;
use rand::Rng;

use ssbplan_core::association::{select_serving, BeamPlan, BeamSlot};
use ssbplan_core::channel::ChannelSet;
use ssbplan_core::codebook::Codebook;
use ssbplan_core::ega::{Genome, Objective, PlanningProblem};
use ssbplan_core::evaluation::select_dl_precoder;
use ssbplan_core::mama::{avg_channel_gain, cross_corr_frobenius, inv_condition_number};
use ssbplan_core::C64;

use super::*;

/// Every check with its default seed.
pub const ALL: [(&str, fn(u64, u64), u64); 7] = [
    ("inv_condition_number_matches_constructed_spectrum", inv_condition_number_matches_constructed_spectrum, 11),
    ("inv_condition_number_is_zero_for_rank_deficient", inv_condition_number_is_zero_for_rank_deficient, 12),
    ("cross_corr_matches_double_sum", cross_corr_matches_double_sum, 13),
    ("avg_gain_matches_loop", avg_gain_matches_loop, 14),
    ("select_serving_matches_exhaustive_scan", select_serving_matches_exhaustive_scan, 15),
    ("dl_precoder_matches_exhaustive_scan", dl_precoder_matches_exhaustive_scan, 16),
    ("fitness_matches_oracle_on_both_paths", fitness_matches_oracle_on_both_paths, 17),
];

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// `k` orthonormal complex vectors of length `n` by classical Gram-Schmidt.
pub fn orthonormal<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    while out.len() < k {
        let mut v = cvec(rng, n);
        for _ in 0..2 {
            for u in &out {
                let p = dot(&v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= p * ui;
                }
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// `U diag(s) Vᴴ` with `U`, `V` having orthonormal columns.
pub fn with_singular_values<R: Rng>(rng: &mut R, rows: usize, cols: usize, s: &[f64]) -> DMatrix<C64> {
    let u = orthonormal(rng, rows, s.len());
    let v = orthonormal(rng, cols, s.len());
    DMatrix::from_fn(rows, cols, |i, j| {
        s.iter()
            .enumerate()
            .map(|(k, &sk)| u[k][i] * sk * v[k][j].conj())
            .sum()
    })
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| cgauss(rng))
}

pub fn inv_condition_number_matches_constructed_spectrum(seed: u64, instances: u64) {
    let mut rng = rng(seed);
    for _ in 0..instances {
        let rows = rng.random_range(1..=8);
        let cols = rng.random_range(1..=8);
        let k = rows.min(cols);
        let s: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..3.0)).collect();
        let h = with_singular_values(&mut rng, rows, cols, &s);
        let expected = s.iter().cloned().fold(f64::INFINITY, f64::min) / s.iter().cloned().fold(0.0, f64::max);
        let got = inv_condition_number(&h);
        assert!(close(got, expected, 1e-9), "{rows}x{cols}: {got} vs {expected}");
    }
}

pub fn inv_condition_number_is_zero_for_rank_deficient(seed: u64, instances: u64) {
    let mut rng = rng(seed);
    for _ in 0..instances {
        let rows = rng.random_range(2..=8);
        let cols = rng.random_range(2..=8);
        let rank = rng.random_range(1..rows.min(cols));
        let s: Vec<f64> = (0..rank).map(|_| rng.random_range(0.5..2.0)).collect();
        let h = with_singular_values(&mut rng, rows, cols, &s);
        assert_eq!(inv_condition_number(&h), 0.0);
    }
}

pub fn cross_corr_matches_double_sum(seed: u64, instances: u64) {
    let mut rng = rng(seed);
    for _ in 0..instances {
        let m = rng.random_range(1..=6);
        let (ns, nr) = (rng.random_range(1..=5), rng.random_range(1..=7));
        let seg = random_matrix(&mut rng, ns, m);
        let rest = random_matrix(&mut rng, nr, m);
        let mut expected = 0.0;
        for i in 0..rest.nrows() {
            for z in 0..seg.nrows() {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..m {
                    acc += rest[(i, k)] * seg[(z, k)].conj();
                }
                expected += acc.norm_sqr();
            }
        }
        let got = cross_corr_frobenius(&seg, &rest);
        assert!(close(got, expected, 1e-9), "{got} vs {expected}");
    }
}

pub fn avg_gain_matches_loop(seed: u64, instances: u64) {
    let mut rng = rng(seed);
    for _ in 0..instances {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let h = random_matrix(&mut rng, r, c);
        let mut sum = 0.0;
        for i in 0..r {
            for j in 0..c {
                sum += h[(i, j)].re * h[(i, j)].re + h[(i, j)].im * h[(i, j)].im;
            }
        }
        let expected = sum / (r * c) as f64;
        assert!(close(avg_channel_gain(&h), expected, 1e-9));
    }
}

pub fn rsrp_oracle(channels: &ChannelSet, rx: usize, plan: &BeamPlan, cb: &Codebook, b: usize, s: usize) -> f64 {
    let slot = plan.slot(b, s);
    if !slot.active {
        return 0.0;
    }
    let link = channels.link(rx, b);
    let w = &cb.get(slot.codeword).weights;
    let mut acc = C64::new(0.0, 0.0);
    let mut wn = 0.0;
    for m in 0..w.len() {
        acc += link.h[m] * w[m];
        wn += w[m].norm_sqr();
    }
    link.large.beta_linear * (acc.norm_sqr() + link.diffuse * wn) * dbm_to_mw(slot.power_dbm)
}

pub fn serving_oracle(channels: &ChannelSet, rx: usize, plan: &BeamPlan, cb: &Codebook) -> (usize, usize, f64) {
    let mut best = (usize::MAX, usize::MAX, f64::NEG_INFINITY);
    for b in 0..plan.n_sectors {
        for s in 0..plan.n_slots {
            if !plan.slot(b, s).active {
                continue;
            }
            let v = rsrp_oracle(channels, rx, plan, cb, b, s);
            if v > best.2 {
                best = (b, s, v);
            }
        }
    }
    best
}

pub fn select_serving_matches_exhaustive_scan(seed: u64, instances: u64) {
    let mut rng = rng(seed);
    for _ in 0..instances {
        let m = rng.random_range(1..=6);
        let n_sectors = rng.random_range(1..=6);
        let n_slots = rng.random_range(1..=4);
        let n_cw = rng.random_range(1..=12);
        let cb = random_codebook(&mut rng, m, n_cw);
        let plan = random_plan(&mut rng, n_sectors, n_slots, cb.len());
        let ch = random_channels(&mut rng, 1, n_sectors, m, true);
        let (b, s, _) = serving_oracle(&ch, 0, &plan, &cb);
        assert_eq!(select_serving(ch.rx_links(0), &plan, &cb).unwrap(), (b, s));
    }
}

pub fn dl_precoder_matches_exhaustive_scan(seed: u64, instances: u64) {
    let mut rng = rng(seed);
    for _ in 0..instances {
        let m = rng.random_range(1..=8);
        let n_cw = rng.random_range(1..=40);
        let cb = random_codebook(&mut rng, m, n_cw);
        let link = random_link(&mut rng, m, false);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in cb.codewords.iter().enumerate() {
            let g: C64 = link.h.iter().zip(&c.weights).map(|(h, w)| h * w).sum();
            let v = link.large.beta_linear * g.norm_sqr();
            if v > best.1 {
                best = (i, v);
            }
        }
        assert_eq!(select_dl_precoder(&link, &cb), best.0);
    }
}

pub struct Instance {
    cb: Codebook,
    plan: BeamPlan,
    ch: ChannelSet,
    required: Vec<usize>,
    designated: Vec<usize>,
    replaced: Vec<usize>,
    noise: f64,
    p_max: f64,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let m = rng.random_range(1..=4);
    let n_sectors = rng.random_range(2..=5);
    let n_slots = rng.random_range(1..=4);
    let n_cw = rng.random_range(2..=10);
    let cb = random_codebook(rng, m, n_cw);
    let plan = random_plan(rng, n_sectors, n_slots, cb.len());
    let n_rx = rng.random_range(1..=8);
    let diffuse = rng.random::<bool>();
    let ch = random_channels(rng, n_rx, n_sectors, m, diffuse);
    let mut designated: Vec<usize> = (0..n_sectors).filter(|_| rng.random::<f64>() < 0.5).collect();
    if designated.is_empty() {
        designated.push(rng.random_range(0..n_sectors));
    }
    let replaced = designated.iter().map(|_| rng.random_range(0..n_slots)).collect();
    let required = (0..n_rx).map(|_| designated[rng.random_range(0..designated.len())]).collect();
    Instance {
        cb,
        plan,
        ch,
        required,
        designated,
        replaced,
        noise: 10f64.powf(-rng.random_range(9.0..12.0)),
        p_max: dbm_to_mw(46.0),
    }
}

/// Min SINR and violation count computed slot by slot from the definitions.
pub fn fitness_oracle(inst: &Instance, g: &Genome) -> (f64, usize) {
    let mut plan = inst.plan.clone();
    for (d, &b) in inst.designated.iter().enumerate() {
        let sweep = plan.slot(b, inst.replaced[d]).sweep_index;
        *plan.slot_mut(b, inst.replaced[d]) = BeamSlot {
            active: true,
            codeword: g.codewords[d],
            power_dbm: 10.0 * g.powers_mw[d].log10(),
            sweep_index: sweep,
        };
    }
    let mut min_sinr = f64::INFINITY;
    let mut violations = 0;
    for r in 0..inst.ch.n_rx {
        let (b, s, signal) = serving_oracle(&inst.ch, r, &plan, &inst.cb);
        if b != inst.required[r] {
            violations += 1;
        }
        let sweep = plan.slot(b, s).sweep_index;
        let mut interference = 0.0;
        for bb in 0..plan.n_sectors {
            for ss in 0..plan.n_slots {
                if bb != b && plan.slot(bb, ss).active && plan.slot(bb, ss).sweep_index == sweep {
                    interference += rsrp_oracle(&inst.ch, r, &plan, &inst.cb, bb, ss);
                }
            }
        }
        min_sinr = min_sinr.min(10.0 * (signal / (interference + inst.noise)).log10());
    }
    (min_sinr, violations)
}

pub fn fitness_matches_oracle_on_both_paths(seed: u64, instances: u64) {
    let mut rng = rng(seed);
    let mut feasible = 0;
    for case in 0..instances {
        let mut inst = random_instance(&mut rng);
        let n_d = inst.designated.len();
        let g = Genome {
            codewords: (0..n_d).map(|_| rng.random_range(0..inst.cb.len())).collect(),
            powers_mw: (0..n_d).map(|_| inst.p_max * rng.random_range(1e-3..1.0)).collect(),
        };
        if case % 2 == 0 {
            // make the association constraint satisfiable
            inst.required = (0..inst.ch.n_rx).map(|r| {
                let mut plan = inst.plan.clone();
                for (d, &b) in inst.designated.iter().enumerate() {
                    let slot = plan.slot_mut(b, inst.replaced[d]);
                    slot.active = true;
                    slot.codeword = g.codewords[d];
                    slot.power_dbm = 10.0 * g.powers_mw[d].log10();
                }
                serving_oracle(&inst.ch, r, &plan, &inst.cb).0
            }).collect();
        }
        let problem = PlanningProblem::new(
            &inst.plan,
            &inst.cb,
            &inst.ch,
            inst.required.clone(),
            inst.designated.clone(),
            inst.replaced.clone(),
            inst.noise,
            inst.p_max,
        );
        let (sinr, violations) = fitness_oracle(&inst, &g);
        for f in [problem.reference_fitness(&g), problem.evaluate(&g)] {
            assert_eq!(f.violations, violations, "case {case}");
            assert!((f.min_sinr_db - sinr).abs() <= 1e-9 * sinr.abs().max(1.0), "case {case}: {} vs {sinr}", f.min_sinr_db);
            if violations == 0 {
                assert_eq!(f.value, f.min_sinr_db);
            } else {
                assert_eq!(f.value, f64::NEG_INFINITY);
            }
        }
        feasible += usize::from(violations == 0);
    }
    assert!(feasible >= instances as usize / 2);
}
