#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use ssbplan_core::association::{BeamPlan, BeamSlot};
use ssbplan_core::channel::{ChannelSet, LargeScale, Link};
use ssbplan_core::codebook::{Codebook, Codeword};
use ssbplan_core::C64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss<R: Rng>(rng: &mut R) -> C64 {
    // Box-Muller, independent of the crate's sampler
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    C64::new(r * t.cos(), r * t.sin())
}

pub fn cvec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| cgauss(rng)).collect()
}

pub fn random_link<R: Rng>(rng: &mut R, m: usize, diffuse: bool) -> Link {
    let beta = 10f64.powf(-rng.random_range(6.0..12.0));
    Link {
        large: LargeScale::new(beta, 1.0, 1.0, true, 1.0),
        h: cvec(rng, m),
        diffuse: if diffuse { rng.random_range(0.0..0.5) } else { 0.0 },
    }
}

pub fn random_codebook<R: Rng>(rng: &mut R, m: usize, n: usize) -> Codebook {
    let codewords = (0..n)
        .map(|i| {
            let w = cvec(rng, m);
            let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            Codeword {
                weights: w.into_iter().map(|x| x / norm).collect(),
                active_columns: m,
                beam_index_h: i as i64,
                beam_index_v: 0,
            }
        })
        .collect();
    Codebook {
        codewords,
        m_h: m,
        m_v: 1,
        spacing_wavelengths: (0.5, 0.5),
        oversampling: (1, 1),
        subbook_offsets: vec![0],
    }
}

/// Every sector gets slot 0 active; other slots are active with probability 0.6.
pub fn random_plan<R: Rng>(rng: &mut R, n_sectors: usize, n_slots: usize, n_cw: usize) -> BeamPlan {
    let mut plan = BeamPlan::empty(n_sectors, n_slots);
    for b in 0..n_sectors {
        for s in 0..n_slots {
            *plan.slot_mut(b, s) = BeamSlot {
                active: s == 0 || rng.random::<f64>() < 0.6,
                codeword: rng.random_range(0..n_cw),
                power_dbm: rng.random_range(20.0..46.0),
                sweep_index: rng.random_range(0..n_slots),
            };
        }
    }
    plan
}

pub fn random_channels<R: Rng>(rng: &mut R, n_rx: usize, n_sectors: usize, m: usize, diffuse: bool) -> ChannelSet {
    ChannelSet {
        n_rx,
        n_sectors,
        links: (0..n_rx * n_sectors).map(|_| random_link(rng, m, diffuse)).collect(),
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}
pub mod oracle;
