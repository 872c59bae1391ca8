//! SSB beam plans, RSRP, max-RSRP association and coverage SINR.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::BaselineSsbPower;
use crate::channel::{ChannelSet, Link};
use crate::codebook::Codebook;
use crate::scenario::{Scenario, User};
use crate::units::{dbm_to_mw, linear_to_db, mw_to_dbm};
use crate::{Error, Result};

/// Maximum number of SSB beams per sector.
pub const MAX_SSB_SLOTS: usize = 8;

/// One SSB slot of one sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSlot {
    pub active: bool,
    pub codeword: usize,
    pub power_dbm: f64,
    pub sweep_index: usize,
}

impl BeamSlot {
    pub const OFF: BeamSlot = BeamSlot {
        active: false,
        codeword: 0,
        power_dbm: f64::NEG_INFINITY,
        sweep_index: 0,
    };

    pub fn power_mw(&self) -> f64 {
        if self.active {
            dbm_to_mw(self.power_dbm)
        } else {
            0.0
        }
    }
}

/// Network SSB configuration `(X, P)` with codewords and sweep indices.
///
/// Slots are stored sector-major: slot `s` of sector `b` is `slots[b * n_slots + s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPlan {
    pub n_sectors: usize,
    pub n_slots: usize,
    pub slots: Vec<BeamSlot>,
}

impl BeamPlan {
    pub fn empty(n_sectors: usize, n_slots: usize) -> Self {
        Self {
            n_sectors,
            n_slots,
            slots: vec![BeamSlot::OFF; n_sectors * n_slots],
        }
    }

    pub fn slot(&self, sector: usize, s: usize) -> &BeamSlot {
        &self.slots[sector * self.n_slots + s]
    }

    pub fn slot_mut(&mut self, sector: usize, s: usize) -> &mut BeamSlot {
        &mut self.slots[sector * self.n_slots + s]
    }

    pub fn sector_slots(&self, sector: usize) -> &[BeamSlot] {
        &self.slots[sector * self.n_slots..(sector + 1) * self.n_slots]
    }

    pub fn active_count(&self) -> usize {
        self.slots.iter().filter(|s| s.active).count()
    }

    /// Binary activation matrix `x[sector][slot]`.
    pub fn x(&self) -> Vec<Vec<u8>> {
        (0..self.n_sectors)
            .map(|b| self.sector_slots(b).iter().map(|s| s.active as u8).collect())
            .collect()
    }

    /// `(sector, slot)` pairs whose configuration differs from `other`.
    pub fn diff(&self, other: &BeamPlan) -> Vec<(usize, usize)> {
        assert_eq!(self.slots.len(), other.slots.len());
        self.slots
            .iter()
            .zip(&other.slots)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| (i / self.n_slots, i % self.n_slots))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.len() != self.n_sectors * self.n_slots {
            return Err(Error::InvalidArgument("slot table has the wrong size".into()));
        }
        if self.n_slots > MAX_SSB_SLOTS {
            return Err(Error::InvalidArgument(format!(
                "{} SSB slots per sector exceeds {MAX_SSB_SLOTS}",
                self.n_slots
            )));
        }
        Ok(())
    }
}

/// `beta |hᵀw|² p x` in mW.
pub fn ssb_rsrp(link: &Link, slot: &BeamSlot, codebook: &Codebook) -> f64 {
    if !slot.active {
        return 0.0;
    }
    link.beam_gain(&codebook.get(slot.codeword).weights) * slot.power_mw()
}

/// RSRP of every `(sector, slot)` for one receiver, sector-major.
pub fn rsrp_row(links: &[Link], plan: &BeamPlan, codebook: &Codebook) -> Vec<f64> {
    let mut row = Vec::with_capacity(plan.slots.len());
    for (b, link) in links.iter().enumerate() {
        for slot in plan.sector_slots(b) {
            row.push(ssb_rsrp(link, slot, codebook));
        }
    }
    row
}

/// Argmax of an RSRP row over active slots; ties go to the lowest sector, then slot.
pub fn select_serving_from_row(row: &[f64], plan: &BeamPlan) -> Result<(usize, usize)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&r, slot)) in row.iter().zip(&plan.slots).enumerate() {
        if !slot.active {
            continue;
        }
        if best.is_none_or(|(_, v)| r > v) {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| (i / plan.n_slots, i % plan.n_slots))
        .ok_or(Error::NoActiveBeam)
}

pub fn select_serving(links: &[Link], plan: &BeamPlan, codebook: &Codebook) -> Result<(usize, usize)> {
    select_serving_from_row(&rsrp_row(links, plan, codebook), plan)
}

/// Coverage SINR in linear scale given the serving beam.
///
/// Interference is the RSRP of every active beam of every other sector that
/// shares the serving beam's sweep index.
pub fn coverage_sinr_linear(row: &[f64], plan: &BeamPlan, serving: (usize, usize), noise_mw: f64) -> f64 {
    let (b, s) = serving;
    let sweep = plan.slot(b, s).sweep_index;
    let mut interference = 0.0;
    for other in 0..plan.n_sectors {
        if other == b {
            continue;
        }
        for (t, slot) in plan.sector_slots(other).iter().enumerate() {
            if slot.active && slot.sweep_index == sweep {
                interference += row[other * plan.n_slots + t];
            }
        }
    }
    row[b * plan.n_slots + s] / (interference + noise_mw)
}

pub fn coverage_sinr(row: &[f64], plan: &BeamPlan, serving: (usize, usize), noise_mw: f64) -> f64 {
    linear_to_db(coverage_sinr_linear(row, plan, serving, noise_mw))
}

/// Association of one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct UeAssociation {
    pub serving_sector: usize,
    pub serving_slot: usize,
    pub rsrp_mw: Vec<f64>,
    pub coverage_sinr_db: f64,
}

impl UeAssociation {
    pub fn serving_rsrp_mw(&self, n_slots: usize) -> f64 {
        self.rsrp_mw[self.serving_sector * n_slots + self.serving_slot]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationResult {
    pub n_slots: usize,
    pub ues: Vec<UeAssociation>,
}

/// Max-RSRP association and coverage SINR for every receiver of a channel set.
pub fn associate(
    channels: &ChannelSet,
    plan: &BeamPlan,
    codebook: &Codebook,
    noise_mw: f64,
) -> Result<AssociationResult> {
    if plan.active_count() == 0 {
        return Err(Error::NoActiveBeam);
    }
    let ues = (0..channels.n_rx)
        .into_par_iter()
        .map(|u| {
            let row = rsrp_row(channels.rx_links(u), plan, codebook);
            let serving = select_serving_from_row(&row, plan)?;
            let coverage_sinr_db = coverage_sinr(&row, plan, serving, noise_mw);
            Ok(UeAssociation {
                serving_sector: serving.0,
                serving_slot: serving.1,
                rsrp_mw: row,
                coverage_sinr_db,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AssociationResult {
        n_slots: plan.n_slots,
        ues,
    })
}

impl AssociationResult {
    /// Writes `ue_id, kind, serving_sector, serving_slot, rsrp_dbm, sinr_db`.
    pub fn write_csv<W: std::io::Write>(&self, users: &[User], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ue_id", "kind", "serving_sector", "serving_slot", "rsrp_dbm", "sinr_db"])?;
        for (u, a) in users.iter().zip(&self.ues) {
            w.write_record([
                u.id.to_string(),
                u.kind.as_str().to_string(),
                a.serving_sector.to_string(),
                a.serving_slot.to_string(),
                format!("{:.6}", mw_to_dbm(a.serving_rsrp_mw(self.n_slots))),
                format!("{:.6}", a.coverage_sinr_db),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Azimuth of the `i`-th of `n` beams evenly spanning a 120° sector.
pub fn baseline_azimuth_deg(i: usize, n: usize) -> f64 {
    let width = 120.0 / n as f64;
    -60.0 + width * (i as f64 + 0.5)
}

/// gUE-oriented plan: `n_beams` full-panel beams per sector at a common
/// zenith, evenly spread in azimuth, sharing the sector power equally.
pub fn baseline_plan(scenario: &Scenario, codebook: &Codebook) -> BeamPlan {
    let e = &scenario.config.evaluation;
    let n = e.ssb_beams_per_sector;
    let theta = e.baseline_tilt_deg.to_radians();
    let power_dbm = match e.baseline_ssb_power {
        BaselineSsbPower::FullPerBeam => scenario.radio.sector_tx_power_dbm,
        BaselineSsbPower::EqualSplit => scenario.radio.sector_tx_power_dbm - 10.0 * (n as f64).log10(),
    };
    let codewords: Vec<usize> = (0..n)
        .map(|i| {
            let az = baseline_azimuth_deg(i, n).to_radians();
            codebook.nearest_full_panel(theta.sin() * az.sin(), theta.cos())
        })
        .collect();
    let mut plan = BeamPlan::empty(scenario.n_sectors(), MAX_SSB_SLOTS);
    for b in 0..scenario.n_sectors() {
        for (s, &cw) in codewords.iter().enumerate() {
            *plan.slot_mut(b, s) = BeamSlot {
                active: true,
                codeword: cw,
                power_dbm,
                sweep_index: s,
            };
        }
    }
    plan
}
