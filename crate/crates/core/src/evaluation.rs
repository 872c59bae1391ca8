//! Data-phase SINR and rate, percentile statistics and the traffic sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{associate, AssociationResult, BeamPlan};
use crate::channel::{ChannelModel, ChannelSet, Link};
use crate::codebook::Codebook;
use crate::config::RadioConfig;
use crate::scenario::{place_n_uavs, Scenario, User, UserKind};
use crate::units::{dbm_to_mw, linear_to_db};
use crate::{Error, Result};

/// Codeword maximizing `beta |hᵀw|²`; ties go to the lowest index.
pub fn select_dl_precoder(link: &Link, codebook: &Codebook) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in codebook.codewords.iter().enumerate() {
        let g = link.beam_gain(&c.weights);
        if g > best.1 {
            best = (i, g);
        }
    }
    best.0
}

/// `(N_PRB B_PRB / N_w) log2(1 + sinr)`.
pub fn achievable_rate(sinr_linear: f64, n_w: usize, radio: &RadioConfig) -> f64 {
    radio.n_prb_total as f64 * radio.prb_bandwidth_hz / n_w as f64 * (1.0 + sinr_linear).log2()
}

/// Serving sector and precoder of one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DlAssignment {
    pub sector: usize,
    pub codeword: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeDataResult {
    pub sector: usize,
    pub codeword: usize,
    pub power_mw: f64,
    pub n_w: usize,
    pub sinr_db: f64,
    pub rate_bps: f64,
}

/// Precoders for every receiver given its serving sector.
pub fn assign_precoders(channels: &ChannelSet, serving: &[usize], codebook: &Codebook) -> Vec<DlAssignment> {
    serving
        .par_iter()
        .enumerate()
        .map(|(u, &b)| DlAssignment {
            sector: b,
            codeword: select_dl_precoder(channels.link(u, b), codebook),
        })
        .collect()
}

/// Multi-user data-phase SINR and rate with equal per-UE power in each cell.
///
/// Every associated receiver is scheduled. Intra-cell interference comes from
/// co-cell receivers on other codewords; inter-cell interference from each
/// other cell's distinct in-use codewords, weighted by `1 / N_w` of that cell.
pub fn data_phase(
    channels: &ChannelSet,
    assignments: &[DlAssignment],
    codebook: &Codebook,
    radio: &RadioConfig,
) -> Vec<UeDataResult> {
    let n_sectors = channels.n_sectors;
    let p_sector = dbm_to_mw(radio.sector_tx_power_dbm);
    // per cell: members, and (codeword, count) groups in first-seen order
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_sectors];
    for (u, a) in assignments.iter().enumerate() {
        members[a.sector].push(u);
    }
    let groups: Vec<Vec<(usize, usize)>> = members
        .iter()
        .map(|m| {
            let mut g: Vec<(usize, usize)> = Vec::new();
            for &u in m {
                let c = assignments[u].codeword;
                match g.iter_mut().find(|(cw, _)| *cw == c) {
                    Some(e) => e.1 += 1,
                    None => g.push((c, 1)),
                }
            }
            g
        })
        .collect();
    let power: Vec<f64> = members
        .iter()
        .map(|m| if m.is_empty() { 0.0 } else { p_sector / m.len() as f64 })
        .collect();
    let n0 = radio.noise_psd_mw_per_hz();
    let band = radio.n_prb_total as f64 * radio.prb_bandwidth_hz;

    (0..assignments.len())
        .into_par_iter()
        .map(|u| {
            let a = assignments[u];
            let b = a.sector;
            let p = power[b];
            let n_w = groups[b].iter().find(|(c, _)| *c == a.codeword).map_or(1, |g| g.1);
            let link = channels.link(u, b);
            let signal = link.beam_gain(&codebook.get(a.codeword).weights) * p;
            let mut intra = 0.0;
            for &v in &members[b] {
                if v != u && assignments[v].codeword != a.codeword {
                    intra += link.beam_gain(&codebook.get(assignments[v].codeword).weights) * p;
                }
            }
            let mut inter = 0.0;
            for (other, g) in groups.iter().enumerate() {
                if other == b {
                    continue;
                }
                let l = channels.link(u, other);
                for &(c, count) in g {
                    inter += l.beam_gain(&codebook.get(c).weights) * power[other] / count as f64;
                }
            }
            let noise = band * n0 / n_w as f64;
            let sinr = signal / (intra + inter + noise);
            UeDataResult {
                sector: b,
                codeword: a.codeword,
                power_mw: p,
                n_w,
                sinr_db: linear_to_db(sinr),
                rate_bps: achievable_rate(sinr, n_w, radio),
            }
        })
        .collect()
}

/// Lower order statistic: element `floor(q (n - 1))` of the sorted samples.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64> {
    Ok(CdfSummary::new(samples.to_vec())?.percentile(q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSummary {
    pub sorted: Vec<f64>,
}

impl CdfSummary {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyGroup("no samples".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn percentile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let i = (q * (self.sorted.len() - 1) as f64).floor() as usize;
        self.sorted[i]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Empirical CDF value at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }
}

/// Per-receiver outcome of one plan in one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub snapshot: usize,
    pub ue_id: usize,
    pub kind: UserKind,
    pub serving_sector: usize,
    pub serving_slot: usize,
    pub rsrp_dbm: f64,
    pub coverage_sinr_db: f64,
    pub dl_codeword: usize,
    pub n_w: usize,
    pub sinr_db: f64,
    pub rate_bps: f64,
}

/// Ground receivers and their channels for one snapshot.
pub struct GroundSnapshot {
    pub users: Vec<User>,
    pub channels: ChannelSet,
}

pub fn ground_snapshot(model: &ChannelModel, snapshot: usize) -> GroundSnapshot {
    let users = model.scenario.ground_users(snapshot as u64);
    let channels = model.realize(&users, snapshot as u64);
    GroundSnapshot { users, channels }
}

/// UAVs of one snapshot: `n` UAVs at spacing `d_iud` shifted by `snapshot * d_iud / snapshots`.
pub fn snapshot_uavs(scenario: &Scenario, n: usize, d_iud: f64, snapshot: usize, snapshots: usize, first_id: usize) -> Vec<User> {
    let offset = scenario.config.highway.uav_offset_m + snapshot as f64 * d_iud / snapshots as f64;
    place_n_uavs(&scenario.highway, n, d_iud, offset, first_id)
}

/// Evaluates a plan on a receiver set: association, coverage SINR, precoders, data SINR and rate.
pub fn evaluate_plan(
    channels: &ChannelSet,
    users: &[User],
    plan: &BeamPlan,
    ssb: &Codebook,
    dl: &Codebook,
    radio: &RadioConfig,
    snapshot: usize,
) -> Result<(AssociationResult, Vec<UeRecord>)> {
    let assoc = associate(channels, plan, ssb, radio.ssb_noise_mw())?;
    let serving: Vec<usize> = assoc.ues.iter().map(|a| a.serving_sector).collect();
    let dl_assign = assign_precoders(channels, &serving, dl);
    let data = data_phase(channels, &dl_assign, dl, radio);
    let records = users
        .iter()
        .zip(&assoc.ues)
        .zip(&data)
        .map(|((u, a), d)| UeRecord {
            snapshot,
            ue_id: u.id,
            kind: u.kind,
            serving_sector: a.serving_sector,
            serving_slot: a.serving_slot,
            rsrp_dbm: crate::units::mw_to_dbm(a.serving_rsrp_mw(assoc.n_slots)),
            coverage_sinr_db: a.coverage_sinr_db,
            dl_codeword: d.codeword,
            n_w: d.n_w,
            sinr_db: d.sinr_db,
            rate_bps: d.rate_bps,
        })
        .collect();
    Ok((assoc, records))
}

/// Statistics of one metric for one receiver group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    /// 5th percentile of all samples pooled over snapshots.
    pub p5_pooled: f64,
    /// Mean over snapshots of the per-snapshot 5th percentile.
    pub p5_snapshot_mean: f64,
    pub p50_pooled: f64,
    pub mean: f64,
    pub samples: usize,
}

impl MetricStats {
    pub fn from_records<F: Fn(&UeRecord) -> f64>(records: &[UeRecord], kind: UserKind, f: F) -> Result<Self> {
        let group: Vec<&UeRecord> = records.iter().filter(|r| r.kind == kind).collect();
        let pooled = CdfSummary::new(group.iter().map(|r| f(r)).collect())
            .map_err(|_| Error::EmptyGroup(format!("no {} samples", kind.as_str())))?;
        let n_snap = group.iter().map(|r| r.snapshot).max().unwrap_or(0) + 1;
        let mut per_snapshot = Vec::new();
        for s in 0..n_snap {
            let v: Vec<f64> = group.iter().filter(|r| r.snapshot == s).map(|r| f(r)).collect();
            if !v.is_empty() {
                per_snapshot.push(CdfSummary::new(v)?.percentile(0.05));
            }
        }
        Ok(Self {
            p5_pooled: pooled.percentile(0.05),
            p5_snapshot_mean: per_snapshot.iter().sum::<f64>() / per_snapshot.len() as f64,
            p50_pooled: pooled.percentile(0.5),
            mean: pooled.mean(),
            samples: pooled.sorted.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub coverage_sinr_db: MetricStats,
    pub sinr_db: MetricStats,
    pub rate_bps: MetricStats,
}

impl GroupStats {
    pub fn from_records(records: &[UeRecord], kind: UserKind) -> Result<Self> {
        Ok(Self {
            coverage_sinr_db: MetricStats::from_records(records, kind, |r| r.coverage_sinr_db)?,
            sinr_db: MetricStats::from_records(records, kind, |r| r.sinr_db)?,
            rate_bps: MetricStats::from_records(records, kind, |r| r.rate_bps)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub uav: GroupStats,
    pub gue: GroupStats,
}

impl PlanStats {
    pub fn from_records(records: &[UeRecord]) -> Result<Self> {
        Ok(Self {
            uav: GroupStats::from_records(records, UserKind::Aerial)?,
            gue: GroupStats::from_records(records, UserKind::Ground)?,
        })
    }
}

/// One row of the traffic sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_uavs: usize,
    pub d_iud_m: f64,
    /// Per-snapshot UAV 5%-tile rate averaged over snapshots, per plan.
    pub p5_rate_bps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Largest `N` such that every load up to `N` meets the threshold for plan `p`.
    pub fn max_sustainable(&self, plan: usize, threshold_bps: f64) -> usize {
        self.rows
            .iter()
            .take_while(|r| r.p5_rate_bps[plan] >= threshold_bps)
            .last()
            .map_or(0, |r| r.n_uavs)
    }
}

/// UAV 5%-tile rate versus UAV count for several plans on shared channel draws.
///
/// Ground channels are drawn once per snapshot and reused for every `N` and plan.
pub fn traffic_sweep(
    scenario: &Scenario,
    plans: &[&BeamPlan],
    ssb: &Codebook,
    dl: &Codebook,
    n_max: usize,
    snapshots: usize,
) -> Result<SweepResult> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let model = ChannelModel::new(scenario);
    let radio = &scenario.radio;
    let length = scenario.highway.total_length_m;
    let ground: Vec<GroundSnapshot> = (0..snapshots).map(|s| ground_snapshot(&model, s)).collect();
    // ground association and precoders per (snapshot, plan)
    let ground_assign: Vec<Vec<(AssociationResult, Vec<DlAssignment>)>> = ground
        .iter()
        .map(|g| {
            plans
                .iter()
                .map(|plan| {
                    let assoc = associate(&g.channels, plan, ssb, radio.ssb_noise_mw())?;
                    let serving: Vec<usize> = assoc.ues.iter().map(|a| a.serving_sector).collect();
                    let pre = assign_precoders(&g.channels, &serving, dl);
                    Ok((assoc, pre))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let d_iud = length / n as f64;
        let mut acc = vec![0.0; plans.len()];
        for (s, g) in ground.iter().enumerate() {
            let uavs = snapshot_uavs(scenario, n, d_iud, s, snapshots, g.users.len());
            let uav_ch = model.realize(&uavs, s as u64);
            let all = g.channels.clone().concat(uav_ch.clone());
            for (p, plan) in plans.iter().enumerate() {
                let assoc = associate(&uav_ch, plan, ssb, radio.ssb_noise_mw())?;
                let serving: Vec<usize> = assoc.ues.iter().map(|a| a.serving_sector).collect();
                let mut assignments = ground_assign[s][p].1.clone();
                assignments.extend(assign_precoders(&uav_ch, &serving, dl));
                let data = data_phase(&all, &assignments, dl, radio);
                let uav_rates: Vec<f64> = data[g.users.len()..].iter().map(|d| d.rate_bps).collect();
                acc[p] += percentile(&uav_rates, 0.05)?;
            }
        }
        rows.push(SweepRow {
            n_uavs: n,
            d_iud_m: d_iud,
            p5_rate_bps: acc.iter().map(|a| a / snapshots as f64).collect(),
        });
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LargeScale;
    use crate::config::Config;
    use crate::C64;

    #[test]
    fn rate_arithmetic() {
        let mut radio = Config::default().radio;
        radio.n_prb_total = 100;
        radio.prb_bandwidth_hz = 360e3;
        assert!((achievable_rate(1.0, 1, &radio) - 36e6).abs() < 1e-6);
        assert!((achievable_rate(1.0, 2, &radio) - 18e6).abs() < 1e-6);
        assert_eq!(achievable_rate(0.0, 1, &radio), 0.0);
    }

    #[test]
    fn percentile_convention() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.05).unwrap(), 5.0);
        assert_eq!(percentile(&[7.0], 0.05).unwrap(), 7.0);
        assert_eq!(percentile(&[7.0], 0.95).unwrap(), 7.0);
        assert!(matches!(percentile(&[], 0.5), Err(Error::EmptyGroup(_))));
        let c = CdfSummary::new(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(c.cdf(0.0), 0.0);
        assert_eq!(c.cdf(2.0), 2.0 / 3.0);
        assert_eq!(c.cdf(5.0), 1.0);
    }

    #[test]
    fn single_codeword_book() {
        let cb = crate::codebook::build_dl_codebook(
            &crate::scenario::UpaGeometry::new(1, 1, (0.5, 0.5), 0.1, 25.0, 0.0, 0.0),
            (1, 1),
        );
        let link = Link {
            large: LargeScale::new(1.0, 1.0, 1.0, true, 1.0),
            h: vec![C64::new(0.3, 0.1)],
            diffuse: 0.0,
        };
        assert_eq!(select_dl_precoder(&link, &cb), 0);
    }
}
