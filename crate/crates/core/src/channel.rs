//! Large-scale and small-scale channel generation.
//!
//! Ground links follow the 3GPP UMa path-loss and LoS-probability models;
//! aerial links above 22.5 m follow the UMa-AV aerial extensions. The small-scale
//! channel is Rician: a plane-wave LoS array response plus an i.i.d. Rayleigh
//! part, mixed by the K factor.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::ChannelConfig;
use crate::rng::{self, TAG_FADING, TAG_LOS_STATE, TAG_SHADOW_AERIAL, TAG_SHADOW_GROUND};
use crate::scenario::{Scenario, Sector, UpaGeometry, User, UserKind};
use crate::units::{db_to_linear, linear_to_db};
use crate::{C64, Vec3};

/// Heights above this use the aerial model for aerial users.
pub const AERIAL_MODEL_MIN_HEIGHT_M: f64 = 22.5;

/// Horizontal/vertical link geometry between a panel and a receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub d2d_m: f64,
    pub h_bs_m: f64,
    pub h_ut_m: f64,
}

impl LinkGeometry {
    pub fn d3d_m(&self) -> f64 {
        self.d2d_m.hypot(self.h_bs_m - self.h_ut_m)
    }

    fn uses_aerial_model(&self, kind: UserKind) -> bool {
        kind == UserKind::Aerial && self.h_ut_m > AERIAL_MODEL_MIN_HEIGHT_M
    }
}

/// Path loss with a flag for the model's validity range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub loss_db: f64,
    /// False when distance or height leaves the model's stated range; the value
    /// is still the formula's extrapolation.
    pub in_range: bool,
}

impl PathLoss {
    pub fn gain_linear(&self) -> f64 {
        db_to_linear(-self.loss_db)
    }
}

fn uma_ground_los_db(g: &LinkGeometry, fc_hz: f64) -> f64 {
    let fc_ghz = fc_hz / 1e9;
    let d3d = g.d3d_m();
    let h_e = 1.0;
    let d_bp = 4.0 * (g.h_bs_m - h_e) * (g.h_ut_m - h_e) * fc_hz / crate::SPEED_OF_LIGHT;
    if g.d2d_m <= d_bp {
        28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10()
    } else {
        28.0 + 40.0 * d3d.log10() + 20.0 * fc_ghz.log10()
            - 9.0 * (d_bp * d_bp + (g.h_bs_m - g.h_ut_m).powi(2)).log10()
    }
}

/// Path loss in dB for a LoS or NLoS link.
pub fn path_loss(g: &LinkGeometry, kind: UserKind, los: bool, fc_hz: f64) -> PathLoss {
    let fc_ghz = fc_hz / 1e9;
    let d3d = g.d3d_m();
    if g.uses_aerial_model(kind) {
        let in_range = g.h_ut_m <= 300.0 && g.d2d_m <= 4000.0;
        let los_db = 28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10();
        let loss_db = if los {
            los_db
        } else {
            -17.5
                + (46.0 - 7.0 * g.h_ut_m.log10()) * d3d.log10()
                + 20.0 * (40.0 * PI * fc_ghz / 3.0).log10()
        };
        PathLoss { loss_db, in_range }
    } else {
        let in_range = (10.0..=5000.0).contains(&g.d2d_m) && (1.5..=22.5).contains(&g.h_ut_m);
        let los_db = uma_ground_los_db(g, fc_hz);
        let loss_db = if los {
            los_db
        } else {
            let nlos = 13.54 + 39.08 * d3d.log10() + 20.0 * fc_ghz.log10() - 0.6 * (g.h_ut_m - 1.5);
            los_db.max(nlos)
        };
        PathLoss { loss_db, in_range }
    }
}

/// Probability that a link is in line of sight.
pub fn los_probability(g: &LinkGeometry, kind: UserKind) -> f64 {
    let d = g.d2d_m;
    let h = g.h_ut_m;
    if g.uses_aerial_model(kind) {
        if h >= 100.0 {
            return 1.0;
        }
        let d1 = (460.0 * h.log10() - 700.0).max(18.0);
        let p1 = 4300.0 * h.log10() - 3800.0;
        if d <= d1 {
            1.0
        } else {
            (d1 / d + (-d / p1).exp() * (1.0 - d1 / d)).clamp(0.0, 1.0)
        }
    } else {
        if d <= 18.0 {
            return 1.0;
        }
        let c = if h <= 13.0 {
            0.0
        } else {
            ((h - 13.0) / 10.0).powf(1.5)
        };
        let base = 18.0 / d + (-d / 63.0).exp() * (1.0 - 18.0 / d);
        (base * (1.0 + c * 1.25 * (d / 100.0).powi(3) * (-d / 150.0).exp())).clamp(0.0, 1.0)
    }
}

/// Element gain in dBi for angles in the panel frame (zenith 90° is boresight).
pub fn element_gain_db(azimuth_rad: f64, zenith_rad: f64) -> f64 {
    let phi = azimuth_rad.to_degrees();
    let theta = zenith_rad.to_degrees();
    let a_v = -(12.0 * ((theta - 90.0) / 65.0).powi(2)).min(30.0);
    let a_h = -(12.0 * (phi / 65.0).powi(2)).min(30.0);
    8.0 - (-(a_v + a_h)).min(30.0)
}

pub fn element_gain(azimuth_rad: f64, zenith_rad: f64) -> f64 {
    db_to_linear(element_gain_db(azimuth_rad, zenith_rad))
}

/// Large-scale gains of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScale {
    pub path_gain_linear: f64,
    pub shadow_gain_linear: f64,
    pub element_gain_linear: f64,
    pub beta_linear: f64,
    pub is_los: bool,
    pub p_los: f64,
}

impl LargeScale {
    pub fn new(path: f64, shadow: f64, element: f64, is_los: bool, p_los: f64) -> Self {
        Self {
            path_gain_linear: path,
            shadow_gain_linear: shadow,
            element_gain_linear: element,
            beta_linear: path * shadow * element,
            is_los,
            p_los,
        }
    }

    pub fn beta_db(&self) -> f64 {
        linear_to_db(self.beta_linear)
    }
}

/// Direction of a receiver as seen from a panel, in the panel frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringInputs {
    pub d3d_m: f64,
    pub azimuth_rad: f64,
    pub zenith_rad: f64,
    pub wave_vector: Vec3,
}

impl SteeringInputs {
    pub fn from_local_direction(d3d_m: f64, k: Vec3) -> Self {
        let k = k.normalize();
        Self {
            d3d_m,
            azimuth_rad: k.y.atan2(k.x),
            zenith_rad: k.z.clamp(-1.0, 1.0).acos(),
            wave_vector: k,
        }
    }

    pub fn between(sector: &Sector, rx: &Vec3) -> Self {
        let delta = rx - sector.position;
        let d3d = delta.norm();
        Self::from_local_direction(d3d, sector.panel.to_local(&(delta / d3d)))
    }
}

/// Plane-wave array response `e^{-j2π d/λ} e^{j2π kᵀu_m/λ}`.
pub fn los_component(steering: &SteeringInputs, panel: &UpaGeometry, wavelength_m: f64) -> Vec<C64> {
    let k = 2.0 * PI / wavelength_m;
    let common = -k * steering.d3d_m;
    panel
        .element_coords
        .iter()
        .map(|u| C64::from_polar(1.0, common + k * steering.wave_vector.dot(u)))
        .collect()
}

/// Rician channel vector and the K factor it was drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub h_dl: Vec<C64>,
    pub rician_k_linear: f64,
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `h = sqrt(K/(1+K)) h_los + sqrt(1/(1+K)) h_nlos`, `h_nlos ~ CN(0, I)`.
pub fn rician_channel<R: Rng + ?Sized>(los: &[C64], k_linear: f64, rng: &mut R) -> ChannelVector {
    let h_dl = if k_linear.is_infinite() {
        los.to_vec()
    } else {
        let a = (k_linear / (1.0 + k_linear)).sqrt();
        let b = (1.0 / (1.0 + k_linear)).sqrt();
        los.iter().map(|&l| l * a + complex_normal(rng) * b).collect()
    };
    ChannelVector {
        h_dl,
        rician_k_linear: k_linear,
    }
}

/// Zero-mean unit-variance Gaussian samples with correlation `exp(-|p_i - p_j| / d_corr)`.
///
/// Coincident positions receive identical values.
pub fn correlated_normals<R: Rng + ?Sized>(positions: &[Vec3], d_corr: f64, rng: &mut R) -> Vec<f64> {
    let mut unique: Vec<Vec3> = Vec::new();
    let mut index = Vec::with_capacity(positions.len());
    for p in positions {
        match unique.iter().position(|q| q == p) {
            Some(i) => index.push(i),
            None => {
                index.push(unique.len());
                unique.push(*p);
            }
        }
    }
    let n = unique.len();
    if n == 0 {
        return Vec::new();
    }
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let c = (-(unique[i] - unique[j]).norm() / d_corr).exp();
        if i == j {
            c + 1e-10
        } else {
            c
        }
    });
    let l = cov
        .cholesky()
        .expect("exponential covariance with jitter is positive definite")
        .unpack();
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let z: Vec<f64> = (0..n)
        .map(|i| (0..=i).map(|j| l[(i, j)] * white[j]).sum())
        .collect();
    index.into_iter().map(|i| z[i]).collect()
}

/// Log-normal shadow gains with exponential spatial correlation.
pub fn shadow_field<R: Rng + ?Sized>(
    positions: &[Vec3],
    decorrelation_distance_m: f64,
    sigma_db: f64,
    rng: &mut R,
) -> Vec<f64> {
    if sigma_db == 0.0 {
        return vec![1.0; positions.len()];
    }
    correlated_normals(positions, decorrelation_distance_m, rng)
        .into_iter()
        .map(|z| db_to_linear(sigma_db * z))
        .collect()
}

/// Unit-variance shadowing process along the highway arc length.
///
/// Sampled as a first-order autoregression on a fine grid, which has exactly
/// exponential correlation at the grid points; values in between are linear
/// interpolations.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowTrack {
    pub resolution_m: f64,
    pub values: Vec<f64>,
}

impl ShadowTrack {
    pub fn sample<R: Rng + ?Sized>(length_m: f64, resolution_m: f64, d_corr: f64, rng: &mut R) -> Self {
        let n = (length_m / resolution_m).ceil() as usize + 2;
        let a = (-resolution_m / d_corr).exp();
        let b = (1.0 - a * a).sqrt();
        let mut values = Vec::with_capacity(n);
        let mut x: f64 = StandardNormal.sample(rng);
        values.push(x);
        for _ in 1..n {
            let w: f64 = StandardNormal.sample(rng);
            x = a * x + b * w;
            values.push(x);
        }
        Self {
            resolution_m,
            values,
        }
    }

    pub fn value_at(&self, s: f64) -> f64 {
        let t = (s / self.resolution_m).max(0.0);
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let f = (t - i as f64).clamp(0.0, 1.0);
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// One (receiver, sector) link ready for beamforming.
///
/// The beamformed power gain of a weight vector `w` is
/// `beta * (|hᵀw|² + diffuse * ‖w‖²)`. Realized links carry the drawn Rician
/// vector and `diffuse = 0`; fading-averaged links carry the scaled LoS
/// response and the scattered power fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub large: LargeScale,
    pub h: Vec<C64>,
    pub diffuse: f64,
}

impl Link {
    #[inline]
    pub fn beam_gain(&self, w: &[C64]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut wn = 0.0;
        for (h, w) in self.h.iter().zip(w) {
            acc += h * w;
            wn += w.norm_sqr();
        }
        self.large.beta_linear * (acc.norm_sqr() + self.diffuse * wn)
    }
}

/// Links between a receiver set and every sector, row-major by receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub n_rx: usize,
    pub n_sectors: usize,
    pub links: Vec<Link>,
}

impl ChannelSet {
    pub fn link(&self, rx: usize, sector: usize) -> &Link {
        &self.links[rx * self.n_sectors + sector]
    }

    pub fn rx_links(&self, rx: usize) -> &[Link] {
        &self.links[rx * self.n_sectors..(rx + 1) * self.n_sectors]
    }

    pub fn concat(mut self, other: ChannelSet) -> ChannelSet {
        assert_eq!(self.n_sectors, other.n_sectors);
        self.n_rx += other.n_rx;
        self.links.extend(other.links);
        self
    }
}

fn kind_tag(kind: UserKind) -> u64 {
    match kind {
        UserKind::Ground => 0,
        UserKind::Aerial => 1,
    }
}

/// Channel generator bound to a scenario.
#[derive(Debug, Clone)]
pub struct ChannelModel<'a> {
    pub scenario: &'a Scenario,
    pub cfg: ChannelConfig,
    /// Per-site unit shadowing along the highway.
    aerial_tracks: Vec<ShadowTrack>,
}

impl<'a> ChannelModel<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let cfg = scenario.config.channel.clone();
        let seed = scenario.config.seeds.scenario;
        let aerial_tracks = (0..scenario.sites.len())
            .map(|site| {
                let mut r = rng::stream(seed, &[TAG_SHADOW_AERIAL, site as u64]);
                ShadowTrack::sample(
                    scenario.highway.total_length_m,
                    cfg.aerial_track_resolution_m,
                    cfg.decorrelation_aerial_m,
                    &mut r,
                )
            })
            .collect();
        Self {
            scenario,
            cfg,
            aerial_tracks,
        }
    }

    pub fn geometry(&self, rx: &User, sector: &Sector) -> LinkGeometry {
        let d = rx.position - sector.position;
        LinkGeometry {
            d2d_m: d.x.hypot(d.y),
            h_bs_m: sector.position.z,
            h_ut_m: rx.height_m(),
        }
    }

    pub fn k_factor(&self, los: bool) -> f64 {
        if los {
            db_to_linear(self.cfg.k_factor_los_db)
        } else {
            self.cfg.k_factor_nlos_linear
        }
    }

    pub fn shadow_sigma_db(&self, g: &LinkGeometry, kind: UserKind, los: bool) -> f64 {
        if g.uses_aerial_model(kind) {
            if los {
                self.cfg
                    .shadow_aerial_los_db
                    .unwrap_or_else(|| 4.64 * (-0.0066 * g.h_ut_m).exp())
            } else {
                self.cfg.shadow_aerial_nlos_db
            }
        } else if los {
            self.cfg.shadow_ground_los_db
        } else {
            self.cfg.shadow_ground_nlos_db
        }
    }

    /// Large-scale gain for a given LoS state and unit shadowing variate.
    pub fn large_scale(&self, rx: &User, sector: &Sector, los: bool, shadow_z: f64) -> LargeScale {
        let g = self.geometry(rx, sector);
        let p_los = los_probability(&g, rx.kind);
        let pl = path_loss(&g, rx.kind, los, self.scenario.radio.carrier_freq_hz);
        let st = SteeringInputs::between(sector, &rx.position);
        let sigma = self.shadow_sigma_db(&g, rx.kind, los);
        LargeScale::new(
            pl.gain_linear(),
            db_to_linear(sigma * shadow_z),
            element_gain(st.azimuth_rad, st.zenith_rad),
            los,
            p_los,
        )
    }

    /// Most probable LoS state of a link.
    pub fn likely_los(&self, rx: &User, sector: &Sector) -> bool {
        los_probability(&self.geometry(rx, sector), rx.kind) >= 0.5
    }

    pub fn los_vector(&self, rx: &User, sector: &Sector) -> Vec<C64> {
        let st = SteeringInputs::between(sector, &rx.position);
        los_component(&st, &sector.panel, self.scenario.radio.wavelength_m())
    }

    /// Expected channel `E[sqrt(ρτg) h]` with median shadowing and the most
    /// probable LoS state; the Rayleigh part averages out.
    pub fn expected_channel(&self, rx: &User, sector: &Sector) -> Vec<C64> {
        let los = self.likely_los(rx, sector);
        let large = self.large_scale(rx, sector, los, 0.0);
        let k = self.k_factor(los);
        let rician = if k.is_infinite() { 1.0 } else { (k / (1.0 + k)).sqrt() };
        let scale = (large.path_gain_linear * large.element_gain_linear).sqrt() * rician;
        self.los_vector(rx, sector).into_iter().map(|h| h * scale).collect()
    }

    /// Unit shadowing variate of the aerial track of `site` at arc length `s`.
    pub fn aerial_shadow_z(&self, site: usize, s: f64) -> f64 {
        self.aerial_tracks[site].value_at(s)
    }

    /// Unit shadowing variates, `[rx][site]`.
    fn shadow_variates(&self, receivers: &[User], snapshot: u64) -> Vec<Vec<f64>> {
        let n_sites = self.scenario.sites.len();
        let mut z = vec![vec![0.0; n_sites]; receivers.len()];
        let ground: Vec<usize> = receivers
            .iter()
            .enumerate()
            .filter(|(_, u)| u.kind == UserKind::Ground || u.arc_m.is_none())
            .map(|(i, _)| i)
            .collect();
        if !ground.is_empty() {
            let pos: Vec<Vec3> = ground.iter().map(|&i| receivers[i].position).collect();
            let seed = self.scenario.config.seeds.channel;
            let fields: Vec<Vec<f64>> = (0..n_sites)
                .into_par_iter()
                .map(|site| {
                    let mut r = rng::stream(seed, &[TAG_SHADOW_GROUND, snapshot, site as u64]);
                    correlated_normals(&pos, self.cfg.decorrelation_ground_m, &mut r)
                })
                .collect();
            for (site, field) in fields.iter().enumerate() {
                for (k, &i) in ground.iter().enumerate() {
                    z[i][site] = field[k];
                }
            }
        }
        for (i, u) in receivers.iter().enumerate() {
            if let (UserKind::Aerial, Some(s)) = (u.kind, u.arc_m) {
                for (site, slot) in z[i].iter_mut().enumerate() {
                    *slot = self.aerial_shadow_z(site, s);
                }
            }
        }
        z
    }

    fn link_rng(&self, tag: u64, snapshot: u64, rx: &User, sector: usize) -> ChaCha8Rng {
        rng::stream(
            self.scenario.config.seeds.channel,
            &[tag, snapshot, kind_tag(rx.kind), rx.id as u64, sector as u64],
        )
    }

    /// Draws one channel realization (LoS states, shadowing, fading) for all links.
    pub fn realize(&self, receivers: &[User], snapshot: u64) -> ChannelSet {
        let z = self.shadow_variates(receivers, snapshot);
        let sectors = &self.scenario.sectors;
        let links: Vec<Link> = receivers
            .par_iter()
            .zip(z.par_iter())
            .flat_map_iter(|(rx, zr)| {
                sectors.iter().map(move |sector| {
                    let g = self.geometry(rx, sector);
                    let p = los_probability(&g, rx.kind);
                    let mut lr = self.link_rng(TAG_LOS_STATE, snapshot, rx, sector.id);
                    let los = Bernoulli::new(p).expect("probability in [0,1]").sample(&mut lr);
                    let large = self.large_scale(rx, sector, los, zr[sector.site_id]);
                    let mut fr = self.link_rng(TAG_FADING, snapshot, rx, sector.id);
                    let cv = rician_channel(&self.los_vector(rx, sector), self.k_factor(los), &mut fr);
                    Link {
                        large,
                        h: cv.h_dl,
                        diffuse: 0.0,
                    }
                })
            })
            .collect();
        ChannelSet {
            n_rx: receivers.len(),
            n_sectors: sectors.len(),
            links,
        }
    }

    /// Fading-averaged links in the most probable LoS state, with the
    /// deterministic aerial shadowing for highway receivers and median
    /// shadowing otherwise.
    pub fn averaged(&self, receivers: &[User]) -> ChannelSet {
        let sectors = &self.scenario.sectors;
        let links: Vec<Link> = receivers
            .par_iter()
            .flat_map_iter(|rx| {
                sectors.iter().map(move |sector| {
                    let los = self.likely_los(rx, sector);
                    let z = match (rx.kind, rx.arc_m) {
                        (UserKind::Aerial, Some(s)) => self.aerial_shadow_z(sector.site_id, s),
                        _ => 0.0,
                    };
                    let large = self.large_scale(rx, sector, los, z);
                    let k = self.k_factor(los);
                    let (a, diffuse) = if k.is_infinite() {
                        (1.0, 0.0)
                    } else {
                        ((k / (1.0 + k)).sqrt(), 1.0 / (1.0 + k))
                    };
                    Link {
                        large,
                        h: self.los_vector(rx, sector).into_iter().map(|h| h * a).collect(),
                        diffuse,
                    }
                })
            })
            .collect();
        ChannelSet {
            n_rx: receivers.len(),
            n_sectors: sectors.len(),
            links,
        }
    }

    /// Expected-channel matrix between the highway points and one sector.
    pub fn stack_highway_channels(&self, sector: usize) -> HighwayStack {
        let rx = self.scenario.highway_receivers();
        let s = &self.scenario.sectors[sector];
        let m = s.panel.n_elements();
        let rows: Vec<Vec<C64>> = rx.iter().map(|u| self.expected_channel(u, s)).collect();
        HighwayStack {
            sector,
            matrix: DMatrix::from_fn(rx.len(), m, |r, c| rows[r][c]),
        }
    }
}

/// `N_r x M` expected channel matrix of the highway for one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct HighwayStack {
    pub sector: usize,
    pub matrix: DMatrix<C64>,
}

impl HighwayStack {
    /// Rows of a segment and rows of every other point.
    pub fn split(&self, segment: &std::ops::Range<usize>) -> (DMatrix<C64>, DMatrix<C64>) {
        split_rows(&self.matrix, segment)
    }
}

pub fn split_rows(m: &DMatrix<C64>, rows: &std::ops::Range<usize>) -> (DMatrix<C64>, DMatrix<C64>) {
    let inside: Vec<usize> = rows.clone().collect();
    let outside: Vec<usize> = (0..m.nrows()).filter(|r| !rows.contains(r)).collect();
    (m.select_rows(inside.iter()), m.select_rows(outside.iter()))
}

/// Writes `ue_id, kind, sector, los, path_gain_db, shadow_db, element_gain_db, beta_db, h_norm_sq`.
pub fn write_channel_dump<W: std::io::Write>(users: &[User], set: &ChannelSet, out: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "ue_id",
        "kind",
        "sector",
        "los",
        "path_gain_db",
        "shadow_db",
        "element_gain_db",
        "beta_db",
        "h_norm_sq",
    ])?;
    for (i, u) in users.iter().enumerate() {
        for (b, l) in set.rx_links(i).iter().enumerate() {
            w.write_record([
                u.id.to_string(),
                u.kind.as_str().to_string(),
                b.to_string(),
                (l.large.is_los as u8).to_string(),
                format!("{:.6}", linear_to_db(l.large.path_gain_linear)),
                format!("{:.6}", linear_to_db(l.large.shadow_gain_linear)),
                format!("{:.6}", linear_to_db(l.large.element_gain_linear)),
                format!("{:.6}", l.large.beta_db()),
                format!("{:.6}", l.h.iter().map(|x| x.norm_sqr()).sum::<f64>()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::rng::stream;

    fn geom(d2d: f64, h_ut: f64) -> LinkGeometry {
        LinkGeometry {
            d2d_m: d2d,
            h_bs_m: 25.0,
            h_ut_m: h_ut,
        }
    }

    #[test]
    fn uma_los_at_100m_matches_hand_evaluation() {
        // d3D = sqrt(100^2 + 23.5^2) = 102.72414516...; breakpoint 4*24*0.5*3.5e9/c = 1120.8 m
        let pl = path_loss(&geom(100.0, 1.5), UserKind::Ground, true, 3.5e9);
        let expected = 28.0 + 22.0 * 102.724_145_165_584_12_f64.log10() + 20.0 * 3.5_f64.log10();
        assert!((pl.loss_db - expected).abs() < 1e-9, "{} vs {}", pl.loss_db, expected);
        assert!((pl.loss_db - 83.138_156_677).abs() < 1e-8);
        assert!(pl.in_range);
    }

    #[test]
    fn uma_los_beyond_breakpoint() {
        let g = geom(2000.0, 1.5);
        let d_bp = 4.0 * 24.0 * 0.5 * 3.5e9 / crate::SPEED_OF_LIGHT;
        let d3d = (2000.0f64.powi(2) + 23.5f64.powi(2)).sqrt();
        let expected = 28.0 + 40.0 * d3d.log10() + 20.0 * 3.5f64.log10()
            - 9.0 * (d_bp * d_bp + 23.5 * 23.5).log10();
        assert!((path_loss(&g, UserKind::Ground, true, 3.5e9).loss_db - expected).abs() < 1e-9);
    }

    #[test]
    fn path_gain_non_increasing_in_distance() {
        for (kind, h) in [(UserKind::Ground, 1.5), (UserKind::Aerial, 100.0)] {
            for los in [true, false] {
                let mut prev = f64::INFINITY;
                for i in 1..400 {
                    let g = path_loss(&geom(10.0 * i as f64, h), kind, los, 3.5e9).gain_linear();
                    assert!(g <= prev * (1.0 + 1e-12));
                    prev = g;
                }
            }
        }
        let near = path_loss(&geom(200.0, 1.5), UserKind::Ground, true, 3.5e9).gain_linear();
        let far = path_loss(&geom(400.0, 1.5), UserKind::Ground, true, 3.5e9).gain_linear();
        assert!(far < near);
    }

    #[test]
    fn aerial_branch_selected_above_threshold() {
        let g = geom(300.0, 100.0);
        let d3d = g.d3d_m();
        let nlos_air = -17.5 + (46.0 - 7.0 * 2.0) * d3d.log10() + 20.0 * (40.0 * PI * 3.5 / 3.0).log10();
        let pl = path_loss(&g, UserKind::Aerial, false, 3.5e9);
        assert!((pl.loss_db - nlos_air).abs() < 1e-9);
        // the ground formula gives a different value for the same geometry
        let ground = path_loss(&g, UserKind::Ground, false, 3.5e9);
        assert!((ground.loss_db - pl.loss_db).abs() > 1.0);
        assert!(!ground.in_range);
        // an aerial user below 22.5 m uses the ground model
        let low = geom(300.0, 20.0);
        assert_eq!(
            path_loss(&low, UserKind::Aerial, true, 3.5e9),
            path_loss(&low, UserKind::Ground, true, 3.5e9)
        );
    }

    #[test]
    fn los_probabilities() {
        assert_eq!(los_probability(&geom(800.0, 100.0), UserKind::Aerial), 1.0);
        assert_eq!(los_probability(&geom(800.0, 150.0), UserKind::Aerial), 1.0);
        assert_eq!(los_probability(&geom(1e-3, 1.5), UserKind::Ground), 1.0);
        // 50 m aerial: d1 = max(460 log10 50 - 700, 18) = 81.5 m
        let d1 = 460.0 * 50f64.log10() - 700.0;
        let p1 = 4300.0 * 50f64.log10() - 3800.0;
        let d = 400.0;
        let want = d1 / d + (-d / p1).exp() * (1.0 - d1 / d);
        assert!((los_probability(&geom(d, 50.0), UserKind::Aerial) - want).abs() < 1e-12);
        let mut prev = 1.0;
        for i in 1..300 {
            let p = los_probability(&geom(5.0 * i as f64, 1.5), UserKind::Ground);
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= prev + 1e-12);
            prev = p;
        }
    }

    #[test]
    fn element_pattern() {
        assert!((element_gain_db(0.0, PI / 2.0) - 8.0).abs() < 1e-12);
        let half = (65.0f64 / 2.0).to_radians();
        assert!((element_gain_db(half, PI / 2.0) - 5.0).abs() < 1e-12);
        assert!((element_gain_db(0.0, PI / 2.0 + half) - 5.0).abs() < 1e-12);
        for i in 0..=36 {
            for j in 0..=18 {
                let g = element_gain_db((i as f64 * 10.0 - 180.0).to_radians(), (j as f64 * 10.0).to_radians());
                assert!(g >= 8.0 - 30.0 - 1e-12 && g <= 8.0 + 1e-12);
            }
        }
    }

    #[test]
    fn los_component_unit_modulus_and_matched_gain() {
        let panel = UpaGeometry::new(4, 8, (0.5, 0.5), 0.0857, 25.0, 0.0, 0.0);
        let st = SteeringInputs::from_local_direction(321.7, Vec3::new(0.7, -0.3, 0.2));
        assert!((st.wave_vector.norm() - 1.0).abs() < 1e-15);
        let h = los_component(&st, &panel, 0.0857);
        assert!(h.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        let w: Vec<C64> = h.iter().map(|x| x.conj() / (32f64).sqrt()).collect();
        let g: C64 = h.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((g.norm_sqr() - 32.0).abs() < 1e-9);

        let single = UpaGeometry::new(1, 1, (0.5, 0.5), 0.1, 25.0, 0.0, 0.0);
        let st = SteeringInputs::from_local_direction(12.34, Vec3::new(1.0, 0.0, 0.0));
        let h = los_component(&st, &single, 0.1);
        let want = C64::from_polar(1.0, -2.0 * PI * 12.34 / 0.1);
        assert!((h[0] - want).norm() < 1e-9);
    }

    #[test]
    fn rician_limits_and_power() {
        let los: Vec<C64> = (0..8).map(|i| C64::from_polar(1.0, 0.3 * i as f64)).collect();
        let mut r = stream(3, &[1]);
        let h = rician_channel(&los, 1e9, &mut r);
        for (a, b) in h.h_dl.iter().zip(&los) {
            assert!((a - b).norm() < 1e-3);
        }
        for k in [0.0f64, 1.0, 7.94] {
            let mut r = stream(11, &[k.to_bits()]);
            let n = 10_000;
            let mean: f64 = (0..n)
                .map(|_| rician_channel(&los, k, &mut r).h_dl.iter().map(|x| x.norm_sqr()).sum::<f64>())
                .sum::<f64>()
                / n as f64;
            assert!((mean / 8.0 - 1.0).abs() < 0.05, "K={k}: {mean}");
        }
    }

    #[test]
    fn shadow_field_basics() {
        let mut r = stream(5, &[0]);
        let p = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0)];
        assert_eq!(shadow_field(&p, 50.0, 0.0, &mut r), vec![1.0, 1.0]);
        let same = vec![Vec3::new(3.0, 4.0, 0.0), Vec3::new(3.0, 4.0, 0.0)];
        let v = shadow_field(&same, 50.0, 6.0, &mut r);
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn shadow_field_correlation_at_decorrelation_distance() {
        let mut r = stream(6, &[0]);
        let p = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(50.0, 0.0, 0.0)];
        let n = 10_000;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = correlated_normals(&p, 50.0, &mut r);
            sxy += z[0] * z[1];
            sxx += z[0] * z[0];
            syy += z[1] * z[1];
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!((rho - (-1f64).exp()).abs() < 0.1, "{rho}");
    }

    #[test]
    fn shadow_track_correlation() {
        let mut r = stream(8, &[0]);
        let t = ShadowTrack::sample(200_000.0, 1.0, 30.0, &mut r);
        let n = 190_000;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for i in 0..n {
            let a = t.value_at(i as f64);
            let b = t.value_at(i as f64 + 30.0);
            sxy += a * b;
            sxx += a * a;
        }
        assert!((sxy / sxx - (-1f64).exp()).abs() < 0.1);
    }

    #[test]
    fn beta_is_exact_product() {
        let ls = LargeScale::new(1.234e-11, 0.77, 3.1, true, 0.9);
        assert_eq!(ls.beta_linear, 1.234e-11 * 0.77 * 3.1);
    }

    #[test]
    fn expected_channel_scaling() {
        let mut cfg = Config::default();
        cfg.layout.tiers = 0;
        let s = Scenario::build(&cfg).unwrap();
        let model = ChannelModel::new(&s);
        let rx = &s.highway_receivers()[3];
        let sector = &s.sectors[0];
        let h = model.expected_channel(rx, sector);
        let los = model.los_vector(rx, sector);
        let large = model.large_scale(rx, sector, true, 0.0);
        let k = db_to_linear(9.0);
        let scale = (large.path_gain_linear * large.element_gain_linear * k / (1.0 + k)).sqrt();
        for (a, b) in h.iter().zip(&los) {
            assert!((a - b * scale).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn expected_channel_is_monte_carlo_mean() {
        let los: Vec<C64> = (0..4).map(|i| C64::from_polar(1.0, 1.1 * i as f64)).collect();
        let k = 1.0;
        let mut r = stream(21, &[0]);
        let n = 10_000;
        let mut mean = vec![C64::new(0.0, 0.0); 4];
        for _ in 0..n {
            for (m, h) in mean.iter_mut().zip(rician_channel(&los, k, &mut r).h_dl) {
                *m += h / n as f64;
            }
        }
        let a = (k / (1.0 + k)).sqrt();
        for (m, l) in mean.iter().zip(&los) {
            // entry magnitude is sqrt(1/2); 2% of it
            assert!((m - l * a).norm() < 0.02 * a + 0.01, "{m} vs {}", l * a);
        }
    }

    #[test]
    fn realization_is_order_independent() {
        let mut cfg = Config::default();
        cfg.layout.tiers = 1;
        let s = Scenario::build(&cfg).unwrap();
        let model = ChannelModel::new(&s);
        let users = s.ground_users(0);
        let a = model.realize(&users, 4);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| model.realize(&users, 4));
        assert_eq!(a, b);
        let mut rev = users.clone();
        rev.reverse();
        let c = model.realize(&rev, 4);
        // the shadowing field is joint over the drop; LoS and fading are per link
        for (i, u) in rev.iter().enumerate() {
            for b in 0..s.n_sectors() {
                let x = c.link(i, b);
                let y = a.link(u.id, b);
                assert_eq!(x.large.is_los, y.large.is_los);
                assert_eq!(x.large.path_gain_linear, y.large.path_gain_linear);
            }
        }
    }

    #[test]
    fn highway_stack_rows_and_split() {
        let mut cfg = Config::default();
        cfg.layout.tiers = 0;
        let s = Scenario::build(&cfg).unwrap();
        let model = ChannelModel::new(&s);
        let stack = model.stack_highway_channels(1);
        assert_eq!(stack.matrix.nrows(), s.highway.n_points());
        let rx = s.highway_receivers();
        let row5 = model.expected_channel(&rx[5], &s.sectors[1]);
        for (c, v) in row5.iter().enumerate() {
            assert_eq!(stack.matrix[(5, c)], *v);
        }
        let (inside, outside) = stack.split(&(10..20));
        assert_eq!(inside.nrows() + outside.nrows(), stack.matrix.nrows());
        assert_eq!(inside.row(0), stack.matrix.row(10));
        assert_eq!(outside.row(10), stack.matrix.row(20));
        let (all, none) = stack.split(&(0..stack.matrix.nrows()));
        assert_eq!(all.nrows(), stack.matrix.nrows());
        assert_eq!(none.nrows(), 0);
    }
}
