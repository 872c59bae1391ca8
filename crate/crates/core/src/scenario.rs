//! Deployment geometry: hexagonal sites, three-sector UPA panels, ground users,
//! the aerial highway and UAV placement.

use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Config, RadioConfig};
use crate::rng::{self, TAG_GROUND_USERS};
use crate::{Error, Result, Vec3};

/// Uniform planar array on one sector.
///
/// Element `(col, row)` sits at index `col * m_v + row`. In the panel frame
/// `x` is the boresight, `y` runs along the columns and `z` along the rows;
/// element coordinates are offsets from the panel centre in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct UpaGeometry {
    pub m_h: usize,
    pub m_v: usize,
    pub spacing_h_wavelengths: f64,
    pub spacing_v_wavelengths: f64,
    pub panel_height_m: f64,
    pub bearing_deg: f64,
    pub downtilt_deg: f64,
    pub element_coords: Vec<Vec3>,
}

impl UpaGeometry {
    pub fn new(
        m_h: usize,
        m_v: usize,
        spacing_wavelengths: (f64, f64),
        wavelength_m: f64,
        panel_height_m: f64,
        bearing_deg: f64,
        downtilt_deg: f64,
    ) -> Self {
        let dy = spacing_wavelengths.0 * wavelength_m;
        let dz = spacing_wavelengths.1 * wavelength_m;
        let cy = (m_h as f64 - 1.0) / 2.0;
        let cz = (m_v as f64 - 1.0) / 2.0;
        let mut element_coords = Vec::with_capacity(m_h * m_v);
        for col in 0..m_h {
            for row in 0..m_v {
                element_coords.push(Vec3::new(
                    0.0,
                    (col as f64 - cy) * dy,
                    (row as f64 - cz) * dz,
                ));
            }
        }
        Self {
            m_h,
            m_v,
            spacing_h_wavelengths: spacing_wavelengths.0,
            spacing_v_wavelengths: spacing_wavelengths.1,
            panel_height_m,
            bearing_deg,
            downtilt_deg,
            element_coords,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.m_h * self.m_v
    }

    pub fn with_orientation(&self, bearing_deg: f64, downtilt_deg: f64) -> Self {
        Self {
            bearing_deg,
            downtilt_deg,
            ..self.clone()
        }
    }

    /// Panel-frame axes (boresight, horizontal, vertical) in global coordinates.
    pub fn axes(&self) -> [Vec3; 3] {
        let a = self.bearing_deg.to_radians();
        let t = self.downtilt_deg.to_radians();
        let boresight = Vec3::new(a.cos() * t.cos(), a.sin() * t.cos(), -t.sin());
        let horizontal = Vec3::new(-a.sin(), a.cos(), 0.0);
        let vertical = Vec3::new(a.cos() * t.sin(), a.sin() * t.sin(), t.cos());
        [boresight, horizontal, vertical]
    }

    /// Rotates a global direction into the panel frame.
    pub fn to_local(&self, global: &Vec3) -> Vec3 {
        let [x, y, z] = self.axes();
        Vec3::new(global.dot(&x), global.dot(&y), global.dot(&z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub id: usize,
    pub site_id: usize,
    pub panel: UpaGeometry,
    pub position: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserKind {
    Ground,
    Aerial,
}

impl UserKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UserKind::Ground => "ground",
            UserKind::Aerial => "aerial",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: usize,
    pub kind: UserKind,
    pub position: Vec3,
    /// Arc-length position along the highway, for aerial users.
    pub arc_m: Option<f64>,
}

impl User {
    pub fn height_m(&self) -> f64 {
        self.position.z
    }
}

/// Discretized aerial corridor.
#[derive(Debug, Clone, PartialEq)]
pub struct AerialHighway {
    pub polyline: Vec<Vec3>,
    pub total_length_m: f64,
    pub altitude_m: f64,
    pub spacing_m: f64,
    pub points: Vec<Vec3>,
    pub point_arc_m: Vec<f64>,
    pub segments: Vec<Range<usize>>,
}

impl AerialHighway {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    /// Segment holding point `r`.
    pub fn segment_of(&self, r: usize) -> usize {
        self.segments
            .iter()
            .position(|s| s.contains(&r))
            .expect("segments partition the points")
    }

    /// Position at arc length `s` (clamped to the polyline).
    pub fn point_at(&self, s: f64) -> Vec3 {
        point_on_polyline(&self.polyline, s)
    }
}

fn polyline_length(poly: &[Vec3]) -> f64 {
    poly.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

fn point_on_polyline(poly: &[Vec3], s: f64) -> Vec3 {
    let mut remaining = s.max(0.0);
    for w in poly.windows(2) {
        let len = (w[1] - w[0]).norm();
        if remaining <= len {
            if len == 0.0 {
                return w[0];
            }
            return w[0] + (w[1] - w[0]) * (remaining / len);
        }
        remaining -= len;
    }
    *poly.last().expect("non-empty polyline")
}

/// Number of sites in a hexagonal grid with `tiers` rings around the centre.
pub fn site_count(tiers: usize) -> usize {
    1 + 3 * tiers * (tiers + 1)
}

/// Site centres on a hexagonal lattice, centre first then ring by ring.
///
/// Nearest neighbours sit at azimuths 0°, 60°, ..., 300°, so sector
/// boresights at 0°, 120° and 240° point at neighbouring sites.
pub fn hex_site_positions(tiers: usize, isd_m: f64) -> Vec<[f64; 2]> {
    let t = tiers as i64;
    let mut axial: Vec<(i64, i64)> = Vec::new();
    for q in -t..=t {
        for r in -t..=t {
            if (q + r).abs() <= t {
                axial.push((q, r));
            }
        }
    }
    let ring = |&(q, r): &(i64, i64)| q.abs().max(r.abs()).max((q + r).abs());
    let xy = |&(q, r): &(i64, i64)| {
        let x = isd_m * (q as f64 + r as f64 / 2.0);
        let y = isd_m * (r as f64) * 3f64.sqrt() / 2.0;
        [x, y]
    };
    axial.sort_by(|a, b| {
        let ka = (ring(a), angle_key(xy(a)));
        let kb = (ring(b), angle_key(xy(b)));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    axial.iter().map(xy).collect()
}

fn angle_key(p: [f64; 2]) -> f64 {
    let a = p[1].atan2(p[0]);
    // snap so lattice points on the same ray sort identically on every platform
    let a = (a * 1e9).round() / 1e9;
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Builds the three-sector hexagonal layout.
pub fn build_hex_layout(tiers: usize, isd_m: f64, sector_template: &UpaGeometry) -> Vec<Sector> {
    let mut sectors = Vec::with_capacity(3 * site_count(tiers));
    for (site_id, xy) in hex_site_positions(tiers, isd_m).into_iter().enumerate() {
        for k in 0..3 {
            let bearing = 120.0 * k as f64;
            sectors.push(Sector {
                id: sectors.len(),
                site_id,
                panel: sector_template.with_orientation(bearing, sector_template.downtilt_deg),
                position: Vec3::new(xy[0], xy[1], sector_template.panel_height_m),
            });
        }
    }
    sectors
}

/// Whether the horizontal offset `d` from a site lies in the site's hexagon
/// of inradius `isd_m / 2` (flat sides facing the neighbours).
fn inside_site_hexagon(d: [f64; 2], isd_m: f64) -> bool {
    let apothem = isd_m / 2.0;
    (0..3).all(|k| {
        let a = (60.0 * k as f64).to_radians();
        (d[0] * a.cos() + d[1] * a.sin()).abs() <= apothem
    })
}

fn wrap_deg(a: f64) -> f64 {
    let mut a = a % 360.0;
    if a > 180.0 {
        a -= 360.0;
    } else if a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Drops `per_cell` ground users uniformly over each sector's dominance area
/// (the site hexagon intersected with the sector's 120° wedge).
pub fn place_ground_users(
    sectors: &[Sector],
    per_cell: usize,
    isd_m: f64,
    height_m: f64,
    min_distance_m: f64,
    seed: u64,
    draw: u64,
) -> Vec<User> {
    let r_out = isd_m / 3f64.sqrt();
    let mut users = Vec::with_capacity(sectors.len() * per_cell);
    for sector in sectors {
        let mut rng = rng::stream(seed, &[TAG_GROUND_USERS, draw, sector.id as u64]);
        let mut placed = 0;
        while placed < per_cell {
            let d = [rng.random_range(-r_out..r_out), rng.random_range(-r_out..r_out)];
            let dist = d[0].hypot(d[1]);
            if dist < min_distance_m || !inside_site_hexagon(d, isd_m) {
                continue;
            }
            let az = d[1].atan2(d[0]).to_degrees();
            if wrap_deg(az - sector.panel.bearing_deg).abs() > 60.0 {
                continue;
            }
            users.push(User {
                id: users.len(),
                kind: UserKind::Ground,
                position: Vec3::new(sector.position.x + d[0], sector.position.y + d[1], height_m),
                arc_m: None,
            });
            placed += 1;
        }
    }
    users
}

/// Discretizes a polyline into equidistant points and contiguous segments.
pub fn discretize_highway(polyline: &[Vec3], d_r: f64, n_s: usize) -> Result<AerialHighway> {
    if polyline.len() < 2 {
        return Err(Error::DegenerateHighway("needs at least two vertices".into()));
    }
    let total = polyline_length(polyline);
    if !(total > 0.0) {
        return Err(Error::DegenerateHighway("polyline has zero length".into()));
    }
    if !(d_r > 0.0) || n_s == 0 {
        return Err(Error::InvalidArgument(
            "point spacing must be positive and segments non-empty".into(),
        ));
    }
    if total < d_r * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "highway length {total} m is shorter than the point spacing {d_r} m"
        )));
    }
    let n_r = ((total / d_r) * (1.0 + 1e-12)).floor() as usize + 1;
    let point_arc_m: Vec<f64> = (0..n_r).map(|i| i as f64 * d_r).collect();
    let points = point_arc_m.iter().map(|&s| point_on_polyline(polyline, s)).collect();
    let segments = (0..n_r)
        .step_by(n_s)
        .map(|start| start..(start + n_s).min(n_r))
        .collect();
    let altitude_m = polyline.iter().map(|p| p.z).sum::<f64>() / polyline.len() as f64;
    Ok(AerialHighway {
        polyline: polyline.to_vec(),
        total_length_m: total,
        altitude_m,
        spacing_m: d_r,
        points,
        point_arc_m,
        segments,
    })
}

/// Places `floor(L / d_iud)` UAVs at arc lengths `offset + k d_iud (mod L)`.
///
/// `first_id` is the id given to the first UAV.
pub fn place_uavs(highway: &AerialHighway, d_iud: f64, offset_m: f64, first_id: usize) -> Vec<User> {
    let l = highway.total_length_m;
    let n = ((l / d_iud) * (1.0 + 1e-12)).floor().max(1.0) as usize;
    place_n_uavs(highway, n, d_iud, offset_m, first_id)
}

/// Places `n` UAVs with spacing `d_iud`, wrapping around the highway.
pub fn place_n_uavs(
    highway: &AerialHighway,
    n: usize,
    d_iud: f64,
    offset_m: f64,
    first_id: usize,
) -> Vec<User> {
    let l = highway.total_length_m;
    (0..n)
        .map(|k| {
            let s = (offset_m + k as f64 * d_iud).rem_euclid(l);
            User {
                id: first_id + k,
                kind: UserKind::Aerial,
                position: highway.point_at(s),
                arc_m: Some(s),
            }
        })
        .collect()
}

/// Immutable deployment: radio constants, sectors and the aerial highway.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub radio: RadioConfig,
    pub sites: Vec<Vec3>,
    pub sectors: Vec<Sector>,
    pub highway: AerialHighway,
}

impl Scenario {
    pub fn build(config: &Config) -> Result<Self> {
        config.validate()?;
        let radio = config.radio.clone();
        let l = &config.layout;
        let template = UpaGeometry::new(
            l.panel.m_h,
            l.panel.m_v,
            (l.panel.spacing_h_wavelengths, l.panel.spacing_v_wavelengths),
            radio.wavelength_m(),
            l.bs_height_m,
            0.0,
            l.panel.downtilt_deg,
        );
        let sectors = build_hex_layout(l.tiers, l.isd_m, &template);
        let sites = hex_site_positions(l.tiers, l.isd_m)
            .into_iter()
            .map(|p| Vec3::new(p[0], p[1], l.bs_height_m))
            .collect();
        let h = &config.highway;
        let poly: Vec<Vec3> = h
            .waypoints
            .iter()
            .map(|p| Vec3::new(p[0], p[1], h.altitude_m))
            .collect();
        let highway = discretize_highway(&poly, h.point_spacing_m, h.points_per_segment)?;
        Ok(Self {
            config: config.clone(),
            radio,
            sites,
            sectors,
            highway,
        })
    }

    pub fn n_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn n_elements(&self) -> usize {
        self.sectors[0].panel.n_elements()
    }

    /// Ground users of one drop; `draw` selects an independent drop.
    pub fn ground_users(&self, draw: u64) -> Vec<User> {
        let l = &self.config.layout;
        place_ground_users(
            &self.sectors,
            self.config.users.ground_per_cell,
            l.isd_m,
            self.config.users.ground_height_m,
            l.min_ground_distance_m,
            self.config.seeds.scenario,
            draw,
        )
    }

    /// Highway discretization points as aerial receivers.
    pub fn highway_receivers(&self) -> Vec<User> {
        self.highway
            .points
            .iter()
            .zip(&self.highway.point_arc_m)
            .enumerate()
            .map(|(i, (p, &s))| User {
                id: i,
                kind: UserKind::Aerial,
                position: *p,
                arc_m: Some(s),
            })
            .collect()
    }
}
