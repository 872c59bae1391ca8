//! 2D-DFT codebooks.
//!
//! The SSB codebook concatenates DFT sub-books for progressively fewer active
//! antenna columns (rightmost columns switched off first). The data codebook is
//! a single full-panel DFT grid.
//!
//! Beam indices are signed and centred: a codeword with indices `(k_h, k_v)`
//! over `n_h` active columns steers to the panel-frame direction with
//! `u_y = k_h / (O_h n_h d_h)` and `u_z = k_v / (O_v m_v d_v)`, where `d` is the
//! element spacing in wavelengths.

use std::f64::consts::PI;
use std::io::Write;

use crate::scenario::UpaGeometry;
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub weights: Vec<C64>,
    pub active_columns: usize,
    pub beam_index_h: i64,
    pub beam_index_v: i64,
}

impl Codeword {
    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Signed DFT index range `[-floor(n/2), ceil(n/2))`.
fn centred(n: usize) -> impl Iterator<Item = i64> {
    let lo = -((n / 2) as i64);
    lo..lo + n as i64
}

/// DFT beams over the `active_cols` leftmost columns of an `m_h x m_v` panel.
///
/// Ordered vertical index major, horizontal minor.
pub fn dft_subbook(active_cols: usize, m_h: usize, m_v: usize, oversampling: (usize, usize)) -> Vec<Codeword> {
    assert!(active_cols >= 1 && active_cols <= m_h, "active_cols must lie in 1..=m_h");
    let (o_h, o_v) = oversampling;
    let n_h = o_h * active_cols;
    let n_v = o_v * m_v;
    let scale = 1.0 / ((active_cols * m_v) as f64).sqrt();
    let mut out = Vec::with_capacity(n_h * n_v);
    for k_v in centred(n_v) {
        for k_h in centred(n_h) {
            let mut weights = vec![C64::new(0.0, 0.0); m_h * m_v];
            for col in 0..active_cols {
                for row in 0..m_v {
                    let phase = -2.0 * PI * (col as f64 * k_h as f64 / n_h as f64 + row as f64 * k_v as f64 / n_v as f64);
                    weights[col * m_v + row] = C64::from_polar(scale, phase);
                }
            }
            out.push(Codeword {
                weights,
                active_columns: active_cols,
                beam_index_h: k_h,
                beam_index_v: k_v,
            });
        }
    }
    out
}

/// Indexed collection of codewords with the oversampling used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Vec<Codeword>,
    pub m_h: usize,
    pub m_v: usize,
    pub spacing_wavelengths: (f64, f64),
    pub oversampling: (usize, usize),
    /// Start offset of each sub-book, by number of active columns descending.
    pub subbook_offsets: Vec<usize>,
}

pub type SsbCodebook = Codebook;
pub type DlCodebook = Codebook;

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn get(&self, i: usize) -> &Codeword {
        &self.codewords[i]
    }

    /// Panel-frame direction cosines `(u_y, u_z)` a codeword points to.
    pub fn direction(&self, i: usize) -> (f64, f64) {
        let c = &self.codewords[i];
        let (o_h, o_v) = self.oversampling;
        let u_y = c.beam_index_h as f64 / ((o_h * c.active_columns) as f64 * self.spacing_wavelengths.0);
        let u_z = c.beam_index_v as f64 / ((o_v * self.m_v) as f64 * self.spacing_wavelengths.1);
        (u_y, u_z)
    }

    /// Full-panel codeword whose steering direction is nearest to `(u_y, u_z)`.
    pub fn nearest_full_panel(&self, u_y: f64, u_z: f64) -> usize {
        let end = self.subbook_offsets.get(1).copied().unwrap_or(self.len());
        (0..end)
            .min_by(|&a, &b| {
                let da = dist2(self.direction(a), (u_y, u_z));
                let db = dist2(self.direction(b), (u_y, u_z));
                da.total_cmp(&db)
            })
            .expect("codebook is non-empty")
    }

    /// Writes `index, active_cols, ih, iv, w0_re, w0_im, ...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let m = self.m_h * self.m_v;
        let mut header = vec![
            "index".to_string(),
            "active_cols".into(),
            "ih".into(),
            "iv".into(),
        ];
        for e in 0..m {
            header.push(format!("w{e}_re"));
            header.push(format!("w{e}_im"));
        }
        w.write_record(&header)?;
        for (i, c) in self.codewords.iter().enumerate() {
            let mut rec = vec![
                i.to_string(),
                c.active_columns.to_string(),
                c.beam_index_h.to_string(),
                c.beam_index_v.to_string(),
            ];
            for x in &c.weights {
                rec.push(format!("{:.12e}", x.re));
                rec.push(format!("{:.12e}", x.im));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Sub-books for `m_h, m_h - 1, ..., 1` active columns, concatenated.
pub fn build_ssb_codebook(panel: &UpaGeometry, oversampling: (usize, usize)) -> SsbCodebook {
    let mut codewords = Vec::new();
    let mut subbook_offsets = Vec::new();
    for active in (1..=panel.m_h).rev() {
        subbook_offsets.push(codewords.len());
        codewords.extend(dft_subbook(active, panel.m_h, panel.m_v, oversampling));
    }
    Codebook {
        codewords,
        m_h: panel.m_h,
        m_v: panel.m_v,
        spacing_wavelengths: (panel.spacing_h_wavelengths, panel.spacing_v_wavelengths),
        oversampling,
        subbook_offsets,
    }
}

/// Full-panel DFT grid.
pub fn build_dl_codebook(panel: &UpaGeometry, oversampling: (usize, usize)) -> DlCodebook {
    Codebook {
        codewords: dft_subbook(panel.m_h, panel.m_h, panel.m_v, oversampling),
        m_h: panel.m_h,
        m_v: panel.m_v,
        spacing_wavelengths: (panel.spacing_h_wavelengths, panel.spacing_v_wavelengths),
        oversampling,
        subbook_offsets: vec![0],
    }
}

/// `|hᵀw|²`.
pub fn beamforming_gain(h: &[C64], w: &[C64]) -> f64 {
    h.iter().zip(w).map(|(a, b)| a * b).sum::<C64>().norm_sqr()
}
