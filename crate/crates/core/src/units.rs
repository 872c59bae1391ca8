//! dB helpers.

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        assert!((mw_to_dbm(dbm_to_mw(46.0)) - 46.0).abs() < 1e-12);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((linear_to_db(2.0) - 3.010299956639812).abs() < 1e-12);
    }
}
