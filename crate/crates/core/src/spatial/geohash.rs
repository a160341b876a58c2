//! Geohash encoding and decoding.
//!
//! Standard base-32 geohash: alternate longitude/latitude interval bisection
//! starting with longitude, emit one bit per bisection (1 when the value lies
//! in the upper half, boundaries included), and map each 5-bit group through
//! the alphabet below. Cell ids are prefix-compatible: truncating a hash
//! yields the hash of the containing coarser cell.

use crate::error::SpatialError;

pub const GEOHASH_BASE32: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";

const MAX_PRECISION: usize = 12;

fn validate_coords(lat: f64, lon: f64) -> Result<(), SpatialError> {
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err(SpatialError::BadLatitude(lat));
    }
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(SpatialError::BadLongitude(lon));
    }
    Ok(())
}

/// Encodes a coordinate to a geohash of `precision` characters (1..=12).
pub fn geohash_encode(lat: f64, lon: f64, precision: usize) -> Result<String, SpatialError> {
    if precision == 0 || precision > MAX_PRECISION {
        return Err(SpatialError::BadPrecision(precision));
    }
    validate_coords(lat, lon)?;

    let mut lat_range = (-90.0_f64, 90.0_f64);
    let mut lon_range = (-180.0_f64, 180.0_f64);
    let mut hash = String::with_capacity(precision);
    let mut bits = 0u8;
    let mut bit_count = 0u8;
    let mut even_bit = true; // longitude first

    while hash.len() < precision {
        let (value, range) = if even_bit { (lon, &mut lon_range) } else { (lat, &mut lat_range) };
        let mid = (range.0 + range.1) / 2.0;
        bits <<= 1;
        if value >= mid {
            bits |= 1;
            range.0 = mid;
        } else {
            range.1 = mid;
        }
        even_bit = !even_bit;
        bit_count += 1;
        if bit_count == 5 {
            hash.push(GEOHASH_BASE32[bits as usize] as char);
            bits = 0;
            bit_count = 0;
        }
    }
    Ok(hash)
}

/// A decoded geohash: the cell center plus half-widths of the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeohashCell {
    pub lat: f64,
    pub lon: f64,
    pub lat_err: f64,
    pub lon_err: f64,
}

/// Decodes a geohash back to its cell center and error bounds. Characters
/// outside the base-32 alphabet (including uppercase) are rejected.
pub fn geohash_decode(hash: &str) -> Result<GeohashCell, SpatialError> {
    if hash.is_empty() {
        return Err(SpatialError::EmptyGeohash);
    }
    let mut lat_range = (-90.0_f64, 90.0_f64);
    let mut lon_range = (-180.0_f64, 180.0_f64);
    let mut even_bit = true;
    for ch in hash.chars() {
        let value = GEOHASH_BASE32
            .iter()
            .position(|&b| b as char == ch)
            .ok_or(SpatialError::BadGeohashChar(ch))?;
        for shift in (0..5).rev() {
            let bit = (value >> shift) & 1;
            let range = if even_bit { &mut lon_range } else { &mut lat_range };
            let mid = (range.0 + range.1) / 2.0;
            if bit == 1 {
                range.0 = mid;
            } else {
                range.1 = mid;
            }
            even_bit = !even_bit;
        }
    }
    Ok(GeohashCell {
        lat: (lat_range.0 + lat_range.1) / 2.0,
        lon: (lon_range.0 + lon_range.1) / 2.0,
        lat_err: (lat_range.1 - lat_range.0) / 2.0,
        lon_err: (lon_range.1 - lon_range.0) / 2.0,
    })
}
