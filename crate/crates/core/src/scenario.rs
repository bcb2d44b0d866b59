//! Measurement geometry, link budget and train/test splits.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Location {
    pub fn new(id: usize, x: f64, y: f64, z: f64) -> Self {
        Self { id, x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn translated(&self, dx: f64, dy: f64, dz: f64) -> Self {
        Self::new(self.id, self.x + dx, self.y + dy, self.z + dz)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: &Location, b: &Location) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Transmit SNR `gamma_tx = P_tx / (B N0)`, linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    gamma_tx: f64,
}

impl LinkBudget {
    pub fn new(gamma_tx: f64) -> Result<Self> {
        if !(gamma_tx > 0.0 && gamma_tx.is_finite()) {
            return Err(Error::Config(format!(
                "gamma_tx must be positive and finite, got {gamma_tx}"
            )));
        }
        Ok(Self { gamma_tx })
    }

    /// From transmit power in watts, bandwidth in Hz and noise density in W/Hz.
    pub fn from_power(p_tx_w: f64, bandwidth_hz: f64, n0_w_per_hz: f64) -> Result<Self> {
        if !(bandwidth_hz > 0.0 && n0_w_per_hz > 0.0) {
            return Err(Error::Config(
                "bandwidth and noise density must be positive".into(),
            ));
        }
        Self::new(p_tx_w / (bandwidth_hz * n0_w_per_hz))
    }

    pub fn from_dbm(p_tx_dbm: f64, bandwidth_hz: f64, n0_dbm_per_hz: f64) -> Result<Self> {
        let to_w = |dbm: f64| 10f64.powf((dbm - 30.0) / 10.0);
        Self::from_power(to_w(p_tx_dbm), bandwidth_hz, to_w(n0_dbm_per_hz))
    }

    pub fn gamma_tx(&self) -> f64 {
        self.gamma_tx
    }

    pub fn gamma_tx_db(&self) -> f64 {
        10.0 * self.gamma_tx.log10()
    }
}

/// Rectangular patch of a triangular lattice: `rows` rows of `cols` points,
/// odd rows shifted by half a side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Location,
    pub rows: usize,
    pub cols: usize,
    pub side: f64,
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if !(self.side > 0.0 && self.side.is_finite()) {
            return Err(Error::Config(format!("grid side must be positive, got {}", self.side)));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("grid needs at least one row and one column".into()));
        }
        if !self.origin.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(())
    }
}

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

pub fn generate_triangular_grid(spec: &GridSpec) -> Result<Vec<Location>> {
    spec.validate()?;
    let o = spec.origin;
    let row_step = spec.side * SQRT3_2;
    let mut out = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        let shift = if r % 2 == 1 { spec.side / 2.0 } else { 0.0 };
        for c in 0..spec.cols {
            out.push(Location::new(
                out.len(),
                o.x + shift + c as f64 * spec.side,
                o.y + r as f64 * row_step,
                o.z,
            ));
        }
    }
    Ok(out)
}

/// Hexagonal patch of a triangular lattice centred on `center`, with `rings`
/// rings around the centre point: `3·rings·(rings+1) + 1` points
/// (`rings = 6` gives 127). Ids run row by row from the bottom row.
pub fn generate_hexagonal_grid(center: &Location, rings: usize, side: f64) -> Result<Vec<Location>> {
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::Config(format!("grid side must be positive, got {side}")));
    }
    if !center.is_finite() {
        return Err(Error::Config("grid center must be finite".into()));
    }
    let n = rings as i64;
    let mut out = Vec::with_capacity(3 * rings * (rings + 1) + 1);
    for r in -n..=n {
        let q_lo = (-n).max(-n - r);
        let q_hi = n.min(n - r);
        for q in q_lo..=q_hi {
            out.push(Location::new(
                out.len(),
                center.x + side * (q as f64 + r as f64 / 2.0),
                center.y + side * SQRT3_2 * r as f64,
                center.z,
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Number of training locations.
    pub d_train: usize,
    pub seed: u64,
}

/// Draws `split.d_train` training locations uniformly without replacement.
/// Both halves keep the input order.
pub fn split_train_test(
    locations: &[Location],
    d_train: usize,
    rng: &mut RandomStream,
) -> Result<(Vec<Location>, Vec<Location>)> {
    let n = locations.len();
    if d_train == 0 || d_train >= n {
        return Err(Error::Config(format!(
            "need 1 <= D < {n} training locations, got D = {d_train}"
        )));
    }
    let mut in_train = vec![false; n];
    for i in index::sample(rng, n, d_train) {
        in_train[i] = true;
    }
    let mut train = Vec::with_capacity(d_train);
    let mut test = Vec::with_capacity(n - d_train);
    for (loc, &t) in locations.iter().zip(&in_train) {
        if t {
            train.push(*loc);
        } else {
            test.push(*loc);
        }
    }
    Ok((train, test))
}

/// [`split_train_test`] with a fresh stream seeded from `split.seed`.
pub fn split_with_spec(locations: &[Location], split: &SplitSpec) -> Result<(Vec<Location>, Vec<Location>)> {
    split_train_test(locations, split.d_train, &mut RandomStream::new(split.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> Location {
        Location::new(0, 0.0, 0.0, 0.0)
    }

    #[test]
    fn single_row_grid() {
        let g = generate_triangular_grid(&GridSpec { origin: origin(), rows: 1, cols: 2, side: 5.0 }).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].x, g[0].y), (0.0, 0.0));
        assert_eq!((g[1].x, g[1].y, g[1].z), (5.0, 0.0, 0.0));
    }

    #[test]
    fn second_row_is_offset() {
        let g = generate_triangular_grid(&GridSpec { origin: origin(), rows: 2, cols: 1, side: 5.0 }).unwrap();
        assert!((g[1].x - 2.5).abs() < 1e-4);
        assert!((g[1].y - 4.3301).abs() < 1e-4);
        assert_eq!(g[1].z, 0.0);
    }

    #[test]
    fn nearest_neighbours_are_one_side_apart() {
        let g = generate_triangular_grid(&GridSpec { origin: Location::new(0, 1.0, -3.0, 2.0), rows: 6, cols: 7, side: 5.0 }).unwrap();
        assert_eq!(g.len(), 42);
        for a in &g {
            let nn = g
                .iter()
                .filter(|b| b.id != a.id)
                .map(|b| distance(a, b))
                .fold(f64::INFINITY, f64::min);
            assert!((nn - 5.0).abs() / 5.0 < 1e-9, "nn = {nn}");
            assert_eq!(a.z, 2.0);
        }
    }

    #[test]
    fn hexagon_has_127_points() {
        let g = generate_hexagonal_grid(&origin(), 6, 5.0).unwrap();
        assert_eq!(g.len(), 127);
        for a in &g {
            let nn = g
                .iter()
                .filter(|b| b.id != a.id)
                .map(|b| distance(a, b))
                .fold(f64::INFINITY, f64::min);
            assert!((nn - 5.0).abs() / 5.0 < 1e-9);
        }
        assert!(g.iter().enumerate().all(|(i, l)| l.id == i));
    }

    #[test]
    fn invalid_grids_rejected() {
        let bad = GridSpec { origin: origin(), rows: 0, cols: 3, side: 5.0 };
        assert!(matches!(generate_triangular_grid(&bad), Err(Error::Config(_))));
        let bad = GridSpec { origin: origin(), rows: 2, cols: 3, side: 0.0 };
        assert!(matches!(generate_triangular_grid(&bad), Err(Error::Config(_))));
        assert!(generate_hexagonal_grid(&origin(), 2, -1.0).is_err());
    }

    #[test]
    fn distance_examples() {
        let o = origin();
        assert_eq!(distance(&o, &Location::new(1, 3.0, 4.0, 0.0)), 5.0);
        assert_eq!(distance(&o, &o), 0.0);
        assert_eq!(distance(&o, &Location::new(1, 5.0, 0.0, 0.0)), 5.0);
    }

    #[test]
    fn split_sizes() {
        let g = generate_hexagonal_grid(&origin(), 6, 5.0).unwrap();
        let (train, test) = split_with_spec(&g, &SplitSpec { d_train: 50, seed: 1 }).unwrap();
        assert_eq!((train.len(), test.len()), (50, 77));
        let (train, test) = split_with_spec(&g, &SplitSpec { d_train: 126, seed: 1 }).unwrap();
        assert_eq!((train.len(), test.len()), (126, 1));
        assert!(split_with_spec(&g, &SplitSpec { d_train: 127, seed: 1 }).is_err());
        assert!(split_with_spec(&g, &SplitSpec { d_train: 0, seed: 1 }).is_err());
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let g = generate_hexagonal_grid(&origin(), 6, 5.0).unwrap();
        let s = SplitSpec { d_train: 30, seed: 99 };
        let a = split_with_spec(&g, &s).unwrap();
        let b = split_with_spec(&g, &s).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<usize> = a.0.iter().chain(&a.1).map(|l| l.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..127).collect::<Vec<_>>());
    }

    #[test]
    fn link_budget_from_physical_units() {
        let lb = LinkBudget::from_power(1e-3, 1e6, 4e-21).unwrap();
        assert!((lb.gamma_tx() - 2.5e11).abs() / 2.5e11 < 1e-12);
        let lb = LinkBudget::from_dbm(0.0, 1e6, -174.0).unwrap();
        assert!((lb.gamma_tx_db() - 114.0).abs() < 1e-9);
        assert!(LinkBudget::new(0.0).is_err());
    }
}
