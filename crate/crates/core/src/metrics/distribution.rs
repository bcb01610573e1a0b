use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{InternalCoords, ANGLE_NAMES};

pub const NUM_BINS: usize = 100;
pub const SMOOTHING_EPS: f64 = 1e-10;

/// Counts over uniform bins partitioning [-pi, pi).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    pub column: usize,
    pub counts: Vec<u64>,
}

impl AngleHistogram {
    pub fn new(column: usize, bins: usize) -> Self {
        AngleHistogram {
            column,
            counts: vec![0; bins],
        }
    }

    pub fn label(&self) -> &'static str {
        ANGLE_NAMES[self.column]
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.bins() as f64;
        (0..=self.bins()).map(|i| -PI + 2.0 * PI * i as f64 / n).collect()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        let n = self.bins();
        let t = (crate::geom::wrap(x) + PI) / (2.0 * PI);
        ((t * n as f64).floor() as usize).min(n - 1)
    }

    pub fn add(&mut self, x: f64) {
        let b = self.bin_of(x);
        self.counts[b] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn from_values(column: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let mut h = AngleHistogram::new(column, NUM_BINS);
        for v in values {
            h.add(v);
        }
        h
    }

    /// One histogram per angle column over every row of every input.
    pub fn from_internal(coords: &[InternalCoords]) -> Vec<AngleHistogram> {
        (0..ANGLE_NAMES.len())
            .map(|c| {
                AngleHistogram::from_values(
                    c,
                    coords.iter().flat_map(|ic| ic.rows.iter().map(move |r| r.to_array()[c])),
                )
            })
            .collect()
    }

    fn smoothed(&self) -> Vec<f64> {
        let total = self.total() as f64;
        let z = 1.0 + self.bins() as f64 * SMOOTHING_EPS;
        self.counts
            .iter()
            .map(|&c| (c as f64 / total + SMOOTHING_EPS) / z)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// Square root of the base-2 Jensen-Shannon divergence.
    pub js_distance: f64,
    /// KL(gen || test), natural log.
    pub kl_divergence: f64,
}

fn kl(p: &[f64], q: &[f64], log: fn(f64) -> f64) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * log(a / b)).sum()
}

pub fn angle_divergence(gen: &AngleHistogram, test: &AngleHistogram) -> Result<Divergence> {
    if gen.bins() != test.bins() {
        return Err(Error::Shape(format!("{} vs {} bins", gen.bins(), test.bins())));
    }
    if gen.total() == 0 || test.total() == 0 {
        return Err(Error::EmptyData("empty histogram".into()));
    }
    let p = gen.smoothed();
    let q = test.smoothed();
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl(&p, &m, f64::log2) + 0.5 * kl(&q, &m, f64::log2);
    Ok(Divergence {
        js_distance: js.max(0.0).sqrt(),
        kl_divergence: kl(&p, &q, f64::ln).max(0.0),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamachandranCounts {
    pub beta_sheet: usize,
    pub rh_helix: usize,
    pub lh_helix: usize,
    pub other: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    BetaSheet,
    RhHelix,
    LhHelix,
    Other,
}

/// Region of a (phi, psi) pair in radians; checked in the order beta,
/// right-handed, left-handed.
pub fn region(phi: f64, psi: f64) -> Region {
    let (f, s) = (phi.to_degrees(), psi.to_degrees());
    let within = |x: f64, lo: f64, hi: f64| (lo..=hi).contains(&x);
    if within(f, -180.0, -45.0) && within(s, 90.0, 180.0) {
        Region::BetaSheet
    } else if within(f, -160.0, -20.0) && within(s, -120.0, 30.0) {
        Region::RhHelix
    } else if within(f, 20.0, 125.0) && within(s, -45.0, 90.0) {
        Region::LhHelix
    } else {
        Region::Other
    }
}

impl RamachandranCounts {
    pub fn total(&self) -> usize {
        self.beta_sheet + self.rh_helix + self.lh_helix + self.other
    }

    pub fn add(&mut self, r: Region) {
        match r {
            Region::BetaSheet => self.beta_sheet += 1,
            Region::RhHelix => self.rh_helix += 1,
            Region::LhHelix => self.lh_helix += 1,
            Region::Other => self.other += 1,
        }
    }

    pub fn merge(&mut self, o: &RamachandranCounts) {
        self.beta_sheet += o.beta_sheet;
        self.rh_helix += o.rh_helix;
        self.lh_helix += o.lh_helix;
        self.other += o.other;
    }

    pub fn named_fraction(&self) -> f64 {
        (self.beta_sheet + self.rh_helix + self.lh_helix) as f64 / self.total().max(1) as f64
    }
}

/// Bins per-residue (phi, psi). A row holds phi of its own residue and psi of
/// the previous one, so residue k pairs row k's phi with row k+1's psi.
pub fn ramachandran_bins(ic: &InternalCoords) -> RamachandranCounts {
    let mut c = RamachandranCounts::default();
    for w in ic.rows.windows(2) {
        c.add(region(w[0].phi, w[1].psi));
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{build_ideal_backbone, extract_internal};

    fn hist(counts: &[u64]) -> AngleHistogram {
        AngleHistogram {
            column: 0,
            counts: counts.to_vec(),
        }
    }

    #[test]
    fn identical_histograms() {
        let d = angle_divergence(&hist(&[3, 1, 0, 7]), &hist(&[3, 1, 0, 7])).unwrap();
        assert!(d.js_distance < 1e-12 && d.kl_divergence < 1e-12);
    }

    #[test]
    fn disjoint_support_is_maximal() {
        let d = angle_divergence(&hist(&[5, 5, 0, 0]), &hist(&[0, 0, 2, 2])).unwrap();
        assert!((d.js_distance - 1.0).abs() < 1e-6, "{}", d.js_distance);
    }

    #[test]
    fn four_bin_hand_values() {
        // p = 1/4 each; q = 1/3, 1/3, 1/6, 1/6.
        let d = angle_divergence(&hist(&[1, 1, 1, 1]), &hist(&[2, 2, 1, 1])).unwrap();
        let kl = 0.5 * (0.75f64).ln() + 0.5 * (1.5f64).ln();
        let js = 0.5
            * (0.5 * (6.0f64 / 7.0).log2()
                + 0.5 * (6.0f64 / 5.0).log2()
                + (2.0 / 3.0) * (8.0f64 / 7.0).log2()
                + (1.0 / 3.0) * (4.0f64 / 5.0).log2());
        assert!((d.kl_divergence - kl).abs() < 1e-8);
        assert!((d.js_distance - js.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn empty_or_mismatched_histograms() {
        assert!(matches!(angle_divergence(&hist(&[0, 0]), &hist(&[1, 0])), Err(Error::EmptyData(_))));
        assert!(angle_divergence(&hist(&[1, 0]), &hist(&[1, 0, 0])).is_err());
    }

    #[test]
    fn bins_partition_the_circle() {
        let h = AngleHistogram::new(2, NUM_BINS);
        let e = h.edges();
        assert_eq!(e.len(), NUM_BINS + 1);
        assert_eq!(h.bin_of(-PI), 0);
        assert_eq!(h.bin_of(PI), 0);
        assert_eq!(h.bin_of(PI - 1e-12), NUM_BINS - 1);
        assert_eq!(h.label(), "phi");
    }

    #[test]
    fn canonical_regions() {
        let r = |f: f64, s: f64| region(f.to_radians(), s.to_radians());
        assert_eq!(r(-57.0, -47.0), Region::RhHelix);
        assert_eq!(r(-120.0, 130.0), Region::BetaSheet);
        assert_eq!(r(60.0, 45.0), Region::LhHelix);
        assert_eq!(r(0.0, -170.0), Region::Other);
    }

    #[test]
    fn helix_rows_bin_as_helix() {
        let b = build_ideal_backbone(&vec![(-57f64.to_radians(), -47f64.to_radians(), PI); 10]).unwrap();
        let c = ramachandran_bins(&extract_internal(&b).unwrap());
        assert_eq!(c.rh_helix, 7);
        assert_eq!(c.total(), 7);
    }

    proptest::proptest! {
        #[test]
        fn js_symmetric_and_bounded(
            a in proptest::collection::vec(0u64..20, 8),
            b in proptest::collection::vec(0u64..20, 8),
        ) {
            proptest::prop_assume!(a.iter().sum::<u64>() > 0 && b.iter().sum::<u64>() > 0);
            let ab = angle_divergence(&hist(&a), &hist(&b)).unwrap();
            let ba = angle_divergence(&hist(&b), &hist(&a)).unwrap();
            proptest::prop_assert!((ab.js_distance - ba.js_distance).abs() < 1e-12);
            proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&ab.js_distance));
            proptest::prop_assert!(ab.kl_divergence >= 0.0);
        }
    }
}
