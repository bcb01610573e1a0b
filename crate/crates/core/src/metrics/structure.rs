use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{
    extract_internal, measure_bond_lengths, reconstruct, Backbone, BondLengthSet, BondLengths, SeedFrame, Vec3,
};

fn to_na(v: Vec3) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

fn from_na(v: Vector3<f64>) -> Vec3 {
    Vec3::new(v.x, v.y, v.z)
}

/// Rotation then translation: `x -> rot * x + trans`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rot: Matrix3<f64>,
    pub trans: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rot: Matrix3::identity(),
            trans: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        from_na(self.rot * to_na(p) + self.trans)
    }
}

#[cfg(test)]
fn centroid(points: &[Vec3]) -> Vector3<f64> {
    points.iter().map(|p| to_na(*p)).sum::<Vector3<f64>>() / points.len() as f64
}

/// Least-squares rigid transform moving `mobile` onto `target`.
pub fn kabsch(mobile: &[Vec3], target: &[Vec3]) -> Result<RigidTransform> {
    kabsch_weighted(mobile, target, &vec![1.0; mobile.len()])
}

pub fn kabsch_weighted(mobile: &[Vec3], target: &[Vec3], w: &[f64]) -> Result<RigidTransform> {
    if mobile.len() != target.len() || w.len() != mobile.len() {
        return Err(Error::Shape(format!(
            "{} vs {} points",
            mobile.len(),
            target.len()
        )));
    }
    if mobile.is_empty() {
        return Err(Error::EmptyData("no points to superpose".into()));
    }
    let wsum: f64 = w.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::InvalidValue("superposition weights sum to 0".into()));
    }
    let wmean = |pts: &[Vec3]| {
        pts.iter().zip(w).map(|(p, wi)| to_na(*p) * *wi).sum::<Vector3<f64>>() / wsum
    };
    let cm = wmean(mobile);
    let ct = wmean(target);
    let mut h = Matrix3::zeros();
    for ((p, q), wi) in mobile.iter().zip(target).zip(w) {
        h += (to_na(*p) - cm) * (to_na(*q) - ct).transpose() * *wi;
    }
    let svd = h.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::DegenerateGeometry("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateGeometry("SVD failed".into()))?;
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let rot = v * fix * u.transpose();
    Ok(RigidTransform {
        rot,
        trans: ct - rot * cm,
    })
}

pub fn rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(p, q)| (*p - *q).dot(*p - *q)).sum();
    (ss / a.len() as f64).sqrt()
}

fn check_lengths(a: &Backbone, b: &Backbone) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "backbones have {} and {} residues",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::EmptyData("empty backbone".into()));
    }
    Ok(())
}

/// Backbone (N, CA, C, O) RMSD after optimal superposition.
pub fn kabsch_rmsd(a: &Backbone, b: &Backbone) -> Result<f64> {
    check_lengths(a, b)?;
    let pa = a.atom_positions();
    let pb = b.atom_positions();
    let t = kabsch(&pb, &pa)?;
    let moved: Vec<Vec3> = pb.iter().map(|p| t.apply(*p)).collect();
    Ok(rmsd(&pa, &moved))
}

/// `mobile` superposed onto `target` using all backbone atoms.
pub fn superpose(mobile: &Backbone, target: &Backbone) -> Result<Backbone> {
    check_lengths(mobile, target)?;
    let t = kabsch(&mobile.atom_positions(), &target.atom_positions())?;
    Ok(mobile.transformed(|p| t.apply(p)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundtripReport {
    pub residues: usize,
    pub measured_rmsd: f64,
    pub fixed_rmsd: f64,
}

/// Extracts angles, rebuilds from the first residue's frame, and compares
/// the interior residues, once with measured and once with fixed bond
/// lengths.
pub fn roundtrip_rmsd(b: &Backbone) -> Result<RoundtripReport> {
    let ic = extract_internal(b)?;
    let seed = SeedFrame::from_residue(&b.residues[0]);
    let interior = b.slice(1..b.len() - 1);
    let rebuild = |lens: BondLengths| -> Result<f64> {
        let r = reconstruct(&ic, &lens, seed)?;
        kabsch_rmsd(&r.slice(1..r.len()), &interior)
    };
    Ok(RoundtripReport {
        residues: b.len(),
        measured_rmsd: rebuild(BondLengths::PerRow(measure_bond_lengths(b)?))?,
        fixed_rmsd: rebuild(BondLengths::Fixed(BondLengthSet::ENGH_HUBER))?,
    })
}

pub fn tm_d0(len: usize) -> f64 {
    let x = len as f64 - 15.0;
    (1.24 * x.cbrt() - 1.8).max(0.5)
}

fn tm_sum(a: &[Vec3], b: &[Vec3], t: &RigidTransform, d0: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            let d = p.distance(t.apply(*q));
            1.0 / (1.0 + (d / d0).powi(2))
        })
        .sum()
}

/// TM-score over index-paired CA atoms, normalized by the common length.
pub fn tm_score(a: &Backbone, b: &Backbone) -> Result<f64> {
    check_lengths(a, b)?;
    let ca_a: Vec<Vec3> = a.residues.iter().map(|r| r.ca).collect();
    let ca_b: Vec<Vec3> = b.residues.iter().map(|r| r.ca).collect();
    let l = ca_a.len();
    if l < 3 {
        let t = kabsch(&ca_b, &ca_a)?;
        return Ok(tm_sum(&ca_a, &ca_b, &t, tm_d0(l)) / l as f64);
    }
    let d0 = tm_d0(l);
    let mut best = 0.0f64;

    let mut frag = l;
    let min_frag = 3.min(l);
    loop {
        let step = if l <= 40 { 1 } else { (frag / 2).max(1) };
        let mut start = 0;
        while start + frag <= l {
            let idx: Vec<usize> = (start..start + frag).collect();
            best = best.max(refine(&ca_a, &ca_b, idx, d0)?);
            start += step;
        }
        if frag == min_frag {
            break;
        }
        frag = (frag / 2).max(min_frag);
    }
    Ok(best / l as f64)
}

/// Iterates superposition on the pairs closer than a cutoff, then polishes
/// the best transform; returns the best raw (unnormalized) sum seen.
fn refine(a: &[Vec3], b: &[Vec3], mut idx: Vec<usize>, d0: f64) -> Result<f64> {
    let mut best = 0.0f64;
    let mut best_t = RigidTransform::identity();
    for _ in 0..20 {
        let sa: Vec<Vec3> = idx.iter().map(|&i| a[i]).collect();
        let sb: Vec<Vec3> = idx.iter().map(|&i| b[i]).collect();
        let t = kabsch(&sb, &sa)?;
        let score = tm_sum(a, b, &t, d0);
        if score > best {
            best = score;
            best_t = t;
        }
        let dist: Vec<f64> = a.iter().zip(b).map(|(p, q)| p.distance(t.apply(*q))).collect();
        let mut cut = d0;
        let next = loop {
            let sel: Vec<usize> = (0..a.len()).filter(|&i| dist[i] < cut).collect();
            if sel.len() >= 3 || sel.len() == a.len() {
                break sel;
            }
            cut += 0.5;
        };
        if next == idx {
            break;
        }
        idx = next;
    }
    Ok(best.max(polish(a, b, best_t, d0)?))
}

/// Reweighted superposition. Each term 1/(1 + d^2/d0^2) is convex in d^2,
/// so minimizing the tangent-weighted squared distances never lowers it.
fn polish(a: &[Vec3], b: &[Vec3], mut t: RigidTransform, d0: f64) -> Result<f64> {
    let mut score = tm_sum(a, b, &t, d0);
    for _ in 0..50 {
        let w: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(p, q)| {
                let x = p.distance_sq(t.apply(*q)) / (d0 * d0);
                1.0 / ((1.0 + x) * (1.0 + x))
            })
            .collect();
        let next = kabsch_weighted(b, a, &w)?;
        let s = tm_sum(a, b, &next, d0);
        if s <= score + 1e-12 {
            break;
        }
        score = s;
        t = next;
    }
    Ok(score)
}

/// Percentage of peptides with any backbone atom within `cutoff` of any
/// pocket atom.
pub fn contact_rate(peptides: &[Backbone], pocket_atoms: &[Vec3], cutoff: f64) -> Result<f64> {
    if peptides.is_empty() {
        return Err(Error::EmptyData("no peptides".into()));
    }
    let hits = peptides
        .iter()
        .filter(|p| {
            p.atom_positions()
                .iter()
                .any(|a| pocket_atoms.iter().any(|q| a.distance(*q) < cutoff))
        })
        .count();
    Ok(100.0 * hits as f64 / peptides.len() as f64)
}
