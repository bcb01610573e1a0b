//! Backbone geometry: angle algebra, internal-coordinate extraction and
//! reconstruction of N/CA/C/O backbones from the eight per-residue angles.
//!
//! Row `i` of [`InternalCoords`] describes residue `i` relative to residue
//! `i - 1`:
//!
//! | column | angle    | atoms                           |
//! |--------|----------|---------------------------------|
//! | 0      | psi      | N(i-1) - CA(i-1) - C(i-1) - N(i)|
//! | 1      | omega    | CA(i-1) - C(i-1) - N(i) - CA(i) |
//! | 2      | phi      | C(i-1) - N(i) - CA(i) - C(i)    |
//! | 3      | delta    | N(i) - CA(i) - C(i) - O(i)      |
//! | 4      | theta1   | CA(i-1) - C(i-1) - N(i)         |
//! | 5      | theta2   | C(i-1) - N(i) - CA(i)           |
//! | 6      | theta3   | N(i) - CA(i) - C(i)             |
//! | 7      | theta4   | CA(i) - C(i) - O(i)             |
//!
//! The first and last residue of a chain get no row, so a chain of `L`
//! residues yields `L - 2` rows.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::amino::AminoAcid;
use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// Maximum C(i-1)-N(i) distance for two residues to count as bonded.
pub const PEPTIDE_BOND_MAX: f64 = 2.0;

const DEGENERATE_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn distance_sq(self, o: Vec3) -> f64 {
        let d = self - o;
        d.dot(d)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn unit(self, what: &str) -> Result<Vec3> {
        let n = self.norm();
        if n < DEGENERATE_EPS || !n.is_finite() {
            return Err(Error::DegenerateGeometry(format!("zero-length {what}")));
        }
        Ok(self * (1.0 / n))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Wraps `x` into `[-pi, pi)`. `+pi` maps to `-pi`.
pub fn wrap_angle(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidValue(format!("cannot wrap non-finite angle {x}")));
    }
    Ok(wrap(x))
}

/// Unchecked [`wrap_angle`] for hot loops; NaN propagates.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let mut r = (x + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r -= TAU;
    }
    if r < -PI {
        r = -PI;
    }
    r
}

/// Signed torsion of p1-p2-p3-p4 about the p2->p3 axis (IUPAC sign).
pub fn dihedral(p1: Vec3, p2: Vec3, p3: Vec3, p4: Vec3) -> Result<f64> {
    let b1 = p2 - p1;
    let b2 = p3 - p2;
    let b3 = p4 - p3;
    let b2_len = b2.norm();
    if b1.norm() < DEGENERATE_EPS || b2_len < DEGENERATE_EPS || b3.norm() < DEGENERATE_EPS {
        return Err(Error::DegenerateGeometry("coincident dihedral points".into()));
    }
    let n1 = b1.cross(b2);
    let n2 = b2.cross(b3);
    if n1.norm() < DEGENERATE_EPS * b1.norm() * b2_len
        || n2.norm() < DEGENERATE_EPS * b2_len * b3.norm()
    {
        return Err(Error::DegenerateGeometry("collinear dihedral frame".into()));
    }
    let y = b2_len * b1.dot(n2);
    let x = n1.dot(n2);
    Ok(wrap(y.atan2(x)))
}

/// Interior angle at `p2`.
pub fn bond_angle(p1: Vec3, p2: Vec3, p3: Vec3) -> Result<f64> {
    let u = p1 - p2;
    let v = p3 - p2;
    if u.norm() < DEGENERATE_EPS || v.norm() < DEGENERATE_EPS {
        return Err(Error::DegenerateGeometry("coincident bond-angle points".into()));
    }
    Ok(u.cross(v).norm().atan2(u.dot(v)))
}

/// Places `d` such that |d - c| = `bond_len`, angle(b, c, d) = `bond_ang`
/// and dihedral(a, b, c, d) = `torsion`.
pub fn place_atom(
    a: Vec3,
    b: Vec3,
    c: Vec3,
    bond_len: f64,
    bond_ang: f64,
    torsion: f64,
) -> Result<Vec3> {
    if !(bond_len > 0.0) || !bond_len.is_finite() {
        return Err(Error::InvalidValue(format!("bond length {bond_len}")));
    }
    if !(bond_ang > 0.0 && bond_ang < PI) {
        return Err(Error::InvalidValue(format!("bond angle {bond_ang} outside (0, pi)")));
    }
    if !torsion.is_finite() {
        return Err(Error::InvalidValue(format!("torsion {torsion}")));
    }
    let bc = (c - b).unit("b-c bond")?;
    let ab = b - a;
    let n = ab.cross(bc);
    if n.norm() < DEGENERATE_EPS * ab.norm().max(1.0) {
        return Err(Error::DegenerateGeometry("collinear placement frame".into()));
    }
    let n = n.unit("frame normal")?;
    let m = n.cross(bc);
    let local = (
        -bond_len * bond_ang.cos(),
        bond_len * bond_ang.sin() * torsion.cos(),
        bond_len * bond_ang.sin() * torsion.sin(),
    );
    Ok(c + bc * local.0 + m * local.1 + n * local.2)
}

/// The eight angles of one residue. Dihedrals live in `[-pi, pi)`, bond
/// angles in `(0, pi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 8]", into = "[f64; 8]")]
pub struct AngleRow {
    pub psi: f64,
    pub omega: f64,
    pub phi: f64,
    pub delta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
}

pub const NUM_ANGLES: usize = 8;
pub const ANGLE_NAMES: [&str; NUM_ANGLES] =
    ["psi", "omega", "phi", "delta", "theta1", "theta2", "theta3", "theta4"];
/// Columns 0..4 are dihedrals, 4..8 bond angles.
pub const DIHEDRAL_COLUMNS: std::ops::Range<usize> = 0..4;
pub const BOND_ANGLE_COLUMNS: std::ops::Range<usize> = 4..8;

impl AngleRow {
    pub fn to_array(self) -> [f64; NUM_ANGLES] {
        [
            self.psi,
            self.omega,
            self.phi,
            self.delta,
            self.theta1,
            self.theta2,
            self.theta3,
            self.theta4,
        ]
    }

    pub fn from_array(a: [f64; NUM_ANGLES]) -> Self {
        AngleRow {
            psi: a[0],
            omega: a[1],
            phi: a[2],
            delta: a[3],
            theta1: a[4],
            theta2: a[5],
            theta3: a[6],
            theta4: a[7],
        }
    }

    pub fn is_valid(&self) -> bool {
        let a = self.to_array();
        a[DIHEDRAL_COLUMNS].iter().all(|&x| (-PI..PI).contains(&x))
            && a[BOND_ANGLE_COLUMNS].iter().all(|&x| x > 0.0 && x < PI)
    }
}

impl From<[f64; 8]> for AngleRow {
    fn from(a: [f64; 8]) -> Self {
        AngleRow::from_array(a)
    }
}

impl From<AngleRow> for [f64; 8] {
    fn from(r: AngleRow) -> Self {
        r.to_array()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InternalCoords {
    pub rows: Vec<AngleRow>,
    /// Residue count of the chain the rows came from (`rows.len() + 2`).
    pub source_length: usize,
}

impl InternalCoords {
    pub fn new(rows: Vec<AngleRow>) -> Self {
        let source_length = rows.len() + 2;
        InternalCoords { rows, source_length }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_matrix(&self) -> Vec<[f64; NUM_ANGLES]> {
        self.rows.iter().map(|r| r.to_array()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneResidue {
    pub n: Vec3,
    pub ca: Vec3,
    pub c: Vec3,
    pub o: Vec3,
    /// `None` for residues without an assigned sequence (freshly generated
    /// structures).
    pub aa: Option<AminoAcid>,
}

impl BackboneResidue {
    pub fn atoms(&self) -> [Vec3; 4] {
        [self.n, self.ca, self.c, self.o]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    pub residues: Vec<BackboneResidue>,
}

impl Backbone {
    /// Builds a backbone, checking chain connectivity and atom uniqueness.
    pub fn new(residues: Vec<BackboneResidue>) -> Result<Self> {
        let b = Backbone { residues };
        b.validate()?;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.residues.windows(2).enumerate() {
            if w[0].c.distance(w[1].n) >= PEPTIDE_BOND_MAX {
                return Err(Error::ChainBreak(i, i + 1));
            }
        }
        let mut atoms: Vec<(Vec3, usize)> = Vec::with_capacity(self.residues.len() * 4);
        for (i, r) in self.residues.iter().enumerate() {
            for a in r.atoms() {
                if !a.is_finite() {
                    return Err(Error::InvalidValue(format!("non-finite atom in residue {i}")));
                }
                atoms.push((a, i));
            }
        }
        atoms.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
        for (k, &(a, ra)) in atoms.iter().enumerate() {
            for &(b, rb) in atoms[k + 1..].iter() {
                if b.x - a.x > 1e-9 {
                    break;
                }
                if a.distance(b) < 1e-9 {
                    return Err(Error::DegenerateGeometry(format!(
                        "coincident atoms in residues {ra} and {rb}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All backbone atoms in N, CA, C, O order per residue.
    pub fn atom_positions(&self) -> Vec<Vec3> {
        self.residues.iter().flat_map(|r| r.atoms()).collect()
    }

    pub fn sequence(&self) -> Vec<Option<AminoAcid>> {
        self.residues.iter().map(|r| r.aa).collect()
    }

    pub fn transformed(&self, f: impl Fn(Vec3) -> Vec3) -> Backbone {
        Backbone {
            residues: self
                .residues
                .iter()
                .map(|r| BackboneResidue {
                    n: f(r.n),
                    ca: f(r.ca),
                    c: f(r.c),
                    o: f(r.o),
                    aa: r.aa,
                })
                .collect(),
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Backbone {
        Backbone {
            residues: self.residues[range].to_vec(),
        }
    }
}

/// Bond lengths used to place N, CA, C and O.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondLengthSet {
    pub n_ca: f64,
    pub ca_c: f64,
    pub c_n: f64,
    pub c_o: f64,
}

impl BondLengthSet {
    /// Engh-Huber reference lengths.
    pub const ENGH_HUBER: BondLengthSet = BondLengthSet {
        n_ca: 1.458,
        ca_c: 1.525,
        c_n: 1.329,
        c_o: 1.231,
    };

    pub fn is_valid(&self) -> bool {
        [self.n_ca, self.ca_c, self.c_n, self.c_o]
            .iter()
            .all(|&l| l > 0.0 && l < PEPTIDE_BOND_MAX)
    }
}

impl Default for BondLengthSet {
    fn default() -> Self {
        Self::ENGH_HUBER
    }
}

/// Canonical N-CA-C angle used for the de novo seed frame.
pub const SEED_N_CA_C_ANGLE: f64 = 1.937;

#[derive(Clone, Debug, PartialEq)]
pub enum BondLengths {
    Fixed(BondLengthSet),
    /// One set per internal-coordinate row.
    PerRow(Vec<BondLengthSet>),
}

impl BondLengths {
    fn get(&self, row: usize) -> Result<BondLengthSet> {
        let set = match self {
            BondLengths::Fixed(s) => *s,
            BondLengths::PerRow(v) => *v
                .get(row)
                .ok_or_else(|| Error::Shape(format!("no bond lengths for row {row}")))?,
        };
        if !set.is_valid() {
            return Err(Error::InvalidValue(format!("invalid bond lengths {set:?}")));
        }
        Ok(set)
    }
}

/// The initial N, CA, C of a reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedFrame {
    pub n: Vec3,
    pub ca: Vec3,
    pub c: Vec3,
}

impl SeedFrame {
    /// N at the origin, CA on +x, C in the xy-plane.
    pub fn canonical(lens: &BondLengthSet) -> SeedFrame {
        let a = SEED_N_CA_C_ANGLE;
        let ca = Vec3::new(lens.n_ca, 0.0, 0.0);
        let c = ca + Vec3::new(-a.cos(), a.sin(), 0.0) * lens.ca_c;
        SeedFrame {
            n: Vec3::default(),
            ca,
            c,
        }
    }

    pub fn from_residue(r: &BackboneResidue) -> SeedFrame {
        SeedFrame {
            n: r.n,
            ca: r.ca,
            c: r.c,
        }
    }
}

pub fn angle_row(prev: &BackboneResidue, cur: &BackboneResidue) -> Result<AngleRow> {
    Ok(AngleRow {
        psi: dihedral(prev.n, prev.ca, prev.c, cur.n)?,
        omega: dihedral(prev.ca, prev.c, cur.n, cur.ca)?,
        phi: dihedral(prev.c, cur.n, cur.ca, cur.c)?,
        delta: dihedral(cur.n, cur.ca, cur.c, cur.o)?,
        theta1: bond_angle(prev.ca, prev.c, cur.n)?,
        theta2: bond_angle(prev.c, cur.n, cur.ca)?,
        theta3: bond_angle(cur.n, cur.ca, cur.c)?,
        theta4: bond_angle(cur.ca, cur.c, cur.o)?,
    })
}

/// Extracts the `L - 2` interior angle rows of a backbone.
pub fn extract_internal(b: &Backbone) -> Result<InternalCoords> {
    if b.len() < 3 {
        return Err(Error::TooShort { len: b.len(), min: 3 });
    }
    b.validate()?;
    let rows = (1..b.len() - 1)
        .map(|i| angle_row(&b.residues[i - 1], &b.residues[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(InternalCoords {
        rows,
        source_length: b.len(),
    })
}

/// Per-row bond lengths measured from the backbone the rows were extracted
/// from (row `k` describes residue `k + 1`).
pub fn measure_bond_lengths(b: &Backbone) -> Result<Vec<BondLengthSet>> {
    if b.len() < 3 {
        return Err(Error::TooShort { len: b.len(), min: 3 });
    }
    Ok((1..b.len() - 1)
        .map(|i| {
            let prev = &b.residues[i - 1];
            let cur = &b.residues[i];
            BondLengthSet {
                n_ca: cur.n.distance(cur.ca),
                ca_c: cur.ca.distance(cur.c),
                c_n: prev.c.distance(cur.n),
                c_o: cur.c.distance(cur.o),
            }
        })
        .collect())
}

/// Rebuilds a backbone from internal coordinates. The result has
/// `ic.len() + 1` residues: the seed residue followed by one per row. Within
/// each row atoms are placed N, CA, C, O. The seed residue's O reuses
/// `theta4`/`delta` of the first row.
pub fn reconstruct(ic: &InternalCoords, lens: &BondLengths, seed: SeedFrame) -> Result<Backbone> {
    let first = ic
        .rows
        .first()
        .ok_or_else(|| Error::EmptyData("no internal-coordinate rows".into()))?;
    let first_lens = lens.get(0)?;
    bond_angle(seed.n, seed.ca, seed.c)?;
    let seed_o = place_atom(
        seed.n,
        seed.ca,
        seed.c,
        first_lens.c_o,
        first.theta4,
        first.delta,
    )?;
    let mut residues = Vec::with_capacity(ic.len() + 1);
    residues.push(BackboneResidue {
        n: seed.n,
        ca: seed.ca,
        c: seed.c,
        o: seed_o,
        aa: None,
    });
    for (k, row) in ic.rows.iter().enumerate() {
        let l = lens.get(k)?;
        let prev = *residues.last().expect("seed residue present");
        let n = place_atom(prev.n, prev.ca, prev.c, l.c_n, row.theta1, row.psi)?;
        let ca = place_atom(prev.ca, prev.c, n, l.n_ca, row.theta2, row.omega)?;
        let c = place_atom(prev.c, n, ca, l.ca_c, row.theta3, row.phi)?;
        let o = place_atom(n, ca, c, l.c_o, row.theta4, row.delta)?;
        residues.push(BackboneResidue {
            n,
            ca,
            c,
            o,
            aa: None,
        });
    }
    Ok(Backbone { residues })
}

/// Builds a backbone from `(phi, psi, omega)` triples with ideal bond
/// geometry. Handy for canonical secondary-structure fixtures.
pub fn build_ideal_backbone(torsions: &[(f64, f64, f64)]) -> Result<Backbone> {
    let lens = BondLengthSet::ENGH_HUBER;
    // Ideal bond angles (radians): CA-C-N, C-N-CA, N-CA-C, CA-C-O.
    let (t1, t2, t3, t4) = (2.028, 2.124, SEED_N_CA_C_ANGLE, 2.101);
    if torsions.len() < 2 {
        return Err(Error::TooShort {
            len: torsions.len(),
            min: 2,
        });
    }
    let rows: Vec<AngleRow> = torsions
        .windows(2)
        .map(|w| AngleRow {
            psi: wrap(w[0].1),
            omega: wrap(w[1].2),
            phi: wrap(w[1].0),
            delta: wrap(w[1].1 + PI),
            theta1: t1,
            theta2: t2,
            theta3: t3,
            theta4: t4,
        })
        .collect();
    let ic = InternalCoords::new(rows);
    let mut bb = reconstruct(&ic, &BondLengths::Fixed(lens), SeedFrame::canonical(&lens))?;
    // The seed O uses the first row's delta; replace with psi(0)-derived one.
    let r0 = bb.residues[0];
    bb.residues[0].o = place_atom(r0.n, r0.ca, r0.c, lens.c_o, t4, wrap(torsions[0].1 + PI))?;
    Ok(bb)
}
