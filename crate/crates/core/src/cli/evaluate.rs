//! `evaluate`: generated samples vs reference examples.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::amino::{parse_sequence, AminoAcid};
use crate::dataset::ComplexExample;
use crate::error::{Error, Result};
use crate::geom::{InternalCoords, ANGLE_NAMES, NUM_ANGLES};
use crate::metrics::{
    angle_divergence, contact_rate, kabsch_rmsd, ramachandran_bins, recovery_rate, seq_diversity, seq_similarity,
    superpose, tm_score, AlignmentConfig, AngleHistogram, RamachandranCounts,
};

use super::sample::{load_samples, SampleRecord};
use super::{read_file, write_file};

pub const CONTACT_CUTOFF: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub rmsd: f64,
    pub tm: f64,
    pub recovery: f64,
    pub similarity: f64,
    pub contact: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexRow {
    pub pdb_id: String,
    pub candidates: usize,
    pub score: CandidateScore,
    pub diversity: Option<f64>,
}

pub fn load_references(dir: &Path) -> Result<BTreeMap<String, ComplexExample>> {
    let ex_dir = if dir.join("examples").is_dir() { dir.join("examples") } else { dir.to_path_buf() };
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(&ex_dir).map_err(|e| Error::io(&ex_dir, e))? {
        let p = entry.map_err(|e| Error::io(&ex_dir, e))?.path();
        if p.to_string_lossy().ends_with(".example.json") {
            let e = ComplexExample::from_json(&read_file(&p)?)?;
            out.insert(e.meta.pdb_id.clone(), e);
        }
    }
    Ok(out)
}

fn score(s: &SampleRecord, reference: &ComplexExample, cfg: &AlignmentConfig) -> Result<(CandidateScore, Vec<AminoAcid>)> {
    let gen = s.backbone()?;
    let refb = &reference.peptide.backbone;
    if gen.len() > refb.len() {
        return Err(Error::Shape(format!(
            "{}: sample has {} residues, reference peptide {}",
            s.sample_id,
            gen.len() + 1,
            refb.len()
        )));
    }
    let target = refb.slice(0..gen.len());
    let seq = parse_sequence(&s.sequence)?;
    let truth = reference.peptide.residues()?;
    let placed = superpose(&gen, &target)?;
    let site: Vec<_> = reference.site.iter().flat_map(|r| r.atoms).collect();
    Ok((
        CandidateScore {
            rmsd: kabsch_rmsd(&gen, &target)?,
            tm: tm_score(&gen, &target)?,
            recovery: recovery_rate(&seq, &truth)?,
            similarity: seq_similarity(&seq, &truth, cfg)?,
            contact: contact_rate(std::slice::from_ref(&placed), &site, CONTACT_CUTOFF)?,
        },
        seq,
    ))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// One row per complex. With one generated set, candidate scores are
/// averaged; with several (the ext-k ensemble), the structure metrics come
/// from the best-TM candidate and the sequence metrics from the
/// best-similarity candidate.
pub fn score_complexes(
    sets: &[Vec<SampleRecord>],
    refs: &BTreeMap<String, ComplexExample>,
    cfg: &AlignmentConfig,
) -> Result<Vec<ComplexRow>> {
    let mut by_id: BTreeMap<&str, Vec<&SampleRecord>> = BTreeMap::new();
    for set in sets {
        for s in set {
            by_id.entry(&s.pdb_id).or_default().push(s);
        }
    }
    let ensemble = sets.len() > 1;
    let mut rows = Vec::new();
    for (id, cands) in by_id {
        let reference = refs
            .get(id)
            .ok_or_else(|| Error::EmptyData(format!("no reference example for {id}")))?;
        let scored = cands.iter().map(|s| score(s, reference, cfg)).collect::<Result<Vec<_>>>()?;
        let seqs: Vec<Vec<AminoAcid>> = scored.iter().map(|(_, q)| q.clone()).collect();
        let diversity = if seqs.len() > 1 { Some(seq_diversity(&seqs, cfg)?) } else { None };
        let sc: Vec<&CandidateScore> = scored.iter().map(|(c, _)| c).collect();
        let score = if ensemble {
            // First maximum wins, so ties resolve to the earlier set.
            let best = |f: fn(&CandidateScore) -> f64| {
                sc.iter().copied().fold(None::<&CandidateScore>, |b, c| match b {
                    Some(b) if f(b) >= f(c) => Some(b),
                    _ => Some(c),
                })
            };
            let s = best(|c| c.tm).expect("non-empty");
            let q = best(|c| c.similarity).expect("non-empty");
            CandidateScore {
                rmsd: s.rmsd,
                tm: s.tm,
                contact: s.contact,
                recovery: q.recovery,
                similarity: q.similarity,
            }
        } else {
            CandidateScore {
                rmsd: mean(sc.iter().map(|c| c.rmsd)),
                tm: mean(sc.iter().map(|c| c.tm)),
                recovery: mean(sc.iter().map(|c| c.recovery)),
                similarity: mean(sc.iter().map(|c| c.similarity)),
                contact: mean(sc.iter().map(|c| c.contact)),
            }
        };
        rows.push(ComplexRow {
            pdb_id: id.to_string(),
            candidates: cands.len(),
            score,
            diversity,
        });
    }
    Ok(rows)
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

pub fn metrics_csv(rows: &[ComplexRow], cfg: &AlignmentConfig) -> String {
    let mut s = format!("# alignment: {}\npdb_id,candidates,rmsd,tm,recovery,similarity,contact,diversity\n", cfg.describe());
    for r in rows {
        let c = &r.score;
        let d = r.diversity.map_or(String::new(), f);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.pdb_id,
            r.candidates,
            f(c.rmsd),
            f(c.tm),
            f(c.recovery),
            f(c.similarity),
            f(c.contact),
            d
        );
    }
    s
}


pub fn distributions(gen: &[InternalCoords], reference: &[InternalCoords]) -> (Vec<AngleHistogram>, Vec<AngleHistogram>) {
    (AngleHistogram::from_internal(gen), AngleHistogram::from_internal(reference))
}

pub fn distributions_csv(g: &[AngleHistogram], r: &[AngleHistogram]) -> String {
    let mut s = String::from("angle,bin,lo,hi,generated,reference\n");
    for (hg, hr) in g.iter().zip(r) {
        let edges = hg.edges();
        for b in 0..hg.bins() {
            let _ = writeln!(s, "{},{},{},{},{},{}", hg.label(), b, f(edges[b]), f(edges[b + 1]), hg.counts[b], hr.counts[b]);
        }
    }
    s
}

pub fn histogram_svg(g: &AngleHistogram, r: &AngleHistogram) -> String {
    let (w, h) = (400.0, 200.0);
    let norm = |x: &AngleHistogram| -> Vec<f64> {
        let t = x.total().max(1) as f64;
        x.counts.iter().map(|&c| c as f64 / t).collect()
    };
    let (pg, pr) = (norm(g), norm(r));
    let top = pg.iter().chain(&pr).cloned().fold(1e-12, f64::max);
    let line = |p: &[f64]| -> String {
        p.iter()
            .enumerate()
            .map(|(i, v)| format!("{:.1},{:.1}", (i as f64 + 0.5) * w / p.len() as f64, h - v / top * (h - 10.0)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <title>{}</title>\n\
         <polyline fill=\"none\" stroke=\"#1f77b4\" points=\"{}\"/>\n\
         <polyline fill=\"none\" stroke=\"#d62728\" points=\"{}\"/>\n\
         <text x=\"4\" y=\"14\" font-size=\"12\">{} (blue generated, red reference)</text>\n</svg>\n",
        g.label(),
        line(&pg),
        line(&pr),
        g.label()
    )
}

pub struct EvaluateArgs<'a> {
    pub generated: &'a [std::path::PathBuf],
    pub reference: &'a Path,
    pub out: &'a Path,
    pub svg: bool,
}

pub fn run_evaluate(a: &EvaluateArgs) -> Result<Vec<(String, f64)>> {
    if a.generated.is_empty() {
        return Err(Error::Config("no generated directories".into()));
    }
    let cfg = AlignmentConfig::default();
    let refs = load_references(a.reference)?;
    let sets = a.generated.iter().map(|d| load_samples(d)).collect::<Result<Vec<_>>>()?;
    if sets.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyData("no samples found".into()));
    }
    let rows = score_complexes(&sets, &refs, &cfg)?;
    std::fs::create_dir_all(a.out).map_err(|e| Error::io(a.out, e))?;
    write_file(&a.out.join("metrics.csv"), &metrics_csv(&rows, &cfg))?;

    let gen_ic: Vec<InternalCoords> = sets.iter().flatten().map(SampleRecord::internal).collect();
    let ids: Vec<&String> = rows.iter().map(|r| &r.pdb_id).collect();
    let ref_ic: Vec<InternalCoords> = ids.iter().map(|id| refs[*id].peptide.internal()).collect();
    let (hg, hr) = distributions(&gen_ic, &ref_ic);
    write_file(&a.out.join("distributions.csv"), &distributions_csv(&hg, &hr))?;
    if a.svg {
        for (g, r) in hg.iter().zip(&hr) {
            write_file(&a.out.join(format!("hist_{}.svg", g.label())), &histogram_svg(g, r))?;
        }
    }

    let n = rows.len() as f64;
    let frac = |p: &dyn Fn(&ComplexRow) -> bool| rows.iter().filter(|r| p(r)).count() as f64 / n;
    let mut summary: Vec<(String, f64)> = vec![
        ("complexes".into(), n),
        ("rmsd_mean".into(), mean(rows.iter().map(|r| r.score.rmsd))),
        ("rmsd_lt_5_fraction".into(), frac(&|r| r.score.rmsd < 5.0)),
        ("tm_mean".into(), mean(rows.iter().map(|r| r.score.tm))),
        ("tm_gt_0.2_fraction".into(), frac(&|r| r.score.tm > 0.2)),
        ("tm_gt_0.5_fraction".into(), frac(&|r| r.score.tm > 0.5)),
        ("recovery_mean".into(), mean(rows.iter().map(|r| r.score.recovery))),
        ("similarity_mean".into(), mean(rows.iter().map(|r| r.score.similarity))),
        ("contact_mean".into(), mean(rows.iter().map(|r| r.score.contact))),
        ("diversity_mean".into(), mean(rows.iter().filter_map(|r| r.diversity))),
    ];
    for c in 0..NUM_ANGLES {
        let d = angle_divergence(&hg[c], &hr[c])?;
        summary.push((format!("js_{}", ANGLE_NAMES[c]), d.js_distance));
        summary.push((format!("kl_{}", ANGLE_NAMES[c]), d.kl_divergence));
    }
    let mut rama = RamachandranCounts::default();
    for ic in &gen_ic {
        rama.merge(&ramachandran_bins(ic));
    }
    summary.push(("rama_beta_sheet".into(), rama.beta_sheet as f64));
    summary.push(("rama_rh_helix".into(), rama.rh_helix as f64));
    summary.push(("rama_lh_helix".into(), rama.lh_helix as f64));
    summary.push(("rama_other".into(), rama.other as f64));

    let mut s = format!("# alignment: {}\nmetric,value\n", cfg.describe());
    for (k, v) in &summary {
        let _ = writeln!(s, "{k},{}", f(*v));
    }
    write_file(&a.out.join("summary.csv"), &s)?;
    Ok(summary)
}

