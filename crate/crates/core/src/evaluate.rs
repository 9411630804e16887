//! Verification protocol: matching scores, genuine/impostor pairs, FAR/FRR
//! sweeps and the equal error rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::DatasetIndex;
use crate::embedding::{EmbeddingSet, FingerprintEmbedding};
use crate::error::{Error, Result};

/// Inner product of two unit embeddings, accumulated in double precision.
pub fn match_score(a: &FingerprintEmbedding, b: &FingerprintEmbedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Contract(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Every unordered pair of images.
    AllPairs,
    /// All same-finger pairs; impostors from first impressions only.
    FvcStandard,
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all_pairs" | "all-pairs" => Ok(Protocol::AllPairs),
            "fvc_standard" | "fvc-standard" | "fvc" => Ok(Protocol::FvcStandard),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

/// Pairs of record positions in a [`DatasetIndex`], each with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairList {
    pub genuine: Vec<(usize, usize)>,
    pub impostor: Vec<(usize, usize)>,
}

pub fn fvc_pairs(index: &DatasetIndex, protocol: Protocol) -> Result<PairList> {
    let records = index.records();
    let mut by_finger: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_finger.entry(r.finger_id).or_default().push(i);
    }
    if by_finger.values().all(|v| v.len() < 2) {
        return Err(Error::Protocol("no finger has two or more impressions".into()));
    }
    let mut pairs = PairList::default();
    for members in by_finger.values() {
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                pairs.genuine.push((a, b));
            }
        }
    }
    match protocol {
        Protocol::AllPairs => {
            for a in 0..records.len() {
                for b in a + 1..records.len() {
                    if records[a].finger_id != records[b].finger_id {
                        pairs.impostor.push((a, b));
                    }
                }
            }
        }
        Protocol::FvcStandard => {
            // records are sorted by (finger, impression): the first member is
            // the lowest impression id
            let firsts: Vec<usize> = by_finger.values().map(|v| v[0]).collect();
            for (k, &a) in firsts.iter().enumerate() {
                for &b in &firsts[k + 1..] {
                    pairs.impostor.push((a, b));
                }
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub det_points: Vec<DetPoint>,
}

/// Sweeps every distinct score as a threshold (accept iff `score >= t`).
///
/// The EER is taken at the first threshold where FAR equals FRR exactly; if
/// the curves cross between two thresholds the crossing is interpolated
/// linearly; if they never cross, the point with the smallest gap is used and
/// the EER is `(FAR + FRR) / 2` there.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<EerResult> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Contract(format!(
            "EER needs genuine and impostor scores (got {} and {})",
            genuine.len(),
            impostor.len()
        )));
    }
    if genuine.iter().chain(impostor).any(|s| !s.is_finite()) {
        return Err(Error::Contract("scores must be finite".into()));
    }
    let mut g = genuine.to_vec();
    let mut im = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(im.iter()).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let ng = g.len();
    let ni = im.len();
    // counts: impostors accepted (>= t), genuines rejected (< t)
    let mut gi = 0usize;
    let mut ii = 0usize;
    let mut counts = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        while gi < ng && g[gi] < t {
            gi += 1;
        }
        while ii < ni && im[ii] < t {
            ii += 1;
        }
        counts.push((ni - ii, gi));
    }
    let det_points: Vec<DetPoint> = thresholds
        .iter()
        .zip(&counts)
        .map(|(&t, &(fa, fr))| DetPoint {
            threshold: t,
            far: fa as f64 / ni as f64,
            frr: fr as f64 / ng as f64,
        })
        .collect();

    let (eer, threshold) = locate_crossing(&thresholds, &counts, ng, ni);
    Ok(EerResult {
        eer,
        threshold,
        det_points,
    })
}

/// Exact rational comparison of FAR − FRR via cross-multiplied counts.
fn gap_sign(fa: usize, fr: usize, ng: usize, ni: usize) -> std::cmp::Ordering {
    (fa as u128 * ng as u128).cmp(&(fr as u128 * ni as u128))
}

/// Shared by the sweep and kept free of floating comparisons so that equal
/// count tables always produce equal results.
pub(crate) fn locate_crossing(
    thresholds: &[f64],
    counts: &[(usize, usize)],
    ng: usize,
    ni: usize,
) -> (f64, f64) {
    use std::cmp::Ordering::*;
    let rate = |fa: usize, fr: usize| (fa as f64 / ni as f64, fr as f64 / ng as f64);
    for k in 0..counts.len() {
        let (fa, fr) = counts[k];
        match gap_sign(fa, fr, ng, ni) {
            Equal => {
                let (far, frr) = rate(fa, fr);
                return ((far + frr) / 2.0, thresholds[k]);
            }
            Less if k > 0 => {
                let (far0, frr0) = rate(counts[k - 1].0, counts[k - 1].1);
                let (far1, frr1) = rate(fa, fr);
                let d0 = far0 - frr0;
                let d1 = far1 - frr1;
                let alpha = d0 / (d0 - d1);
                let far = far0 + alpha * (far1 - far0);
                let frr = frr0 + alpha * (frr1 - frr0);
                let t = thresholds[k - 1] + alpha * (thresholds[k] - thresholds[k - 1]);
                return ((far + frr) / 2.0, t);
            }
            _ => {}
        }
    }
    // FAR stays above FRR everywhere: the gap is smallest at the last threshold
    let k = counts.len() - 1;
    let (far, frr) = rate(counts[k].0, counts[k].1);
    ((far + frr) / 2.0, thresholds[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreStats {
    pub genuine_mean: f64,
    pub genuine_std: f64,
    pub impostor_mean: f64,
    pub impostor_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub genuine: bool,
    pub image_a: String,
    pub image_b: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub eer: f64,
    pub eer_threshold: f64,
    pub genuine_count: usize,
    pub impostor_count: usize,
    pub det_points: Vec<DetPoint>,
    pub score_stats: ScoreStats,
    pub scores: Vec<ScoredPair>,
}

pub fn evaluate_dataset(index: &DatasetIndex, embeddings: &EmbeddingSet, protocol: Protocol) -> Result<EvalReport> {
    let lookup = embeddings.lookup();
    let mut resolved = Vec::with_capacity(index.len());
    for r in index.records() {
        let e = lookup
            .get(r.image_id.as_str())
            .ok_or_else(|| Error::Lookup(r.image_id.clone()))?;
        resolved.push(*e);
    }
    let pairs = fvc_pairs(index, protocol)?;
    let score_all = |list: &[(usize, usize)]| -> Result<Vec<f64>> {
        list.par_iter()
            .map(|&(a, b)| match_score(resolved[a], resolved[b]))
            .collect()
    };
    let genuine = score_all(&pairs.genuine)?;
    let impostor = score_all(&pairs.impostor)?;
    let eer = compute_eer(&genuine, &impostor)?;
    let (gm, gs) = mean_std(&genuine);
    let (im, is) = mean_std(&impostor);
    let records = index.records();
    let scores = pairs
        .genuine
        .iter()
        .zip(&genuine)
        .map(|(p, s)| (true, p, s))
        .chain(pairs.impostor.iter().zip(&impostor).map(|(p, s)| (false, p, s)))
        .map(|(genuine, &(a, b), &score)| ScoredPair {
            genuine,
            image_a: records[a].image_id.clone(),
            image_b: records[b].image_id.clone(),
            score,
        })
        .collect();
    log::info!(
        "{} genuine / {} impostor pairs, EER {:.4}",
        genuine.len(),
        impostor.len(),
        eer.eer
    );
    Ok(EvalReport {
        eer: eer.eer,
        eer_threshold: eer.threshold,
        genuine_count: genuine.len(),
        impostor_count: impostor.len(),
        det_points: eer.det_points,
        score_stats: ScoreStats {
            genuine_mean: gm,
            genuine_std: gs,
            impostor_mean: im,
            impostor_std: is,
        },
        scores,
    })
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.8e}");
        let (mant, e) = s.split_once('e').unwrap();
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    eer: f64,
    eer_threshold: f64,
    genuine_count: usize,
    impostor_count: usize,
    protocol: Protocol,
    score_stats: &'a ScoreStats,
}

impl EvalReport {
    pub fn report_text(&self, protocol: Protocol) -> String {
        toml::to_string(&ReportFile {
            eer: self.eer,
            eer_threshold: self.eer_threshold,
            genuine_count: self.genuine_count,
            impostor_count: self.impostor_count,
            protocol,
            score_stats: &self.score_stats,
        })
        .expect("report serializes")
    }

    pub fn det_csv(&self) -> String {
        let mut out = String::from("threshold,far,frr\n");
        for p in &self.det_points {
            let _ = writeln!(out, "{},{},{}", fmt_sig9(p.threshold), fmt_sig9(p.far), fmt_sig9(p.frr));
        }
        out
    }

    pub fn scores_csv(&self) -> String {
        let mut out = String::from("pair_type,image_a,image_b,score\n");
        for s in &self.scores {
            let kind = if s.genuine { "genuine" } else { "impostor" };
            let _ = writeln!(out, "{kind},{},{},{}", s.image_a, s.image_b, fmt_sig9(s.score));
        }
        out
    }

    /// Writes `report.toml`, `det.csv` and `scores.csv` into `dir`.
    pub fn write(&self, dir: &Path, protocol: Protocol) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.toml"), self.report_text(protocol))?;
        fs::write(dir.join("det.csv"), self.det_csv())?;
        fs::write(dir.join("scores.csv"), self.scores_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{ImageSource, Record};
    use std::path::PathBuf;

    fn index(fingers: usize, impressions: usize) -> DatasetIndex {
        let mut records = Vec::new();
        for f in 0..fingers {
            for i in 0..impressions {
                records.push(Record {
                    image_id: format!("{f}_{i}"),
                    source: ImageSource::File(PathBuf::new()),
                    finger_id: f,
                    impression_id: i,
                    group: "db".into(),
                    minutiae: None,
                });
            }
        }
        DatasetIndex::from_records(records, fingers).unwrap()
    }

    fn emb(v: &[f64]) -> FingerprintEmbedding {
        FingerprintEmbedding::from_raw(v).unwrap()
    }

    #[test]
    fn score_examples() {
        let a = emb(&[0.6, 0.8, 0.0]);
        let b = emb(&[0.0, 0.0, 2.0]);
        let neg = emb(&[-0.6, -0.8, 0.0]);
        assert!((match_score(&a, &a).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(match_score(&a, &b).unwrap(), 0.0);
        assert!((match_score(&a, &neg).unwrap() + 1.0).abs() < 1e-6);
        assert!(match_score(&a, &emb(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn pair_counts() {
        let p = fvc_pairs(&index(2, 2), Protocol::AllPairs).unwrap();
        assert_eq!((p.genuine.len(), p.impostor.len()), (2, 4));
        let p = fvc_pairs(&index(100, 8), Protocol::AllPairs).unwrap();
        assert_eq!((p.genuine.len(), p.impostor.len()), (2800, 316_800));
        let p = fvc_pairs(&index(100, 8), Protocol::FvcStandard).unwrap();
        assert_eq!((p.genuine.len(), p.impostor.len()), (2800, 4950));
        assert!(matches!(fvc_pairs(&index(5, 1), Protocol::AllPairs), Err(Error::Protocol(_))));
    }

    #[test]
    fn worked_eer_example() {
        let r = compute_eer(&[0.9, 0.8, 0.4], &[0.5, 0.3, 0.2]).unwrap();
        assert!((r.eer - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.threshold > 0.4 && r.threshold <= 0.5);
    }

    #[test]
    fn separated_and_chance_level() {
        assert_eq!(compute_eer(&[0.9, 0.95], &[0.1, 0.2]).unwrap().eer, 0.0);
        let same = [0.1, 0.4, 0.7];
        assert!((compute_eer(&same, &same).unwrap().eer - 0.5).abs() < 1e-12);
        assert!(compute_eer(&[], &[0.1]).is_err());
    }

    #[test]
    fn det_curves_are_monotone() {
        let r = compute_eer(&[0.3, 0.9, 0.5, 0.5, 0.1], &[0.2, 0.6, 0.5, 0.0]).unwrap();
        for w in r.det_points.windows(2) {
            assert!(w[1].far <= w[0].far);
            assert!(w[1].frr >= w[0].frr);
            assert!(w[1].threshold > w[0].threshold);
        }
    }

    #[test]
    fn clustered_embeddings_give_zero_eer() {
        let idx = index(2, 3);
        let mut set = EmbeddingSet::default();
        for r in idx.records() {
            let v = if r.finger_id == 0 {
                [1.0, 0.01 * r.impression_id as f64]
            } else {
                [0.01 * r.impression_id as f64, 1.0]
            };
            set.push(r.image_id.clone(), emb(&v));
        }
        let rep = evaluate_dataset(&idx, &set, Protocol::AllPairs).unwrap();
        assert_eq!(rep.eer, 0.0);
        assert_eq!((rep.genuine_count, rep.impostor_count), (6, 9));
        assert!(rep.score_stats.genuine_mean > rep.score_stats.impostor_mean);
        let csv = rep.scores_csv();
        assert_eq!(csv.lines().count(), 1 + 15);
        assert!(csv.starts_with("pair_type,image_a,image_b,score\ngenuine,0_0,0_1,"));
    }

    #[test]
    fn missing_embedding_names_image() {
        let idx = index(2, 2);
        let mut set = EmbeddingSet::default();
        set.push("0_0", emb(&[1.0]));
        match evaluate_dataset(&idx, &set, Protocol::AllPairs) {
            Err(Error::Lookup(id)) => assert_eq!(id, "0_1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.123456789123), "0.123456789");
        assert_eq!(fmt_sig9(-0.5), "-0.5");
        assert_eq!(fmt_sig9(123456.789012), "123456.789");
        assert_eq!(fmt_sig9(1.5e-7), "1.5e-7");
    }
}
