//! Dataset indexing, minutia sidecar files and train/validation splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster;
use crate::synth::{self, SynthSpec};

pub const MIN_SIDE: usize = 32;

const IMAGE_EXTENSIONS: &[&str] = &["png", "bmp", "tif", "tiff", "jpg", "jpeg", "pgm"];

/// Grayscale fingerprint with identity labels. Pixels are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintImage {
    pixels: Array2<f64>,
    pub finger_id: usize,
    pub impression_id: usize,
    pub source_tag: String,
}

impl FingerprintImage {
    pub fn new(
        pixels: Array2<f64>,
        finger_id: usize,
        impression_id: usize,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        let (h, w) = pixels.dim();
        if h < MIN_SIDE || w < MIN_SIDE {
            return Err(Error::Range(format!(
                "image is {h}x{w}, both sides must be at least {MIN_SIDE}"
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Range(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self {
            pixels,
            finger_id,
            impression_id,
            source_tag: source_tag.into(),
        })
    }

    /// Wraps pixels without labels, e.g. for single-image extraction.
    pub fn unlabeled(pixels: Array2<f64>) -> Result<Self> {
        Self::new(pixels, 0, 0, "")
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    /// Same labels, new pixels; callers guarantee pixels stay in `[0, 1]`.
    pub fn with_pixels(&self, pixels: Array2<f64>) -> Result<Self> {
        Self::new(pixels, self.finger_id, self.impression_id, self.source_tag.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinutiaKind {
    Ending,
    Bifurcation,
    Unknown,
}

impl MinutiaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MinutiaKind::Ending => "ending",
            MinutiaKind::Bifurcation => "bifurcation",
            MinutiaKind::Unknown => "unknown",
        }
    }
}

impl std::str::FromStr for MinutiaKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ending" => Ok(MinutiaKind::Ending),
            "bifurcation" => Ok(MinutiaKind::Bifurcation),
            "unknown" => Ok(MinutiaKind::Unknown),
            other => Err(format!("unknown minutia kind `{other}`")),
        }
    }
}

/// A minutia in image pixel coordinates; `theta` is in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minutia {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub kind: MinutiaKind,
}

impl Minutia {
    pub fn new(x: f64, y: f64, theta: f64, kind: MinutiaKind) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
            kind,
        }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MinutiaSet {
    pub items: Vec<Minutia>,
    pub image_ref: String,
}

impl MinutiaSet {
    pub fn new(items: Vec<Minutia>, image_ref: impl Into<String>) -> Self {
        Self {
            items,
            image_ref: image_ref.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Checks every minutia lies inside a `width`×`height` frame.
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        for m in &self.items {
            if !(m.x >= 0.0 && m.x < width as f64 && m.y >= 0.0 && m.y < height as f64) {
                return Err(Error::Range(format!(
                    "minutia ({}, {}) outside {width}x{height} image `{}`",
                    m.x, m.y, self.image_ref
                )));
            }
        }
        Ok(())
    }

    /// Drops exact `(x, y, theta)` duplicates, keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.items
            .retain(|m| seen.insert((m.x.to_bits(), m.y.to_bits(), m.theta.to_bits())));
    }
}

/// Parses the whitespace-separated `x y theta kind` sidecar format.
pub fn parse_minutiae_file(path: &Path) -> Result<MinutiaSet> {
    let text = fs::read_to_string(path)?;
    let image_ref = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_minutiae(&text, path, image_ref)
}

pub fn parse_minutiae(text: &str, path: &Path, image_ref: String) -> Result<MinutiaSet> {
    let mut items = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |s: &str, name: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(format!("invalid {name} `{s}`")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(format!("non-finite {name} `{s}`")))
            }
        };
        let x = num(fields[0], "x")?;
        let y = num(fields[1], "y")?;
        let theta = num(fields[2], "theta")?;
        let kind = fields[3].parse::<MinutiaKind>().map_err(parse_err)?;
        if x < 0.0 || y < 0.0 {
            return Err(Error::Range(format!(
                "{}:{line_no}: negative coordinate ({x}, {y})",
                path.display()
            )));
        }
        items.push(Minutia::new(x, y, theta, kind));
    }
    let mut set = MinutiaSet::new(items, image_ref);
    set.dedup();
    Ok(set)
}

pub fn format_minutiae(set: &MinutiaSet) -> String {
    let mut out = String::new();
    for m in &set.items {
        // {:?} on f64 prints the shortest representation that round-trips
        let _ = writeln!(out, "{:?} {:?} {:?} {}", m.x, m.y, m.theta, m.kind.as_str());
    }
    out
}

pub fn write_minutiae_file(path: &Path, set: &MinutiaSet) -> Result<()> {
    fs::write(path, format_minutiae(set))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// `NNN_I.<ext>` files directly under the root.
    Fvc,
    /// One subdirectory per sensor DB, each following the `fvc` convention.
    Molf,
    /// `<fingerlabel>_<impression>.<ext>` with arbitrary finger labels.
    Flat,
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fvc" => Ok(Layout::Fvc),
            "molf" => Ok(Layout::Molf),
            "flat" => Ok(Layout::Flat),
            other => Err(format!("unknown layout `{other}` (expected fvc, molf or flat)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    File(PathBuf),
    Synthetic {
        finger_seed: u64,
        impression_seed: u64,
        spec: SynthSpec,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub image_id: String,
    pub source: ImageSource,
    pub finger_id: usize,
    pub impression_id: usize,
    /// DB / sensor group; splits are taken per `(finger_id, group)`.
    pub group: String,
    pub minutiae: Option<PathBuf>,
}

/// Immutable list of records with contiguous finger labels `[0, class_count)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetIndex {
    records: Vec<Record>,
    class_count: usize,
}

impl DatasetIndex {
    /// Builds an index, sorting by `(finger_id, impression_id)` and checking
    /// labels are contiguous and keys unique.
    pub fn from_records(mut records: Vec<Record>, class_count: usize) -> Result<Self> {
        records.sort_by(|a, b| {
            (a.finger_id, a.impression_id).cmp(&(b.finger_id, b.impression_id))
        });
        let mut keys = HashSet::new();
        let mut ids = HashSet::new();
        for r in &records {
            if r.finger_id >= class_count {
                return Err(Error::Format(format!(
                    "finger id {} outside label range [0, {class_count})",
                    r.finger_id
                )));
            }
            if !keys.insert((r.finger_id, r.impression_id)) {
                return Err(Error::Format(format!(
                    "duplicate (finger {}, impression {})",
                    r.finger_id, r.impression_id
                )));
            }
            if !ids.insert(r.image_id.clone()) {
                return Err(Error::Format(format!("duplicate image id `{}`", r.image_id)));
            }
        }
        Ok(Self {
            records,
            class_count,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.records.iter().position(|r| r.image_id == image_id)
    }
}

fn is_image_file(path: &Path) -> bool {
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    // pre-enhanced siblings are not dataset members
    if name.contains(".enh.") {
        return false;
    }
    path.extension()
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_string_lossy().to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Splits `label_impression` at the last underscore.
fn split_stem(stem: &str) -> Option<(&str, usize)> {
    let (label, imp) = stem.rsplit_once('_')?;
    if label.is_empty() {
        return None;
    }
    let imp = imp.parse().ok()?;
    Some((label, imp))
}

struct RawEntry {
    path: PathBuf,
    image_id: String,
    label: String,
    impression: usize,
    group: String,
}

fn scan_dir(dir: &Path, numeric_labels: bool, group: &str, id_prefix: &str) -> Result<Vec<RawEntry>> {
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    entries.sort();
    for path in entries {
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let Some((label, impression)) = split_stem(&stem) else {
            log::warn!("skipping {}: name does not follow <finger>_<impression>", path.display());
            continue;
        };
        let label = if numeric_labels {
            match label.parse::<u64>() {
                Ok(n) => format!("{n:020}"),
                Err(_) => {
                    log::warn!("skipping {}: finger label is not numeric", path.display());
                    continue;
                }
            }
        } else {
            label.to_string()
        };
        out.push(RawEntry {
            image_id: format!("{id_prefix}{stem}"),
            path,
            label,
            impression,
            group: group.to_string(),
        });
    }
    Ok(out)
}

fn sidecar(path: &Path) -> Option<PathBuf> {
    let p = path.with_extension("min");
    p.is_file().then_some(p)
}

/// Indexes a dataset directory, relabeling fingers to `[0, class_count)`.
pub fn load_dataset(root: &Path, layout: Layout) -> Result<DatasetIndex> {
    if !root.is_dir() {
        return Err(Error::Input(format!("dataset directory {} not found", root.display())));
    }
    let group_name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let raw = match layout {
        Layout::Fvc => scan_dir(root, true, &group_name, "")?,
        Layout::Flat => scan_dir(root, false, &group_name, "")?,
        Layout::Molf => {
            let mut dbs: Vec<PathBuf> = fs::read_dir(root)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            dbs.sort();
            let mut all = Vec::new();
            for db in dbs {
                let name = db.file_name().unwrap().to_string_lossy().into_owned();
                all.extend(scan_dir(&db, true, &name, &format!("{name}/"))?);
            }
            all
        }
    };
    if raw.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }

    let labels: BTreeSet<&str> = raw.iter().map(|e| e.label.as_str()).collect();
    let relabel: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();

    // (finger, group, original impression) must be unique
    let mut seen = HashSet::new();
    for e in &raw {
        if !seen.insert((e.label.as_str(), e.group.as_str(), e.impression)) {
            return Err(Error::Format(format!(
                "duplicate finger `{}` impression {} in {}",
                e.label.trim_start_matches('0'),
                e.impression,
                e.group
            )));
        }
    }

    // impression ids are renumbered per finger in (group, impression) order so
    // that multi-DB layouts keep unique (finger, impression) keys
    let mut by_finger: BTreeMap<usize, Vec<&RawEntry>> = BTreeMap::new();
    for e in &raw {
        by_finger.entry(relabel[e.label.as_str()]).or_default().push(e);
    }
    let mut records = Vec::with_capacity(raw.len());
    for (finger, mut entries) in by_finger {
        entries.sort_by(|a, b| (&a.group, a.impression).cmp(&(&b.group, b.impression)));
        for (i, e) in entries.into_iter().enumerate() {
            let impression_id = if layout == Layout::Molf { i } else { e.impression };
            records.push(Record {
                image_id: e.image_id.clone(),
                minutiae: sidecar(&e.path),
                source: ImageSource::File(e.path.clone()),
                finger_id: finger,
                impression_id,
                group: e.group.clone(),
            });
        }
    }
    DatasetIndex::from_records(records, labels.len())
}

/// Per `(finger, group)`, moves the last `impressions_for_val` impressions to
/// the validation index. Both outputs keep the full label space.
pub fn split_train_val(
    index: &DatasetIndex,
    impressions_for_val: usize,
) -> Result<(DatasetIndex, DatasetIndex)> {
    if impressions_for_val == 0 {
        return Ok((
            index.clone(),
            DatasetIndex {
                records: Vec::new(),
                class_count: index.class_count,
            },
        ));
    }
    let mut groups: BTreeMap<(usize, &str), Vec<&Record>> = BTreeMap::new();
    for r in &index.records {
        groups.entry((r.finger_id, r.group.as_str())).or_default().push(r);
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for ((finger, group), mut recs) in groups {
        if recs.len() <= impressions_for_val {
            return Err(Error::Split {
                finger,
                group: group.to_string(),
                available: recs.len(),
                requested: impressions_for_val,
            });
        }
        recs.sort_by_key(|r| r.impression_id);
        let cut = recs.len() - impressions_for_val;
        train.extend(recs[..cut].iter().map(|r| (*r).clone()));
        val.extend(recs[cut..].iter().map(|r| (*r).clone()));
    }
    Ok((
        DatasetIndex::from_records(train, index.class_count)?,
        DatasetIndex::from_records(val, index.class_count)?,
    ))
}

/// Loads the image for a record, together with its ground-truth minutiae
/// when a sidecar exists or the source is synthetic.
pub fn load_record(record: &Record) -> Result<(FingerprintImage, Option<MinutiaSet>)> {
    match &record.source {
        ImageSource::File(path) => {
            let pixels = raster::load_gray(path)?;
            let image = FingerprintImage::new(
                pixels,
                record.finger_id,
                record.impression_id,
                record.group.clone(),
            )?;
            let minutiae = match &record.minutiae {
                Some(p) => {
                    let mut set = parse_minutiae_file(p)?;
                    set.check_bounds(image.width(), image.height())?;
                    set.image_ref = record.image_id.clone();
                    Some(set)
                }
                None => None,
            };
            Ok((image, minutiae))
        }
        ImageSource::Synthetic {
            finger_seed,
            impression_seed,
            spec,
        } => {
            let (pixels, mut set) = synth::synthesize_impression(*finger_seed, *impression_seed, spec)?;
            let image = FingerprintImage::new(
                pixels,
                record.finger_id,
                record.impression_id,
                record.group.clone(),
            )?;
            set.image_ref = record.image_id.clone();
            Ok((image, Some(set)))
        }
    }
}

/// In-memory synthetic dataset: `fingers × impressions` records whose pixels
/// are regenerated on demand from seeds.
pub fn synthetic_index(
    fingers: usize,
    impressions: std::ops::Range<usize>,
    spec: &SynthSpec,
    seed: u64,
) -> Result<DatasetIndex> {
    let mut records = Vec::new();
    for f in 0..fingers {
        for i in impressions.clone() {
            records.push(Record {
                image_id: format!("{f:03}_{i}"),
                source: ImageSource::Synthetic {
                    finger_seed: synth::finger_seed(seed, f),
                    impression_seed: synth::impression_seed(seed, f, i),
                    spec: spec.clone(),
                },
                finger_id: f,
                impression_id: i,
                group: "synthetic".into(),
                minutiae: None,
            });
        }
    }
    DatasetIndex::from_records(records, fingers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn touch(dir: &Path, name: &str) {
        fs::write(dir.join(name), b"").unwrap();
    }

    #[test]
    fn parses_fields_and_normalizes_theta() {
        let text = "# header\n128.0 64.0 1.5708 ending\n10 10 -1.5708 bifurcation  # trailing\n\n";
        let set = parse_minutiae(text, Path::new("t.min"), "t".into()).unwrap();
        assert_eq!(set.len(), 2);
        let m = set.items[0];
        assert_eq!((m.x, m.y, m.kind), (128.0, 64.0, MinutiaKind::Ending));
        assert!((m.theta - 1.5708).abs() < 1e-12);
        let b = set.items[1];
        assert!((b.theta - (2.0 * PI - 1.5708)).abs() < 1e-12);
        assert!((b.theta - 3.0 * PI / 2.0).abs() < 1e-4);
        assert_eq!(b.kind, MinutiaKind::Bifurcation);
    }

    #[test]
    fn empty_file_gives_empty_set() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.min");
        fs::write(&p, "").unwrap();
        assert!(parse_minutiae_file(&p).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_minutiae("1 2 0 ending\n1 2 zero ending\n", Path::new("m.min"), String::new())
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_minutiae("1 2 0 loop\n", Path::new("m.min"), String::new()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_minutiae("1 2 0\n", Path::new("m.min"), String::new()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn negative_coordinates_are_range_errors() {
        let err = parse_minutiae("-1 2 0 ending\n", Path::new("m.min"), String::new()).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
        let set = MinutiaSet::new(vec![Minutia::new(300.0, 2.0, 0.0, MinutiaKind::Unknown)], "x");
        assert!(matches!(set.check_bounds(256, 256), Err(Error::Range(_))));
    }

    #[test]
    fn duplicates_are_dropped() {
        let set = parse_minutiae("1 2 0.5 ending\n1 2 0.5 ending\n1 2 0.6 ending\n", Path::new("m"), String::new())
            .unwrap();
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn angle_normalization_edges() {
        assert_eq!(normalize_angle(0.0), 0.0);
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!(normalize_angle(-1e-300) < TAU);
        assert!((normalize_angle(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn flat_layout_relabels_contiguously() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["a_1.png", "a_2.png", "b_1.png", "notes.txt"] {
            touch(dir.path(), n);
        }
        let idx = load_dataset(dir.path(), Layout::Flat).unwrap();
        assert_eq!(idx.class_count(), 2);
        assert_eq!(idx.len(), 3);
        let keys: Vec<_> = idx.records().iter().map(|r| (r.finger_id, r.impression_id)).collect();
        assert_eq!(keys, vec![(0, 1), (0, 2), (1, 1)]);
    }

    #[test]
    fn fvc_layout_counts_and_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        for f in 1..=100 {
            for i in 1..=8 {
                touch(dir.path(), &format!("{f}_{i}.tif"));
            }
        }
        touch(dir.path(), "7_3.min");
        touch(dir.path(), "7_3.enh.tif");
        let idx = load_dataset(dir.path(), Layout::Fvc).unwrap();
        assert_eq!(idx.class_count(), 100);
        assert_eq!(idx.len(), 800);
        let r = &idx.records()[idx.position("7_3").unwrap()];
        assert_eq!((r.finger_id, r.impression_id), (6, 3));
        assert!(r.minutiae.is_some());
        // numeric ordering, not lexicographic: "10" sorts after "9"
        let r10 = &idx.records()[idx.position("10_1").unwrap()];
        assert_eq!(r10.finger_id, 9);
    }

    #[test]
    fn empty_and_missing_directories() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path(), Layout::Fvc), Err(Error::EmptyDataset(_))));
        assert!(matches!(
            load_dataset(&dir.path().join("nope"), Layout::Fvc),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn duplicate_finger_impression_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "1_1.png");
        touch(dir.path(), "001_1.png");
        assert!(matches!(load_dataset(dir.path(), Layout::Fvc), Err(Error::Format(_))));
    }

    #[test]
    fn molf_split_takes_last_impression_per_db() {
        let dir = tempfile::tempdir().unwrap();
        for db in ["DB1", "DB2", "DB3"] {
            let sub = dir.path().join(db);
            fs::create_dir(&sub).unwrap();
            for f in 0..5 {
                for i in 1..=4 {
                    touch(&sub, &format!("{f}_{i}.png"));
                }
            }
        }
        let idx = load_dataset(dir.path(), Layout::Molf).unwrap();
        assert_eq!(idx.class_count(), 5);
        assert_eq!(idx.len(), 60);
        let (train, val) = split_train_val(&idx, 1).unwrap();
        assert_eq!((train.len(), val.len()), (45, 15));
        assert!(val.records().iter().all(|r| r.image_id.ends_with("_4")));
        assert_eq!(train.class_count(), 5);
        assert_eq!(val.class_count(), 5);
    }

    #[test]
    fn split_small_and_degenerate_cases() {
        let spec = SynthSpec::default();
        let idx = synthetic_index(2, 0..2, &spec, 1).unwrap();
        let (t, v) = split_train_val(&idx, 1).unwrap();
        assert_eq!((t.len(), v.len()), (2, 2));
        let (t, v) = split_train_val(&idx, 0).unwrap();
        assert_eq!(t, idx);
        assert!(v.is_empty());
        match split_train_val(&idx, 2) {
            Err(Error::Split { finger, .. }) => assert_eq!(finger, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn molf_shaped_split_counts() {
        // 1,000 fingers × 4 impressions × 3 DBs, built in memory
        let mut records = Vec::new();
        for db in 0..3 {
            for f in 0..1000 {
                for i in 0..4 {
                    records.push(Record {
                        image_id: format!("DB{db}/{f}_{i}"),
                        source: ImageSource::File(PathBuf::new()),
                        finger_id: f,
                        impression_id: db * 4 + i,
                        group: format!("DB{db}"),
                        minutiae: None,
                    });
                }
            }
        }
        let idx = DatasetIndex::from_records(records, 1000).unwrap();
        let (t, v) = split_train_val(&idx, 1).unwrap();
        assert_eq!((t.len(), v.len()), (9000, 3000));
    }
}
