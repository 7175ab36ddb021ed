//! Dataset manifest: labeled sample records and their CSV form.
//!
//! CSV schema: header `path,label,quadrotor,config,thrust`; labels
//! `broken|unbroken`, configs `config1|config2|config3`, thrust
//! `low|medium|high`. Paths are stored relative to the manifest file.

use std::fmt;
use std::path::{Path, PathBuf};

use super::PipelineError;

/// Two-class diagnosis label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Broken,
    Unbroken,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Unbroken, Label::Broken];

    /// Class index used by the classifier: unbroken = 0, broken = 1.
    pub fn class_index(self) -> usize {
        match self {
            Label::Unbroken => 0,
            Label::Broken => 1,
        }
    }

    pub fn from_class_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::Unbroken),
            1 => Some(Label::Broken),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Label::Broken => "broken",
            Label::Unbroken => "unbroken",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Propeller set installed for a recording. Config1 is all-healthy;
/// config2 and config3 each include one damaged propeller, so the label is
/// implied by the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropellerConfig {
    Config1,
    Config2,
    Config3,
}

impl PropellerConfig {
    pub fn implied_label(self) -> Label {
        match self {
            PropellerConfig::Config1 => Label::Unbroken,
            PropellerConfig::Config2 | PropellerConfig::Config3 => Label::Broken,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            PropellerConfig::Config1 => "config1",
            PropellerConfig::Config2 => "config2",
            PropellerConfig::Config3 => "config3",
        }
    }
}

/// Commanded thrust level of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thrust {
    Low,
    Medium,
    High,
}

impl Thrust {
    pub const ALL: [Thrust; 3] = [Thrust::Low, Thrust::Medium, Thrust::High];

    /// Shaft-rate multiplier relative to the preset base rate.
    pub fn rate_multiplier(self) -> f64 {
        match self {
            Thrust::Low => 0.8,
            Thrust::Medium => 1.0,
            Thrust::High => 1.2,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Thrust::Low => "low",
            Thrust::Medium => "medium",
            Thrust::High => "high",
        }
    }
}

/// One labeled spectrogram image.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    /// Image path, relative to the manifest root.
    pub image_path: PathBuf,
    pub label: Label,
    pub quadrotor_id: String,
    pub propeller_set: PropellerConfig,
    pub thrust: Thrust,
}

/// A set of sample records plus the directory their paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
    pub root: PathBuf,
}

impl DatasetManifest {
    /// Absolute (root-joined) path of one record's image.
    pub fn resolve(&self, record: &SampleRecord) -> PathBuf {
        if record.image_path.is_absolute() {
            record.image_path.clone()
        } else {
            self.root.join(&record.image_path)
        }
    }

    /// Record indices carrying `label`, in manifest order.
    pub fn indices_with_label(&self, label: Label) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.records.len()).collect()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> PipelineError {
    PipelineError::ManifestParse {
        line,
        message: message.into(),
    }
}

const HEADER: &str = "path,label,quadrotor,config,thrust";

/// Write a manifest as CSV next to its images.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), PipelineError> {
    let mut text = String::from(HEADER);
    text.push('\n');
    for r in &manifest.records {
        let image = r.image_path.to_string_lossy();
        if image.contains(',') || image.contains('\n') {
            return Err(parse_err(
                0,
                format!("image path {image:?} contains a delimiter"),
            ));
        }
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            image,
            r.label.as_str(),
            r.quadrotor_id,
            r.propeller_set.as_str(),
            r.thrust.as_str()
        ));
    }
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Load a manifest CSV; the file's directory becomes the manifest root.
/// Label/config consistency is enforced (config1 must be unbroken,
/// config2/config3 broken).
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    parse_manifest(&text, root)
}

fn parse_manifest(text: &str, root: PathBuf) -> Result<DatasetManifest, PipelineError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty manifest"))?;
    if header.trim() != HEADER {
        return Err(parse_err(1, format!("expected header {HEADER:?}")));
    }

    let mut records = Vec::new();
    for (at, line) in lines {
        let lineno = at + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                lineno,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let label = match fields[1] {
            "broken" => Label::Broken,
            "unbroken" => Label::Unbroken,
            other => return Err(parse_err(lineno, format!("unknown label {other:?}"))),
        };
        let propeller_set = match fields[3] {
            "config1" => PropellerConfig::Config1,
            "config2" => PropellerConfig::Config2,
            "config3" => PropellerConfig::Config3,
            other => return Err(parse_err(lineno, format!("unknown config {other:?}"))),
        };
        let thrust = match fields[4] {
            "low" => Thrust::Low,
            "medium" => Thrust::Medium,
            "high" => Thrust::High,
            other => return Err(parse_err(lineno, format!("unknown thrust {other:?}"))),
        };
        if propeller_set.implied_label() != label {
            return Err(parse_err(
                lineno,
                format!(
                    "label {} contradicts {}",
                    label.as_str(),
                    propeller_set.as_str()
                ),
            ));
        }
        records.push(SampleRecord {
            image_path: PathBuf::from(fields[0]),
            label,
            quadrotor_id: fields[2].to_string(),
            propeller_set,
            thrust,
        });
    }
    Ok(DatasetManifest { records, root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_manifest() -> DatasetManifest {
        DatasetManifest {
            records: vec![
                SampleRecord {
                    image_path: PathBuf::from("img_000.ppm"),
                    label: Label::Unbroken,
                    quadrotor_id: "quadA".into(),
                    propeller_set: PropellerConfig::Config1,
                    thrust: Thrust::Low,
                },
                SampleRecord {
                    image_path: PathBuf::from("img_001.ppm"),
                    label: Label::Broken,
                    quadrotor_id: "quadA".into(),
                    propeller_set: PropellerConfig::Config3,
                    thrust: Thrust::High,
                },
            ],
            root: PathBuf::from("/tmp/x"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let mut manifest = sample_manifest();
        save_manifest(&manifest, &path).unwrap();
        let loaded = load_manifest(&path).unwrap();
        manifest.root = dir.path().to_path_buf();
        assert_eq!(loaded, manifest);
    }

    #[test]
    fn label_config_contradiction_is_rejected() {
        let text = format!("{HEADER}\nimg.ppm,broken,quadA,config1,low\n");
        match parse_manifest(&text, PathBuf::from(".")) {
            Err(PipelineError::ManifestParse { line: 2, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_enum_values_are_rejected() {
        for bad in [
            format!("{HEADER}\nimg.ppm,cracked,quadA,config1,low\n"),
            format!("{HEADER}\nimg.ppm,broken,quadA,config9,low\n"),
            format!("{HEADER}\nimg.ppm,broken,quadA,config2,warp\n"),
        ] {
            assert!(parse_manifest(&bad, PathBuf::from(".")).is_err());
        }
    }

    #[test]
    fn resolve_joins_relative_paths() {
        let manifest = sample_manifest();
        assert_eq!(
            manifest.resolve(&manifest.records[0]),
            PathBuf::from("/tmp/x/img_000.ppm")
        );
    }

    #[test]
    fn label_indices_partition_records() {
        let manifest = sample_manifest();
        assert_eq!(manifest.indices_with_label(Label::Unbroken), vec![0]);
        assert_eq!(manifest.indices_with_label(Label::Broken), vec![1]);
    }
}
