//! Feature schema: names, set tags, value kinds, spatial behaviour.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Feature family used for subset evaluation and ablation grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetTag {
    A,
    B,
    C,
    D,
}

impl SetTag {
    pub fn parse(s: &str) -> Option<SetTag> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Some(SetTag::A),
            "B" => Some(SetTag::B),
            "C" => Some(SetTag::C),
            "D" => Some(SetTag::D),
            _ => None,
        }
    }
}

impl fmt::Display for SetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SetTag::A => "A",
            SetTag::B => "B",
            SetTag::C => "C",
            SetTag::D => "D",
        };
        f.write_str(s)
    }
}

/// Whether a feature holds real values or small-integer category codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Continuous,
    Categorical,
}

impl Kind {
    pub fn parse(s: &str) -> Option<Kind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Some(Kind::Continuous),
            "categorical" => Some(Kind::Categorical),
            _ => None,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Continuous => "continuous",
            Kind::Categorical => "categorical",
        })
    }
}

/// Whether a feature varies by region (joined through pickup locations) or
/// only over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spatial {
    SpaceIndependent,
    SpaceDependent,
}

impl Spatial {
    pub fn parse(s: &str) -> Option<Spatial> {
        match s.trim().to_ascii_lowercase().as_str() {
            "space_independent" => Some(Spatial::SpaceIndependent),
            "space_dependent" => Some(Spatial::SpaceDependent),
            _ => None,
        }
    }
}

impl fmt::Display for Spatial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spatial::SpaceIndependent => "space_independent",
            Spatial::SpaceDependent => "space_dependent",
        })
    }
}

/// One declared feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub set: SetTag,
    pub kind: Kind,
    pub spatial: Spatial,
}

impl FeatureDef {
    pub fn new(name: &str, set: SetTag, kind: Kind, spatial: Spatial) -> FeatureDef {
        FeatureDef {
            name: name.to_string(),
            set,
            kind,
            spatial,
        }
    }
}

/// Ordered collection of feature definitions. Order is meaningful: panel
/// columns, window columns, and embeddings all follow it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<FeatureSchema> {
        let schema = FeatureSchema { features };
        schema.validate()?;
        Ok(schema)
    }

    pub fn empty() -> FeatureSchema {
        FeatureSchema { features: vec![] }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.features {
            if f.name.trim().is_empty() {
                return Err(Error::schema("feature with empty name"));
            }
            if f.name == "p" || f.name == "datetime" {
                return Err(Error::schema(format!(
                    "feature name '{}' collides with a reserved panel column",
                    f.name
                )));
            }
            if !seen.insert(f.name.clone()) {
                return Err(Error::schema(format!("duplicate feature name '{}'", f.name)));
            }
        }
        Ok(())
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&FeatureDef> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    /// Features carrying one of the given set tags, in schema order.
    pub fn subset_by_sets(&self, sets: &[SetTag]) -> FeatureSchema {
        FeatureSchema {
            features: self
                .features
                .iter()
                .filter(|f| sets.contains(&f.set))
                .cloned()
                .collect(),
        }
    }

    /// Schema without the named feature.
    pub fn without(&self, name: &str) -> FeatureSchema {
        FeatureSchema {
            features: self
                .features
                .iter()
                .filter(|f| f.name != name)
                .cloned()
                .collect(),
        }
    }

    /// SHA-256 over the canonical textual form; two schemas match exactly
    /// when their fingerprints do.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for f in &self.features {
            hasher.update(format!("{},{},{},{}\n", f.name, f.set, f.kind, f.spatial).as_bytes());
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

/// The default 28-feature schema: calendar and weather (set A), economic
/// census (B), commute census (C), and area descriptors (D).
pub fn canonical_schema() -> FeatureSchema {
    use Kind::*;
    use SetTag::*;
    use Spatial::*;
    let defs = [
        ("hour", A, Categorical, SpaceIndependent),
        ("wed", A, Categorical, SpaceIndependent),
        ("day", A, Categorical, SpaceIndependent),
        ("month", A, Categorical, SpaceIndependent),
        ("vsb", A, Continuous, SpaceIndependent),
        ("temp", A, Continuous, SpaceIndependent),
        ("dewp", A, Continuous, SpaceIndependent),
        ("hd", A, Categorical, SpaceIndependent),
        ("spd", A, Continuous, SpaceIndependent),
        ("slp", A, Continuous, SpaceIndependent),
        ("pcp01", A, Continuous, SpaceIndependent),
        ("pcp06", A, Continuous, SpaceIndependent),
        ("pcp24", A, Continuous, SpaceIndependent),
        ("sd", A, Continuous, SpaceIndependent),
        ("Unemployment", B, Continuous, SpaceDependent),
        ("Income", B, Continuous, SpaceDependent),
        ("Poverty", B, Continuous, SpaceDependent),
        ("Self-employed", B, Continuous, SpaceDependent),
        ("TotalPop", B, Continuous, SpaceDependent),
        ("Walk", C, Continuous, SpaceDependent),
        ("Transit", C, Continuous, SpaceDependent),
        ("Carpool", C, Continuous, SpaceDependent),
        ("WorkAtHome", C, Continuous, SpaceDependent),
        ("MeanCommute", C, Continuous, SpaceDependent),
        ("streetcrime", D, Continuous, SpaceDependent),
        ("borough", D, Categorical, SpaceDependent),
        ("PUMA", D, Categorical, SpaceDependent),
        ("transp", D, Continuous, SpaceDependent),
    ];
    FeatureSchema {
        features: defs
            .iter()
            .map(|(n, s, k, sp)| FeatureDef::new(n, *s, *k, *sp))
            .collect(),
    }
}

/// Reads a schema CSV with header `name,set,kind,spatial`.
pub fn read_schema(path: &Path) -> Result<FeatureSchema> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    parse_schema(&text, &path.display().to_string())
}

pub fn parse_schema(text: &str, file_label: &str) -> Result<FeatureSchema> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim(),
        None => return Err(Error::schema(format!("{file_label}: empty schema file"))),
    };
    let expect = "name,set,kind,spatial";
    if header.trim_end_matches('\r') != expect {
        return Err(Error::schema(format!(
            "{file_label}: expected header '{expect}', got '{header}'"
        )));
    }
    let mut features = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx as u64 + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::parse(
                file_label,
                line_no,
                format!("expected 4 fields, got {}", parts.len()),
            ));
        }
        let set = SetTag::parse(parts[1]).ok_or_else(|| {
            Error::schema(format!(
                "{file_label} line {line_no}: unknown set tag '{}' (expected A|B|C|D)",
                parts[1]
            ))
        })?;
        let kind = Kind::parse(parts[2]).ok_or_else(|| {
            Error::schema(format!(
                "{file_label} line {line_no}: unknown kind '{}' (expected continuous|categorical)",
                parts[2]
            ))
        })?;
        let spatial = Spatial::parse(parts[3]).ok_or_else(|| {
            Error::schema(format!(
                "{file_label} line {line_no}: unknown spatial tag '{}' (expected space_independent|space_dependent)",
                parts[3]
            ))
        })?;
        features.push(FeatureDef::new(parts[0].trim(), set, kind, spatial));
    }
    FeatureSchema::new(features)
}

/// Writes a schema CSV readable by [`read_schema`].
pub fn write_schema(schema: &FeatureSchema, path: &Path) -> Result<()> {
    let mut out = String::from("name,set,kind,spatial\n");
    for f in schema.features() {
        out.push_str(&format!("{},{},{},{}\n", f.name, f.set, f.kind, f.spatial));
    }
    std::fs::write(path, out)?;
    Ok(())
}
