use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::LayerRole;

/// Per-layer compute and parameter counts of an architecture, used for
/// accounting only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub role: LayerRole,
    pub macs: u64,
    /// Weight count.
    pub params: u64,
    /// Biases and batch-norm affine parameters, kept at full precision.
    pub fp_params: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacManifest {
    pub name: String,
    pub layers: Vec<ManifestLayer>,
}

const BUNDLED: &[(&str, &str)] = &[
    ("mobilenet_v1", include_str!("../../manifests/mobilenet_v1.csv")),
    ("mobilenet_v2", include_str!("../../manifests/mobilenet_v2.csv")),
    ("resnet50", include_str!("../../manifests/resnet50.csv")),
];

impl MacManifest {
    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let known: Vec<_> = Self::bundled_names().collect();
            Error::Config(format!("no bundled manifest `{name}` (known: {})", known.join(", ")))
        })?;
        Self::from_csv(name, text)
    }

    /// Parse `name,role,macs,params,fp_params` rows after a header line.
    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Config("empty manifest".into()))?;
        if header.trim() != "name,role,macs,params,fp_params" {
            return Err(Error::Config(format!("unexpected manifest header `{header}`")));
        }
        let mut layers = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let row = i + 2;
            if f.len() != 5 {
                return Err(Error::Config(format!("manifest row {row}: expected 5 fields")));
            }
            let role = match f[1] {
                "first" => LayerRole::First,
                "interior" => LayerRole::Interior,
                "last" => LayerRole::Last,
                other => return Err(Error::Config(format!("manifest row {row}: unknown role `{other}`"))),
            };
            let num = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| Error::Config(format!("manifest row {row}: `{s}` is not a count")))
            };
            layers.push(ManifestLayer {
                name: f[0].to_string(),
                role,
                macs: num(f[2])?,
                params: num(f[3])?,
                fp_params: num(f[4])?,
            });
        }
        let m = MacManifest {
            name: name.to_string(),
            layers,
        };
        m.validate()?;
        Ok(m)
    }

    /// Counts positive, exactly one first and one last layer. An empty
    /// manifest is valid.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Ok(());
        }
        let count = |r| self.layers.iter().filter(|l| l.role == r).count();
        if count(LayerRole::First) != 1 || count(LayerRole::Last) != 1 {
            return Err(Error::Config(format!(
                "manifest `{}` needs exactly one first and one last layer",
                self.name
            )));
        }
        if let Some(l) = self.layers.iter().find(|l| l.macs == 0 || l.params == 0) {
            return Err(Error::Config(format!("manifest layer `{}` has a zero count", l.name)));
        }
        Ok(())
    }

    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.macs).sum()
    }

    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(|l| l.params).sum()
    }

    pub fn total_fp_params(&self) -> u64 {
        self.layers.iter().map(|l| l.fp_params).sum()
    }

    /// Layers whose output passes through a clipped activation.
    pub fn clipped_layers(&self) -> usize {
        self.layers.iter().filter(|l| l.role != LayerRole::Last).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,role,macs,params,fp_params\n");
        for l in &self.layers {
            let role = match l.role {
                LayerRole::First => "first",
                LayerRole::Interior => "interior",
                LayerRole::Last => "last",
            };
            out.push_str(&format!("{},{role},{},{},{}\n", l.name, l.macs, l.params, l.fp_params));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_manifests_parse() {
        for name in MacManifest::bundled_names() {
            let m = MacManifest::bundled(name).unwrap();
            assert!(m.layers.len() > 10);
            assert_eq!(MacManifest::from_csv(name, &m.to_csv()).unwrap(), m);
        }
        assert!(MacManifest::bundled("vgg").is_err());
    }

    #[test]
    fn rejects_malformed_rows() {
        let h = "name,role,macs,params,fp_params\n";
        assert!(MacManifest::from_csv("x", &format!("{h}a,first,1,1,0\nb,middle,1,1,0\n")).is_err());
        assert!(MacManifest::from_csv("x", &format!("{h}a,first,1,1,0\n")).is_err());
        assert!(MacManifest::from_csv("x", &format!("{h}a,first,0,1,0\nb,last,1,1,0\n")).is_err());
        assert!(MacManifest::from_csv("x", &format!("{h}a,first,1,1\n")).is_err());
        assert!(MacManifest::from_csv("x", h).unwrap().layers.is_empty());
    }
}
