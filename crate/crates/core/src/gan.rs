//! Discriminator analysis: receptive fields of convolution stacks and the
//! pooled loss of a two-grid discriminator.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfError {
    #[error("layer {index}: kernel and stride must be at least 1")]
    InvalidLayer { index: usize },
    #[error("input dimensions must be at least 1")]
    EmptyInput,
    #[error("layer {index} collapses a {input}-pixel input below one output unit")]
    Collapsed { index: usize, input: u64 },
    #[error("grid values must be finite")]
    NonFinite,
    #[error("both grids must be non-empty")]
    EmptyGrid,
    #[error("malformed architecture: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub kernel: u32,
    pub stride: u32,
    #[serde(default)]
    pub padding: u32,
}

impl ConvLayerSpec {
    pub fn new(kernel: u32, stride: u32, padding: u32) -> Self {
        Self { kernel, stride, padding }
    }

    /// Output length along one axis, `None` if it drops below 1.
    pub fn output_len(&self, input: u64) -> Option<u64> {
        let padded = input + 2 * self.padding as u64;
        let k = self.kernel as u64;
        (padded >= k).then(|| (padded - k) / self.stride as u64 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerReport {
    pub receptive_field: u64,
    pub jump: u64,
    /// Output grid as (width, height).
    pub grid: (u64, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RfReport {
    pub input: (u64, u64),
    pub layers: Vec<LayerReport>,
}

impl RfReport {
    pub fn receptive_field(&self) -> u64 {
        self.layers.last().map_or(1, |l| l.receptive_field)
    }

    pub fn jump(&self) -> u64 {
        self.layers.last().map_or(1, |l| l.jump)
    }

    pub fn grid(&self) -> (u64, u64) {
        self.layers.last().map_or(self.input, |l| l.grid)
    }

    /// Plain-text table, one row per layer.
    pub fn table(&self) -> String {
        let mut s = String::from("layer  rf  jump  grid\n");
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(s, "{:>5} {:>3} {:>5}  {}x{}", i + 1, l.receptive_field, l.jump, l.grid.0, l.grid.1);
        }
        let (w, h) = self.grid();
        let _ = writeln!(s, "receptive field {} px, grid {w}x{h}", self.receptive_field());
        s
    }
}

pub fn receptive_field(layers: &[ConvLayerSpec], input: (u64, u64)) -> Result<RfReport, RfError> {
    if input.0 == 0 || input.1 == 0 {
        return Err(RfError::EmptyInput);
    }
    let (mut r, mut j) = (1u64, 1u64);
    let (mut w, mut h) = input;
    let mut out = Vec::with_capacity(layers.len());
    for (index, layer) in layers.iter().enumerate() {
        if layer.kernel == 0 || layer.stride == 0 {
            return Err(RfError::InvalidLayer { index });
        }
        r += (layer.kernel as u64 - 1) * j;
        j *= layer.stride as u64;
        w = layer.output_len(w).ok_or(RfError::Collapsed { index, input: w })?;
        h = layer.output_len(h).ok_or(RfError::Collapsed { index, input: h })?;
        out.push(LayerReport {
            receptive_field: r,
            jump: j,
            grid: (w, h),
        });
    }
    Ok(RfReport { input, layers: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub covered: bool,
    /// Receptive field minus object extent.
    pub margin: i64,
}

pub fn check_coverage(report: &RfReport, object_extent: u64) -> Coverage {
    let margin = report.receptive_field() as i64 - object_extent as i64;
    Coverage {
        covered: margin >= 0,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualGridValues {
    pub grid_small: Vec<Vec<f64>>,
    pub grid_large: Vec<Vec<f64>>,
}

/// Mean over every unit of both grids, each unit weighted equally.
pub fn dual_grid_loss(values: &DualGridValues) -> Result<f64, RfError> {
    let units = || values.grid_small.iter().chain(&values.grid_large).flatten();
    let count = units().count();
    if values.grid_small.iter().all(Vec::is_empty) || values.grid_large.iter().all(Vec::is_empty) {
        return Err(RfError::EmptyGrid);
    }
    if units().any(|v| !v.is_finite()) {
        return Err(RfError::NonFinite);
    }
    Ok(units().sum::<f64>() / count as f64)
}

/// Architecture file: a bare layer list, or named stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Architecture {
    Stack(Vec<ConvLayerSpec>),
    Named(BTreeMap<String, Vec<ConvLayerSpec>>),
}

impl Architecture {
    pub fn parse(text: &str) -> Result<Self, RfError> {
        serde_json::from_str(text).map_err(|e| RfError::Malformed(e.to_string()))
    }

    pub fn stacks(&self) -> Vec<(String, &[ConvLayerSpec])> {
        match self {
            Self::Stack(layers) => vec![("discriminator".to_string(), layers.as_slice())],
            Self::Named(map) => map.iter().map(|(k, v)| (k.clone(), v.as_slice())).collect(),
        }
    }
}

/// The common 70-pixel PatchGAN discriminator.
pub fn patchgan_70() -> Vec<ConvLayerSpec> {
    let mut layers = vec![ConvLayerSpec::new(4, 2, 1); 3];
    layers.extend([ConvLayerSpec::new(4, 1, 1); 2]);
    layers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let two = [ConvLayerSpec::new(3, 1, 1); 2];
        assert_eq!(receptive_field(&two, (32, 32)).unwrap().receptive_field(), 5);
        let id = receptive_field(&[ConvLayerSpec::new(1, 1, 0)], (9, 4)).unwrap();
        assert_eq!((id.receptive_field(), id.grid()), (1, (9, 4)));
        let p = receptive_field(&patchgan_70(), (256, 256)).unwrap();
        assert_eq!(p.receptive_field(), 70);
        assert_eq!(p.grid(), (30, 30));
        assert_eq!(p.jump(), 8);
    }

    #[test]
    fn collapse_is_reported() {
        let big = [ConvLayerSpec::new(7, 1, 0)];
        assert_eq!(
            receptive_field(&big, (5, 50)),
            Err(RfError::Collapsed { index: 0, input: 5 })
        );
        assert_eq!(
            receptive_field(&[ConvLayerSpec::new(0, 1, 0)], (5, 5)),
            Err(RfError::InvalidLayer { index: 0 })
        );
    }

    #[test]
    fn coverage_boundary() {
        let p = receptive_field(&patchgan_70(), (256, 256)).unwrap();
        assert_eq!(check_coverage(&p, 70), Coverage { covered: true, margin: 0 });
        assert_eq!(check_coverage(&p, 120), Coverage { covered: false, margin: -50 });
    }

    #[test]
    fn loss_examples() {
        let v = DualGridValues {
            grid_small: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            grid_large: vec![vec![1.0]],
        };
        assert!((dual_grid_loss(&v).unwrap() - 0.6).abs() < 1e-15);
        let c = DualGridValues {
            grid_small: vec![vec![0.25; 3]; 3],
            grid_large: vec![vec![0.25; 2]],
        };
        assert_eq!(dual_grid_loss(&c).unwrap(), 0.25);
        let empty = DualGridValues {
            grid_small: vec![],
            grid_large: vec![vec![1.0]],
        };
        assert_eq!(dual_grid_loss(&empty), Err(RfError::EmptyGrid));
    }

    #[test]
    fn architecture_formats() {
        let list = Architecture::parse(r#"[{"kernel": 4, "stride": 2, "padding": 1}]"#).unwrap();
        assert_eq!(list.stacks().len(), 1);
        let named = Architecture::parse(r#"{"small": [{"kernel": 3, "stride": 1}], "large": []}"#).unwrap();
        assert_eq!(named.stacks().iter().map(|s| s.0.as_str()).collect::<Vec<_>>(), ["large", "small"]);
        assert!(Architecture::parse("{\"kernel\": 3}").is_err());
        assert!(Architecture::parse("not json").is_err());
    }
}
