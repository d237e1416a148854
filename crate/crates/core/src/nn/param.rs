use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Name and shape of one contiguous parameter block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDesc {
    pub name: String,
    pub shape: Vec<usize>,
}

impl LayerDesc {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter array plus the layout that names its blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Vec<LayerDesc>,
}

impl ParamVector {
    pub fn new(layout: Vec<LayerDesc>, values: Vec<f64>) -> Result<Self> {
        let pv = Self { values, layout };
        pv.validate()?;
        Ok(pv)
    }

    pub fn zeros(layout: Vec<LayerDesc>) -> Self {
        let n = layout.iter().map(LayerDesc::len).sum();
        Self {
            values: vec![0.0; n],
            layout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected: usize = self.layout.iter().map(LayerDesc::len).sum();
        crate::error::check_len("ParamVector layout", expected, self.values.len())?;
        if !self.is_finite() {
            return Err(Error::NonFinite("ParamVector".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Offset and length of the named block.
    pub fn block(&self, name: &str) -> Option<(usize, usize)> {
        let mut off = 0;
        for l in &self.layout {
            if l.name == name {
                return Some((off, l.len()));
            }
            off += l.len();
        }
        None
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.block(name).map(|(o, n)| &self.values[o..o + n])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.block(name).map(|(o, n)| &mut self.values[o..o + n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_must_match_values() {
        let layout = vec![LayerDesc::new("w", vec![2, 3]), LayerDesc::new("b", vec![2])];
        assert!(ParamVector::new(layout.clone(), vec![0.0; 8]).is_ok());
        assert!(ParamVector::new(layout.clone(), vec![0.0; 7]).is_err());
        assert!(ParamVector::new(layout, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn named_blocks() {
        let layout = vec![LayerDesc::new("w", vec![2, 3]), LayerDesc::new("b", vec![2])];
        let pv = ParamVector::new(layout, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(pv.get("b").unwrap(), &[6.0, 7.0]);
        assert_eq!(pv.block("w"), Some((0, 6)));
        assert!(pv.get("missing").is_none());
    }
}
