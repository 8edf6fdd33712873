//! Flat parameter storage with named segments.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::DiffError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector<T> {
    pub values: Vec<T>,
    pub layout: Vec<Segment>,
}

impl<T: Scalar> ParamVector<T> {
    /// Concatenates named blocks in order.
    pub fn pack<S: Into<String>>(blocks: Vec<(S, Vec<T>)>) -> Result<Self, DiffError> {
        let mut values = Vec::new();
        let mut layout: Vec<Segment> = Vec::with_capacity(blocks.len());
        for (name, block) in blocks {
            let name = name.into();
            if layout.iter().any(|s| s.name == name) {
                return Err(DiffError::Layout(format!("duplicate segment `{name}`")));
            }
            layout.push(Segment {
                name,
                offset: values.len(),
                len: block.len(),
            });
            values.extend(block);
        }
        Ok(Self { values, layout })
    }

    pub fn unpack(&self) -> Vec<(String, Vec<T>)> {
        self.layout
            .iter()
            .map(|s| (s.name.clone(), self.values[s.range()].to_vec()))
            .collect()
    }

    /// Checks that segments tile `values` exactly.
    pub fn validate(&self) -> Result<(), DiffError> {
        let mut off = 0;
        for s in &self.layout {
            if s.offset != off {
                return Err(DiffError::Layout(format!(
                    "segment `{}` starts at {} but previous ends at {}",
                    s.name, s.offset, off
                )));
            }
            off += s.len;
        }
        if off != self.values.len() {
            return Err(DiffError::Layout(format!(
                "segments cover {} of {} values",
                off,
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.layout.iter().find(|s| s.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.segment(name).map(|s| &self.values[s.range()])
    }

    /// Per-coordinate expansion of a per-segment quantity.
    pub fn expand(&self, mut per_segment: impl FnMut(&str) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.values.len());
        for s in &self.layout {
            let v = per_segment(&s.name);
            out.extend(std::iter::repeat_n(v, s.len));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_unpack_round_trip() {
        let blocks = vec![
            ("enc".to_string(), vec![1.0, 2.0]),
            ("dec".to_string(), vec![]),
            ("ham".to_string(), vec![3.0]),
        ];
        let pv = ParamVector::pack(blocks.clone()).unwrap();
        pv.validate().unwrap();
        assert_eq!(pv.unpack(), blocks);
        assert_eq!(pv.get("ham"), Some(&[3.0][..]));
        assert_eq!(pv.expand(|n| if n == "enc" { 0.5 } else { 0.0 }), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(ParamVector::pack(vec![("a", vec![1.0]), ("a", vec![2.0])]).is_err());
        let mut pv = ParamVector::pack(vec![("a", vec![1.0f64, 2.0])]).unwrap();
        pv.values.push(3.0);
        assert!(pv.validate().is_err());
    }
}
