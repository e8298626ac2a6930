//! Host-memory arrays: kernel parameters and local/static arrays.

use serde::{Deserialize, Serialize};

use super::config::ElemKind;

/// Element storage for one array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "lowercase")]
pub enum Data {
    I8(Vec<i8>),
    I32(Vec<i32>),
    F32(Vec<f32>),
}

impl Data {
    pub fn zeros(kind: ElemKind, len: usize) -> Data {
        match kind {
            ElemKind::Int8 => Data::I8(vec![0; len]),
            ElemKind::Int32 => Data::I32(vec![0; len]),
            ElemKind::Float32 => Data::F32(vec![0.0; len]),
        }
    }

    pub fn kind(&self) -> ElemKind {
        match self {
            Data::I8(_) => ElemKind::Int8,
            Data::I32(_) => ElemKind::Int32,
            Data::F32(_) => ElemKind::Float32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Data::I8(v) => v.len(),
            Data::I32(v) => v.len(),
            Data::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Element `i` widened to f64 (exact for every storage kind).
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Data::I8(v) => v[i] as f64,
            Data::I32(v) => v[i] as f64,
            Data::F32(v) => v[i] as f64,
        }
    }

    /// Stores an integer, wrapping it to the storage width.
    pub fn set_int(&mut self, i: usize, x: i64) {
        match self {
            Data::I8(v) => v[i] = x as i8,
            Data::I32(v) => v[i] = x as i32,
            Data::F32(v) => v[i] = x as f32,
        }
    }

    /// Stores `x`, wrapping integers to the storage width.
    pub fn set(&mut self, i: usize, x: f64) {
        match self {
            Data::I8(v) => v[i] = x as i64 as i8,
            Data::I32(v) => v[i] = x as i64 as i32,
            Data::F32(v) => v[i] = x as f32,
        }
    }
}

/// A named multi-dimensional array exchanged with the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayData {
    pub dims: Vec<usize>,
    pub data: Data,
}

impl ArrayData {
    pub fn zeros(kind: ElemKind, dims: &[usize]) -> ArrayData {
        ArrayData { dims: dims.to_vec(), data: Data::zeros(kind, dims.iter().product()) }
    }

    pub fn kind(&self) -> ElemKind {
        self.data.kind()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Converts a flat index into a per-dimension index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (d, n) in self.dims.iter().enumerate().rev() {
            idx[d] = flat % n;
            flat /= n;
        }
        idx
    }
}

/// A host buffer inside a running simulation.
#[derive(Debug, Clone)]
pub struct Buffer {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Data,
}

impl Buffer {
    pub fn elem_bytes(&self) -> usize {
        self.data.kind().bytes()
    }
}
