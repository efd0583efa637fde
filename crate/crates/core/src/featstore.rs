//! On-disk feature tensors (NPY v1.0, little-endian `f4`, C order, rank 4)
//! and the in-memory [`FeatureSet`].
//!
//! Metadata lives in a JSON sidecar next to the array: `F.npy` pairs with
//! `F.npy.meta.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{ArrayView2, ArrayView4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrgaError};

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";
const NPY_ALIGN: usize = 64;
/// Magic + version + 2-byte header length.
const NPY_PREAMBLE: usize = 10;

/// Provenance carried alongside a feature tensor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    #[serde(default = "unknown")]
    pub model_id: String,
    #[serde(default = "unknown")]
    pub dataset_id: String,
    #[serde(default = "unknown")]
    pub layer_tag: String,
}

fn unknown() -> String {
    "unknown".to_string()
}

impl Default for FeatureMeta {
    fn default() -> Self {
        FeatureMeta {
            model_id: unknown(),
            dataset_id: unknown(),
            layer_tag: unknown(),
        }
    }
}

/// N feature maps of identical shape H×W×C, stored contiguously in
/// (N, H, W, C) order with C varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    shape: [usize; 4],
    data: Vec<f32>,
    pub meta: FeatureMeta,
}

/// N × (H·W·C) row matrix; row `n` is feature map `n` flattened with C
/// fastest, then W, then H.
#[derive(Debug)]
pub struct FlattenedFeatures<'a> {
    rows: ArrayView2<'a, f32>,
}

impl<'a> FlattenedFeatures<'a> {
    pub fn view(&self) -> ArrayView2<'a, f32> {
        self.rows
    }

    pub fn dim(&self) -> (usize, usize) {
        self.rows.dim()
    }

    /// Column of element (h, w, c) for feature maps of width `w_len` and
    /// depth `c_len`.
    pub fn column_of(h: usize, w: usize, c: usize, w_len: usize, c_len: usize) -> usize {
        (h * w_len + w) * c_len + c
    }
}

impl FeatureSet {
    /// Builds a set from a contiguous (N, H, W, C) buffer, enforcing
    /// N ≥ 1, a consistent length and finite values.
    pub fn new(shape: [usize; 4], data: Vec<f32>, meta: FeatureMeta) -> Result<Self> {
        let [n, h, w, c] = shape;
        if n == 0 {
            return Err(SrgaError::Dimension("feature set must hold at least one tensor".into()));
        }
        if h == 0 || w == 0 || c == 0 {
            return Err(SrgaError::Dimension(format!("empty feature map shape {shape:?}")));
        }
        if data.len() != n * h * w * c {
            return Err(SrgaError::Dimension(format!(
                "buffer of {} values does not match shape {shape:?}",
                data.len()
            )));
        }
        check_finite(&data, h * w * c)?;
        Ok(FeatureSet { shape, data, meta })
    }

    pub fn len(&self) -> usize {
        self.shape[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    /// H·W·C, the length of one flattened feature map.
    pub fn map_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn tensor(&self, n: usize) -> &[f32] {
        let len = self.map_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn view4(&self) -> ArrayView4<'_, f32> {
        ArrayView4::from_shape(self.shape, &self.data).expect("shape checked at construction")
    }

    /// Zero-copy flattening into an N × HWC matrix.
    pub fn flatten(&self) -> FlattenedFeatures<'_> {
        let rows = ArrayView2::from_shape((self.len(), self.map_len()), &self.data)
            .expect("shape checked at construction");
        FlattenedFeatures { rows }
    }

    /// New set made of the tensors at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<FeatureSet> {
        let len = self.map_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            if i >= self.len() {
                return Err(SrgaError::Dimension(format!(
                    "tensor index {i} out of range for {} tensors",
                    self.len()
                )));
            }
            data.extend_from_slice(self.tensor(i));
        }
        let mut shape = self.shape;
        shape[0] = indices.len();
        FeatureSet::new(shape, data, self.meta.clone())
    }

    /// Stacks two sets with matching map shape (reference first).
    pub fn concat(&self, other: &FeatureSet) -> Result<FeatureSet> {
        if self.shape[1..] != other.shape[1..] {
            return Err(SrgaError::Dimension(format!(
                "cannot stack feature maps {:?} and {:?}",
                &self.shape[1..],
                &other.shape[1..]
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        let mut shape = self.shape;
        shape[0] += other.shape[0];
        let meta = FeatureMeta {
            dataset_id: format!("{}+{}", self.meta.dataset_id, other.meta.dataset_id),
            ..self.meta.clone()
        };
        Ok(FeatureSet { shape, data, meta })
    }
}

fn check_finite(data: &[f32], map_len: usize) -> Result<()> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(SrgaError::Data(format!(
            "non-finite value {} in tensor {} (flat offset {pos})",
            data[pos],
            pos / map_len
        )));
    }
    Ok(())
}

/// Path of the metadata sidecar for a feature file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Renders the NPY v1.0 header (preamble included) for an f4 array.
pub fn npy_header(shape: &[usize]) -> Vec<u8> {
    let dims = shape.iter().map(|d| d.to_string()).collect::<Vec<_>>();
    let shape_txt = if dims.len() == 1 {
        format!("({},)", dims[0])
    } else {
        format!("({})", dims.join(", "))
    };
    let mut dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {shape_txt}, }}");
    let unpadded = NPY_PREAMBLE + dict.len() + 1;
    let pad = (NPY_ALIGN - unpadded % NPY_ALIGN) % NPY_ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(NPY_PREAMBLE + dict.len());
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

/// Writes the array and its sidecar.
pub fn write_feature_file(set: &FeatureSet, path: &Path) -> Result<()> {
    let mut bytes = npy_header(&set.shape);
    bytes.reserve(set.data.len() * 4);
    for v in &set.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| SrgaError::io(path, e))?;
    file.write_all(&bytes).map_err(|e| SrgaError::io(path, e))?;

    let side = sidecar_path(path);
    let json = serde_json::to_vec_pretty(&set.meta).map_err(|e| SrgaError::Json {
        path: side.clone(),
        source: e,
    })?;
    fs::write(&side, json).map_err(|e| SrgaError::io(&side, e))
}

/// Reads a feature file, taking metadata from the sidecar when present.
pub fn read_feature_file(path: &Path) -> Result<FeatureSet> {
    let bytes = fs::read(path).map_err(|e| SrgaError::io(path, e))?;
    let (shape, offset) = parse_npy_header(&bytes).map_err(|r| SrgaError::format(path, r))?;
    if shape.len() != 4 {
        return Err(SrgaError::format(
            path,
            format!("expected a rank-4 (N,H,W,C) array, got shape {shape:?}"),
        ));
    }
    let count: usize = shape.iter().product();
    let payload = &bytes[offset..];
    if payload.len() != count * 4 {
        return Err(SrgaError::format(
            path,
            format!("payload holds {} bytes, shape needs {}", payload.len(), count * 4),
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();

    let side = sidecar_path(path);
    let meta = if side.exists() {
        let raw = fs::read(&side).map_err(|e| SrgaError::io(&side, e))?;
        serde_json::from_slice(&raw).map_err(|e| SrgaError::Json {
            path: side.clone(),
            source: e,
        })?
    } else {
        FeatureMeta::default()
    };
    FeatureSet::new([shape[0], shape[1], shape[2], shape[3]], data, meta)
}

fn parse_npy_header(bytes: &[u8]) -> std::result::Result<(Vec<usize>, usize), String> {
    if bytes.len() < NPY_PREAMBLE || &bytes[..6] != NPY_MAGIC {
        return Err("missing NPY magic".into());
    }
    if bytes[6..8] != [1, 0] {
        return Err(format!("unsupported NPY version {}.{}", bytes[6], bytes[7]));
    }
    let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let end = NPY_PREAMBLE + hlen;
    if bytes.len() < end {
        return Err("truncated header".into());
    }
    let header = std::str::from_utf8(&bytes[NPY_PREAMBLE..end])
        .map_err(|_| "header is not ASCII".to_string())?;
    let dict = PyDict::parse(header)?;

    match dict.get("descr") {
        Some(PyValue::Str(d)) if d == "<f4" => {}
        Some(PyValue::Str(d)) => return Err(format!("unsupported dtype '{d}' (need '<f4')")),
        _ => return Err("header lacks 'descr'".into()),
    }
    match dict.get("fortran_order") {
        Some(PyValue::Bool(false)) => {}
        Some(PyValue::Bool(true)) => return Err("Fortran-ordered arrays are not accepted".into()),
        _ => return Err("header lacks 'fortran_order'".into()),
    }
    let shape = match dict.get("shape") {
        Some(PyValue::Tuple(s)) => s.clone(),
        _ => return Err("header lacks 'shape'".into()),
    };
    Ok((shape, end))
}

#[derive(Debug, Clone, PartialEq)]
enum PyValue {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// The tiny subset of Python literal syntax that appears in NPY headers.
struct PyDict(Vec<(String, PyValue)>);

impl PyDict {
    fn get(&self, key: &str) -> Option<&PyValue> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut p = Cursor { s: text.trim().as_bytes(), i: 0 };
        p.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            p.skip_ws();
            if p.peek() == Some(b'}') {
                break;
            }
            let key = p.string()?;
            p.skip_ws();
            p.expect(b':')?;
            p.skip_ws();
            let value = p.value()?;
            entries.push((key, value));
            p.skip_ws();
            match p.peek() {
                Some(b',') => p.i += 1,
                Some(b'}') => {}
                other => return Err(format!("unexpected {:?} in header", other.map(char::from))),
            }
        }
        Ok(PyDict(entries))
    }
}

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.i += 1;
        }
    }

    fn expect(&mut self, c: u8) -> std::result::Result<(), String> {
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(format!("expected '{}' in header", char::from(c)))
        }
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err("expected quoted string in header".into()),
        };
        self.i += 1;
        let start = self.i;
        while self.peek().is_some_and(|c| c != quote) {
            self.i += 1;
        }
        let s = String::from_utf8_lossy(&self.s[start..self.i]).into_owned();
        self.expect(quote)?;
        Ok(s)
    }

    fn value(&mut self) -> std::result::Result<PyValue, String> {
        match self.peek() {
            Some(b'\'' | b'"') => self.string().map(PyValue::Str),
            Some(b'T') if self.s[self.i..].starts_with(b"True") => {
                self.i += 4;
                Ok(PyValue::Bool(true))
            }
            Some(b'F') if self.s[self.i..].starts_with(b"False") => {
                self.i += 5;
                Ok(PyValue::Bool(false))
            }
            Some(b'(') => {
                self.i += 1;
                let mut dims = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b')') => {
                            self.i += 1;
                            break;
                        }
                        Some(b',') => self.i += 1,
                        Some(c) if c.is_ascii_digit() => {
                            let start = self.i;
                            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                                self.i += 1;
                            }
                            let txt = std::str::from_utf8(&self.s[start..self.i]).unwrap();
                            dims.push(txt.parse().map_err(|_| "bad shape entry".to_string())?);
                        }
                        _ => return Err("malformed shape tuple".into()),
                    }
                }
                Ok(PyValue::Tuple(dims))
            }
            _ => Err("unsupported value in header".into()),
        }
    }
}
