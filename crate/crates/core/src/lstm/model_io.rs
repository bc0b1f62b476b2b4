//! Binary model serialization.
//!
//! Layout (all integers and doubles little-endian):
//!
//! ```text
//! magic   b"LQEM"
//! version u32 (currently 1)
//! n_features, hidden, layers, window  u32 each
//! tau     f64
//! standardizer: 2n channel means, then 2n channel standard deviations, f64 each
//! parameters, per layer: w_ih row-major, w_hh row-major, bias; then
//! head weights and head bias, f64 each
//! ```
//!
//! Round-trips are bit-exact for every stored double.

use crate::error::{LqeError, Result};
use crate::preprocess::Standardizer;

use super::{LstmParams, ModelDims};

pub const MODEL_MAGIC: [u8; 4] = *b"LQEM";
pub const MODEL_VERSION: u32 = 1;

/// Hard cap on any serialized tensor, to reject absurd headers before
/// allocating.
const MAX_ELEMENTS: u64 = 1 << 28;

/// A trained network bundled with the standardizer and the preprocessing
/// settings its training data were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub params: LstmParams,
    pub standardizer: Standardizer,
    /// Sliding-window length the model was trained on.
    pub window: usize,
    /// EMA span coefficient used at preprocessing time.
    pub tau: f64,
}

/// Serialize a model bundle to bytes.
pub fn save_model(model: &LstmModel) -> Result<Vec<u8>> {
    let dims = model.params.dims;
    if model.standardizer.channels() != dims.input_channels() {
        return Err(LqeError::Validation(format!(
            "standardizer has {} channels but the model expects {}",
            model.standardizer.channels(),
            dims.input_channels()
        )));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for dim in [dims.n_features, dims.hidden, dims.layers, model.window] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.tau.to_le_bytes());
    for &v in model.standardizer.mean.iter().chain(&model.standardizer.std_dev) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for tensor in model.params.tensors() {
        for &v in tensor {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(LqeError::ModelFormat(format!(
                "truncated stream: needed {n} bytes at offset {}",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn read_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn read_f64_vec(&mut self, len: usize) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            v.push(self.read_f64()?);
        }
        Ok(v)
    }
}

/// Deserialize a model bundle, rejecting bad magic, unknown versions,
/// truncated streams, and trailing bytes.
pub fn load_model(bytes: &[u8]) -> Result<LstmModel> {
    let mut cursor = Cursor { bytes, pos: 0 };

    let magic = cursor.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(LqeError::ModelFormat(format!(
            "bad magic {magic:?}, expected {MODEL_MAGIC:?}"
        )));
    }
    let version = cursor.read_u32()?;
    if version != MODEL_VERSION {
        return Err(LqeError::ModelFormat(format!(
            "unsupported format version {version}, expected {MODEL_VERSION}"
        )));
    }

    let n_features = cursor.read_u32()? as usize;
    let hidden = cursor.read_u32()? as usize;
    let layers = cursor.read_u32()? as usize;
    let window = cursor.read_u32()? as usize;
    let tau = cursor.read_f64()?;
    let dims = ModelDims::new(n_features, hidden, layers)
        .map_err(|e| LqeError::ModelFormat(format!("invalid dimensions: {e}")))?;
    if window == 0 || !(tau.is_finite() && tau >= 1.0) {
        return Err(LqeError::ModelFormat(format!(
            "invalid preprocessing settings: window={window}, tau={tau}"
        )));
    }
    // Bound the total parameter allocation before trusting the header.
    let widest = (hidden as u64).max(2 * n_features as u64);
    let elements = (4 * hidden as u64)
        .saturating_mul(widest + hidden as u64 + 1)
        .saturating_mul(layers as u64);
    if elements > MAX_ELEMENTS {
        return Err(LqeError::ModelFormat(format!(
            "dimensions imply {elements} parameters, beyond the format limit"
        )));
    }

    let channels = dims.input_channels();
    let mean = cursor.read_f64_vec(channels)?;
    let std_dev = cursor.read_f64_vec(channels)?;

    let mut params = LstmParams::zeros(dims);
    for tensor in params.tensors_mut() {
        let len = tensor.len();
        *tensor = cursor.read_f64_vec(len)?;
    }

    if cursor.pos != bytes.len() {
        return Err(LqeError::ModelFormat(format!(
            "{} trailing bytes after the parameter block",
            bytes.len() - cursor.pos
        )));
    }

    Ok(LstmModel {
        params,
        standardizer: Standardizer { mean, std_dev },
        window,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> LstmModel {
        let dims = ModelDims::new(2, 3, 2).unwrap();
        let params = LstmParams::init(dims, 17);
        LstmModel {
            standardizer: Standardizer {
                mean: vec![-87.0, 8.5, 0.1, -0.1],
                std_dev: vec![14.0, 9.0, 2.5, 2.0],
            },
            params,
            window: 30,
            tau: 120.0,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = sample_model();
        let bytes = save_model(&model).unwrap();
        let back = load_model(&bytes).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut bytes = save_model(&sample_model()).unwrap();
        bytes[0] = b'X';
        let err = load_model(&bytes).unwrap_err();
        assert!(matches!(err, LqeError::ModelFormat(ref m) if m.contains("magic")));
    }

    #[test]
    fn bumped_version_is_rejected() {
        let mut bytes = save_model(&sample_model()).unwrap();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        let err = load_model(&bytes).unwrap_err();
        assert!(matches!(err, LqeError::ModelFormat(ref m) if m.contains("version")));
    }

    #[test]
    fn truncated_stream_is_rejected() {
        let bytes = save_model(&sample_model()).unwrap();
        let err = load_model(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, LqeError::ModelFormat(ref m) if m.contains("truncated")));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = save_model(&sample_model()).unwrap();
        bytes.push(0);
        let err = load_model(&bytes).unwrap_err();
        assert!(matches!(err, LqeError::ModelFormat(ref m) if m.contains("trailing")));
    }

    #[test]
    fn absurd_dimensions_are_rejected_before_allocation() {
        let mut bytes = save_model(&sample_model()).unwrap();
        // hidden lives at offset 12 in the header.
        bytes[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        let err = load_model(&bytes).unwrap_err();
        assert!(matches!(err, LqeError::ModelFormat(_)), "{err}");
    }

    #[test]
    fn standardizer_channel_mismatch_fails_save() {
        let mut model = sample_model();
        model.standardizer.mean.pop();
        model.standardizer.std_dev.pop();
        assert!(save_model(&model).is_err());
    }
}
