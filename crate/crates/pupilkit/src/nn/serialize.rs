//! The PNETv1 model byte format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        6 bytes  ASCII "PNETv1"
//! name_len     u8
//! name         ASCII configuration name (e.g. "CK8P8")
//! input_size   u32
//! conv1        filter u32, in_channels u32, out_channels u32
//! pool         window u32, stride u32
//! conv2        filter u32, in_channels u32, out_channels u32
//! fc_in        u32
//! weights      f32 little-endian, in order:
//!              conv1 weights [oc][ic][ky][kx], conv1 biases [oc],
//!              conv2 weights, conv2 biases, fc weights [k], fc bias
//! ```
//!
//! The dimension header must agree with the named configuration; a
//! serialize/deserialize round trip is bit-exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::model::{build_config, ConfigName, NetworkModel};

const MAGIC: &[u8; 6] = b"PNETv1";

/// Encodes a model into the PNETv1 byte stream.
pub fn serialize_model(model: &NetworkModel) -> Vec<u8> {
    let name = model.config.as_str().as_bytes();
    let mut out = Vec::with_capacity(64 + 4 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.push(name.len() as u8);
    out.extend_from_slice(name);
    for dim in [
        model.input_size,
        model.conv1.filter,
        model.conv1.in_channels,
        model.conv1.out_channels,
        model.pool.window,
        model.pool.stride,
        model.conv2.filter,
        model.conv2.in_channels,
        model.conv2.out_channels,
        model.fc.in_count(),
    ] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let mut floats = |vs: &[f32]| {
        for v in vs {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    floats(&model.conv1.weights);
    floats(&model.conv1.biases);
    floats(&model.conv2.weights);
    floats(&model.conv2.biases);
    floats(&model.fc.weights);
    floats(&[model.fc.bias]);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedStream {
                expected: self.pos + n - self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32_into(&mut self, dst: &mut [f32]) -> Result<()> {
        let raw = self.take(4 * dst.len())?;
        for (v, chunk) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }
}

/// Decodes a PNETv1 byte stream back into a model.
pub fn deserialize_model(bytes: &[u8]) -> Result<NetworkModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).map(|m| m != MAGIC).unwrap_or(true) {
        return Err(Error::BadMagic);
    }
    let name_len = r.take(1)?[0] as usize;
    let name = std::str::from_utf8(r.take(name_len)?)
        .map_err(|_| Error::UnknownConfig("<non-ascii>".into()))?;
    let config: ConfigName = name.parse()?;
    let mut model = build_config(config);

    let declared: Vec<u32> = (0..10).map(|_| r.u32()).collect::<Result<_>>()?;
    let expected = [
        model.input_size,
        model.conv1.filter,
        model.conv1.in_channels,
        model.conv1.out_channels,
        model.pool.window,
        model.pool.stride,
        model.conv2.filter,
        model.conv2.in_channels,
        model.conv2.out_channels,
        model.fc.in_count(),
    ];
    for (got, want) in declared.iter().zip(expected) {
        if *got as usize != want {
            return Err(Error::DimensionMismatch(format!(
                "header declares {got} where configuration {config} requires {want}"
            )));
        }
    }

    r.f32_into(&mut model.conv1.weights)?;
    r.f32_into(&mut model.conv1.biases)?;
    r.f32_into(&mut model.conv2.weights)?;
    r.f32_into(&mut model.conv2.biases)?;
    r.f32_into(&mut model.fc.weights)?;
    let mut bias = [0.0f32];
    r.f32_into(&mut bias)?;
    model.fc.bias = bias[0];

    if r.pos != bytes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after model data",
            bytes.len() - r.pos
        )));
    }
    Ok(model)
}

impl NetworkModel {
    /// Writes the model as a PNETv1 file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serialize_model(self)).map_err(|e| Error::io(path, e))
    }

    /// Reads a PNETv1 file.
    pub fn load(path: impl AsRef<Path>) -> Result<NetworkModel> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        deserialize_model(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::init_model;

    #[test]
    fn round_trip_is_bit_exact() {
        for config in ConfigName::ALL {
            let model = init_model(build_config(config), 17);
            let bytes = serialize_model(&model);
            let back = deserialize_model(&bytes).unwrap();
            assert_eq!(serialize_model(&back), bytes, "{config}");
            assert_eq!(back, model);
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = serialize_model(&build_config(ConfigName::Ck8P8));
        bytes[0] = b'X';
        assert!(matches!(deserialize_model(&bytes), Err(Error::BadMagic)));
        assert!(matches!(deserialize_model(b"PN"), Err(Error::BadMagic)));
    }

    #[test]
    fn truncation_detected() {
        let bytes = serialize_model(&init_model(build_config(ConfigName::Ck8P8), 1));
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(
            deserialize_model(cut),
            Err(Error::TruncatedStream { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_detected() {
        let mut bytes = serialize_model(&build_config(ConfigName::Ck8P8));
        // Kernel-count field of conv1 sits after magic+name+input_size+filter+in.
        let off = 6 + 1 + 5 + 4 + 4 + 4;
        bytes[off..off + 4].copy_from_slice(&16u32.to_le_bytes());
        assert!(matches!(
            deserialize_model(&bytes),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = serialize_model(&build_config(ConfigName::Sk8P8));
        bytes.push(0);
        assert!(deserialize_model(&bytes).is_err());
    }
}
