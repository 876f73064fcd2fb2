//! Kernel calls and their JSON-lines trace format.

use serde::{Deserialize, Serialize};

use crate::kernels::KernelTag;
use crate::quant::{DType, Q3_K_BYTES, Q8_0_BYTES, Q8_K_BYTES, QK8_0, QK_K};
use crate::{Error, Result};

/// One matrix-vector product offloaded to a lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCall {
    pub kernel: KernelTag,
    pub m: usize,
    pub k: usize,
    /// The lane must load a new configuration before this call.
    #[serde(default)]
    pub reconf: bool,
}

impl KernelCall {
    pub fn new(kernel: KernelTag, m: usize, k: usize, reconf: bool) -> Result<Self> {
        let c = Self { kernel, m, k, reconf };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.k.is_multiple_of(self.kernel.block_len()) {
            return Err(Error::Shape(format!(
                "{} call with k={} is not a multiple of {}",
                self.kernel,
                self.k,
                self.kernel.block_len()
            )));
        }
        Ok(())
    }

    /// Bytes moved into the LMMs: the weight rows at their stored GGML size
    /// plus one quantized activation vector.
    pub fn bytes_in(&self) -> u64 {
        self.m as u64 * self.weight_row_bytes() + self.activation_bytes()
    }

    /// One binary32 result per row.
    pub fn bytes_out(&self) -> u64 {
        4 * self.m as u64
    }

    pub fn weight_row_bytes(&self) -> u64 {
        let (len, bytes) = match self.kernel {
            KernelTag::Q8_0 => (QK8_0, Q8_0_BYTES),
            KernelTag::Q3K => (QK_K, Q3_K_BYTES),
        };
        (self.k / len * bytes) as u64
    }

    pub fn activation_bytes(&self) -> u64 {
        let (len, bytes) = match self.kernel.activation_dtype() {
            DType::Q8_0 => (QK8_0, Q8_0_BYTES),
            _ => (QK_K, Q8_K_BYTES),
        };
        (self.k / len * bytes) as u64
    }
}

/// Parses a JSON-lines trace. Blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<KernelCall>> {
    let mut calls = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let call: KernelCall = serde_json::from_str(line).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        call.validate().map_err(|e| Error::parse(n + 1, e.to_string()))?;
        calls.push(call);
    }
    Ok(calls)
}

pub fn write_trace(calls: &[KernelCall]) -> String {
    calls
        .iter()
        .map(|c| serde_json::to_string(c).expect("plain struct serializes") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_counts() {
        let c = KernelCall::new(KernelTag::Q8_0, 2, 64, false).unwrap();
        assert_eq!(c.bytes_in(), 2 * 68 + 68);
        assert_eq!(c.bytes_out(), 8);
        let c = KernelCall::new(KernelTag::Q3K, 1, 512, false).unwrap();
        assert_eq!(c.bytes_in(), 220 + 520);
        assert!(KernelCall::new(KernelTag::Q3K, 1, 300, false).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let text = "{\"kernel\":\"q8_0\",\"m\":4,\"k\":64,\"reconf\":true}\n\n{\"kernel\":\"q3_k\",\"m\":1,\"k\":256,\"reconf\":false}\n";
        let calls = parse_trace(text).unwrap();
        assert_eq!(calls.len(), 2);
        assert_eq!(parse_trace(&write_trace(&calls)).unwrap(), calls);
    }

    #[test]
    fn trace_errors_name_the_line() {
        let err = parse_trace("{\"kernel\":\"q8_0\",\"m\":1,\"k\":32}\n{\"kernel\":\"q4\",\"m\":1,\"k\":32}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_trace("{\"kernel\":\"q3_k\",\"m\":1,\"k\":32}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
