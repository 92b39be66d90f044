//! 2D slices dumped as a one-line text header followed by little-endian
//! `f64` values in row-major order.

/// Uniform axis description written into the header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub name: &'static str,
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub t: f64,
    pub rows: Axis,
    pub cols: Axis,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn header(&self) -> String {
        let ax = |a: &Axis| format!("{}={} [{:.17e},{:.17e}]", a.name, a.n, a.min, a.max);
        format!(
            "# {} t={:.17e} rows:{} cols:{} layout=row-major f64le\n",
            self.name,
            self.t,
            ax(&self.rows),
            ax(&self.cols)
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().into_bytes();
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Inverse of [`Snapshot::to_bytes`] for the values only.
    pub fn values_from_bytes(bytes: &[u8]) -> Option<Vec<f64>> {
        let start = bytes.iter().position(|&b| b == b'\n')? + 1;
        let body = &bytes[start..];
        if !body.len().is_multiple_of(8) {
            return None;
        }
        Some(
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_roundtrip() {
        let s = Snapshot {
            name: "f".into(),
            t: 1.5,
            rows: Axis {
                name: "v",
                n: 2,
                min: -1.0,
                max: 1.0,
            },
            cols: Axis {
                name: "x",
                n: 3,
                min: 0.0,
                max: 2.0,
            },
            values: vec![1.0, -2.0, 3.5, 0.0, 1e-300, f64::MAX],
        };
        let b = s.to_bytes();
        assert!(s.header().starts_with("# f t=1.5"));
        assert!(s.header().contains("rows:v=2"));
        assert_eq!(Snapshot::values_from_bytes(&b).unwrap(), s.values);
    }
}
