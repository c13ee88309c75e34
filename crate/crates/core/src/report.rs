//! JSON/CSV emission helpers. Floats in reports carry exactly six decimals.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;
use crate::search_space::Architecture;

fn number(v: f64) -> Option<serde_json::Number> {
    if !v.is_finite() {
        return None;
    }
    serde_json::Number::from_str(&format!("{v:.6}")).ok()
}

/// `#[serde(with = "fixed6")]` for `f64` fields.
pub mod fixed6 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        number(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Option::<f64>::deserialize(d).map(|v| v.unwrap_or(f64::NAN))
    }
}

/// `#[serde(with = "fixed6_opt")]` for `Option<f64>` fields.
pub mod fixed6_opt {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.and_then(number).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

/// `#[serde(with = "fixed6_vec")]` for `Vec<Option<f64>>` fields.
pub mod fixed6_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Option<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|x| x.and_then(number)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Option<f64>>, D::Error> {
        Vec::<Option<f64>>::deserialize(d)
    }
}

/// Architectures as their comma-joined text form.
pub mod arch_text {
    use super::*;

    pub fn serialize<S: Serializer>(a: &Architecture, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&a.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Architecture, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `assignment,architecture,predicted` rows, one per node, in node order.
pub fn write_predictions_csv<W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = (Architecture, f64)>,
) -> Result<()> {
    writeln!(w, "node,architecture,predicted")?;
    for (node, (arch, p)) in rows.into_iter().enumerate() {
        writeln!(w, "{node},\"{arch}\",{p:.6}")?;
    }
    Ok(())
}
