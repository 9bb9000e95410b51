use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::OverheadMap;
use crate::error::{Error, Result};
use crate::sphere::SphericalImage;

/// Georeferencing metadata stored next to the raster as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub gsd_m_per_px: f64,
    pub origin_x_m: f64,
    pub origin_y_m: f64,
    #[serde(default)]
    pub crs_note: String,
}

impl Sidecar {
    /// Parses sidecar JSON, naming the offending field on failure. Unknown
    /// fields are ignored.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::format("sidecar", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::format("sidecar", "expected a JSON object"))?;
        let number = |field: &str| -> Result<f64> {
            obj.get(field)
                .ok_or_else(|| Error::format(field, "missing"))?
                .as_f64()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(field, "expected a finite number"))
        };
        let gsd = number("gsd_m_per_px")?;
        if gsd <= 0.0 {
            return Err(Error::format(
                "gsd_m_per_px",
                format!("must be > 0, got {gsd}"),
            ));
        }
        let crs_note = match obj.get("crs_note") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(Error::format("crs_note", "expected a string")),
        };
        Ok(Self {
            gsd_m_per_px: gsd,
            origin_x_m: number("origin_x_m")?,
            origin_y_m: number("origin_y_m")?,
            crs_note,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }
}

/// Parses a binary PPM (`P6`, maxval 255). Returns `(width, height, rgb)`.
pub fn read_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::format("ppm", "truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos)? != "P6" {
        return Err(Error::format("ppm", "expected magic P6"));
    }
    let dim = |name: &str, pos: &mut usize| -> Result<usize> {
        token(pos)?
            .parse::<usize>()
            .map_err(|_| Error::format("ppm", format!("bad {name}")))
    };
    let width = dim("width", &mut pos)?;
    let height = dim("height", &mut pos)?;
    let maxval = dim("maxval", &mut pos)?;
    if maxval != 255 {
        return Err(Error::format(
            "ppm",
            format!("maxval must be 255, got {maxval}"),
        ));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let n = width * height * 3;
    if width == 0 || height == 0 || bytes.len() < pos + n {
        return Err(Error::format("ppm", "truncated pixel data"));
    }
    Ok((width, height, bytes[pos..pos + n].to_vec()))
}

pub fn write_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Quantizes a three-channel view with values in `[0, 1]` to a P6 image.
pub fn view_to_ppm(image: &SphericalImage) -> Result<Vec<u8>> {
    if image.channels() != 3 {
        return Err(Error::Shape(format!(
            "PPM export needs 3 channels, got {}",
            image.channels()
        )));
    }
    let rgb: Vec<u8> = image
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    Ok(write_ppm(image.width(), image.height(), &rgb))
}

/// Reads a square `2B x 2B` P6 image back into a view with values in `[0, 1]`.
pub fn view_from_ppm(bytes: &[u8]) -> Result<SphericalImage> {
    let (w, h, rgb) = read_ppm(bytes)?;
    if w != h || w % 2 != 0 {
        return Err(Error::format(
            "ppm",
            format!("view must be square with even side, got {w}x{h}"),
        ));
    }
    SphericalImage::new(w / 2, 3, rgb.iter().map(|&v| v as f64 / 255.0).collect())
}

/// Loads a map from a P6 raster and its JSON sidecar.
pub fn load_map(
    raster_path: impl AsRef<Path>,
    sidecar_path: impl AsRef<Path>,
) -> Result<OverheadMap> {
    let sidecar = Sidecar::from_json(&fs::read_to_string(sidecar_path)?)?;
    let (w, h, rgb) = read_ppm(&fs::read(raster_path)?)?;
    OverheadMap::new(
        w,
        h,
        sidecar.gsd_m_per_px,
        (sidecar.origin_x_m, sidecar.origin_y_m),
        rgb,
    )
}

/// Writes the raster and sidecar for `map`.
pub fn save_map(
    map: &OverheadMap,
    raster_path: impl AsRef<Path>,
    sidecar_path: impl AsRef<Path>,
    crs_note: &str,
) -> Result<()> {
    fs::write(
        raster_path,
        write_ppm(map.width(), map.height(), map.raster()),
    )?;
    let sidecar = Sidecar {
        gsd_m_per_px: map.gsd(),
        origin_x_m: map.origin().0,
        origin_y_m: map.origin().1,
        crs_note: crs_note.to_string(),
    };
    fs::write(sidecar_path, sidecar.to_json())?;
    Ok(())
}
