//! wasm-bindgen surface for the static page in `www/`.

pub mod ops;

use wasm_bindgen::prelude::*;

use ops::Scene;

fn js(e: sphereloc::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
pub struct Heatmap {
    pub cols: usize,
    pub rows: usize,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Heatmap {
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

#[wasm_bindgen]
impl Demo {
    /// A 400 x 300 m synthetic world.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, landmarks: usize) -> Result<Demo, JsValue> {
        Ok(Demo {
            scene: Scene::new(seed, landmarks).map_err(js)?,
        })
    }

    pub fn width(&self) -> usize {
        self.scene.map.width()
    }

    pub fn height(&self) -> usize {
        self.scene.map.height()
    }

    pub fn view_size(&self) -> usize {
        2 * ops::DEMO_BAND_LIMIT
    }

    pub fn map_rgba(&self) -> Vec<u8> {
        self.scene.map_rgba()
    }

    pub fn render_altitudes(
        &self,
        x: f64,
        y: f64,
        yaw: f64,
        altitudes: Vec<f64>,
    ) -> Result<Vec<u8>, JsValue> {
        self.scene
            .render_altitudes(x, y, yaw, &altitudes)
            .map_err(js)
    }

    /// `[yaw_deg, confidence]`.
    pub fn orient(&self, x: f64, y: f64, altitude: f64, yaw_deg: f64) -> Result<Vec<f64>, JsValue> {
        let (yaw, conf) = self.scene.orient(x, y, altitude, yaw_deg).map_err(js)?;
        Ok(vec![yaw, conf])
    }

    pub fn heatmap(
        &self,
        x: f64,
        y: f64,
        yaw: f64,
        altitude: f64,
        step: f64,
    ) -> Result<Heatmap, JsValue> {
        let (cols, rows, values) = self.scene.heatmap(x, y, yaw, altitude, step).map_err(js)?;
        Ok(Heatmap { cols, rows, values })
    }
}
