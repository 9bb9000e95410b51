use crate::descriptor::{DescriptorConfig, Extractor, PlaceDescriptor};
use crate::error::Result;
use crate::geo::{render_view, OverheadMap, Pose, RenderSpec, RenderedView, FILL_VALUE};
use crate::sphere::SphericalImage;

/// Default band limit for localization renders (64x64 grids).
pub const LOCALIZE_BAND_LIMIT: usize = 32;

/// Renders views at particle positions and turns them into descriptors.
///
/// Views are offset by the fill level before description so that directions
/// which see no ground (sky, cropped band, off-raster) carry no energy;
/// otherwise the constant fill dominates every descriptor and all places look
/// alike.
#[derive(Debug, Clone)]
pub struct ViewEncoder {
    spec: RenderSpec,
    extractor: Extractor,
}

impl ViewEncoder {
    pub fn new(spec: RenderSpec, descriptor: &DescriptorConfig) -> Result<Self> {
        let extractor = Extractor::new(descriptor, spec.band_limit(), 3)?;
        Ok(Self { spec, extractor })
    }

    /// Spherical renders at `band_limit` with the default 10-degree crop.
    pub fn spherical(band_limit: usize, descriptor: &DescriptorConfig) -> Result<Self> {
        Self::new(
            RenderSpec::spherical(band_limit).with_sky_crop(10.0),
            descriptor,
        )
    }

    pub fn render_spec(&self) -> &RenderSpec {
        &self.spec
    }

    pub fn extractor(&self) -> &Extractor {
        &self.extractor
    }

    pub fn render(&self, map: &OverheadMap, pose: &Pose) -> Result<RenderedView> {
        render_view(map, pose, &self.spec)
    }

    pub fn encode(&self, view: &SphericalImage) -> Result<PlaceDescriptor> {
        let centered = SphericalImage::new(
            view.band_limit(),
            view.channels(),
            view.data().iter().map(|v| v - FILL_VALUE).collect(),
        )?;
        self.extractor.extract(&centered)
    }

    /// Descriptor of the yaw-0 view at `(x, y)` and `altitude`.
    pub fn encode_at(
        &self,
        map: &OverheadMap,
        x: f64,
        y: f64,
        altitude: f64,
    ) -> Result<PlaceDescriptor> {
        self.encode(&self.render(map, &Pose::new(x, y, altitude, 0.0))?.image)
    }
}
