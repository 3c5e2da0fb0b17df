//! Classifier architecture description and static shape checking.
//!
//! A [`NetSpec`] is an ordered list of layers plus the input image size and
//! class count. [`NetSpec::validate`] walks the layer list once and returns
//! the activation shape after every layer, so parameter initialization,
//! forward passes, and serialization all agree on tensor sizes without
//! re-deriving them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// 3x3 convolution with unit zero-padding.
    Conv3x3 { channels: usize, stride: usize },
    /// Two 3x3 convolutions with an inner rectifier and a skip connection.
    /// The skip is the identity when the shape is preserved and a strided
    /// 1x1 projection otherwise. No rectifier is applied after the sum, so
    /// zeroing the convolution branch makes an identity-skip block exact.
    ResidualBlock { channels: usize, stride: usize },
    /// Elementwise max(x, 0).
    Relu,
    /// Collapse each channel map to its spatial mean.
    GlobalAvgPool,
    /// Fully connected layer.
    Dense { units: usize },
    /// Final fully connected layer producing one raw score per class.
    /// Scores feed softmax cross-entropy during training and argmax at
    /// evaluation; the layer itself applies neither.
    Logits,
}

/// Activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
    Vector {
        len: usize,
    },
}

impl Shape {
    /// Total scalar count, used when flattening captured activations.
    pub fn n_units(&self) -> usize {
        match *self {
            Shape::Image {
                channels,
                height,
                width,
            } => channels * height * width,
            Shape::Vector { len } => len,
        }
    }
}

/// Named layer whose output is recorded during capture runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturePoint {
    pub name: String,
    /// Index into `NetSpec::layers`; the capture is that layer's output.
    pub layer: usize,
}

/// Architecture of the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layers: Vec<LayerSpec>,
    /// Input image size as (height, width); inputs are single-channel.
    pub input_shape: (usize, usize),
    pub n_classes: usize,
    /// Must include the final average pool, whose output is the flat
    /// per-channel summary used for activation analyses.
    pub capture_points: Vec<CapturePoint>,
}

/// Output length of a padded convolution along one axis.
pub(crate) fn conv_out_len(len: usize, stride: usize) -> usize {
    (len - 1) / stride + 1
}

impl NetSpec {
    /// Checks the layer chain and returns the output shape of every layer.
    ///
    /// Rules enforced: strides and sizes are positive, image layers only see
    /// image inputs and dense layers only see vectors, the last layer is the
    /// single score layer, and the capture points name distinct existing
    /// layers including the final average pool.
    pub fn validate(&self) -> Result<Vec<Shape>> {
        let (h, w) = self.input_shape;
        if h == 0 || w == 0 {
            return Err(Error::InvalidConfig(format!(
                "input shape {h}x{w} must be positive"
            )));
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("layer list is empty".into()));
        }

        let mut shape = Shape::Image {
            channels: 1,
            height: h,
            width: w,
        };
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut last_pool = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let is_last = i + 1 == self.layers.len();
            if matches!(layer, LayerSpec::Logits) != is_last {
                return Err(Error::InvalidConfig(format!(
                    "layer {i}: the score layer must appear exactly once, last"
                )));
            }
            shape = match *layer {
                LayerSpec::Conv3x3 { channels, stride }
                | LayerSpec::ResidualBlock { channels, stride } => {
                    if channels == 0 || stride == 0 {
                        return Err(Error::InvalidConfig(format!(
                            "layer {i}: channels and stride must be positive"
                        )));
                    }
                    match shape {
                        Shape::Image { height, width, .. } => Shape::Image {
                            channels,
                            height: conv_out_len(height, stride),
                            width: conv_out_len(width, stride),
                        },
                        Shape::Vector { .. } => {
                            return Err(Error::InvalidConfig(format!(
                                "layer {i}: convolution needs an image input"
                            )))
                        }
                    }
                }
                LayerSpec::Relu => shape,
                LayerSpec::GlobalAvgPool => match shape {
                    Shape::Image { channels, .. } => {
                        last_pool = Some(i);
                        Shape::Vector { len: channels }
                    }
                    Shape::Vector { .. } => {
                        return Err(Error::InvalidConfig(format!(
                            "layer {i}: average pool needs an image input"
                        )))
                    }
                },
                LayerSpec::Dense { units } => {
                    if units == 0 {
                        return Err(Error::InvalidConfig(format!(
                            "layer {i}: dense layer needs at least one unit"
                        )));
                    }
                    match shape {
                        Shape::Vector { .. } => Shape::Vector { len: units },
                        Shape::Image { .. } => {
                            return Err(Error::InvalidConfig(format!(
                                "layer {i}: dense layer needs a vector input; pool first"
                            )))
                        }
                    }
                }
                LayerSpec::Logits => match shape {
                    Shape::Vector { .. } => Shape::Vector {
                        len: self.n_classes,
                    },
                    Shape::Image { .. } => {
                        return Err(Error::InvalidConfig(format!(
                            "layer {i}: score layer needs a vector input; pool first"
                        )))
                    }
                },
            };
            shapes.push(shape);
        }

        let last_pool = last_pool.ok_or_else(|| {
            Error::InvalidConfig("network must contain an average pool layer".into())
        })?;
        if !self.capture_points.iter().any(|c| c.layer == last_pool) {
            return Err(Error::InvalidConfig(format!(
                "capture points must include the final average pool (layer {last_pool})"
            )));
        }
        for (k, point) in self.capture_points.iter().enumerate() {
            if point.name.is_empty() {
                return Err(Error::InvalidConfig(format!("capture point {k} is unnamed")));
            }
            if point.layer >= self.layers.len() {
                return Err(Error::InvalidConfig(format!(
                    "capture point '{}' names layer {} of {}",
                    point.name,
                    point.layer,
                    self.layers.len()
                )));
            }
            if self.capture_points[..k].iter().any(|p| p.name == point.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate capture point name '{}'",
                    point.name
                )));
            }
        }
        Ok(shapes)
    }

    /// Shape of a named capture point's output.
    pub fn capture_shape(&self, name: &str) -> Result<Shape> {
        let shapes = self.validate()?;
        let point = self
            .capture_points
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::InvalidConfig(format!("no capture point named '{name}'")))?;
        Ok(shapes[point.layer])
    }

    /// Small residual classifier sized for 32x32 stimuli: one stem
    /// convolution, two downsampling residual blocks, an average pool
    /// captured as "pool", and the score layer.
    pub fn desk(n_classes: usize) -> NetSpec {
        NetSpec {
            layers: vec![
                LayerSpec::Conv3x3 {
                    channels: 8,
                    stride: 1,
                },
                LayerSpec::Relu,
                LayerSpec::ResidualBlock {
                    channels: 16,
                    stride: 2,
                },
                LayerSpec::Relu,
                LayerSpec::ResidualBlock {
                    channels: 24,
                    stride: 2,
                },
                LayerSpec::Relu,
                LayerSpec::GlobalAvgPool,
                LayerSpec::Logits,
            ],
            input_shape: (32, 32),
            n_classes,
            capture_points: vec![CapturePoint {
                name: "pool".into(),
                layer: 6,
            }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_shape_chain() {
        let spec = NetSpec::desk(20);
        let shapes = spec.validate().unwrap();
        assert_eq!(
            shapes[0],
            Shape::Image {
                channels: 8,
                height: 32,
                width: 32
            }
        );
        assert_eq!(
            shapes[2],
            Shape::Image {
                channels: 16,
                height: 16,
                width: 16
            }
        );
        assert_eq!(
            shapes[4],
            Shape::Image {
                channels: 24,
                height: 8,
                width: 8
            }
        );
        assert_eq!(shapes[6], Shape::Vector { len: 24 });
        assert_eq!(shapes[7], Shape::Vector { len: 20 });
        assert_eq!(spec.capture_shape("pool").unwrap(), Shape::Vector { len: 24 });
    }

    #[test]
    fn odd_sizes_round_up_under_stride() {
        assert_eq!(conv_out_len(7, 2), 4);
        assert_eq!(conv_out_len(8, 2), 4);
        assert_eq!(conv_out_len(1, 2), 1);
    }

    #[test]
    fn score_layer_must_be_single_and_last() {
        let mut spec = NetSpec::desk(5);
        spec.layers.push(LayerSpec::Relu);
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));

        let mut spec = NetSpec::desk(5);
        spec.layers.insert(0, LayerSpec::Logits);
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));

        let mut spec = NetSpec::desk(5);
        spec.layers.pop();
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn dense_before_pool_rejected() {
        let spec = NetSpec {
            layers: vec![
                LayerSpec::Dense { units: 4 },
                LayerSpec::GlobalAvgPool,
                LayerSpec::Logits,
            ],
            input_shape: (8, 8),
            n_classes: 3,
            capture_points: vec![CapturePoint {
                name: "pool".into(),
                layer: 1,
            }],
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn capture_must_cover_final_pool() {
        let mut spec = NetSpec::desk(5);
        spec.capture_points[0].layer = 2;
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
        spec.capture_points = vec![];
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn duplicate_capture_names_rejected() {
        let mut spec = NetSpec::desk(5);
        spec.capture_points.push(CapturePoint {
            name: "pool".into(),
            layer: 6,
        });
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_stride_rejected() {
        let mut spec = NetSpec::desk(5);
        spec.layers[0] = LayerSpec::Conv3x3 {
            channels: 8,
            stride: 0,
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidConfig(_))));
    }
}
