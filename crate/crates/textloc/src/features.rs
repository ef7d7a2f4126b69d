//! Loading the frozen feature network.

use safetensors::tensor::{Dtype, SafeTensors};
use textloc_core::nn::FeatureNet;

use crate::config::FeatureSection;
use crate::error::{AppError, AppResult};
use crate::io;

/// Reads `block*_conv*.{kernel,bias}` arrays (f32 or f64) from a
/// safetensors file.
pub fn load_weights(path: &std::path::Path) -> AppResult<FeatureNet<f32>> {
    let bytes = io::read_bytes(path)?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| AppError::io(path, e))?;
    FeatureNet::from_named(|name| {
        let t = st.tensor(name).ok()?;
        let values = match t.dtype() {
            Dtype::F32 => t.data().chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
            Dtype::F64 => t.data().chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32).collect(),
            _ => return None,
        };
        Some((t.shape().to_vec(), values))
    })
    .map_err(|e| AppError::data(format!("{}: {e}", path.display())))
}

/// The configured feature network: pretrained weights when given and
/// readable, otherwise (if allowed) a seeded random frozen stand-in.
pub fn feature_net(section: &FeatureSection) -> AppResult<FeatureNet<f32>> {
    match &section.weights {
        Some(path) => match load_weights(path) {
            Ok(net) => Ok(net),
            Err(e) if section.fallback => {
                log::warn!("{e}; using random frozen feature weights (seed {})", section.fallback_seed);
                Ok(FeatureNet::random(section.fallback_seed))
            }
            Err(e) => Err(e),
        },
        None if section.fallback => {
            log::info!(
                "no feature weights configured; using random frozen feature weights (seed {})",
                section.fallback_seed
            );
            Ok(FeatureNet::random(section.fallback_seed))
        }
        None => Err(AppError::usage("network.feature.weights is unset and fallback is disabled")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use textloc_core::nn::Network;

    #[test]
    fn loads_named_arrays_and_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vgg.safetensors");
        let reference = FeatureNet::<f32>::random(3);
        let arrays: Vec<(String, Vec<usize>, Vec<u8>)> = reference
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.shape.clone(), p.value.iter().flat_map(|v| v.to_le_bytes()).collect()))
            .collect();
        let views: Vec<_> = arrays
            .iter()
            .map(|(n, s, b)| (n.clone(), safetensors::tensor::TensorView::new(Dtype::F32, s.clone(), b).unwrap()))
            .collect();
        std::fs::write(&path, safetensors::serialize(views, &None::<HashMap<String, String>>).unwrap()).unwrap();

        let loaded = feature_net(&FeatureSection {
            weights: Some(path),
            fallback: false,
            fallback_seed: 0,
        })
        .unwrap();
        let same = loaded.params().iter().zip(reference.params()).all(|(a, b)| a.value == b.value);
        assert!(same);

        let missing = FeatureSection {
            weights: Some(dir.path().join("nope")),
            fallback: false,
            fallback_seed: 0,
        };
        assert!(matches!(feature_net(&missing), Err(AppError::Data(_))));
        let fallback = FeatureSection { fallback: true, ..missing };
        assert!(feature_net(&fallback).is_ok());
    }
}
