//! Model persistence: a single self-describing JSON document holding the
//! layer dims, row-major weight/bias arrays as decimal 64-bit floats, the
//! normalizer parameters, and the creation seed. Floats are written in
//! shortest round-trip form so save/load is value-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::NormalizerPair;
use crate::linalg::Matrix;
use crate::neuralnet::Mlp;
use crate::{Error, Result};

pub const FORMAT_TAG: &str = "selfik-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    seed: u64,
    layer_dims: Vec<usize>,
    /// Row-major, one flat array per weight layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    normalizers: NormalizerPair,
}

pub fn save(mlp: &Mlp, normalizers: &NormalizerPair, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        format: FORMAT_TAG.to_string(),
        seed: mlp.seed(),
        layer_dims: mlp.layer_dims().to_vec(),
        weights: (0..mlp.n_layers())
            .map(|l| mlp.weights(l).data().to_vec())
            .collect(),
        biases: (0..mlp.n_layers()).map(|l| mlp.biases(l).to_vec()).collect(),
        normalizers: normalizers.clone(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Mlp, NormalizerPair)> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    if file.format != FORMAT_TAG {
        return Err(Error::CorruptCheckpoint(format!(
            "unknown format tag {:?}",
            file.format
        )));
    }
    if file.layer_dims.len() < 2 {
        return Err(Error::CorruptCheckpoint("fewer than 2 layer dims".into()));
    }
    let mut weights = Vec::with_capacity(file.weights.len());
    for (l, flat) in file.weights.into_iter().enumerate() {
        let (rows, cols) = (file.layer_dims[l], file.layer_dims[l + 1]);
        if flat.len() != rows * cols {
            return Err(Error::CorruptCheckpoint(format!(
                "layer {l}: {} values for a {rows}x{cols} weight matrix",
                flat.len()
            )));
        }
        weights.push(Matrix::from_vec(rows, cols, flat));
    }
    let mlp = Mlp::from_parts(file.layer_dims, weights, file.biases, file.seed)
        .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    if mlp.output_dim() != file.normalizers.n_joints() {
        return Err(Error::CorruptCheckpoint(
            "output width does not match joint normalizers".into(),
        ));
    }
    Ok((mlp, file.normalizers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::fit_normalizers;
    use crate::kinematics::KinematicChain;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn save_load_round_trip_is_value_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let chain = KinematicChain::default6(FRAC_PI_2);
        let mlp = Mlp::init(&[3, 16, 6], 77).unwrap();
        let norms = fit_normalizers(&chain);
        save(&mlp, &norms, &path).unwrap();
        let (loaded, loaded_norms) = load(&path).unwrap();
        assert_eq!(loaded, mlp);
        assert_eq!(loaded_norms, norms);

        // saving again is byte-identical
        let bytes = std::fs::read(&path).unwrap();
        save(&loaded, &loaded_norms, &path).unwrap();
        assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn rejects_wrong_tag_and_bad_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, r#"{"format":"other","seed":0,"layer_dims":[3,6],"weights":[[0.0]],"biases":[[0.0]],"normalizers":{"pos_lo":[0,0,0],"pos_hi":[1,1,1],"joint_lo":[0],"joint_hi":[1]}}"#).unwrap();
        assert!(matches!(load(&path), Err(Error::CorruptCheckpoint(_))));

        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(load(&path), Err(Error::CorruptCheckpoint(_))));
    }
}
