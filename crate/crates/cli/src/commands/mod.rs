pub mod bench_cube;
pub mod gen_dataset;
pub mod gradient_map;
pub mod metrics;
pub mod render;
pub mod train;

use anyhow::Result;
use radiprior::autodiff::ParamStore;
use radiprior::geometry::{Scene, SceneParams};
use radiprior::neuralfield::{RadianceField, RadianceFieldConfig};
use radiprior::rng::RandomStream;

/// Store layout shared by training, rendering, and checkpoint I/O:
/// scene parameter fields first, then the radiance cache, both seeded
/// deterministically.
pub struct Workbench {
    pub scene: Scene,
    pub store: ParamStore,
    pub params: SceneParams,
    pub field: RadianceField,
}

pub fn build_workbench(
    scene: Scene,
    field_config: RadianceFieldConfig,
    seed: u64,
) -> Workbench {
    let mut store = ParamStore::new();
    let mut rng = RandomStream::derive(seed, &[0x11717]);
    let params = SceneParams::build(&scene, &mut store, &mut rng);
    let field = RadianceField::new(field_config, scene.field_domain(), &mut store, &mut rng);
    Workbench {
        scene,
        store,
        params,
        field,
    }
}

/// Saves the cache parameters (hash table + MLP layers).
pub fn save_field_checkpoint(
    path: &std::path::Path,
    field: &RadianceField,
    store: &ParamStore,
    meta: serde_json::Value,
) -> Result<()> {
    let mut tensors: Vec<(String, &[f64])> = vec![(
        "hash_grid".to_string(),
        store.slice(field.grid.params),
    )];
    for (i, (w, b)) in field.mlp.layers.iter().enumerate() {
        tensors.push((format!("mlp_l{i}_w"), store.slice(*w)));
        tensors.push((format!("mlp_l{i}_b"), store.slice(*b)));
    }
    let named: Vec<(&str, &[f64])> = tensors.iter().map(|(n, s)| (n.as_str(), *s)).collect();
    radiprior::neuralfield::save_checkpoint(path, &meta, &named)?;
    Ok(())
}

/// Restores cache parameters saved by [`save_field_checkpoint`].
pub fn load_field_checkpoint(
    path: &std::path::Path,
    field: &RadianceField,
    store: &mut ParamStore,
) -> Result<()> {
    let (_meta, tensors) = radiprior::neuralfield::load_checkpoint(path)?;
    let mut expect: Vec<(String, radiprior::autodiff::ParamRange)> =
        vec![("hash_grid".to_string(), field.grid.params)];
    for (i, (w, b)) in field.mlp.layers.iter().enumerate() {
        expect.push((format!("mlp_l{i}_w"), *w));
        expect.push((format!("mlp_l{i}_b"), *b));
    }
    anyhow::ensure!(
        tensors.len() == expect.len(),
        "checkpoint has {} tensors, field needs {}",
        tensors.len(),
        expect.len()
    );
    for ((name, values), (want_name, range)) in tensors.iter().zip(&expect) {
        anyhow::ensure!(
            name == want_name && values.len() == range.len as usize,
            "checkpoint tensor '{name}' does not match field layout"
        );
        store.slice_mut(*range).copy_from_slice(values);
    }
    Ok(())
}

/// Saves the optimizable scene parameters (one tensor per range).
pub fn save_phi_checkpoint(
    path: &std::path::Path,
    params: &SceneParams,
    store: &ParamStore,
) -> Result<()> {
    let ranges = params.phi_ranges();
    let meta = serde_json::json!({
        "ranges": ranges.iter().map(|r| [r.start, r.len]).collect::<Vec<_>>(),
    });
    let names: Vec<String> = (0..ranges.len()).map(|i| format!("phi_{i}")).collect();
    let named: Vec<(&str, &[f64])> = names
        .iter()
        .zip(ranges)
        .map(|(n, r)| (n.as_str(), store.slice(*r)))
        .collect();
    radiprior::neuralfield::save_checkpoint(path, &meta, &named)?;
    Ok(())
}

pub fn load_phi_checkpoint(
    path: &std::path::Path,
    params: &SceneParams,
    store: &mut ParamStore,
) -> Result<()> {
    let (_meta, tensors) = radiprior::neuralfield::load_checkpoint(path)?;
    let ranges = params.phi_ranges();
    anyhow::ensure!(
        tensors.len() == ranges.len(),
        "phi checkpoint has {} tensors, scene needs {}",
        tensors.len(),
        ranges.len()
    );
    for ((_, values), range) in tensors.iter().zip(ranges) {
        anyhow::ensure!(
            values.len() == range.len as usize,
            "phi tensor length mismatch"
        );
        store.slice_mut(*range).copy_from_slice(values);
    }
    Ok(())
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad list entry '{t}': {e}"))
        })
        .collect()
}
