//! Neural radiance cache: hash-grid encoding feeding an MLP, plus the
//! smaller hash-grid MLPs used for parameter fields.

mod checkpoint;
mod hashgrid;
mod mlp;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use hashgrid::{HashGrid, HashGridConfig};
pub use mlp::{Mlp, MlpSpec};

use crate::autodiff::{ParamRange, ParamStore, RgbVar, Tape, Var};
use crate::math::{Rgb, Vec3};
use crate::rng::RandomStream;

/// Anything transport can query for outgoing radiance at a surface point.
pub trait Radiance: Sync {
    fn radiance(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Vec3,
        wo: Vec3,
        n: Vec3,
        albedo_hint: RgbVar,
        attach: bool,
    ) -> RgbVar;
}

/// Constant radiance everywhere; the analytic stand-in used by the
/// furnace-equilibrium and estimator-consistency tests.
#[derive(Clone, Copy, Debug)]
pub struct ConstField(pub Rgb);

impl Radiance for ConstField {
    fn radiance(
        &self,
        _tape: &mut Tape,
        _store: &ParamStore,
        _x: Vec3,
        _wo: Vec3,
        _n: Vec3,
        _albedo_hint: RgbVar,
        _attach: bool,
    ) -> RgbVar {
        crate::autodiff::rgb_const(self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RadianceFieldConfig {
    pub grid: HashGridConfig,
    pub hidden_layers: u32,
    pub hidden_width: u32,
}

impl RadianceFieldConfig {
    /// Paper-scale: 3 hidden layers of 256 over the full hash grid.
    pub fn full() -> RadianceFieldConfig {
        RadianceFieldConfig {
            grid: HashGridConfig::full(),
            hidden_layers: 3,
            hidden_width: 256,
        }
    }

    /// Desk-scale default used by the acceptance runs.
    pub fn desk() -> RadianceFieldConfig {
        RadianceFieldConfig {
            grid: HashGridConfig::desk(),
            hidden_layers: 3,
            hidden_width: 64,
        }
    }
}

/// The radiance network L_theta: position (hash-encoded), outgoing
/// direction, surface normal, and an albedo hint feed an MLP whose
/// softplus output is strictly positive HDR radiance.
#[derive(Clone, Debug)]
pub struct RadianceField {
    pub grid: HashGrid,
    pub mlp: Mlp,
    pub domain_min: Vec3,
    pub domain_max: Vec3,
}

impl RadianceField {
    pub fn new(
        config: RadianceFieldConfig,
        domain: (Vec3, Vec3),
        store: &mut ParamStore,
        rng: &mut RandomStream,
    ) -> RadianceField {
        let grid = HashGrid::new(config.grid, store, rng);
        let input = config.grid.output_len() as u32 + 3 + 3 + 3;
        let mlp = Mlp::new(
            MlpSpec::new(input, config.hidden_layers, config.hidden_width, 3),
            store,
            rng,
        );
        RadianceField {
            grid,
            mlp,
            domain_min: domain.0,
            domain_max: domain.1,
        }
    }

    pub fn theta_ranges(&self) -> Vec<ParamRange> {
        let mut r = vec![self.grid.params];
        r.extend(self.mlp.param_ranges());
        r
    }

    pub fn num_params(&self) -> usize {
        self.grid.config.total_params() + self.mlp.num_params()
    }

    fn normalize(&self, x: Vec3) -> [f64; 3] {
        let size = self.domain_max - self.domain_min;
        [
            ((x.x - self.domain_min.x) / size.x).clamp(0.0, 1.0),
            ((x.y - self.domain_min.y) / size.y).clamp(0.0, 1.0),
            ((x.z - self.domain_min.z) / size.z).clamp(0.0, 1.0),
        ]
    }
}

impl Radiance for RadianceField {
    fn radiance(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Vec3,
        wo: Vec3,
        n: Vec3,
        albedo_hint: RgbVar,
        attach: bool,
    ) -> RgbVar {
        let mut input = Vec::with_capacity(self.mlp.spec.input as usize);
        self.grid
            .encode(tape, store, self.normalize(x), attach, &mut input);
        for d in [wo.x, wo.y, wo.z, n.x, n.y, n.z] {
            input.push(Var::constant(d));
        }
        input.extend_from_slice(&albedo_hint);
        let mut out = Vec::with_capacity(3);
        self.mlp.forward(tape, store, &input, attach, &mut out);
        [
            tape.softplus(out[0]),
            tape.softplus(out[1]),
            tape.softplus(out[2]),
        ]
    }
}

/// Hash-grid MLP over position only; backs neural parameter fields.
#[derive(Clone, Debug)]
pub struct MlpField {
    pub grid: HashGrid,
    pub mlp: Mlp,
    pub out_dim: u32,
    pub domain_min: Vec3,
    pub domain_max: Vec3,
}

impl MlpField {
    pub fn new(
        grid_config: HashGridConfig,
        hidden_layers: u32,
        hidden_width: u32,
        out_dim: u32,
        domain: (Vec3, Vec3),
        store: &mut ParamStore,
        rng: &mut RandomStream,
    ) -> MlpField {
        let grid = HashGrid::new(grid_config, store, rng);
        let mlp = Mlp::new(
            MlpSpec::new(
                grid_config.output_len() as u32,
                hidden_layers,
                hidden_width,
                out_dim,
            ),
            store,
            rng,
        );
        MlpField {
            grid,
            mlp,
            out_dim,
            domain_min: domain.0,
            domain_max: domain.1,
        }
    }

    pub fn param_ranges(&self) -> Vec<ParamRange> {
        let mut r = vec![self.grid.params];
        r.extend(self.mlp.param_ranges());
        r
    }

    /// Raw (pre-squash) outputs.
    pub fn query(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Vec3,
        attach: bool,
        out: &mut Vec<Var>,
    ) {
        let size = self.domain_max - self.domain_min;
        let nx = [
            ((x.x - self.domain_min.x) / size.x).clamp(0.0, 1.0),
            ((x.y - self.domain_min.y) / size.y).clamp(0.0, 1.0),
            ((x.z - self.domain_min.z) / size.z).clamp(0.0, 1.0),
        ];
        let mut input = Vec::with_capacity(self.grid.config.output_len());
        self.grid.encode(tape, store, nx, attach, &mut input);
        self.mlp.forward(tape, store, &input, attach, out);
    }
}
