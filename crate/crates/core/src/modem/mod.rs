//! Constellations, bit mapping, probabilistic shaping, CCDM, and entropy
//! loading.

mod ccdm;
mod constellation;
mod pas;
mod shaping;

pub use ccdm::CcdmCode;
pub use constellation::{
    build_constellation, entropy_bits, gray_pam, make_constellation, ModulationSpec,
    ShapedConstellation, SUPPORTED_ORDERS,
};
pub use pas::{
    demap_uniform, map_uniform, pcs_demap_hard, pcs_map, PasMapper, DEFAULT_CCDM_BLOCK,
};
pub use shaping::{
    entropy_loading, initial_entropy, mb_for_entropy, mi_monte_carlo, EntropyLoadingPlan,
};
