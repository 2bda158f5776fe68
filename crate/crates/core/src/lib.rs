//! The G+G convoluted Gaussian signature scheme over `Z[x]/(x^n + 1)`, a
//! statistical key-recovery attack on its generic form, and experiments on
//! the module variant.
//!
//! ```
//! use ggratio_core::{keygen, verify, ParamSetFile, Signer, SignerOptions, Verdict};
//! use ggratio_core::rng::stream_rng;
//!
//! let p = ParamSetFile::builtin().get("ci-n16").unwrap().params.clone();
//! let mut rng = stream_rng(7, 0);
//! let (pk, sk) = keygen(&p, &mut rng).unwrap();
//! let sig = Signer::new(&p, &pk, &sk, SignerOptions::default()).unwrap().sign(b"hi", &mut rng).unwrap();
//! assert_eq!(verify(b"hi", &pk, &sig, &p).unwrap(), Verdict::Valid);
//! ```

pub mod attack;
pub mod codec;
pub mod error;
pub mod params;
pub mod revised;
pub mod ring;
pub mod rng;
pub mod sampling;
pub mod scheme;
pub mod spectral;
pub mod stats;

pub use attack::{
    alpha_star, make_plan, recover, run_attack, AttackConfig, AttackPlan, AttackReport, Budget, RatioAccumulator,
    StopReason,
};
pub use error::{Error, Result};
pub use params::{ParamSet, ParamSetFile, SchemeParams, Variant};
pub use revised::{ForgeryReport, InvalidityReport, NormBoundReport, PdExperimentReport};
pub use ring::{RingElement, SkewCirculantMatrix};
pub use rng::RngStream;
pub use scheme::{
    forge_signature, keygen, sign, verify, InvalidReason, PublicKey, SecretKey, Signature, Signer, SignerOptions,
    Verdict,
};
pub use stats::{LemmaCheckReport, RunConfig};
