//! gradchain-core: a desk-scale simulator of decentralized model training
//! secured by proof of work.
//!
//! The numeric stack (softmax attention regression, sketching operators,
//! federated optimizer) is generic over [`scalar::Scalar`]; the ledger and
//! network layers are fixed to f64, matching the canonical block encoding.
//! The aliases below are the f64 instantiations most callers want.

pub mod attention;
pub mod chain;
pub mod fedopt;
pub mod netsim;
pub mod scalar;
pub mod seed;
pub mod sketch;

pub type Real = f64;
pub type Instance = attention::AttentionInstance<Real>;
pub type Weights = attention::WeightVector<Real>;
