use rand::RngCore;

use crate::chain::{ChainError, Transaction};
use crate::seed::rng_from;

/// Signing backend for transaction authorization. The ledger never looks
/// inside keys or signatures; it only round-trips byte strings through
/// this trait, so swapping the curve is a one-type change.
pub trait SignatureScheme {
    fn keypair_from_seed(&self, seed: u64) -> Keypair;
    fn sign(&self, secret: &[u8], message: &[u8]) -> Vec<u8>;
    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8]) -> bool;
}

/// A signing key and its public counterpart, both as opaque bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keypair {
    pub public: Vec<u8>,
    pub secret: Vec<u8>,
}

/// Ed25519 via `ed25519-dalek`. Seeds expand to the 32-byte secret through
/// the same counter-mode generator the rest of the crate uses, so key
/// material is reproducible from a run's master seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ed25519Scheme;

impl SignatureScheme for Ed25519Scheme {
    fn keypair_from_seed(&self, seed: u64) -> Keypair {
        let mut secret = [0u8; 32];
        rng_from(seed).fill_bytes(&mut secret);
        let signing = ed25519_dalek::SigningKey::from_bytes(&secret);
        Keypair {
            public: signing.verifying_key().to_bytes().to_vec(),
            secret: secret.to_vec(),
        }
    }

    fn sign(&self, secret: &[u8], message: &[u8]) -> Vec<u8> {
        use ed25519_dalek::Signer;
        let bytes: [u8; 32] = secret.try_into().expect("ed25519 secrets are 32 bytes");
        let signing = ed25519_dalek::SigningKey::from_bytes(&bytes);
        signing.sign(message).to_bytes().to_vec()
    }

    fn verify(&self, public: &[u8], message: &[u8], signature: &[u8]) -> bool {
        use ed25519_dalek::Verifier;
        let Ok(key_bytes) = <[u8; 32]>::try_from(public) else {
            return false;
        };
        let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(&key_bytes) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
            return false;
        };
        key.verify(message, &sig).is_ok()
    }
}

/// Fills in each input's signature over the transaction's signing digest,
/// using whichever held key matches that input's declared owner. Fails if
/// an input claims a key the caller does not hold.
pub fn sign_transaction<S: SignatureScheme>(
    scheme: &S,
    keys: &[Keypair],
    mut tx: Transaction,
) -> Result<Transaction, ChainError> {
    let digest = tx.signing_digest();
    for input in &mut tx.inputs {
        let holder = keys
            .iter()
            .find(|k| k.public == input.spender_pubkey)
            .ok_or(ChainError::UnknownKey)?;
        input.signature = scheme.sign(&holder.secret, &digest);
    }
    Ok(tx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keypairs_are_deterministic_in_the_seed() {
        let scheme = Ed25519Scheme;
        let a = scheme.keypair_from_seed(7);
        let b = scheme.keypair_from_seed(7);
        let c = scheme.keypair_from_seed(8);
        assert_eq!(a, b);
        assert_ne!(a.public, c.public);
        assert_eq!(a.public.len(), 32);
        assert_eq!(a.secret.len(), 32);
    }

    #[test]
    fn sign_verify_roundtrip() {
        let scheme = Ed25519Scheme;
        let kp = scheme.keypair_from_seed(1);
        let msg = b"the message";
        let sig = scheme.sign(&kp.secret, msg);
        assert!(scheme.verify(&kp.public, msg, &sig));
        assert!(!scheme.verify(&kp.public, b"another message", &sig));
    }

    #[test]
    fn verify_rejects_wrong_key_and_corrupt_signature() {
        let scheme = Ed25519Scheme;
        let kp = scheme.keypair_from_seed(1);
        let other = scheme.keypair_from_seed(2);
        let msg = b"payload";
        let mut sig = scheme.sign(&kp.secret, msg);
        assert!(!scheme.verify(&other.public, msg, &sig));
        sig[0] ^= 1;
        assert!(!scheme.verify(&kp.public, msg, &sig));
    }

    #[test]
    fn verify_tolerates_malformed_inputs() {
        let scheme = Ed25519Scheme;
        let kp = scheme.keypair_from_seed(3);
        assert!(!scheme.verify(&[1, 2, 3], b"m", &[0; 64]));
        assert!(!scheme.verify(&kp.public, b"m", &[0; 10]));
    }
}
