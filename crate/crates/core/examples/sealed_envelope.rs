//! Seal a payload to one recipient and show that nobody else can open it.

use certchain::codec::Canonical;
use certchain::crypto::{open, seal, EncryptionKeyPair, SealedEnvelope};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let company = EncryptionKeyPair::generate();
    let stranger = EncryptionKeyPair::generate();

    let env = seal(br#"{"result":"negative"}"#, &company.public_key)?;
    let wire = env.to_canonical_bytes();
    println!("envelope: {} bytes, hex prefix {}", wire.len(), &env.to_hex()[..24]);

    let back = SealedEnvelope::from_canonical_bytes(&wire)?;
    let plain = open(&back, &company.private_key)?;
    println!("recipient opens: {}", String::from_utf8_lossy(&plain));

    match open(&back, &stranger.private_key) {
        Ok(_) => println!("stranger opened it (unexpected)"),
        Err(e) => println!("stranger: {e}"),
    }

    let mut flipped = back.clone();
    flipped.ciphertext[0] ^= 1;
    println!("one flipped bit: {:?}", open(&flipped, &company.private_key).err());
    Ok(())
}
