//! The standalone two-party subprotocol `π'` over a shared string `trs`.
//!
//! ```text
//! R → T  c = (c', c'')     c' = H(S_skR(r')), c'' = G_{k'}(H(trs) ‖ c')
//! T → R  α = (α', α'')     only if c'' verifies; o'_T = 1
//! R      o'_R = V_PKT(c', α' ⊕ G_{k'}(c'')) ∧ α'' = G_{k'}(σ)
//! ```

use super::GFamily;
use crate::bits::BitString;
use crate::error::Result;
use crate::primitives::prf::hash;
use crate::primitives::sig::{Signature, SigningKey, VerifyingKey};
use crate::rng::Rng;

pub struct PiPrimeReader<'a> {
    pub k2: &'a BitString,
    pub sk_r: &'a mut SigningKey,
    pub pk_t: &'a VerifyingKey,
    pub trs: &'a BitString,
}

pub struct PiPrimeTag<'a> {
    pub k2: &'a BitString,
    pub sk_t: &'a mut SigningKey,
    pub trs: &'a BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiPrimeRun {
    pub o_r: bool,
    pub o_t: bool,
    pub messages: Vec<BitString>,
}

pub fn piprime_run(
    g: &GFamily,
    l_g: usize,
    reader: PiPrimeReader<'_>,
    tag: PiPrimeTag<'_>,
    rng: &mut Rng,
) -> Result<PiPrimeRun> {
    let r = rng.bits(l_g);
    let c_prime = hash(reader.sk_r.sign(&r)?.bits());
    let c_dprime = g.bind(reader.k2, reader.trs, &c_prime)?;
    let c = c_prime.concat(&c_dprime);
    let mut messages = vec![c];

    if g.bind(tag.k2, tag.trs, &c_prime)? != c_dprime {
        return Ok(PiPrimeRun {
            o_r: false,
            o_t: false,
            messages,
        });
    }
    let sigma = tag.sk_t.sign(&c_prime)?.into_bits();
    let a1 = g.mask(tag.k2, &c_dprime)?.xor(&sigma)?;
    let a2 = g.tag(tag.k2, &sigma)?;
    messages.push(a1.concat(&a2));

    let recovered = a1.xor(&g.mask(reader.k2, &c_dprime)?)?;
    let o_r = reader
        .pk_t
        .verify(&c_prime, &Signature::from_bits(recovered.clone()))
        && g.tag(reader.k2, &recovered)? == a2;
    Ok(PiPrimeRun {
        o_r,
        o_t: true,
        messages,
    })
}
