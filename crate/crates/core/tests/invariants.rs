use proptest::prelude::*;
use rfpop::bits::BitString;
use rfpop::codec::Codec;
use rfpop::ma::{Ma, MaParams};
use rfpop::model::{run_honest_session, run_session, Relay, System};
use rfpop::pop::{cred_veri, mapop_system, Credential, Impl, PopMode};
use rfpop::primitives::sig::{SchemeKind, SigningKey};
use rfpop::rng::Rng;
use rfpop::stats::{wilson, Estimate, Z95};

fn bits() -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), 0..300).prop_map(|v| BitString::from_bits(&v))
}

/// The field codec carries whole bytes only.
fn bytes() -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<u8>(), 0..40).prop_map(BitString::from_bytes)
}

fn ma_system(l: usize, seed: u64) -> System<Ma> {
    let rng = &mut Rng::from_u64(seed);
    let ma = Ma::new(MaParams::default()).unwrap();
    let (records, tags) = ma.setup(l, rng).unwrap();
    System::new(ma, (), records, tags, rng)
}

proptest! {
    #[test]
    fn xor_is_an_involution(a in bits(), seed: u64) {
        let b = Rng::from_u64(seed).bits(a.len());
        prop_assert_eq!(a.xor(&b).unwrap().xor(&b).unwrap(), a);
    }

    #[test]
    fn split_inverts_concat(a in bits(), b in bits()) {
        let joined = a.concat(&b);
        prop_assert_eq!(joined.len(), a.len() + b.len());
        prop_assert_eq!(joined.split(&[a.len(), b.len()]).unwrap(), vec![a, b]);
    }

    #[test]
    fn flipping_twice_restores(a in bits().prop_filter("non-empty", |a| !a.is_empty()), i: prop::sample::Index) {
        let i = i.index(a.len());
        let once = a.with_flipped_bit(i);
        prop_assert_ne!(&once, &a);
        prop_assert_eq!(once.hamming_weight().abs_diff(a.hamming_weight()), 1);
        prop_assert_eq!(once.with_flipped_bit(i), a);
    }

    #[test]
    fn bitstring_codec_round_trips(a in bytes()) {
        prop_assert_eq!(BitString::decode_exact(&a.encoded()).unwrap(), a);
    }

    #[test]
    fn vec_codec_round_trips(v: Vec<(u64, bool)>) {
        prop_assert_eq!(Vec::<(u64, bool)>::decode_exact(&v.encoded()).unwrap(), v);
    }

    #[test]
    fn truncated_encodings_are_rejected(a in bytes(), cut: prop::sample::Index) {
        let enc = a.encoded();
        let cut = cut.index(enc.len());
        prop_assert!(BitString::decode_exact(&enc[..cut]).is_err());
    }

    #[test]
    fn wilson_brackets_the_rate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let s = (trials as f64 * frac) as u64;
        let (lo, hi) = wilson(s, trials, Z95);
        let p = s as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        let e = Estimate::guessing(s, trials);
        prop_assert!(e.ci_low <= e.rate - 0.5 + 1e-12 && e.rate - 0.5 <= e.ci_high + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn signatures_verify_and_reject_flips(seed: [u8; 32], msg in bits(), i: prop::sample::Index, k in 0usize..3) {
        let kind = [SchemeKind::FullTime, SchemeKind::Precomputed { pool: 2 }, SchemeKind::KTime { k: 3 }][k];
        let mut sk = SigningKey::from_seed(kind, seed, &mut Rng::from_u64(1)).unwrap();
        let pk = sk.verifying_key();
        let sig = sk.sign(&msg).unwrap();
        prop_assert!(pk.verify(&msg, &sig));
        let forged = rfpop::primitives::sig::Signature::from_bits(sig.bits().with_flipped_bit(i.index(sig.len_bits())));
        prop_assert!(!pk.verify(&msg, &forged));
    }

    /// Any pattern of lost final messages leaves every tag able to
    /// authenticate on its next complete session.
    #[test]
    fn ma_recovers_from_any_loss_pattern(seed: u64, schedule in prop::collection::vec((0usize..4, any::<bool>()), 1..24)) {
        let mut sys = ma_system(4, seed);
        for (i, lose) in schedule {
            if lose {
                run_session(&mut sys, i, Relay::DropFinalTagMessage).unwrap();
            } else {
                let t = run_honest_session(&mut sys, i).unwrap();
                prop_assert_eq!((t.o_r, t.o_t), (Some(true), Some(true)));
                prop_assert_eq!(sys.reader.history().last().unwrap().identified, Some(i));
            }
        }
        for i in 0..4 {
            let t = run_honest_session(&mut sys, i).unwrap();
            prop_assert_eq!((t.o_r, t.o_t), (Some(true), Some(true)));
        }
    }

    #[test]
    fn credentials_verify_and_any_flip_breaks_them(seed: u64, imp in 0usize..3, which in 0usize..3, i: prop::sample::Index) {
        let imp = [Impl::Imp1, Impl::Imp2 { pool: 4 }, Impl::Imp3 { k: 4 }][imp];
        let (mut sys, dir) = mapop_system(MaParams::default(), imp, PopMode::Full, 2, &mut Rng::from_u64(seed)).unwrap();
        let t = run_honest_session(&mut sys, 1).unwrap();
        prop_assert_eq!(t.o_r, Some(true));
        let cred = sys.proto.cred_gen(&sys.reader, sys.reader.sessions()).unwrap().unwrap();
        prop_assert!(cred_veri(&dir, &cred));
        prop_assert_eq!(Credential::from_bytes(&cred.to_bytes()).unwrap(), cred.clone());
        let mut bad = cred;
        match which {
            0 => bad.cred1 = bad.cred1.with_flipped_bit(i.index(bad.cred1.len())),
            1 => bad.cred2 = rfpop::primitives::sig::Signature::from_bits(bad.cred2.bits().with_flipped_bit(i.index(bad.cred2.len_bits()))),
            _ => bad.cred3 = rfpop::primitives::sig::Signature::from_bits(bad.cred3.bits().with_flipped_bit(i.index(bad.cred3.len_bits()))),
        }
        prop_assert!(!cred_veri(&dir, &bad));
    }
}
