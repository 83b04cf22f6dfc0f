use protomdpc::cryptosystem::{decrypt, encrypt, encrypt_with_error, key_from_str, key_to_string, keygen, load_private, save_key, Key};
use protomdpc::parallel::Exec;
use protomdpc::simulation::{read_results, run_bler, write_results, Format, KeyPolicy, SimPlan};
use protomdpc::{ensemble, Algorithm, DecoderConfig, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bits(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..n).map(|_| rng.gen::<bool>() as u8).collect()
}

#[test]
fn every_ensemble_roundtrips_under_both_decoders() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in ["A", "B", "C"] {
        let spec = ensemble(name, 1021).unwrap();
        let (sk, pk) = keygen(&spec, 6, &mut rng).unwrap();
        for cfg in [DecoderConfig::new(Algorithm::AlgE, 2.0), DecoderConfig::new(Algorithm::Spa, 1.0)] {
            let u = random_bits(1021, &mut rng);
            let c = encrypt(&pk, &u, &mut rng).unwrap();
            assert_eq!(decrypt(&sk, &c, &cfg).unwrap(), u, "{name} {cfg:?}");
        }
    }
}

#[test]
fn undecodable_ciphertext_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (sk, pk) = keygen(&ensemble("A", 101).unwrap(), 0, &mut rng).unwrap();
    let u = random_bits(101, &mut rng);
    let e: Vec<u8> = (0..202).map(|i| (i % 2) as u8).collect();
    let c = encrypt_with_error(&pk, &u, &e).unwrap();
    let r = decrypt(&sk, &c, &DecoderConfig::default());
    assert!(matches!(r, Err(Error::DecodingFailure { .. })), "{r:?}");
    assert!(decrypt(&sk, &c[..10], &DecoderConfig::default()).is_err());
}

#[test]
fn keys_survive_serialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (sk, pk) = keygen(&ensemble("C", 509).unwrap(), 5, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    save_key(&Key::Private(sk.clone()), &path).unwrap();
    let loaded = load_private(&path).unwrap();
    let u = random_bits(509, &mut rng);
    let c = encrypt(&pk, &u, &mut rng).unwrap();
    assert_eq!(decrypt(&loaded, &c, &DecoderConfig::default()).unwrap(), u);

    let text = key_to_string(&Key::Public(pk)).unwrap();
    assert!(matches!(key_from_str(&text).unwrap(), Key::Public(_)));
    assert!(key_from_str("{}").is_err());
}

#[test]
fn simulation_results_roundtrip_through_files() {
    let spec = ensemble("B", 127).unwrap();
    let mut plan = SimPlan::new(spec, DecoderConfig::new(Algorithm::AlgE, 4.0), vec![2, 30], 30, 4);
    plan.key_policy = KeyPolicy::Fixed;
    let points = run_bler(&plan, Exec::Sequential).unwrap();
    assert_eq!(points.len(), 2);
    assert!(points[0].failures <= points[1].failures);
    let dir = tempfile::tempdir().unwrap();
    for (format, file) in [(Format::Csv, "r.csv"), (Format::Json, "r.json")] {
        let path = dir.path().join(file);
        write_results(&points, &path, format).unwrap();
        assert_eq!(read_results(&path, format).unwrap(), points);
    }
}
