use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_protomdpc"));
    cmd.env_remove("PROTOMDPC_CONFIG");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn keygen(dir: &Path, ensemble: &str, q: &str) {
    let o = run(dir, &["keygen", "-E", ensemble, "--Q", q, "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn keygen_is_reproducible() {
    let dir = TempDir::new().unwrap();
    keygen(dir.path(), "C", "4801");
    let first = std::fs::read(dir.path().join("key.private.json")).unwrap();
    let first_pub = std::fs::read(dir.path().join("key.public.json")).unwrap();
    keygen(dir.path(), "C", "4801");
    assert_eq!(std::fs::read(dir.path().join("key.private.json")).unwrap(), first);
    assert_eq!(std::fs::read(dir.path().join("key.public.json")).unwrap(), first_pub);
}

#[test]
fn missing_seed_is_drawn_and_printed() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["keygen", "-E", "A", "--Q", "101"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stderr(&o);
    let seed: u64 = line.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let again = TempDir::new().unwrap();
    let o = run(again.path(), &["keygen", "-E", "A", "--Q", "101", "--seed", &seed.to_string()]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["key.private.json", "key.public.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(again.path().join(f)).unwrap()
        );
    }
}

#[test]
fn encrypt_decrypt_roundtrip_raw_and_hex() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    keygen(d, "B", "4801");
    // 4801 bits: 600 full bytes plus one bit.
    let mut plain: Vec<u8> = (0..601u32).map(|i| (i * 37 % 251) as u8).collect();
    plain[600] &= 1;
    std::fs::write(d.join("u.bin"), &plain).unwrap();
    let o = run(d, &["encrypt", "-k", "key.public.json", "-e", "20", "-i", "u.bin", "-o", "c.bin", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(d.join("c.bin")).unwrap().len(), 1201);
    let o = run(d, &["decrypt", "-k", "key.private.json", "-i", "c.bin", "-a", "e", "-w", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(o.stdout, plain);

    std::fs::write(d.join("u.hex"), hex_of(&plain)).unwrap();
    let o = run(d, &["encrypt", "-k", "key.public.json", "-i", "u.hex", "-o", "c.hex", "--hex", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(d, &["decrypt", "-k", "key.private.json", "-i", "c.hex", "--hex", "-a", "spa", "-w", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), hex_of(&plain));
}

fn hex_of(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn heavy_noise_exits_with_decoding_failure() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    keygen(d, "A", "4801");
    let o = run(d, &["encrypt", "-k", "key.public.json", "--random-plaintext", "-e", "4801", "-o", "c.bin", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(d, &["decrypt", "-k", "key.private.json", "-i", "c.bin"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());

    let o = run(d, &["--error-format", "json", "decrypt", "-k", "key.private.json", "-i", "c.bin"]);
    assert_eq!(o.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(record["error"], "decoding_failure");
    assert_eq!(record["exit_code"], 2);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for args in [
        vec!["frobnicate"],
        vec!["keygen", "--Q", "101"],
        vec!["keygen", "-E", "Z"],
        vec!["threshold", "-E", "A", "-a", "e", "-w", "0.5"],
        vec!["security", "-E", "A"],
        vec!["simulate", "-E", "A", "--Q", "101"],
        vec!["encrypt", "--random-plaintext"],
    ] {
        let o = run(d, &args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn io_and_malformed_input_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = run(d, &["decrypt", "-k", "absent.json", "-i", "absent.bin"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("absent.json"));

    std::fs::write(d.join("junk.json"), "{ not json").unwrap();
    let o = run(d, &["inspect", "-k", "junk.json"]);
    assert_eq!(o.status.code(), Some(3));

    keygen(d, "A", "101");
    std::fs::write(d.join("short.bin"), [0u8; 3]).unwrap();
    let o = run(d, &["decrypt", "-k", "key.private.json", "-i", "short.bin"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(d, &["--config", "nowhere.toml", "inspect", "-E", "A"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn threshold_row_for_reference_ensemble() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["threshold", "--ensemble", "A", "--algorithm", "E", "--omega", "14"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "ensemble,algorithm,omega,delta_star,n_delta_star,iterations,residual"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let nd: f64 = row[4].parse().unwrap();
    assert!((nd - 106.0).abs() <= 2.0, "{nd}");

    let o = run(dir.path(), &["threshold", "-E", "B", "-w", "4", "--json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((rows[0]["n_delta_star"].as_f64().unwrap() - 57.0).abs() <= 2.0);
}

#[test]
fn config_file_env_var_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "ensemble = \"A\"\nQ = 101\nseed = 9\nformat = \"json\"\n[simulate]\nweights = [2, 40]\ntrials = 20\n",
    )
    .unwrap();
    let o = bin().current_dir(d).env("PROTOMDPC_CONFIG", d.join("run.toml")).args(["simulate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).is_empty(), "seed comes from the file");
    let pts: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(pts.as_array().unwrap().len(), 2);
    assert_eq!(pts[0]["Q"], 101);
    assert_eq!(pts[0]["seed"], 9);

    // Flags win over the file.
    let o = run(d, &["--config", "run.toml", "simulate", "--Q", "127", "-e", "3", "-t", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let pts: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((pts[0]["Q"].as_u64(), pts[0]["e"].as_u64(), pts[0]["trials"].as_u64()), (Some(127), Some(3), Some(5)));

    std::fs::write(d.join("bad.toml"), "ensemble = 3\n").unwrap();
    assert_eq!(run(d, &["--config", "bad.toml", "simulate"]).status.code(), Some(1));
}

#[test]
fn simulate_output_is_independent_of_workers() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let base = ["simulate", "-E", "B", "--Q", "127", "-e", "2,10,30", "-t", "40", "--seed", "11"];
    let one = run(d, &[&base[..], &["-j", "1"]].concat());
    let three = run(d, &[&base[..], &["-j", "3"]].concat());
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, three.stdout);
    let text = stdout(&one);
    assert!(text.starts_with("ensemble,algorithm,omega,Q,e,trials,failures,bler,ci_lo,ci_hi,seed,undetected\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn security_from_explicit_weight_and_curve() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = run(d, &["security", "-E", "C", "-e", "102"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let decode = text.lines().find(|l| l.starts_with("C,decode,")).unwrap();
    let bits: f64 = decode.rsplit(',').next().unwrap().parse().unwrap();
    assert!((bits - 98.3).abs() <= 3.0, "{bits}");

    std::fs::write(
        d.join("curve.csv"),
        "ensemble,algorithm,omega,Q,e,trials,failures,bler,ci_lo,ci_hi,seed,undetected\n\
         C,e,8.0,4801,90,1000,1,0.001,0.0,0.01,1,0\n\
         C,e,8.0,4801,100,1000,100,0.1,0.08,0.12,1,0\n",
    )
    .unwrap();
    let o = run(d, &["security", "-E", "C", "--curve", "curve.csv", "--target-bler", "0.01", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rows[1]["parameters"].as_str().unwrap().contains("e=95"));
    // The default target lies below the measured curve.
    assert_eq!(run(d, &["security", "-E", "C", "--curve", "curve.csv"]).status.code(), Some(1));
}

#[test]
fn inspect_reports_profile() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["inspect", "-E", "C", "--seed", "3", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let info: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(info["n"], 9602);
    assert!(info["h_row_weight"].as_u64().unwrap() <= 90);
    assert!((info["key_space_bits"].as_f64().unwrap() - 446.0).abs() <= 1.0);
    let state = &info["state_vn_degrees"][0];
    assert_eq!((state["degree"].as_u64(), state["count"].as_u64()), (Some(3), Some(4801)));
}
