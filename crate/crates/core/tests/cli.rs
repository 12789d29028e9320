//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_interference-lab"))
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const CONFIG: &str = r#"
[graph]
source = "erdos_renyi"
n = 30
p = 0.08
seed = 5

[exposure]
model = "binary"

[outcomes]
source = "uncorrelated"
seed = 9

[experiment]
estimand = "dte"
replicates = 200
master_seed = 17
mode = "monte_carlo"

[[strategy]]
design = { kind = "crd", n_t = 8 }
estimator = "ht"

[[strategy]]
design = { kind = "crd", n_t = 8 }
estimator = "hajek"

[[strategy]]
design = { kind = "bernoulli", p = 0.25 }
estimator = "naive"
"#;

#[test]
fn run_subcommand_emits_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", CONFIG);
    let run = |out: &str| {
        let out_path = dir.path().join(out);
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(&out_path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out_path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b, "identical configs must give byte-identical output");
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "strategy,design,estimator,estimand,bias,bias_se,var,mse,undef_rate,replicates,seed"
    );
    assert_eq!(a.lines().count(), 4);
}

#[test]
fn exact_subcommand_overrides_mode_and_json_works() {
    let dir = tempfile::tempdir().unwrap();
    let small = CONFIG
        .replace("n = 30", "n = 8")
        .replace("n_t = 8", "n_t = 3")
        .replace("replicates = 200", "replicates = 1");
    let cfg = write(dir.path(), "exp.toml", &small);
    let output = bin()
        .args(["exact", "--config"])
        .arg(&cfg)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let parsed: Vec<serde_json::Value> = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(parsed.len(), 3);
    let ht = parsed.iter().find(|r| r["estimator"] == "ht").unwrap();
    assert!(ht["bias"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn propensity_subcommand_outputs_table() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(dir.path(), "g.txt", "3 2\n0 1\n1 2\n");
    let output = bin()
        .args(["propensity", "--graph"])
        .arg(&graph)
        .args(["--model", "binary", "--design", "crd", "--n-t", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.starts_with("unit,z,e,pi,provenance,se"));
    // Unit 0 treated and unexposed: (1/3)·C(2,1)/C(2,1) = 1/3.
    let row = text
        .lines()
        .find(|l| l.starts_with("0,1,0,"))
        .expect("cell (1,0) for unit 0");
    let pi: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
    assert!((pi - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn propensity_mc_and_enumerate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(dir.path(), "g.txt", "4 3\n0 1\n1 2\n2 3\n");
    let exact = bin()
        .args(["propensity", "--graph"])
        .arg(&graph)
        .args([
            "--model",
            "symmetric",
            "--design",
            "independent_set",
            "--n-t",
            "1",
            "--method",
            "enumerate",
        ])
        .output()
        .unwrap();
    assert!(exact.status.success());
    let mc = bin()
        .args(["propensity", "--graph"])
        .arg(&graph)
        .args([
            "--model",
            "symmetric",
            "--design",
            "independent_set",
            "--n-t",
            "1",
            "--method",
            "mc",
            "--samples",
            "40000",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(mc.status.success());
    let parse = |bytes: &[u8]| -> Vec<(String, f64)> {
        String::from_utf8_lossy(bytes)
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                let key = format!(
                    "{},{},{}",
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap()
                );
                (key, it.next().unwrap().parse().unwrap())
            })
            .collect()
    };
    let exact = parse(&exact.stdout);
    let mc = parse(&mc.stdout);
    for (key, p) in &exact {
        let est = mc
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .unwrap_or(0.0);
        assert!((est - p).abs() < 0.02, "{key}: {est} vs {p}");
    }
}

#[test]
fn analytic_subcommand_bias_linear() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(dir.path(), "g.txt", "3 2\n0 1\n1 2\n");
    let params = write(dir.path(), "p.toml", "gamma = 1.0\n");
    let output = bin()
        .args(["analytic", "bias_linear", "--graph"])
        .arg(&graph)
        .arg("--params")
        .arg(&params)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "formula,value");
    let value: f64 = lines
        .next()
        .unwrap()
        .strip_prefix("bias_linear,")
        .unwrap()
        .parse()
        .unwrap();
    assert!((value + 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn analytic_subcommand_var_ht_with_table_file() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(dir.path(), "g.txt", "4 2\n0 1\n2 3\n");
    // Table rows: unit alpha beta b-levels c-levels x y exposed.
    let table = "\
0 1.0 0.5 0,0.2 0,0 - - 1
1 2.0 0.5 0,0.1 0,0 - - 1
2 0.5 0.5 0,0.4 0,0 - - 1
3 1.5 0.5 0,0.3 0,0 - - 1
";
    let table_path = write(dir.path(), "t.txt", table);
    let params = format!(
        "design = \"crd\"\nn_t = 1\ncontrast = \"dte\"\nexposure = \"binary\"\ntable = \"{}\"\n",
        table_path.display()
    );
    let params = write(dir.path(), "p.toml", &params);
    let output = bin()
        .args(["analytic", "var_ht", "--graph"])
        .arg(&graph)
        .arg("--params")
        .arg(&params)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = String::from_utf8(output.stdout).unwrap();
    let value: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .strip_prefix("var_ht,")
        .unwrap()
        .parse()
        .unwrap();
    assert!(value > 0.0);
}

#[test]
fn analytic_subcommand_bias_naive_general() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(dir.path(), "g.txt", "3 2\n0 1\n1 2\n");
    // Linear count table with gamma = 1 on the path: bias is -2/3.
    let table = "\
0 0.0 1.0 0,1 0,0 - - 1
1 0.0 1.0 0,1,2 0,0,0 - - 2
2 0.0 1.0 0,1 0,0 - - 1
";
    let table_path = write(dir.path(), "t.txt", table);
    let params = format!(
        "design = \"crd\"\nn_t = 1\nexposure = \"symmetric\"\ncontrast = \"dte\"\ntable = \"{}\"\n",
        table_path.display()
    );
    let params = write(dir.path(), "p.toml", &params);
    let output = bin()
        .args(["analytic", "bias_naive_general", "--graph"])
        .arg(&graph)
        .arg("--params")
        .arg(&params)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let text = String::from_utf8(output.stdout).unwrap();
    let value: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .strip_prefix("bias_naive_general,")
        .unwrap()
        .parse()
        .unwrap();
    assert!((value + 2.0 / 3.0).abs() < 1e-12, "value {value}");
}

#[test]
fn bad_config_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", "not valid toml [");
    let output = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("error"));
}
