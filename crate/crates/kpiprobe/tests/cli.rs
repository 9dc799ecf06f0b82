use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::Duration;

const BIN: &str = env!("CARGO_BIN_EXE_kpiprobe");

fn kpiprobe(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("KPIPROBE_LOG", "off").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn free_ports(n: usize) -> Vec<u16> {
    let ls: Vec<TcpListener> = (0..n).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    ls.iter().map(|l| l.local_addr().unwrap().port()).collect()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&kpiprobe(&["--bogus", "all"])), 1);
    assert_eq!(code(&kpiprobe(&[])), 1);
    assert_eq!(code(&kpiprobe(&["--noise", "maybe", "all"])), 1);
    assert_eq!(code(&kpiprobe(&["--ports", "web=80,foo=1", "all"])), 1);
    let o = kpiprobe(&["--ports", "web=18080", "all"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--profile"));
    assert_eq!(code(&kpiprobe(&["--profile", "cpe-z", "all"])), 1);
    assert_eq!(code(&kpiprobe(&["--duration", "-3", "all"])), 1);
    assert_eq!(code(&kpiprobe(&["--help"])), 0);
}

#[test]
fn bad_config_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&kpiprobe(&["--config", missing.to_str().unwrap(), "all"])), 1);
    let broken = dir.path().join("broken.toml");
    fs::write(&broken, "seed = [").unwrap();
    let o = kpiprobe(&["--config", broken.to_str().unwrap(), "all"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("broken.toml"));
    let dup = dir.path().join("dup.toml");
    fs::write(
        &dup,
        "[[device]]\nid = \"cpe-a\"\nports = { web = 7000, at = 7000, tm = 7001 }\n",
    )
    .unwrap();
    assert_eq!(code(&kpiprobe(&["--config", dup.to_str().unwrap(), "all"])), 1);
}

#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = kpiprobe(&["--seed", "42", "--svg", "--out", out.to_str().unwrap(), "all"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let ta = tree(&a);
    assert_eq!(ta, tree(&b));
    assert_eq!(ta.iter().filter(|(p, _)| p.starts_with("series") && !p.ends_with(".errors.csv")).count(), 6);
    assert!(ta.iter().any(|(p, _)| p == "traces.svg"));
    let run = String::from_utf8(fs::read(a.join("run.toml")).unwrap()).unwrap();
    assert!(run.contains("seed = 42") && !run.contains("port"));

    let report = fs::read(a.join("report.csv")).unwrap();
    let o = kpiprobe(&["analyze", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(a.join("report.csv")).unwrap(), report);
    assert_eq!(String::from_utf8_lossy(&o.stdout), fs::read_to_string(a.join("report.txt")).unwrap());

    let other = dir.path().join("c");
    kpiprobe(&["--seed", "43", "--out", other.to_str().unwrap(), "all"]);
    assert_ne!(fs::read(other.join("series/cpe-a_XCAL_L3.csv")).unwrap(), fs::read(a.join("series/cpe-a_XCAL_L3.csv")).unwrap());
}

#[test]
fn single_profile_gives_three_series_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = kpiprobe(&["--profile", "cpe-b", "--noise", "off", "--out", out.to_str().unwrap(), "all"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert!(cells[3..10].iter().all(|c| !c.is_empty()), "{row}");
    }
}

#[test]
fn analyze_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(empty.join("series")).unwrap();
    assert_eq!(code(&kpiprobe(&["analyze", empty.to_str().unwrap()])), 2);
    assert_eq!(code(&kpiprobe(&["analyze", dir.path().join("absent").to_str().unwrap()])), 2);

    let bad = dir.path().join("bad");
    fs::create_dir_all(bad.join("series")).unwrap();
    fs::write(bad.join("series/cpe-a_AT_DEBUG.csv"), "timestamp,mono_s,method,device\nx,zz,AT_DEBUG,cpe-a\n").unwrap();
    let o = kpiprobe(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cpe-a_AT_DEBUG.csv"), "{}", stderr(&o));
}

#[test]
fn collect_against_nothing_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = free_ports(3);
    let ports = format!("web={},at={},tm={}", p[0], p[1], p[2]);
    let o = kpiprobe(&[
        "--profile", "cpe-a", "--ports", &ports, "--duration", "0.5", "--out", dir.path().to_str().unwrap(), "collect",
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let errors = fs::read_to_string(dir.path().join("series/cpe-a_XCAL_L3.errors.csv")).unwrap();
    assert!(errors.contains("TRANSPORT_DOWN"));
}

#[test]
fn emulate_on_an_occupied_port_fails() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let p = free_ports(2);
    let ports = format!("web={},at={},tm={}", taken.local_addr().unwrap().port(), p[0], p[1]);
    let o = kpiprobe(&["--profile", "cpe-a", "--ports", &ports, "emulate", "--serve-for", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("web"));
}

fn spawn_emulator(ports: &str) -> Child {
    Command::new(BIN)
        .args(["--profile", "cpe-a", "--ports", ports, "emulate", "--serve-for", "6"])
        .env("KPIPROBE_LOG", "off")
        .stdout(Stdio::null())
        .spawn()
        .unwrap()
}

#[test]
fn emulate_collect_analyze_over_real_sockets() {
    let p = free_ports(3);
    let ports = format!("web={},at={},tm={}", p[0], p[1], p[2]);
    let mut emu = spawn_emulator(&ports);
    thread::sleep(Duration::from_millis(500));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kpiprobe(&["--profile", "cpe-a", "--ports", &ports, "--duration", "1", "--out", out, "collect"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["cpe-a_WEB", "cpe-a_AT_DEBUG", "cpe-a_XCAL_L3"] {
        let rows = fs::read_to_string(dir.path().join(format!("series/{name}.csv"))).unwrap().lines().count() - 1;
        assert!(rows >= 1, "{name}: {rows} rows");
    }
    let o = kpiprobe(&["analyze", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("report.csv")).unwrap().lines().count(), 4);
    let _ = emu.kill();
    let _ = emu.wait();
}

#[test]
fn device_alias_uses_its_profile() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("lab.toml");
    fs::write(
        &config,
        "duration = 10\n\
         [[device]]\nid = \"lab-b\"\nprofile = \"cpe-b\"\nmethods = [\"web\", \"at\"]\n\
         ports = { web = 18181, at = 18182, tm = 18183 }\n\
         [device.profiles.at]\nrefresh_period = 0.5\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = kpiprobe(&["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "all"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = report.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2, "{report}");
    for row in &rows {
        assert_eq!(row[1], "lab-b");
        assert_eq!(row[9], "0", "errors in {row:?}");
    }
    let at = rows.iter().find(|r| r[0] == "AT_SGCELLINFOEX").unwrap();
    assert!(at[3].starts_with("0.5"), "{at:?}");
}
