use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use regraph::error::Error;
use regraph::pipeline::{
    discover_jobs, preprocess, process_job, run_stage, Backend, BinaryJob, Layout, Stage, ToolchainConfig,
};
use regraph_core::graph::{EdgeType, NodeKind};
use tempfile::TempDir;

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tree")
}

fn copy_tree(from: &Path, to: &Path) {
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dst = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            fs::create_dir_all(&dst).unwrap();
            copy_tree(&entry.path(), &dst);
        } else {
            fs::copy(entry.path(), dst).unwrap();
        }
    }
}

fn touch(path: &Path) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, b"\x7fELF").unwrap();
}

fn one_job(dir: &TempDir) -> BinaryJob {
    touch(&dir.path().join("in/p/x86/O0/tool.bin"));
    discover_jobs(&dir.path().join("in"), Layout::DefaultTree)
        .unwrap()
        .remove(0)
}

fn external(dir: &TempDir) -> ToolchainConfig {
    let mut cfg = ToolchainConfig::fixture(dir.path().join("work"), None);
    cfg.backend = Backend::External;
    cfg.lifter_cmd = "cp {in} {out}".into();
    cfg.optimizer_cmd = "cp {in} {out} {level}".into();
    cfg.decompiler_cmd = "cp {in} {out}".into();
    cfg.cpg_extractor_cmd = "cp {in} {out}".into();
    cfg
}

#[test]
fn discovers_tree_jobs_in_path_order() {
    let dir = TempDir::new().unwrap();
    for project in ["zlib", "busybox"] {
        for arch in ["x86", "arm"] {
            for opt in ["O3", "O0"] {
                touch(&dir.path().join(project).join(arch).join(opt).join("bin"));
            }
        }
    }
    touch(&dir.path().join("busybox/arm/O0/.hidden"));
    fs::write(dir.path().join("zlib/x86/O0/empty"), b"").unwrap();
    touch(&dir.path().join("stray.bin"));

    let jobs = discover_jobs(dir.path(), Layout::DefaultTree).unwrap();
    let names: Vec<String> = jobs.iter().map(|j| j.name()).collect();
    assert_eq!(names.len(), 8);
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(names[0], "busybox__arm__O0__bin");
    assert_eq!(jobs[0].provenance.project, "busybox");
    assert_eq!(jobs[0].provenance.architecture, "arm");
    assert_eq!(jobs[0].provenance.opt_level, "O0");
}

#[test]
fn empty_root_is_an_error() {
    let dir = TempDir::new().unwrap();
    assert!(matches!(
        discover_jobs(dir.path(), Layout::DefaultTree),
        Err(Error::EmptyRoot(_))
    ));
}

#[test]
fn fixture_backend_copies_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = ToolchainConfig::fixture(dir.path().join("work"), None);
    let job = discover_jobs(&fixture_root(), Layout::DefaultTree)
        .unwrap()
        .remove(0);
    let out = run_stage(&job, Stage::Lift, &cfg).unwrap();
    let expected = fixture_root().join("openplc/arm/O3/openplc/lifted.ll");
    assert_eq!(fs::read(out).unwrap(), fs::read(expected).unwrap());
    assert!(dir
        .path()
        .join("work/logs")
        .join(job.name())
        .join("lift.log")
        .is_file());
}

#[test]
fn failing_tool_reports_stderr() {
    let dir = TempDir::new().unwrap();
    let job = one_job(&dir);
    let mut cfg = external(&dir);
    cfg.lifter_cmd = "sh -c 'echo lifter exploded >&2; exit 3'".into();
    match run_stage(&job, Stage::Lift, &cfg) {
        Err(Error::ToolFailure { stage, stderr, .. }) => {
            assert_eq!(stage, Stage::Lift);
            assert!(stderr.contains("lifter exploded"), "{stderr}");
        }
        other => panic!("expected tool failure, got {other:?}"),
    }
    let log = fs::read_to_string(dir.path().join("work/logs").join(job.name()).join("lift.log")).unwrap();
    assert!(log.contains("lifter exploded"));

    cfg.lifter_cmd = "false".into();
    assert!(matches!(
        run_stage(&job, Stage::Lift, &cfg),
        Err(Error::ToolFailure { .. })
    ));
}

#[test]
fn hung_tool_times_out() {
    let dir = TempDir::new().unwrap();
    let job = one_job(&dir);
    let mut cfg = external(&dir);
    cfg.lifter_cmd = "sleep 30".into();
    cfg.timeout_secs = 1;
    let start = std::time::Instant::now();
    assert!(matches!(
        run_stage(&job, Stage::Lift, &cfg),
        Err(Error::Timeout {
            stage: Stage::Lift,
            secs: 1,
            ..
        })
    ));
    assert!(start.elapsed().as_secs() < 10);
}

#[test]
fn stages_run_in_order() {
    let dir = TempDir::new().unwrap();
    let job = one_job(&dir);
    let cfg = external(&dir);
    match run_stage(&job, Stage::Reopt, &cfg) {
        Err(Error::StageOrder { stage, missing }) => {
            assert_eq!(stage, Stage::Reopt);
            assert!(missing.ends_with("lifted.ll"));
        }
        other => panic!("expected stage order error, got {other:?}"),
    }
}

#[test]
fn corrupt_job_is_skipped() {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("tree");
    copy_tree(&fixture_root(), &root);
    fs::write(root.join("openplc/arm/O3/openplc/cpg.json"), b"{\"@type\":").unwrap();
    let cfg = ToolchainConfig::fixture(dir.path().join("work"), None);
    let out = preprocess(&root, &cfg, &dir.path().join("out")).unwrap();
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].0.name(), "openplc__arm__O3__openplc");
    assert_eq!(out.outputs.len(), 1);
    assert!(out
        .corpus
        .functions
        .iter()
        .all(|g| g.provenance.architecture == "x86"));

    fs::write(root.join("openplc/x86/O0/openplc/cpg.json"), b"").unwrap();
    assert!(matches!(
        preprocess(&root, &cfg, &dir.path().join("out2")),
        Err(Error::AllJobsFailed(2))
    ));
}

#[test]
fn preprocess_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let cfg = ToolchainConfig::fixture(dir.path().join(run).join("work"), None);
        let out = preprocess(&fixture_root(), &cfg, &dir.path().join(run).join("out")).unwrap();
        files.push(
            out.outputs
                .iter()
                .map(|p| fs::read(p).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn fixture_time_sub_graph() {
    let dir = TempDir::new().unwrap();
    let cfg = ToolchainConfig::fixture(dir.path().join("work"), None);
    let out = preprocess(&fixture_root(), &cfg, &dir.path().join("out")).unwrap();
    out.corpus.validate().unwrap();
    let subs: Vec<_> = out
        .corpus
        .functions
        .iter()
        .filter(|g| g.function_name == "__time_sub")
        .collect();
    assert_eq!(subs.len(), 2);
    for g in subs {
        assert!(g.nodes.iter().any(|n| n.kind == NodeKind::Call));
        assert!(g.edges.iter().any(|e| e.etype == EdgeType::Cfg));
        assert_ne!(g.address, "unknown");
    }
}

fn clang_available() -> bool {
    Command::new("clang")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn external_optimizer_reoptimizes_lifted_ir() {
    if !clang_available() {
        eprintln!("clang not found, skipping");
        return;
    }
    let dir = TempDir::new().unwrap();
    let job = one_job(&dir);
    let mut cfg = external(&dir);
    cfg.optimizer_cmd = "clang {level} -S -emit-llvm -x ir {in} -o {out}".into();
    cfg.validate().unwrap();
    let lifted = job.stage_output(&cfg, Stage::Lift);
    fs::create_dir_all(lifted.parent().unwrap()).unwrap();
    fs::copy(fixture_root().join("openplc/x86/O0/openplc/lifted.ll"), &lifted).unwrap();

    let out = run_stage(&job, Stage::Reopt, &cfg).unwrap();
    let before = fs::read_to_string(&lifted).unwrap();
    let after = fs::read_to_string(out).unwrap();
    assert!(after.contains("define"));
    assert!(after.len() < before.len(), "optimized IR should shrink");
    assert!(after.matches("alloca").count() < before.matches("alloca").count());
}

#[test]
fn external_backend_with_stand_in_tools() {
    let dir = TempDir::new().unwrap();
    let root = dir.path().join("tree");
    copy_tree(&fixture_root(), &root);
    // Stand-in tool: copies the shipped artifact of the job being processed,
    // found from the job directory name the output is written into.
    let script = dir.path().join("tool.sh");
    fs::write(
        &script,
        format!(
            "set -e\njob=$(basename \"$(dirname \"$3\")\")\nsrc={}/$(echo \"$job\" | sed 's#__#/#g')\ntest -f \"$2\"\ncp \"$src/$1\" \"$3\"\n",
            root.display()
        ),
    )
    .unwrap();
    let tool = |artifact: &str| format!("sh {} {artifact} {{in}} {{out}}", script.display());
    let mut cfg = external(&dir);
    cfg.lifter_cmd = tool("lifted.ll");
    cfg.optimizer_cmd = tool("reopt.ll") + " {level}";
    cfg.decompiler_cmd = tool("decompiled.c");
    cfg.cpg_extractor_cmd = tool("cpg.json");
    cfg.validate().unwrap();

    let out = preprocess(&root, &cfg, &dir.path().join("out")).unwrap();
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    for job in discover_jobs(&root, Layout::DefaultTree).unwrap() {
        let corpus = process_job(&job, &cfg).unwrap();
        assert!(corpus.functions.iter().any(|g| g.function_name == "__time_sub"));
        for stage in Stage::ALL {
            let log = dir
                .path()
                .join("work/logs")
                .join(job.name())
                .join(format!("{}.log", stage.as_str().to_lowercase()));
            assert!(log.is_file(), "{}", log.display());
        }
    }
}
